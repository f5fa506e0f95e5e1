#pragma once

#include <optional>
#include <string>
#include <vector>

#include "align/data.hpp"
#include "align/diagnostics.hpp"
#include "align/model.hpp"
#include "align/optim.hpp"

namespace align {

struct RunConfig {
    std::uint64_t seed = 1;
    std::string data_dir;             // train.jsonl / val.jsonl / test.jsonl / standardizer.json
    std::string out_dir = "run_out";
    ModelConfig model;
    double eta = 0.007;
    bool lars = true;
    bool lars_all_params = false;
    std::optional<WarmupSpec> warmup;
    int patience = 10;
    double lr_factor = 0.5;
    double clip_cap = 2.0;
    int epochs = 350;
    int batch_size = 32;
    int max_actions = 100;
    int feature_stat_dims = 50;
    int probe_batch = 8;  // fixed probe episodes for feature statistics
};

struct EvalResult {
    double video_accuracy = 0.0;
    double text_iou = 0.0;
    double action_accuracy = 0.0;
    double loss = 0.0;
};

// Greedy-decode evaluation over a split (model should be in eval mode).
EvalResult evaluate(Model& model, const std::vector<Episode>& episodes);

struct TrainResult {
    std::vector<MetricsRow> metrics;
    DiagnosticsLog diag;
    double final_train_loss = 0.0;
    double best_val_action_accuracy = 0.0;
    std::string best_checkpoint;
    std::string final_checkpoint;
};

// Full training run: loads the dataset, trains, writes manifest.json,
// metrics.csv, ratios.csv, feature_stats.csv and checkpoints into out_dir.
TrainResult run_training(const RunConfig& cfg);

// In-memory variant used by tests and the acceptance suite; no files written
// unless out_dir is nonempty.
TrainResult run_training(const RunConfig& cfg, std::vector<Episode> train,
                         std::vector<Episode> val);

// FNV-1a content hash, hex-encoded; used in run manifests.
std::string file_hash(const std::string& path);

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

}  // namespace align
