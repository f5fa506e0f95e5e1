#include "align/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "align/errors.hpp"
#include "align/rng.hpp"

namespace align {

EvalResult evaluate(Model& model, const std::vector<Episode>& episodes) {
    EvalResult out;
    if (episodes.empty()) return out;
    const ActionSet& set = model.config().action_set;
    double loss_sum = 0.0;
    long loss_steps = 0;
    for (const Episode& ep : episodes) {
        std::vector<Action> oracle =
            derive_oracle_actions(ep.gold, set, ep.num_clips(), ep.num_texts());
        DecodeResult dec = model.decode_episode(ep);
        out.video_accuracy += video_accuracy(dec.prediction, ep.gold, ep.clip_lengths());
        out.text_iou += text_iou(dec.prediction, ep.gold, ep.intervals);
        out.action_accuracy += model.action_accuracy(ep, oracle);
        loss_sum += model.train_episode(ep, oracle, /*forward_only=*/true) *
                    static_cast<double>(oracle.size());
        loss_steps += static_cast<long>(oracle.size());
    }
    double n = static_cast<double>(episodes.size());
    out.video_accuracy /= n;
    out.text_iou /= n;
    out.action_accuracy /= n;
    out.loss = loss_steps ? loss_sum / static_cast<double>(loss_steps) : 0.0;
    return out;
}

namespace {

void write_manifest(const RunConfig& cfg, const std::string& out_dir) {
    nlohmann::json j = nlohmann::json::parse(run_config_to_json(cfg));
    nlohmann::json hashes;
    for (const char* name : {"train.jsonl", "val.jsonl", "test.jsonl", "standardizer.json"}) {
        std::string path = cfg.data_dir + "/" + name;
        if (std::filesystem::exists(path)) hashes[name] = file_hash(path);
    }
    nlohmann::json manifest;
    manifest["config"] = j;
    manifest["artifacts"] = hashes;
    std::ofstream f(out_dir + "/manifest.json", std::ios::binary);
    if (!f) throw IoError("cannot write manifest in " + out_dir);
    f << manifest.dump(2) << "\n";
}

// Feature statistics probe the normalization itself, not the learned affine:
// while held, the SBN reports batch statistics with an identity affine.
struct SbnProbeGuard {
    SbnState* s;
    Eigen::MatrixXd gamma, beta;
    bool batch_flag = false;

    explicit SbnProbeGuard(SbnState* st) : s(st) {
        if (!s) return;
        gamma = s->gamma.value;
        beta = s->beta.value;
        batch_flag = s->batch_stats_at_eval;
        s->gamma.value.setOnes();
        s->beta.value.setZero();
        s->batch_stats_at_eval = true;
    }
    ~SbnProbeGuard() {
        if (!s) return;
        s->gamma.value = gamma;
        s->beta.value = beta;
        s->batch_stats_at_eval = batch_flag;
    }
};

}  // namespace

TrainResult run_training(const RunConfig& cfg, std::vector<Episode> train,
                         std::vector<Episode> val) {
    if (cfg.epochs < 1) throw ParameterError("run_training: epochs must be >= 1");
    const bool write_files = !cfg.out_dir.empty();
    if (write_files) std::filesystem::create_directories(cfg.out_dir);
    if (write_files) write_manifest(cfg, cfg.out_dir);

    // training units: oracle-split sub-episodes with precomputed oracles
    std::vector<Episode> units;
    for (const Episode& ep : train)
        for (Episode& sub : split_training_episode(ep, cfg.model.action_set, cfg.max_actions))
            units.push_back(std::move(sub));
    std::vector<std::vector<Action>> oracles;
    oracles.reserve(units.size());
    for (const Episode& u : units)
        oracles.push_back(
            derive_oracle_actions(u.gold, cfg.model.action_set, u.num_clips(), u.num_texts()));

    Model model(cfg.model, cfg.seed);
    std::vector<ParamTensor*> params = model.params();
    Optimizer opt;
    opt.lars.enabled = cfg.lars;
    opt.lars.apply_to_all = cfg.lars_all_params;
    opt.clip_cap = cfg.clip_cap;
    LrSchedule sched(cfg.eta);
    sched.patience = cfg.patience;
    sched.factor = cfg.lr_factor;
    sched.warmup = cfg.warmup;

    ComponentGrouping grouping = ComponentGrouping::standard();
    Rng shuffle_rng(cfg.seed, 99);
    const int probe = std::min<int>(cfg.probe_batch, static_cast<int>(units.size()));
    std::vector<const Episode*> probe_batch;
    for (int i = 0; i < probe; ++i) probe_batch.push_back(&units[i]);

    TrainResult result;
    double best_val = -1.0;
    std::vector<int> order(units.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        double lr = sched.lr_for_epoch(epoch);
        // Fisher-Yates with the run's shuffle stream
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i) {
            int j = static_cast<int>(shuffle_rng.uniform() * (i + 1));
            std::swap(order[i], order[std::min(j, i)]);
        }

        model.set_train(true);
        double loss_sum = 0.0;
        long step_sum = 0;
        const int nb = (static_cast<int>(units.size()) + cfg.batch_size - 1) / cfg.batch_size;
        for (int bi = 0; bi < nb; ++bi) {
            std::vector<const Episode*> batch;
            std::vector<std::vector<Action>> batch_oracles;
            long batch_steps = 0;
            for (int i = bi * cfg.batch_size;
                 i < std::min<int>((bi + 1) * cfg.batch_size, static_cast<int>(units.size())); ++i) {
                batch.push_back(&units[order[i]]);
                batch_oracles.push_back(oracles[order[i]]);
                batch_steps += static_cast<long>(oracles[order[i]].size());
            }
            for (ParamTensor* p : params) p->zero_grad();
            double loss = model.train_batch(batch, batch_oracles);
            if (std::isnan(loss) || std::isinf(loss))
                throw DivergedError("training diverged at epoch " + std::to_string(epoch));
            loss_sum += loss * static_cast<double>(batch_steps);
            step_sum += batch_steps;
            if (bi == nb - 1) {
                // measure after clipping, before the parameter update
                clip_global_norm(params, cfg.clip_cap);
                result.diag.record_ratio(epoch, params, grouping);
            }
            opt.step(params, lr);
        }
        double train_loss = step_sum ? loss_sum / static_cast<double>(step_sum) : 0.0;
        result.final_train_loss = train_loss;

        model.set_train(false);
        {
            SbnProbeGuard vguard(model.video_sbn());
            SbnProbeGuard tguard(model.text_sbn());
            Encoded probe_enc = model.encode(probe_batch);
            result.diag.record_feature_stats(epoch, "video", probe_enc.video,
                                             cfg.feature_stat_dims);
            result.diag.record_feature_stats(epoch, "text", probe_enc.text, cfg.feature_stat_dims);
        }

        EvalResult ev = evaluate(model, val);
        result.metrics.push_back({epoch, "train", std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::quiet_NaN(),
                                  std::numeric_limits<double>::quiet_NaN(), train_loss, lr});
        result.metrics.push_back({epoch, "val", ev.video_accuracy, ev.text_iou, ev.action_accuracy,
                                  ev.loss, lr});
        if (ev.action_accuracy > best_val) {
            best_val = ev.action_accuracy;
            result.best_val_action_accuracy = best_val;
            if (write_files) {
                result.best_checkpoint = cfg.out_dir + "/best.json";
                save_checkpoint(result.best_checkpoint, model, opt.adam);
            }
        }
        sched.on_epoch_end(train_loss);
    }

    if (write_files) {
        result.final_checkpoint = cfg.out_dir + "/final.json";
        save_checkpoint(result.final_checkpoint, model, opt.adam);
        result.diag.write_ratios_csv(cfg.out_dir + "/ratios.csv");
        result.diag.write_feature_stats_csv(cfg.out_dir + "/feature_stats.csv");
        write_metrics_csv(cfg.out_dir + "/metrics.csv", result.metrics);
    }
    return result;
}

TrainResult run_training(const RunConfig& cfg) {
    std::vector<Episode> train = read_episodes(cfg.data_dir + "/train.jsonl");
    std::vector<Episode> val = read_episodes(cfg.data_dir + "/val.jsonl");
    Standardizer st = read_standardizer(cfg.data_dir + "/standardizer.json");
    for (Episode& ep : train) st.apply(ep);
    for (Episode& ep : val) st.apply(ep);
    return run_training(cfg, std::move(train), std::move(val));
}

std::string file_hash(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot read " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (f.read(buf, sizeof(buf)) || f.gcount()) {
        for (std::streamsize i = 0; i < f.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

std::string run_config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["data.dir"] = cfg.data_dir;
    j["out.dir"] = cfg.out_dir;
    j["model.video_in_dim"] = cfg.model.video_in_dim;
    j["model.text_in_dim"] = cfg.model.text_in_dim;
    j["model.projected_dim"] = cfg.model.projected_dim;
    j["model.seq_hidden"] = cfg.model.seq_hidden;
    j["model.matched_hidden"] = cfg.model.matched_hidden;
    j["model.action_hidden"] = cfg.model.action_hidden;
    j["model.fc_hidden"] = cfg.model.fc_hidden;
    j["model.lstm_layers"] = cfg.model.lstm_layers;
    j["model.norm"] = norm_name(cfg.model.norm);
    j["model.use_rp"] = cfg.model.use_rp;
    j["model.label_smoothing"] = cfg.model.label_smoothing;
    nlohmann::json acts = nlohmann::json::array();
    for (Action a : cfg.model.action_set) acts.push_back(action_name(a));
    j["model.action_set"] = acts;
    j["optim.eta"] = cfg.eta;
    j["optim.lars"] = cfg.lars;
    j["optim.lars_all_params"] = cfg.lars_all_params;
    j["optim.patience"] = cfg.patience;
    j["optim.lr_factor"] = cfg.lr_factor;
    j["optim.clip_cap"] = cfg.clip_cap;
    if (cfg.warmup) {
        j["optim.warmup.start_lr"] = cfg.warmup->start_lr;
        j["optim.warmup.end_lr"] = cfg.warmup->end_lr;
        j["optim.warmup.epochs"] = cfg.warmup->epochs;
    }
    j["train.epochs"] = cfg.epochs;
    j["train.batch_size"] = cfg.batch_size;
    j["train.max_actions"] = cfg.max_actions;
    j["diag.feature_stat_dims"] = cfg.feature_stat_dims;
    j["diag.probe_batch"] = cfg.probe_batch;
    return j.dump(2);
}

RunConfig run_config_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    RunConfig cfg;
    for (auto& [key, value] : j.items()) {
        if (key == "seed") cfg.seed = value.get<std::uint64_t>();
        else if (key == "data.dir") cfg.data_dir = value.get<std::string>();
        else if (key == "out.dir") cfg.out_dir = value.get<std::string>();
        else if (key == "model.video_in_dim") cfg.model.video_in_dim = value.get<int>();
        else if (key == "model.text_in_dim") cfg.model.text_in_dim = value.get<int>();
        else if (key == "model.projected_dim") cfg.model.projected_dim = value.get<int>();
        else if (key == "model.seq_hidden") cfg.model.seq_hidden = value.get<int>();
        else if (key == "model.matched_hidden") cfg.model.matched_hidden = value.get<int>();
        else if (key == "model.action_hidden") cfg.model.action_hidden = value.get<int>();
        else if (key == "model.fc_hidden") cfg.model.fc_hidden = value.get<int>();
        else if (key == "model.lstm_layers") cfg.model.lstm_layers = value.get<int>();
        else if (key == "model.norm") cfg.model.norm = norm_from_name(value.get<std::string>());
        else if (key == "model.use_rp") cfg.model.use_rp = value.get<bool>();
        else if (key == "model.label_smoothing") cfg.model.label_smoothing = value.get<double>();
        else if (key == "model.action_set") {
            cfg.model.action_set.clear();
            for (const auto& a : value) cfg.model.action_set.push_back(action_from_name(a.get<std::string>()));
        } else if (key == "optim.eta") cfg.eta = value.get<double>();
        else if (key == "optim.lars") cfg.lars = value.get<bool>();
        else if (key == "optim.lars_all_params") cfg.lars_all_params = value.get<bool>();
        else if (key == "optim.patience") cfg.patience = value.get<int>();
        else if (key == "optim.lr_factor") cfg.lr_factor = value.get<double>();
        else if (key == "optim.clip_cap") cfg.clip_cap = value.get<double>();
        else if (key == "optim.warmup.start_lr") {
            if (!cfg.warmup) cfg.warmup.emplace();
            cfg.warmup->start_lr = value.get<double>();
        } else if (key == "optim.warmup.end_lr") {
            if (!cfg.warmup) cfg.warmup.emplace();
            cfg.warmup->end_lr = value.get<double>();
        } else if (key == "optim.warmup.epochs") {
            if (!cfg.warmup) cfg.warmup.emplace();
            cfg.warmup->epochs = value.get<int>();
        } else if (key == "train.epochs") cfg.epochs = value.get<int>();
        else if (key == "train.batch_size") cfg.batch_size = value.get<int>();
        else if (key == "train.max_actions") cfg.max_actions = value.get<int>();
        else if (key == "diag.feature_stat_dims") cfg.feature_stat_dims = value.get<int>();
        else if (key == "diag.probe_batch") cfg.probe_batch = value.get<int>();
        else throw ParameterError("unknown config key: " + key);
    }
    return cfg;
}

}  // namespace align
