#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "align/alignment.hpp"
#include "align/episode.hpp"
#include "align/layers.hpp"
#include "align/norm.hpp"
#include "align/optim.hpp"
#include "align/projection.hpp"

namespace align {

struct ModelConfig {
    int video_in_dim = 512;
    int text_in_dim = 768;   // sentence-embedding width
    int projected_dim = 300;
    int seq_hidden = 300;    // video/text stacks
    int matched_hidden = 20;
    int action_hidden = 8;
    int fc_hidden = 64;      // first FC of the classifier head
    int lstm_layers = 2;
    enum class Norm { Sbn, Ln2, Ln4, None };
    Norm norm = Norm::Sbn;
    bool use_rp = true;
    ActionSet action_set = yms_action_set();
    double label_smoothing = 0.03;
    int positional_features = 10;

    int num_actions() const { return static_cast<int>(action_set.size()); }
    int state_dim() const {
        return 2 * seq_hidden + action_hidden + matched_hidden + positional_features;
    }
};

std::string norm_name(ModelConfig::Norm n);
ModelConfig::Norm norm_from_name(const std::string& s);

// Cross-entropy against the smoothed target (1-eps)*onehot + eps/K.
double smoothed_cross_entropy(const Eigen::VectorXd& probs, int true_index, double eps, int k);

struct Encoded {
    SequenceBatch video;  // normalized per-clip encodings
    SequenceBatch text;   // normalized per-snippet encodings
};

struct EncodeCache;  // opaque; defined in model.cpp
struct BatchCache;

struct DecodeResult {
    AlignmentPrediction prediction;
    std::vector<Action> actions;
};

class Model {
   public:
    Model(const ModelConfig& cfg, std::uint64_t seed);
    ~Model();
    Model(Model&&) noexcept;
    Model& operator=(Model&&) noexcept;

    const ModelConfig& config() const { return cfg_; }
    std::uint64_t seed() const { return seed_; }

    // every trainable parameter (fixed order)
    std::vector<ParamTensor*> params();

    void set_train(bool train);
    bool is_train() const { return train_mode_; }

    // Runs the video/text stacks over a batch of episodes. Features must
    // already be standardized.
    Encoded encode(const std::vector<const Episode*>& episodes);

    // State vector for one episode at an alignment state, from precomputed
    // encodings. Throws on a done state.
    Eigen::VectorXd build_state(const Episode& ep, int episode_index, const Encoded& enc,
                                const AlignmentState& state) const;

    // Masked softmax over the configured action set; invalid actions get
    // exactly zero probability.
    Eigen::VectorXd classify(const Eigen::VectorXd& state_vec,
                             const std::vector<Action>& valid) const;

    // Teacher-forced loss over a batch; populates gradients unless
    // forward_only. Returns the mean per-step smoothed cross-entropy.
    double train_batch(const std::vector<const Episode*>& episodes,
                       const std::vector<std::vector<Action>>& oracles, bool forward_only = false);
    double train_episode(const Episode& ep, const std::vector<Action>& oracle,
                         bool forward_only = false);

    // Greedy free-running decoding (use eval mode for frozen SBN statistics).
    DecodeResult decode_episode(const Episode& ep);

    // Teacher-forced next-action accuracy against the oracle.
    double action_accuracy(const Episode& ep, const std::vector<Action>& oracle);

    // SBN handles, exposed for diagnostics and tests
    SbnState* video_sbn();
    SbnState* text_sbn();

    // checkpoint payload (parameters, moments, SBN stats, config, RP seeds)
    std::string to_json_string(const AdamConfig& adam) const;
    static std::pair<Model, AdamConfig> from_json_string(const std::string& text);

   private:
    struct Impl;
    ModelConfig cfg_;
    std::uint64_t seed_ = 0;
    bool train_mode_ = true;
    std::unique_ptr<Impl> impl_;
};

void save_checkpoint(const std::string& path, const Model& model, const AdamConfig& adam);
std::pair<Model, AdamConfig> load_checkpoint(const std::string& path);

}  // namespace align
