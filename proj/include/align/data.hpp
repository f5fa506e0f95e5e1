#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "align/episode.hpp"
#include "align/rng.hpp"

namespace align {

// Synthetic stand-in for an annotated alignment corpus. Each text snippet is
// an affine embedding of a latent "event" vector; its matched clips embed the
// same latent through a different map. Distractor clips come from fresh
// latents and are left unmatched.
struct GeneratorConfig {
    int num_episodes = 280;
    int clips_min = 12, clips_max = 24;       // N range
    int texts_min = 4, texts_max = 8;         // M range
    int clips_per_text_min = 1, clips_per_text_max = 3;
    double unmatched_prob = 0.2;              // expected fraction of distractor clips
    int latent_dim = 16;
    double noise_scale = 0.1;
    int video_dim = 512;
    int text_dim = 768;
    std::uint64_t seed = 1;
};

std::vector<Episode> generate(const GeneratorConfig& cfg);

// Cuts an episode whose oracle exceeds max_actions into sub-episodes at slot
// boundaries; the concatenated golds equal the original. Episodes under the
// limit come back unchanged.
std::vector<Episode> split_training_episode(const Episode& ep, const ActionSet& set,
                                            int max_actions = 100);

// Per-dimension standardization fit on the training split only.
struct Standardizer {
    Eigen::VectorXd video_mean, video_std;
    Eigen::VectorXd text_mean, text_std;

    void apply(Episode& ep) const;
};

Standardizer fit_standardizer(const std::vector<Episode>& train_episodes);

// JSON Lines dataset files; floats carry 9 significant digits and files
// round-trip byte-identically.
void write_episodes(const std::string& path, const std::vector<Episode>& episodes);
std::vector<Episode> read_episodes(const std::string& path);

void write_standardizer(const std::string& path, const Standardizer& st);
Standardizer read_standardizer(const std::string& path);

}  // namespace align
