#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "align/alignment.hpp"

namespace align {

// One parallel video/text pair with its gold alignment: the unit of training
// and evaluation.
struct Episode {
    std::string id;
    Eigen::MatrixXd video;  // N x D_v, one row per clip
    std::vector<std::pair<int, int>> intervals;  // frame spans [start, end), ordered, disjoint
    Eigen::MatrixXd text;  // M x D_t, one row per snippet
    GoldAlignment gold;

    int num_clips() const { return static_cast<int>(video.rows()); }
    int num_texts() const { return static_cast<int>(text.rows()); }

    std::vector<int> clip_lengths() const {
        std::vector<int> out;
        out.reserve(intervals.size());
        for (const auto& iv : intervals) out.push_back(iv.second - iv.first);
        return out;
    }
};

}  // namespace align
