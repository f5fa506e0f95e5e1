#pragma once

#include <Eigen/Dense>
#include <vector>

namespace align {

// A batch of variable-length feature sequences padded to a common number of
// steps. features[b] is steps-by-dim; rows at t >= lengths[b] are padding and
// must never influence any computation.
struct SequenceBatch {
    std::vector<Eigen::MatrixXd> features;
    std::vector<int> lengths;

    int batch() const { return static_cast<int>(features.size()); }
    int steps() const { return features.empty() ? 0 : static_cast<int>(features[0].rows()); }
    int dim() const { return features.empty() ? 0 : static_cast<int>(features[0].cols()); }
    bool valid(int b, int t) const { return t < lengths[b]; }

    long unpadded_count() const {
        long n = 0;
        for (int l : lengths) n += l;
        return n;
    }

    static SequenceBatch zeros_like(const SequenceBatch& other) {
        SequenceBatch out;
        out.lengths = other.lengths;
        out.features.reserve(other.features.size());
        for (const auto& f : other.features)
            out.features.push_back(Eigen::MatrixXd::Zero(f.rows(), f.cols()));
        return out;
    }

    // single sequence wrapped as a batch of one
    static SequenceBatch single(const Eigen::MatrixXd& seq) {
        SequenceBatch out;
        out.features.push_back(seq);
        out.lengths.push_back(static_cast<int>(seq.rows()));
        return out;
    }
};

}  // namespace align
