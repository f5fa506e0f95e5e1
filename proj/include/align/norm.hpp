#pragma once

#include <Eigen/Dense>

#include "align/param.hpp"
#include "align/sequence.hpp"

namespace align {

// ---------------------------------------------------------------------------
// Layer normalization: per-row mean/variance across feature dimensions,
// then a per-dimension affine with gamma/beta.
// ---------------------------------------------------------------------------

struct LnParams {
    ParamTensor gamma;  // P x 1
    ParamTensor beta;   // P x 1
    double eps = 1e-5;

    LnParams() = default;
    LnParams(const std::string& name, int dim, double eps_ = 1e-5);
    std::vector<ParamTensor*> params() { return {&gamma, &beta}; }
};

struct LnCache {
    Eigen::MatrixXd xhat;     // n x P
    Eigen::VectorXd inv_std;  // n
};

// X: n x P, rows normalized independently. P must be >= 2.
Eigen::MatrixXd ln_forward(const LnParams& state, const Eigen::MatrixXd& x, LnCache* cache = nullptr);

// Accumulates gamma/beta grads; returns grad wrt x.
Eigen::MatrixXd ln_backward(LnParams& state, const LnCache& cache, const Eigen::MatrixXd& grad_out);

// ---------------------------------------------------------------------------
// Sequence-wise batch normalization: per-dimension mean/variance across every
// unpadded (batch, time) element.
// ---------------------------------------------------------------------------

struct SbnState {
    ParamTensor gamma;  // P x 1
    ParamTensor beta;   // P x 1
    Eigen::VectorXd running_mean;
    Eigen::VectorXd running_var;
    double eps = 1e-5;
    double momentum = 0.1;
    bool train_mode = true;
    // ablation switch: keep using batch statistics at eval time
    bool batch_stats_at_eval = false;

    SbnState() = default;
    SbnState(const std::string& name, int dim, double eps_ = 1e-5);
    std::vector<ParamTensor*> params() { return {&gamma, &beta}; }
    int dim() const { return static_cast<int>(gamma.rows()); }
};

struct SbnCache {
    SequenceBatch xhat;
    Eigen::VectorXd inv_std;  // P
    long count = 0;           // unpadded elements
};

// Train mode: batch statistics over unpadded elements, running stats updated.
// Eval mode: running statistics, a pure per-element affine map.
SequenceBatch sbn_forward(SbnState& state, const SequenceBatch& input, SbnCache* cache = nullptr);

SequenceBatch sbn_backward(SbnState& state, const SbnCache& cache, const SequenceBatch& grad_out);

}  // namespace align
