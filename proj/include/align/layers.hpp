#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "align/norm.hpp"
#include "align/param.hpp"
#include "align/rng.hpp"
#include "align/sequence.hpp"

namespace align {

enum class Activation { None, Tanh, Relu };

// ---------------------------------------------------------------------------
// Fully connected layer. Inputs are row-per-sample matrices.
// ---------------------------------------------------------------------------

struct FcLayer {
    ParamTensor weight;  // out x in
    ParamTensor bias;    // out x 1
    Activation act = Activation::None;

    FcLayer() = default;
    FcLayer(const std::string& name, int in_dim, int out_dim, Activation a, Rng& rng);
    std::vector<ParamTensor*> params() { return {&weight, &bias}; }
    int in_dim() const { return static_cast<int>(weight.cols()); }
    int out_dim() const { return static_cast<int>(weight.rows()); }
};

struct FcCache {
    Eigen::MatrixXd input;  // n x in
    Eigen::MatrixXd pre;    // n x out, preactivation
};

Eigen::MatrixXd fc_forward(const FcLayer& layer, const Eigen::MatrixXd& input, FcCache* cache = nullptr);
// Accumulates weight/bias grads; returns grad wrt input.
Eigen::MatrixXd fc_backward(FcLayer& layer, const FcCache& cache, const Eigen::MatrixXd& grad_out);

// ---------------------------------------------------------------------------
// LSTM. Gate block order in every 4D-sized array is [i; f; c~; o].
// A stack of single-layer cells; layer l consumes layer l-1's hidden sequence.
// The backward-in-time direction is realized by running the forward recurrence
// on the reversed sequence and reversing the outputs, so the time-reversal
// symmetry holds exactly.
// When layer_norm is set, gate preactivations are LN(W_x x) + LN(W_h h) and
// the cell state is layer-normalized; the hidden-state equation is unchanged.
// ---------------------------------------------------------------------------

enum class Direction { Forward, BackwardInTime };

struct LstmLayer {
    ParamTensor W_x;  // 4D x in
    ParamTensor W_h;  // 4D x D
    ParamTensor b;    // 4D x 1 (absent from the update when layer_norm is set)
    bool layer_norm = false;
    LnParams ln_x, ln_h, ln_c;  // sized 4D, 4D, D
    int in_dim = 0;
    int hidden = 0;

    std::vector<ParamTensor*> params();
};

struct LstmStepCache {
    Eigen::VectorXd x, h_prev, c_prev;
    Eigen::VectorXd gate_i, gate_f, gate_c, gate_o;  // activated gates
    Eigen::VectorXd c, tanh_c;
    LnCache lnx, lnh, lnc;
    Eigen::VectorXd c_raw;  // pre-LN cell (layer_norm only)
};

struct LstmLayerCache {
    std::vector<LstmStepCache> steps;  // in recurrence order
};

struct LstmStackCache {
    std::vector<LstmLayerCache> layers;
    int valid_len = 0;
    int total_len = 0;
};

class LstmStack {
   public:
    LstmStack() = default;
    LstmStack(const std::string& name, int in_dim, int hidden, int num_layers, Direction dir,
              bool layer_norm, Rng& rng);

    std::vector<ParamTensor*> params();

    // X: T x in_dim with valid rows [0, valid_len). Returns T x hidden; padded
    // rows are zero. An empty (valid_len == 0) input yields all-zero output.
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, int valid_len,
                            LstmStackCache* cache = nullptr) const;

    // Accumulates parameter grads; returns grad wrt X (padded rows zero).
    Eigen::MatrixXd backward(const LstmStackCache& cache, const Eigen::MatrixXd& grad_hidden);

    // convenience batch wrappers
    SequenceBatch forward_batch(const SequenceBatch& input,
                                std::vector<LstmStackCache>* caches = nullptr) const;
    SequenceBatch backward_batch(const std::vector<LstmStackCache>& caches,
                                 const SequenceBatch& grad_hidden);

    int hidden() const { return layers_.empty() ? 0 : layers_.back().hidden; }
    int in_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim; }
    Direction direction() const { return dir_; }
    std::vector<LstmLayer>& layers() { return layers_; }

   private:
    std::vector<LstmLayer> layers_;
    Direction dir_ = Direction::Forward;
};

// Inverted dropout; identity when rate == 0 or train is false. Off by default
// throughout the models here.
Eigen::MatrixXd dropout_forward(const Eigen::MatrixXd& x, double rate, bool train, Rng& rng,
                                Eigen::MatrixXd* mask = nullptr);

}  // namespace align
