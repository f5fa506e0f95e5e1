#include "align/layers.hpp"

#include <cmath>

#include "align/errors.hpp"

namespace align {

namespace {

double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

Eigen::VectorXd sigmoid_vec(const Eigen::VectorXd& v) {
    return v.unaryExpr([](double s) { return sigmoid(s); });
}

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& pre, Activation act) {
    switch (act) {
        case Activation::None:
            return pre;
        case Activation::Tanh:
            return pre.array().tanh();
        case Activation::Relu:
            return pre.cwiseMax(0.0);
    }
    return pre;
}

Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& pre, Activation act,
                                const Eigen::MatrixXd& grad_out) {
    switch (act) {
        case Activation::None:
            return grad_out;
        case Activation::Tanh: {
            Eigen::ArrayXXd t = pre.array().tanh();
            return (grad_out.array() * (1.0 - t.square())).matrix();
        }
        case Activation::Relu:
            return (grad_out.array() * (pre.array() > 0.0).cast<double>()).matrix();
    }
    return grad_out;
}

}  // namespace

FcLayer::FcLayer(const std::string& name, int in_dim, int out_dim, Activation a, Rng& rng)
    : weight(name + ".weight", out_dim, in_dim, true),
      bias(name + ".bias", out_dim, 1, false),
      act(a) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    weight.value = sample_uniform(rng, out_dim, in_dim, -bound, bound);
}

Eigen::MatrixXd fc_forward(const FcLayer& layer, const Eigen::MatrixXd& input, FcCache* cache) {
    if (input.cols() != layer.weight.cols())
        throw ShapeError("fc_forward: input dim " + std::to_string(input.cols()) + " vs weight in dim " +
                         std::to_string(layer.weight.cols()));
    Eigen::MatrixXd pre = input * layer.weight.value.transpose();
    pre.rowwise() += layer.bias.value.col(0).transpose();
    Eigen::MatrixXd out = apply_activation(pre, layer.act);
    if (cache) {
        cache->input = input;
        cache->pre = std::move(pre);
    }
    return out;
}

Eigen::MatrixXd fc_backward(FcLayer& layer, const FcCache& cache, const Eigen::MatrixXd& grad_out) {
    if (grad_out.rows() != cache.input.rows() || grad_out.cols() != layer.weight.rows())
        throw ContractError("fc_backward: cache does not match upstream gradient");
    Eigen::MatrixXd dpre = activation_grad(cache.pre, layer.act, grad_out);
    layer.weight.grad += dpre.transpose() * cache.input;
    layer.bias.grad.col(0) += dpre.colwise().sum().transpose();
    return dpre * layer.weight.value;
}

std::vector<ParamTensor*> LstmLayer::params() {
    std::vector<ParamTensor*> out = {&W_x, &W_h};
    if (layer_norm) {
        for (auto* p : ln_x.params()) out.push_back(p);
        for (auto* p : ln_h.params()) out.push_back(p);
        for (auto* p : ln_c.params()) out.push_back(p);
    } else {
        out.push_back(&b);
    }
    return out;
}

LstmStack::LstmStack(const std::string& name, int in_dim, int hidden, int num_layers, Direction dir,
                     bool layer_norm, Rng& rng)
    : dir_(dir) {
    layers_.resize(num_layers);
    for (int l = 0; l < num_layers; ++l) {
        LstmLayer& layer = layers_[l];
        std::string lname = name + ".l" + std::to_string(l);
        int din = (l == 0) ? in_dim : hidden;
        layer.in_dim = din;
        layer.hidden = hidden;
        layer.layer_norm = layer_norm;
        double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
        layer.W_x = ParamTensor(lname + ".W_x", 4 * hidden, din, true);
        layer.W_x.value = sample_uniform(rng, 4 * hidden, din, -bound, bound);
        layer.W_h = ParamTensor(lname + ".W_h", 4 * hidden, hidden, true);
        layer.W_h.value = sample_uniform(rng, 4 * hidden, hidden, -bound, bound);
        if (layer_norm) {
            layer.ln_x = LnParams(lname + ".ln_x", 4 * hidden);
            layer.ln_h = LnParams(lname + ".ln_h", 4 * hidden);
            layer.ln_c = LnParams(lname + ".ln_c", hidden);
            // forget-gate bias lives in the LN offset
            layer.ln_x.beta.value.block(hidden, 0, hidden, 1).setOnes();
        } else {
            layer.b = ParamTensor(lname + ".b", 4 * hidden, 1, false);
            layer.b.value.block(hidden, 0, hidden, 1).setOnes();
        }
    }
}

std::vector<ParamTensor*> LstmStack::params() {
    std::vector<ParamTensor*> out;
    for (auto& layer : layers_)
        for (auto* p : layer.params()) out.push_back(p);
    return out;
}

namespace {

// One cell step. h_prev/c_prev are layer state; fills the cache entry.
void cell_forward(const LstmLayer& layer, const Eigen::VectorXd& x, const Eigen::VectorXd& h_prev,
                  const Eigen::VectorXd& c_prev, Eigen::VectorXd& h_out, Eigen::VectorXd& c_out,
                  LstmStepCache* cache) {
    const int d = layer.hidden;
    Eigen::VectorXd pre;
    LstmStepCache tmp;
    LstmStepCache& cc = cache ? *cache : tmp;
    if (layer.layer_norm) {
        Eigen::VectorXd gx_pre = layer.W_x.value * x;
        Eigen::VectorXd gh_pre = layer.W_h.value * h_prev;
        Eigen::MatrixXd gx = ln_forward(layer.ln_x, gx_pre.transpose(), &cc.lnx);
        Eigen::MatrixXd gh = ln_forward(layer.ln_h, gh_pre.transpose(), &cc.lnh);
        pre = (gx + gh).transpose();
    } else {
        pre = layer.W_x.value * x + layer.W_h.value * h_prev + layer.b.value.col(0);
    }
    cc.gate_i = sigmoid_vec(pre.segment(0, d));
    cc.gate_f = sigmoid_vec(pre.segment(d, d));
    cc.gate_c = pre.segment(2 * d, d).array().tanh();
    cc.gate_o = sigmoid_vec(pre.segment(3 * d, d));
    Eigen::VectorXd c_raw = cc.gate_f.cwiseProduct(c_prev) + cc.gate_i.cwiseProduct(cc.gate_c);
    if (layer.layer_norm) {
        cc.c_raw = c_raw;
        cc.c = ln_forward(layer.ln_c, c_raw.transpose(), &cc.lnc).transpose();
    } else {
        cc.c = c_raw;
    }
    cc.tanh_c = cc.c.array().tanh();
    h_out = cc.gate_o.cwiseProduct(cc.tanh_c);
    c_out = cc.c;
    if (cache) {
        cc.x = x;
        cc.h_prev = h_prev;
        cc.c_prev = c_prev;
    }
}

// Reverse of cell_forward. dh/dc are gradients wrt this step's outputs; on
// return dh/dc hold gradients wrt the previous step's state.
Eigen::VectorXd cell_backward(LstmLayer& layer, const LstmStepCache& cc, Eigen::VectorXd& dh,
                              Eigen::VectorXd& dc) {
    const int d = layer.hidden;
    Eigen::VectorXd dgo = dh.cwiseProduct(cc.tanh_c);
    Eigen::VectorXd dc_total =
        dc + dh.cwiseProduct(cc.gate_o)
                 .cwiseProduct((1.0 - cc.tanh_c.array().square()).matrix());
    Eigen::VectorXd dc_raw;
    if (layer.layer_norm) {
        dc_raw = ln_backward(layer.ln_c, cc.lnc, dc_total.transpose()).transpose();
    } else {
        dc_raw = dc_total;
    }
    Eigen::VectorXd dgf = dc_raw.cwiseProduct(cc.c_prev);
    Eigen::VectorXd dgi = dc_raw.cwiseProduct(cc.gate_c);
    Eigen::VectorXd dgc = dc_raw.cwiseProduct(cc.gate_i);

    Eigen::VectorXd dpre(4 * d);
    dpre.segment(0, d) =
        dgi.cwiseProduct(cc.gate_i).cwiseProduct((1.0 - cc.gate_i.array()).matrix());
    dpre.segment(d, d) =
        dgf.cwiseProduct(cc.gate_f).cwiseProduct((1.0 - cc.gate_f.array()).matrix());
    dpre.segment(2 * d, d) = dgc.cwiseProduct((1.0 - cc.gate_c.array().square()).matrix());
    dpre.segment(3 * d, d) =
        dgo.cwiseProduct(cc.gate_o).cwiseProduct((1.0 - cc.gate_o.array()).matrix());

    Eigen::VectorXd dgx_pre, dgh_pre;
    if (layer.layer_norm) {
        dgx_pre = ln_backward(layer.ln_x, cc.lnx, dpre.transpose()).transpose();
        dgh_pre = ln_backward(layer.ln_h, cc.lnh, dpre.transpose()).transpose();
    } else {
        dgx_pre = dpre;
        dgh_pre = dpre;
        layer.b.grad.col(0) += dpre;
    }
    layer.W_x.grad += dgx_pre * cc.x.transpose();
    layer.W_h.grad += dgh_pre * cc.h_prev.transpose();
    dh = layer.W_h.value.transpose() * dgh_pre;
    dc = dc_raw.cwiseProduct(cc.gate_f);
    return layer.W_x.value.transpose() * dgx_pre;
}

}  // namespace

Eigen::MatrixXd LstmStack::forward(const Eigen::MatrixXd& x, int valid_len,
                                   LstmStackCache* cache) const {
    if (x.cols() != in_dim())
        throw ShapeError("lstm_forward: input dim " + std::to_string(x.cols()) + " vs expected " +
                         std::to_string(in_dim()));
    if (valid_len > x.rows()) throw ContractError("lstm_forward: valid_len exceeds sequence length");
    const int total = static_cast<int>(x.rows());
    const int num_layers = static_cast<int>(layers_.size());

    // recurrence-order input (reversed for the backward-in-time direction)
    Eigen::MatrixXd seq(valid_len, x.cols());
    for (int t = 0; t < valid_len; ++t)
        seq.row(t) = (dir_ == Direction::Forward) ? x.row(t) : x.row(valid_len - 1 - t);

    if (cache) {
        cache->layers.assign(num_layers, {});
        cache->valid_len = valid_len;
        cache->total_len = total;
    }

    for (int l = 0; l < num_layers; ++l) {
        const LstmLayer& layer = layers_[l];
        Eigen::VectorXd h = Eigen::VectorXd::Zero(layer.hidden);
        Eigen::VectorXd c = Eigen::VectorXd::Zero(layer.hidden);
        Eigen::MatrixXd out(valid_len, layer.hidden);
        if (cache) cache->layers[l].steps.resize(valid_len);
        for (int t = 0; t < valid_len; ++t) {
            Eigen::VectorXd h_new, c_new;
            cell_forward(layer, seq.row(t).transpose(), h, c, h_new, c_new,
                         cache ? &cache->layers[l].steps[t] : nullptr);
            h = h_new;
            c = c_new;
            out.row(t) = h.transpose();
        }
        seq = std::move(out);
    }

    Eigen::MatrixXd result = Eigen::MatrixXd::Zero(total, hidden());
    for (int t = 0; t < valid_len; ++t)
        result.row((dir_ == Direction::Forward) ? t : valid_len - 1 - t) = seq.row(t);
    return result;
}

Eigen::MatrixXd LstmStack::backward(const LstmStackCache& cache, const Eigen::MatrixXd& grad_hidden) {
    const int valid_len = cache.valid_len;
    const int total = cache.total_len;
    const int num_layers = static_cast<int>(layers_.size());
    if (grad_hidden.rows() != total || grad_hidden.cols() != hidden())
        throw ContractError("lstm_backward: cache does not match upstream gradient");

    // recurrence-order upstream grads for the top layer
    Eigen::MatrixXd up(valid_len, hidden());
    for (int t = 0; t < valid_len; ++t)
        up.row(t) = (dir_ == Direction::Forward) ? grad_hidden.row(t)
                                                 : grad_hidden.row(valid_len - 1 - t);

    for (int l = num_layers - 1; l >= 0; --l) {
        LstmLayer& layer = layers_[l];
        Eigen::MatrixXd dx(valid_len, layer.in_dim);
        Eigen::VectorXd dh = Eigen::VectorXd::Zero(layer.hidden);
        Eigen::VectorXd dc = Eigen::VectorXd::Zero(layer.hidden);
        for (int t = valid_len - 1; t >= 0; --t) {
            dh += up.row(t).transpose();
            dx.row(t) = cell_backward(layer, cache.layers[l].steps[t], dh, dc).transpose();
        }
        up = std::move(dx);
    }

    Eigen::MatrixXd result = Eigen::MatrixXd::Zero(total, in_dim());
    for (int t = 0; t < valid_len; ++t)
        result.row((dir_ == Direction::Forward) ? t : valid_len - 1 - t) = up.row(t);
    return result;
}

SequenceBatch LstmStack::forward_batch(const SequenceBatch& input,
                                       std::vector<LstmStackCache>* caches) const {
    SequenceBatch out;
    out.lengths = input.lengths;
    if (caches) caches->resize(input.batch());
    for (int b = 0; b < input.batch(); ++b)
        out.features.push_back(
            forward(input.features[b], input.lengths[b], caches ? &(*caches)[b] : nullptr));
    return out;
}

SequenceBatch LstmStack::backward_batch(const std::vector<LstmStackCache>& caches,
                                        const SequenceBatch& grad_hidden) {
    SequenceBatch out;
    out.lengths = grad_hidden.lengths;
    for (int b = 0; b < grad_hidden.batch(); ++b)
        out.features.push_back(backward(caches[b], grad_hidden.features[b]));
    return out;
}

Eigen::MatrixXd dropout_forward(const Eigen::MatrixXd& x, double rate, bool train, Rng& rng,
                                Eigen::MatrixXd* mask) {
    if (!train || rate <= 0.0) {
        if (mask) *mask = Eigen::MatrixXd::Ones(x.rows(), x.cols());
        return x;
    }
    if (rate >= 1.0) throw ParameterError("dropout: rate must be < 1");
    Eigen::MatrixXd m(x.rows(), x.cols());
    const double keep = 1.0 - rate;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            m(r, c) = (rng.uniform() < keep) ? 1.0 / keep : 0.0;
    if (mask) *mask = m;
    return x.cwiseProduct(m);
}

}  // namespace align
