#include "align/norm.hpp"

#include <cmath>

#include "align/errors.hpp"

namespace align {

LnParams::LnParams(const std::string& name, int dim, double eps_)
    : gamma(name + ".gamma", dim, 1, false), beta(name + ".beta", dim, 1, false), eps(eps_) {
    gamma.value.setOnes();
}

Eigen::MatrixXd ln_forward(const LnParams& state, const Eigen::MatrixXd& x, LnCache* cache) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (p != state.gamma.rows())
        throw ShapeError("ln_forward: input dim " + std::to_string(p) + " vs state dim " +
                         std::to_string(state.gamma.rows()));
    if (p < 2) throw ParameterError("ln_forward: needs at least 2 dimensions");

    Eigen::MatrixXd out(n, p);
    Eigen::MatrixXd xhat(n, p);
    Eigen::VectorXd inv_std(n);
    const Eigen::VectorXd& gamma = state.gamma.value.col(0);
    const Eigen::VectorXd& beta = state.beta.value.col(0);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mu = x.row(i).mean();
        double var = (x.row(i).array() - mu).square().sum() / static_cast<double>(p);
        double is = 1.0 / std::sqrt(var + state.eps);
        inv_std[i] = is;
        xhat.row(i) = (x.row(i).array() - mu) * is;
        out.row(i) = xhat.row(i).cwiseProduct(gamma.transpose()) + beta.transpose();
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return out;
}

Eigen::MatrixXd ln_backward(LnParams& state, const LnCache& cache, const Eigen::MatrixXd& grad_out) {
    const Eigen::Index n = grad_out.rows();
    const Eigen::Index p = grad_out.cols();
    if (cache.xhat.rows() != n || cache.xhat.cols() != p)
        throw ContractError("ln_backward: cache does not match upstream gradient");

    const Eigen::VectorXd& gamma = state.gamma.value.col(0);
    state.gamma.grad.col(0) += grad_out.cwiseProduct(cache.xhat).colwise().sum().transpose();
    state.beta.grad.col(0) += grad_out.colwise().sum().transpose();

    Eigen::MatrixXd dx(n, p);
    const double pd = static_cast<double>(p);
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::RowVectorXd dxhat = grad_out.row(i).cwiseProduct(gamma.transpose());
        double sum_dxhat = dxhat.sum();
        double sum_dxhat_xhat = dxhat.cwiseProduct(cache.xhat.row(i)).sum();
        dx.row(i) = (cache.inv_std[i] / pd) *
                    (pd * dxhat.array() - sum_dxhat - cache.xhat.row(i).array() * sum_dxhat_xhat);
    }
    return dx;
}

SbnState::SbnState(const std::string& name, int dim, double eps_)
    : gamma(name + ".gamma", dim, 1, false),
      beta(name + ".beta", dim, 1, false),
      running_mean(Eigen::VectorXd::Zero(dim)),
      running_var(Eigen::VectorXd::Ones(dim)),
      eps(eps_) {
    gamma.value.setOnes();
}

SequenceBatch sbn_forward(SbnState& state, const SequenceBatch& input, SbnCache* cache) {
    const int p = state.dim();
    if (input.dim() != p)
        throw ShapeError("sbn_forward: input dim " + std::to_string(input.dim()) + " vs state dim " +
                         std::to_string(p));

    const bool use_batch_stats = state.train_mode || state.batch_stats_at_eval;
    const long m = input.unpadded_count();

    Eigen::VectorXd mean(p), var(p);
    if (use_batch_stats) {
        if (m < 2) throw ParameterError("sbn_forward: fewer than 2 unpadded elements in train mode");
        mean.setZero();
        for (int b = 0; b < input.batch(); ++b)
            for (int t = 0; t < input.lengths[b]; ++t) mean += input.features[b].row(t).transpose();
        mean /= static_cast<double>(m);
        var.setZero();
        for (int b = 0; b < input.batch(); ++b)
            for (int t = 0; t < input.lengths[b]; ++t)
                var += (input.features[b].row(t).transpose() - mean).cwiseAbs2();
        var /= static_cast<double>(m);
        if (state.train_mode) {
            state.running_mean = (1.0 - state.momentum) * state.running_mean + state.momentum * mean;
            state.running_var = (1.0 - state.momentum) * state.running_var + state.momentum * var;
        }
    } else {
        mean = state.running_mean;
        var = state.running_var;
    }

    Eigen::VectorXd inv_std = (var.array() + state.eps).rsqrt();
    const Eigen::VectorXd& gamma = state.gamma.value.col(0);
    const Eigen::VectorXd& beta = state.beta.value.col(0);

    SequenceBatch out = SequenceBatch::zeros_like(input);
    SequenceBatch xhat = SequenceBatch::zeros_like(input);
    for (int b = 0; b < input.batch(); ++b) {
        for (int t = 0; t < input.lengths[b]; ++t) {
            Eigen::VectorXd xh =
                (input.features[b].row(t).transpose() - mean).cwiseProduct(inv_std);
            xhat.features[b].row(t) = xh.transpose();
            out.features[b].row(t) = (xh.cwiseProduct(gamma) + beta).transpose();
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
        cache->count = use_batch_stats ? m : 0;  // 0 marks frozen statistics
    }
    return out;
}

SequenceBatch sbn_backward(SbnState& state, const SbnCache& cache, const SequenceBatch& grad_out) {
    const int p = state.dim();
    if (grad_out.dim() != p || cache.xhat.batch() != grad_out.batch())
        throw ContractError("sbn_backward: cache does not match upstream gradient");

    const Eigen::VectorXd& gamma = state.gamma.value.col(0);
    Eigen::VectorXd sum_dy = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd sum_dy_xhat = Eigen::VectorXd::Zero(p);
    for (int b = 0; b < grad_out.batch(); ++b) {
        for (int t = 0; t < grad_out.lengths[b]; ++t) {
            sum_dy += grad_out.features[b].row(t).transpose();
            sum_dy_xhat += grad_out.features[b]
                               .row(t)
                               .cwiseProduct(cache.xhat.features[b].row(t))
                               .transpose();
        }
    }
    state.gamma.grad.col(0) += sum_dy_xhat;
    state.beta.grad.col(0) += sum_dy;

    SequenceBatch dx = SequenceBatch::zeros_like(grad_out);
    if (cache.count == 0) {
        // frozen statistics: plain affine backward
        for (int b = 0; b < grad_out.batch(); ++b)
            for (int t = 0; t < grad_out.lengths[b]; ++t)
                dx.features[b].row(t) = grad_out.features[b]
                                            .row(t)
                                            .cwiseProduct(gamma.transpose())
                                            .cwiseProduct(cache.inv_std.transpose());
        return dx;
    }

    const double md = static_cast<double>(cache.count);
    Eigen::VectorXd sum_dxhat = gamma.cwiseProduct(sum_dy);
    Eigen::VectorXd sum_dxhat_xhat = gamma.cwiseProduct(sum_dy_xhat);
    for (int b = 0; b < grad_out.batch(); ++b) {
        for (int t = 0; t < grad_out.lengths[b]; ++t) {
            Eigen::VectorXd dxhat =
                grad_out.features[b].row(t).transpose().cwiseProduct(gamma);
            Eigen::VectorXd v = md * dxhat - sum_dxhat -
                                cache.xhat.features[b].row(t).transpose().cwiseProduct(sum_dxhat_xhat);
            dx.features[b].row(t) = (cache.inv_std / md).cwiseProduct(v).transpose();
        }
    }
    return dx;
}

}  // namespace align
