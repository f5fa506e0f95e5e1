#include "align/optim.hpp"

#include <cmath>

#include "align/errors.hpp"

namespace align {

double clip_global_norm(const std::vector<ParamTensor*>& params, double cap) {
    if (cap <= 0.0) throw ParameterError("clip_global_norm: cap must be positive");
    double norm = global_norm(params, ParamField::Grad);
    if (norm > cap) {
        double scale = cap / norm;
        for (ParamTensor* p : params) p->grad *= scale;
    }
    return norm;
}

Eigen::MatrixXd adam_step_direction(ParamTensor& param, const AdamConfig& cfg) {
    if (param.adam_m.rows() != param.value.rows() || param.adam_m.cols() != param.value.cols())
        throw ContractError("adam_step_direction: moments not initialized for " + param.name);
    if (cfg.step < 1) throw ContractError("adam_step_direction: step counter must be >= 1");
    param.adam_m = cfg.beta1 * param.adam_m + (1.0 - cfg.beta1) * param.grad;
    param.adam_v = cfg.beta2 * param.adam_v.array().matrix() +
                   (1.0 - cfg.beta2) * param.grad.cwiseAbs2();
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(cfg.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(cfg.step));
    Eigen::MatrixXd m_hat = param.adam_m / bc1;
    Eigen::MatrixXd v_hat = param.adam_v / bc2;
    return (m_hat.array() / (v_hat.array().sqrt() + cfg.eps)).matrix();
}

void apply_update(ParamTensor& param, const Eigen::MatrixXd& direction, double lr,
                  const LarsConfig& lars) {
    if (direction.rows() != param.value.rows() || direction.cols() != param.value.cols())
        throw ShapeError("apply_update: direction shape mismatch for " + param.name);
    bool use_lars = lars.enabled && (param.lars_enabled || lars.apply_to_all);
    if (use_lars) {
        double dir_norm = direction.norm();
        if (dir_norm == 0.0) return;  // undefined direction, skip
        double w_norm = param.value.norm();
        if (w_norm > lars.weight_norm_floor) {
            param.value -= (lr * w_norm / dir_norm) * direction;
            return;
        }
    }
    param.value -= lr * direction;
}

double LrSchedule::lr_for_epoch(int e) const {
    if (warmup && e <= warmup->epochs) {
        double frac = static_cast<double>(e) / static_cast<double>(warmup->epochs);
        return warmup->start_lr + frac * (warmup->end_lr - warmup->start_lr);
    }
    return lr;
}

double LrSchedule::on_epoch_end(double train_loss) {
    if (std::isnan(train_loss)) throw DivergedError("LrSchedule: NaN training loss");
    int e = epoch++;
    if (warmup && e < warmup->epochs) {
        lr = lr_for_epoch(e + 1);
        return lr;
    }
    if (warmup && e == warmup->epochs) lr = warmup->end_lr;
    if (train_loss < best_loss) {
        best_loss = train_loss;
        epochs_since_improve = 0;
    } else {
        ++epochs_since_improve;
        if (epochs_since_improve >= patience) {
            lr *= factor;
            epochs_since_improve = 0;
        }
    }
    return lr;
}

double Optimizer::step(const std::vector<ParamTensor*>& params, double lr) {
    double pre = clip_global_norm(params, clip_cap);
    ++adam.step;
    for (ParamTensor* p : params) {
        Eigen::MatrixXd dir = adam_step_direction(*p, adam);
        apply_update(*p, dir, lr, lars);
    }
    return pre;
}

}  // namespace align
