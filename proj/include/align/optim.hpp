#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "align/param.hpp"

namespace align {

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    long step = 0;  // number of completed optimizer steps
};

struct LarsConfig {
    bool enabled = true;
    double weight_norm_floor = 1e-12;
    // policy override: scale every param, not only those flagged lars_enabled
    bool apply_to_all = false;
};

// Rescales all grads in place so the global norm never exceeds cap. Returns
// the pre-clip norm. Idempotent.
double clip_global_norm(const std::vector<ParamTensor*>& params, double cap = 2.0);

// Updates the Adam moments of `param` from its current grad (using cfg.step as
// the 1-based step index for bias correction) and returns the bias-corrected
// update direction m_hat / (sqrt(v_hat) + eps). Does not touch param.value.
Eigen::MatrixXd adam_step_direction(ParamTensor& param, const AdamConfig& cfg);

// w <- w - dw. Under LARS (for an eligible param with nonzero weight and
// direction norms) dw = lr * ||w|| * direction / ||direction||, so
// ||dw|| = lr * ||w|| exactly; otherwise dw = lr * direction.
void apply_update(ParamTensor& param, const Eigen::MatrixXd& direction, double lr,
                  const LarsConfig& lars);

struct WarmupSpec {
    double start_lr = 5e-5;
    double end_lr = 5e-4;
    int epochs = 5;
};

// Reduce-on-plateau schedule with optional linear warm-up. Warm-up epochs set
// the lr by interpolation; plateau tracking starts afterwards.
struct LrSchedule {
    double lr;
    int patience = 10;
    double factor = 0.5;
    std::optional<WarmupSpec> warmup;

    double best_loss = std::numeric_limits<double>::infinity();
    int epochs_since_improve = 0;
    int epoch = 0;  // epochs observed so far

    explicit LrSchedule(double initial_lr) : lr(initial_lr) {}

    // lr to use while training epoch `e` (0-based)
    double lr_for_epoch(int e) const;

    // call once per epoch with the train loss; returns the lr for the next epoch
    double on_epoch_end(double train_loss);
};

// Convenience bundle: clip, Adam direction, (optionally LARS-scaled) update.
class Optimizer {
   public:
    AdamConfig adam;
    LarsConfig lars;
    double clip_cap = 2.0;

    // returns the pre-clip gradient norm
    double step(const std::vector<ParamTensor*>& params, double lr);
};

}  // namespace align
