#pragma once

#include <functional>
#include <string>
#include <vector>

#include "align/param.hpp"

namespace align {

// Central-difference comparison of analytic gradients against a scalar loss.
// `loss` must be a pure function of the param values; `grads` holds the
// analytic gradients (same order as params). Returns the worst elementwise
// error |g_a - g_n| / max(|g_a|, |g_n|, floor).
double finite_diff_max_error(const std::vector<ParamTensor*>& params,
                             const std::function<double()>& loss, double step = 1e-5,
                             double denom_floor = 1e-2);

struct GradCheckResult {
    std::string op;
    double worst_error = 0.0;
    double tolerance = 0.0;
    bool pass() const { return worst_error < tolerance; }
};

// Known scopes: fc, lstm, lstm_backward_dir, sbn, ln, ln_lstm, softmax_ce,
// model (all four normalization configs), or "all".
std::vector<GradCheckResult> run_gradcheck(const std::string& scope, std::uint64_t seed = 42);

}  // namespace align
