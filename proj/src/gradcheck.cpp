#include "align/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "align/data.hpp"
#include "align/errors.hpp"
#include "align/layers.hpp"
#include "align/model.hpp"
#include "align/norm.hpp"
#include "align/rng.hpp"

namespace align {

double finite_diff_max_error(const std::vector<ParamTensor*>& params,
                             const std::function<double()>& loss, double step,
                             double denom_floor) {
    double worst = 0.0;
    for (ParamTensor* p : params) {
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
                const double saved = p->value(i, j);
                p->value(i, j) = saved + step;
                const double up = loss();
                p->value(i, j) = saved - step;
                const double down = loss();
                p->value(i, j) = saved;
                const double numeric = (up - down) / (2.0 * step);
                const double analytic = p->grad(i, j);
                const double denom =
                    std::max({std::abs(numeric), std::abs(analytic), denom_floor});
                worst = std::max(worst, std::abs(numeric - analytic) / denom);
            }
        }
    }
    return worst;
}

namespace {

Eigen::MatrixXd random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.gaussian();
    return m;
}

SequenceBatch random_batch(int batch, int steps, int dim, Rng& rng,
                           const std::vector<int>& lengths) {
    SequenceBatch out;
    for (int b = 0; b < batch; ++b) {
        out.features.push_back(random_matrix(steps, dim, rng));
        out.lengths.push_back(lengths[b]);
    }
    return out;
}

double weighted_sum(const SequenceBatch& x, const SequenceBatch& w) {
    double s = 0.0;
    for (int b = 0; b < x.batch(); ++b)
        for (int t = 0; t < x.lengths[b]; ++t)
            s += x.features[b].row(t).dot(w.features[b].row(t));
    return s;
}

GradCheckResult check_fc(std::uint64_t seed) {
    Rng rng(seed, 1);
    FcLayer layer("fc", 5, 4, Activation::Tanh, rng);
    const Eigen::MatrixXd input = random_matrix(3, 5, rng);
    const Eigen::MatrixXd w = random_matrix(3, 4, rng);

    auto loss = [&] { return (fc_forward(layer, input).array() * w.array()).sum(); };
    for (ParamTensor* p : layer.params()) p->zero_grad();
    FcCache cache;
    fc_forward(layer, input, &cache);
    fc_backward(layer, cache, w);
    return {"fc", finite_diff_max_error(layer.params(), loss), 1e-4};
}

GradCheckResult check_lstm(Direction dir, bool layer_norm, const std::string& name,
                           std::uint64_t seed) {
    Rng rng(seed, 2);
    LstmStack stack("lstm", 4, 5, 2, dir, layer_norm, rng);
    const SequenceBatch input = random_batch(2, 6, 4, rng, {6, 4});
    SequenceBatch w = random_batch(2, 6, 5, rng, {6, 4});
    for (int b = 0; b < 2; ++b)
        for (int t = w.lengths[b]; t < 6; ++t) w.features[b].row(t).setZero();

    auto loss = [&] { return weighted_sum(stack.forward_batch(input), w); };
    for (ParamTensor* p : stack.params()) p->zero_grad();
    std::vector<LstmStackCache> caches;
    stack.forward_batch(input, &caches);
    stack.backward_batch(caches, w);
    return {name, finite_diff_max_error(stack.params(), loss), 1e-4};
}

GradCheckResult check_sbn(std::uint64_t seed) {
    Rng rng(seed, 3);
    SbnState state("sbn", 4);
    state.gamma.value = random_matrix(4, 1, rng, 0.5).array() + 1.0;
    state.beta.value = random_matrix(4, 1, rng, 0.5);
    const SequenceBatch input = random_batch(3, 5, 4, rng, {5, 3, 4});
    const SequenceBatch w = random_batch(3, 5, 4, rng, {5, 3, 4});

    SbnState work = state;
    auto loss = [&] {
        SbnState scratch = work;  // keep running stats untouched
        return weighted_sum(sbn_forward(scratch, input), w);
    };
    for (ParamTensor* p : work.params()) p->zero_grad();
    SbnCache cache;
    sbn_forward(work, input, &cache);
    const SequenceBatch dx = sbn_backward(work, cache, w);

    // includes the input gradient: perturb inputs through the same loss
    double worst = finite_diff_max_error(work.params(), loss);
    const double step = 1e-5;
    SequenceBatch& in = const_cast<SequenceBatch&>(input);
    for (int b = 0; b < in.batch(); ++b) {
        for (int t = 0; t < in.lengths[b]; ++t) {
            for (int d = 0; d < in.dim(); ++d) {
                const double saved = in.features[b](t, d);
                in.features[b](t, d) = saved + step;
                const double up = loss();
                in.features[b](t, d) = saved - step;
                const double down = loss();
                in.features[b](t, d) = saved;
                const double numeric = (up - down) / (2.0 * step);
                const double analytic = dx.features[b](t, d);
                const double denom =
                    std::max({std::abs(numeric), std::abs(analytic), 1e-2});
                worst = std::max(worst, std::abs(numeric - analytic) / denom);
            }
        }
    }
    return {"sbn", worst, 1e-4};
}

GradCheckResult check_ln(std::uint64_t seed) {
    Rng rng(seed, 4);
    LnParams ln("ln", 6);
    ln.gamma.value = random_matrix(6, 1, rng, 0.5).array() + 1.0;
    ln.beta.value = random_matrix(6, 1, rng, 0.5);
    const Eigen::MatrixXd x = random_matrix(4, 6, rng);
    const Eigen::MatrixXd w = random_matrix(4, 6, rng);

    auto loss = [&] { return (ln_forward(ln, x).array() * w.array()).sum(); };
    for (ParamTensor* p : ln.params()) p->zero_grad();
    LnCache cache;
    ln_forward(ln, x, &cache);
    const Eigen::MatrixXd dx = ln_backward(ln, cache, w);

    double worst = finite_diff_max_error(ln.params(), loss);
    const double step = 1e-5;
    Eigen::MatrixXd& xin = const_cast<Eigen::MatrixXd&>(x);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double saved = xin(i, j);
            xin(i, j) = saved + step;
            const double up = loss();
            xin(i, j) = saved - step;
            const double down = loss();
            xin(i, j) = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double denom = std::max({std::abs(numeric), std::abs(dx(i, j)), 1e-2});
            worst = std::max(worst, std::abs(numeric - dx(i, j)) / denom);
        }
    }
    return {"ln", worst, 1e-4};
}

GradCheckResult check_softmax_ce(std::uint64_t seed) {
    Rng rng(seed, 5);
    const int in = 7, hidden = 5, k = 4;
    FcLayer fc1("fc1", in, hidden, Activation::Relu, rng);
    FcLayer fc2("fc2", hidden, k, Activation::None, rng);
    const Eigen::MatrixXd input = random_matrix(1, in, rng);
    const int true_index = 2;
    const double eps = 0.03;

    auto softmax = [](const Eigen::RowVectorXd& logits) {
        Eigen::RowVectorXd z = (logits.array() - logits.maxCoeff()).exp();
        return Eigen::RowVectorXd(z / z.sum());
    };
    auto loss = [&] {
        Eigen::RowVectorXd probs = softmax(fc_forward(fc2, fc_forward(fc1, input)).row(0));
        return smoothed_cross_entropy(probs.transpose(), true_index, eps, k);
    };

    std::vector<ParamTensor*> params = fc1.params();
    for (ParamTensor* p : fc2.params()) params.push_back(p);
    for (ParamTensor* p : params) p->zero_grad();

    FcCache c1, c2;
    Eigen::MatrixXd h = fc_forward(fc1, input, &c1);
    Eigen::RowVectorXd probs = softmax(fc_forward(fc2, h, &c2).row(0));
    Eigen::RowVectorXd target = Eigen::RowVectorXd::Constant(k, eps / k);
    target(true_index) += 1.0 - eps;
    // softmax + cross-entropy: d loss / d logits = probs - target
    Eigen::MatrixXd dlogits = (probs - target);
    fc_backward(fc1, c1, fc_backward(fc2, c2, dlogits));
    return {"softmax_ce", finite_diff_max_error(params, loss), 1e-4};
}

GradCheckResult check_model(ModelConfig::Norm norm, const std::string& name,
                            std::uint64_t seed) {
    ModelConfig cfg;
    cfg.video_in_dim = 6;
    cfg.text_in_dim = 7;
    cfg.projected_dim = 4;
    cfg.seq_hidden = 4;
    cfg.matched_hidden = 3;
    cfg.action_hidden = 3;
    cfg.fc_hidden = 5;
    cfg.lstm_layers = 2;
    cfg.norm = norm;
    cfg.use_rp = true;
    Model model(cfg, seed);
    model.set_train(true);

    GeneratorConfig gen;
    gen.num_episodes = 2;
    gen.clips_min = 3;
    gen.clips_max = 5;
    gen.texts_min = 2;
    gen.texts_max = 3;
    gen.clips_per_text_min = 1;
    gen.clips_per_text_max = 2;
    gen.latent_dim = 4;
    gen.video_dim = cfg.video_in_dim;
    gen.text_dim = cfg.text_in_dim;
    gen.seed = seed + 7;
    const std::vector<Episode> eps = generate(gen);
    std::vector<const Episode*> batch;
    std::vector<std::vector<Action>> oracles;
    for (const Episode& e : eps) {
        batch.push_back(&e);
        oracles.push_back(
            derive_oracle_actions(e.gold, cfg.action_set, e.num_clips(), e.num_texts()));
    }

    auto loss = [&] { return model.train_batch(batch, oracles, /*forward_only=*/true); };
    for (ParamTensor* p : model.params()) p->zero_grad();
    model.train_batch(batch, oracles);
    return {name, finite_diff_max_error(model.params(), loss), 1e-3};
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck(const std::string& scope, std::uint64_t seed) {
    std::vector<GradCheckResult> out;
    const bool all = scope == "all";
    if (all || scope == "fc") out.push_back(check_fc(seed));
    if (all || scope == "lstm") {
        out.push_back(check_lstm(Direction::Forward, false, "lstm_forward", seed));
        out.push_back(check_lstm(Direction::BackwardInTime, false, "lstm_backward_dir", seed));
    }
    if (all || scope == "ln_lstm")
        out.push_back(check_lstm(Direction::Forward, true, "ln_lstm", seed));
    if (all || scope == "sbn") out.push_back(check_sbn(seed));
    if (all || scope == "ln") out.push_back(check_ln(seed));
    if (all || scope == "softmax_ce") out.push_back(check_softmax_ce(seed));
    if (all || scope == "model") {
        out.push_back(check_model(ModelConfig::Norm::Sbn, "model_sbn", seed));
        out.push_back(check_model(ModelConfig::Norm::Ln2, "model_ln2", seed));
        out.push_back(check_model(ModelConfig::Norm::Ln4, "model_ln4", seed));
        out.push_back(check_model(ModelConfig::Norm::None, "model_none", seed));
    }
    if (out.empty()) throw ParameterError("unknown gradcheck scope: " + scope);
    return out;
}

}  // namespace align
