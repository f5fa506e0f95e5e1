#include "align/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "align/errors.hpp"
#include "align/rng.hpp"

namespace align {

std::string norm_name(ModelConfig::Norm n) {
    switch (n) {
        case ModelConfig::Norm::Sbn:
            return "sbn";
        case ModelConfig::Norm::Ln2:
            return "ln2";
        case ModelConfig::Norm::Ln4:
            return "ln4";
        case ModelConfig::Norm::None:
            return "none";
    }
    throw ParameterError("unknown normalization");
}

ModelConfig::Norm norm_from_name(const std::string& s) {
    if (s == "sbn") return ModelConfig::Norm::Sbn;
    if (s == "ln2") return ModelConfig::Norm::Ln2;
    if (s == "ln4") return ModelConfig::Norm::Ln4;
    if (s == "none") return ModelConfig::Norm::None;
    throw ParameterError("unknown normalization: " + s);
}

double smoothed_cross_entropy(const Eigen::VectorXd& probs, int true_index, double eps, int k) {
    if (eps < 0.0 || eps >= 1.0) throw ParameterError("label smoothing must be in [0, 1)");
    if (true_index < 0 || true_index >= probs.size())
        throw ParameterError("smoothed_cross_entropy: bad class index");
    double loss = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        double target = eps / k + (i == true_index ? 1.0 - eps : 0.0);
        if (target > 0.0) loss -= target * std::log(std::max(probs[i], 1e-300));
    }
    return loss;
}

namespace {

Eigen::VectorXd positional_features(int remaining_videos, int remaining_texts, int matched_slots) {
    double nv = remaining_videos, nt = remaining_texts, nm = matched_slots;
    Eigen::VectorXd out(10);
    out << nv / 100.0, nt / 100.0, nm / 100.0, nv / (nt + 1.0), nt / (nv + 1.0), nm / (nv + 1.0),
        nm / (nt + 1.0), 1.0 / (1.0 + nv), 1.0 / (1.0 + nt), 1.0 / (1.0 + nm);
    return out;
}

}  // namespace

struct EncodeCache {
    std::vector<FcCache> proj_v, proj_t;
    std::vector<FcCache> in_v, in_t;
    std::vector<LstmStackCache> lstm_v, lstm_t;
    SbnCache sbn_v, sbn_t;
};

struct Model::Impl {
    std::optional<RandomProjection> rp_video, rp_text;
    std::optional<FcLayer> proj_video, proj_text;
    FcLayer in_video, in_text;
    LstmStack video_lstm, text_lstm;
    std::optional<SbnState> sbn_video, sbn_text;
    LstmStack action_lstm, matched_lstm;
    FcLayer head1, head2;
};

Model::~Model() = default;
Model::Model(Model&&) noexcept = default;
Model& Model::operator=(Model&&) noexcept = default;

Model::Model(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), seed_(seed), impl_(std::make_unique<Impl>()) {
    if (cfg.positional_features != 10)
        throw ParameterError("ModelConfig: positional_features must be 10");
    if (cfg.video_in_dim < 1 || cfg.text_in_dim < 1 || cfg.projected_dim < 1 ||
        cfg.seq_hidden < 1 || cfg.matched_hidden < 1 || cfg.action_hidden < 1 ||
        cfg.fc_hidden < 1 || cfg.lstm_layers < 1)
        throw ParameterError("ModelConfig: dimensions must be positive");
    if (cfg.action_set.empty()) throw ParameterError("ModelConfig: empty action set");

    Rng rng(seed, 7);
    const bool ln_seq = cfg.norm == ModelConfig::Norm::Ln2 || cfg.norm == ModelConfig::Norm::Ln4;
    const bool ln_aux = cfg.norm == ModelConfig::Norm::Ln4;
    const int k = cfg.num_actions();

    if (cfg.use_rp) {
        Rng rp_rng = rng.split(101);
        impl_->rp_video.emplace(rp_rng.next_u64(), cfg.video_in_dim, cfg.projected_dim);
        impl_->rp_text.emplace(rp_rng.next_u64(), cfg.text_in_dim, cfg.projected_dim);
    } else {
        impl_->proj_video.emplace("video.proj", cfg.video_in_dim, cfg.projected_dim,
                                  Activation::None, rng);
        impl_->proj_text.emplace("text.proj", cfg.text_in_dim, cfg.projected_dim, Activation::None,
                                 rng);
    }
    impl_->in_video = FcLayer("video.in", cfg.projected_dim, cfg.seq_hidden, Activation::Tanh, rng);
    impl_->in_text = FcLayer("text.in", cfg.projected_dim, cfg.seq_hidden, Activation::Tanh, rng);
    impl_->video_lstm = LstmStack("video.lstm", cfg.seq_hidden, cfg.seq_hidden, cfg.lstm_layers,
                                  Direction::BackwardInTime, ln_seq, rng);
    impl_->text_lstm = LstmStack("text.lstm", cfg.seq_hidden, cfg.seq_hidden, cfg.lstm_layers,
                                 Direction::BackwardInTime, ln_seq, rng);
    if (cfg.norm == ModelConfig::Norm::Sbn) {
        impl_->sbn_video.emplace("video.sbn", cfg.seq_hidden);
        impl_->sbn_text.emplace("text.sbn", cfg.seq_hidden);
    }
    impl_->action_lstm =
        LstmStack("action.lstm", k, cfg.action_hidden, cfg.lstm_layers, Direction::Forward, ln_aux,
                  rng);
    impl_->matched_lstm = LstmStack("matched.lstm", 2 * cfg.seq_hidden, cfg.matched_hidden,
                                    cfg.lstm_layers, Direction::Forward, ln_aux, rng);
    impl_->head1 = FcLayer("head.fc1", cfg.state_dim(), cfg.fc_hidden, Activation::Tanh, rng);
    impl_->head2 = FcLayer("head.fc2", cfg.fc_hidden, k, Activation::None, rng);
}

std::vector<ParamTensor*> Model::params() {
    std::vector<ParamTensor*> out;
    auto add = [&](std::vector<ParamTensor*> ps) {
        for (auto* p : ps) out.push_back(p);
    };
    if (impl_->proj_video) add(impl_->proj_video->params());
    add(impl_->in_video.params());
    add(impl_->video_lstm.params());
    if (impl_->sbn_video) add(impl_->sbn_video->params());
    if (impl_->proj_text) add(impl_->proj_text->params());
    add(impl_->in_text.params());
    add(impl_->text_lstm.params());
    if (impl_->sbn_text) add(impl_->sbn_text->params());
    add(impl_->action_lstm.params());
    add(impl_->matched_lstm.params());
    add(impl_->head1.params());
    add(impl_->head2.params());
    return out;
}

void Model::set_train(bool train) {
    train_mode_ = train;
    if (impl_->sbn_video) impl_->sbn_video->train_mode = train;
    if (impl_->sbn_text) impl_->sbn_text->train_mode = train;
}

SbnState* Model::video_sbn() { return impl_->sbn_video ? &*impl_->sbn_video : nullptr; }
SbnState* Model::text_sbn() { return impl_->sbn_text ? &*impl_->sbn_text : nullptr; }

namespace {

SequenceBatch encode_modality(const std::vector<const Episode*>& episodes, bool video,
                              const std::optional<RandomProjection>& rp,
                              std::optional<FcLayer>& proj, FcLayer& in_fc, const LstmStack& lstm,
                              std::optional<SbnState>& sbn, EncodeCache* cache) {
    SequenceBatch pre;
    std::vector<FcCache>* proj_caches = cache ? (video ? &cache->proj_v : &cache->proj_t) : nullptr;
    std::vector<FcCache>* in_caches = cache ? (video ? &cache->in_v : &cache->in_t) : nullptr;
    if (proj_caches) proj_caches->resize(episodes.size());
    if (in_caches) in_caches->resize(episodes.size());
    for (std::size_t b = 0; b < episodes.size(); ++b) {
        const Eigen::MatrixXd& x = video ? episodes[b]->video : episodes[b]->text;
        Eigen::MatrixXd p = rp ? rp->apply(x)
                               : fc_forward(*proj, x, proj_caches ? &(*proj_caches)[b] : nullptr);
        Eigen::MatrixXd i = fc_forward(in_fc, p, in_caches ? &(*in_caches)[b] : nullptr);
        pre.lengths.push_back(static_cast<int>(i.rows()));
        pre.features.push_back(std::move(i));
    }
    std::vector<LstmStackCache>* lstm_caches =
        cache ? (video ? &cache->lstm_v : &cache->lstm_t) : nullptr;
    SequenceBatch hidden = lstm.forward_batch(pre, lstm_caches);
    if (sbn) return sbn_forward(*sbn, hidden, cache ? (video ? &cache->sbn_v : &cache->sbn_t) : nullptr);
    return hidden;
}

void encode_modality_backward(bool video, const std::optional<RandomProjection>& rp,
                              std::optional<FcLayer>& proj, FcLayer& in_fc, LstmStack& lstm,
                              std::optional<SbnState>& sbn, EncodeCache& cache,
                              const SequenceBatch& grad) {
    const SequenceBatch* g = &grad;
    SequenceBatch g_sbn;
    if (sbn) {
        g_sbn = sbn_backward(*sbn, video ? cache.sbn_v : cache.sbn_t, grad);
        g = &g_sbn;
    }
    SequenceBatch dpre = lstm.backward_batch(video ? cache.lstm_v : cache.lstm_t, *g);
    auto& in_caches = video ? cache.in_v : cache.in_t;
    auto& proj_caches = video ? cache.proj_v : cache.proj_t;
    for (int b = 0; b < dpre.batch(); ++b) {
        Eigen::MatrixXd dp = fc_backward(in_fc, in_caches[b], dpre.features[b]);
        if (!rp) fc_backward(*proj, proj_caches[b], dp);
        // a random projection receives no gradient
    }
}

}  // namespace

Encoded Model::encode(const std::vector<const Episode*>& episodes) {
    Encoded enc;
    enc.video = encode_modality(episodes, true, impl_->rp_video, impl_->proj_video, impl_->in_video,
                                impl_->video_lstm, impl_->sbn_video, nullptr);
    enc.text = encode_modality(episodes, false, impl_->rp_text, impl_->proj_text, impl_->in_text,
                               impl_->text_lstm, impl_->sbn_text, nullptr);
    return enc;
}

namespace {

// Per-step caches kept for the backward pass.
struct StepRecord {
    int video_cursor = 0, text_cursor = 0;
    std::vector<MatchSlot> slots;
    Eigen::MatrixXd onehots;         // history x K
    LstmStackCache action_cache;
    Eigen::MatrixXd matched_inputs;  // slots x 2H
    LstmStackCache matched_cache;
    FcCache h1, h2;
    Eigen::VectorXd probs;           // K, zero at invalid
    std::vector<int> valid;          // indices into the action set
    int target = -1;                 // index into the action set
};

Eigen::VectorXd masked_softmax(const Eigen::VectorXd& logits, const std::vector<int>& valid) {
    if (valid.empty()) throw ContractError("classify: no valid actions");
    double mx = -std::numeric_limits<double>::infinity();
    for (int i : valid) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    Eigen::VectorXd probs = Eigen::VectorXd::Zero(logits.size());
    for (int i : valid) {
        probs[i] = std::exp(logits[i] - mx);
        sum += probs[i];
    }
    for (int i : valid) probs[i] /= sum;
    return probs;
}

}  // namespace

Eigen::VectorXd Model::build_state(const Episode& ep, int episode_index, const Encoded& enc,
                                   const AlignmentState& state) const {
    if (state.done) throw ContractError("build_state: episode already done");
    const int h = cfg_.seq_hidden;
    const int k = cfg_.num_actions();
    Eigen::VectorXd sv(cfg_.state_dim());
    const Eigen::MatrixXd& v = enc.video.features.at(episode_index);
    const Eigen::MatrixXd& s = enc.text.features.at(episode_index);
    sv.segment(0, h) = v.row(state.video_cursor).transpose();
    sv.segment(h, h) = s.row(state.text_cursor).transpose();

    Eigen::VectorXd a_hidden = Eigen::VectorXd::Zero(cfg_.action_hidden);
    if (!state.history.empty()) {
        int len = static_cast<int>(state.history.size());
        Eigen::MatrixXd onehots = Eigen::MatrixXd::Zero(len, k);
        for (int t = 0; t < len; ++t) {
            auto it = std::find(cfg_.action_set.begin(), cfg_.action_set.end(), state.history[t]);
            onehots(t, static_cast<int>(it - cfg_.action_set.begin())) = 1.0;
        }
        Eigen::MatrixXd ah = impl_->action_lstm.forward(onehots, len);
        a_hidden = ah.row(len - 1).transpose();
    }
    sv.segment(2 * h, cfg_.action_hidden) = a_hidden;

    Eigen::VectorXd m_hidden = Eigen::VectorXd::Zero(cfg_.matched_hidden);
    if (!state.slots.empty()) {
        int ns = static_cast<int>(state.slots.size());
        Eigen::MatrixXd inputs(ns, 2 * h);
        for (int i = 0; i < ns; ++i) {
            Eigen::RowVectorXd va = Eigen::RowVectorXd::Zero(h);
            for (int c : state.slots[i].videos) va += v.row(c);
            va /= static_cast<double>(state.slots[i].videos.size());
            Eigen::RowVectorXd sa = Eigen::RowVectorXd::Zero(h);
            for (int t : state.slots[i].texts) sa += s.row(t);
            sa /= static_cast<double>(state.slots[i].texts.size());
            inputs.row(i) << va, sa;
        }
        Eigen::MatrixXd mh = impl_->matched_lstm.forward(inputs, ns);
        m_hidden = mh.row(ns - 1).transpose();
    }
    sv.segment(2 * h + cfg_.action_hidden, cfg_.matched_hidden) = m_hidden;

    sv.tail(cfg_.positional_features) = positional_features(
        ep.num_clips() - state.video_cursor, ep.num_texts() - state.text_cursor,
        static_cast<int>(state.slots.size()));
    return sv;
}

Eigen::VectorXd Model::classify(const Eigen::VectorXd& state_vec,
                                const std::vector<Action>& valid) const {
    Eigen::MatrixXd hid = fc_forward(impl_->head1, state_vec.transpose());
    Eigen::MatrixXd logits = fc_forward(impl_->head2, hid);
    std::vector<int> vidx;
    for (Action a : valid) {
        auto it = std::find(cfg_.action_set.begin(), cfg_.action_set.end(), a);
        if (it == cfg_.action_set.end())
            throw ContractError("classify: action not in the configured set");
        vidx.push_back(static_cast<int>(it - cfg_.action_set.begin()));
    }
    return masked_softmax(logits.row(0).transpose(), vidx);
}

namespace {

struct EpisodeTrace {
    std::vector<StepRecord> steps;
};

}  // namespace

double Model::train_batch(const std::vector<const Episode*>& episodes,
                          const std::vector<std::vector<Action>>& oracles, bool forward_only) {
    if (episodes.size() != oracles.size())
        throw ContractError("train_batch: episode/oracle count mismatch");
    long total_steps = 0;
    for (const auto& o : oracles) total_steps += static_cast<long>(o.size());
    if (total_steps == 0) return 0.0;

    EncodeCache cache;
    Encoded enc;
    enc.video = encode_modality(episodes, true, impl_->rp_video, impl_->proj_video, impl_->in_video,
                                impl_->video_lstm, impl_->sbn_video, forward_only ? nullptr : &cache);
    enc.text = encode_modality(episodes, false, impl_->rp_text, impl_->proj_text, impl_->in_text,
                               impl_->text_lstm, impl_->sbn_text, forward_only ? nullptr : &cache);

    const int h = cfg_.seq_hidden;
    const int k = cfg_.num_actions();
    double loss_sum = 0.0;
    std::vector<EpisodeTrace> traces(episodes.size());

    for (std::size_t b = 0; b < episodes.size(); ++b) {
        const Episode& ep = *episodes[b];
        const int n = ep.num_clips(), m = ep.num_texts();
        AlignmentState state;
        state.done = (n == 0 || m == 0);
        for (Action act : oracles[b]) {
            if (state.done) throw ContractError("train_batch: oracle runs past episode end");
            StepRecord rec;
            rec.video_cursor = state.video_cursor;
            rec.text_cursor = state.text_cursor;
            rec.slots = state.slots;

            Eigen::VectorXd sv(cfg_.state_dim());
            const Eigen::MatrixXd& v = enc.video.features[b];
            const Eigen::MatrixXd& s = enc.text.features[b];
            sv.segment(0, h) = v.row(state.video_cursor).transpose();
            sv.segment(h, h) = s.row(state.text_cursor).transpose();

            Eigen::VectorXd a_hidden = Eigen::VectorXd::Zero(cfg_.action_hidden);
            if (!state.history.empty()) {
                int len = static_cast<int>(state.history.size());
                rec.onehots = Eigen::MatrixXd::Zero(len, k);
                for (int t = 0; t < len; ++t) {
                    auto it = std::find(cfg_.action_set.begin(), cfg_.action_set.end(),
                                        state.history[t]);
                    rec.onehots(t, static_cast<int>(it - cfg_.action_set.begin())) = 1.0;
                }
                Eigen::MatrixXd ah = impl_->action_lstm.forward(
                    rec.onehots, len, forward_only ? nullptr : &rec.action_cache);
                a_hidden = ah.row(len - 1).transpose();
            }
            sv.segment(2 * h, cfg_.action_hidden) = a_hidden;

            Eigen::VectorXd m_hidden = Eigen::VectorXd::Zero(cfg_.matched_hidden);
            if (!state.slots.empty()) {
                int ns = static_cast<int>(state.slots.size());
                rec.matched_inputs.resize(ns, 2 * h);
                for (int i = 0; i < ns; ++i) {
                    Eigen::RowVectorXd va = Eigen::RowVectorXd::Zero(h);
                    for (int c : state.slots[i].videos) va += v.row(c);
                    va /= static_cast<double>(state.slots[i].videos.size());
                    Eigen::RowVectorXd sa = Eigen::RowVectorXd::Zero(h);
                    for (int t : state.slots[i].texts) sa += s.row(t);
                    sa /= static_cast<double>(state.slots[i].texts.size());
                    rec.matched_inputs.row(i) << va, sa;
                }
                Eigen::MatrixXd mh = impl_->matched_lstm.forward(
                    rec.matched_inputs, ns, forward_only ? nullptr : &rec.matched_cache);
                m_hidden = mh.row(ns - 1).transpose();
            }
            sv.segment(2 * h + cfg_.action_hidden, cfg_.matched_hidden) = m_hidden;
            sv.tail(cfg_.positional_features) =
                positional_features(n - state.video_cursor, m - state.text_cursor,
                                    static_cast<int>(state.slots.size()));

            Eigen::MatrixXd hid =
                fc_forward(impl_->head1, sv.transpose(), forward_only ? nullptr : &rec.h1);
            Eigen::MatrixXd logits =
                fc_forward(impl_->head2, hid, forward_only ? nullptr : &rec.h2);

            std::vector<Action> valid = valid_actions(state, cfg_.action_set, n, m);
            rec.valid.clear();
            int target = -1;
            for (Action a : valid) {
                auto it = std::find(cfg_.action_set.begin(), cfg_.action_set.end(), a);
                rec.valid.push_back(static_cast<int>(it - cfg_.action_set.begin()));
            }
            {
                auto it = std::find(cfg_.action_set.begin(), cfg_.action_set.end(), act);
                if (it == cfg_.action_set.end())
                    throw ContractError("train_batch: oracle action outside the action set");
                target = static_cast<int>(it - cfg_.action_set.begin());
            }
            if (std::find(rec.valid.begin(), rec.valid.end(), target) == rec.valid.end())
                throw ContractError("train_batch: oracle action invalid in state");
            rec.target = target;
            rec.probs = masked_softmax(logits.row(0).transpose(), rec.valid);

            const double eps = cfg_.label_smoothing;
            const double kv = static_cast<double>(rec.valid.size());
            for (int i : rec.valid) {
                double t = eps / kv + (i == target ? 1.0 - eps : 0.0);
                loss_sum -= t * std::log(std::max(rec.probs[i], 1e-300));
            }

            if (!forward_only) traces[b].steps.push_back(std::move(rec));
            state = step(state, act, n, m);
        }
    }

    double mean_loss = loss_sum / static_cast<double>(total_steps);
    if (forward_only) return mean_loss;

    // ----- backward -----
    SequenceBatch dv = SequenceBatch::zeros_like(enc.video);
    SequenceBatch ds = SequenceBatch::zeros_like(enc.text);
    const double scale = 1.0 / static_cast<double>(total_steps);

    for (std::size_t b = 0; b < episodes.size(); ++b) {
        for (StepRecord& rec : traces[b].steps) {
            Eigen::RowVectorXd dlogits = Eigen::RowVectorXd::Zero(k);
            const double eps = cfg_.label_smoothing;
            const double kv = static_cast<double>(rec.valid.size());
            for (int i : rec.valid) {
                double t = eps / kv + (i == rec.target ? 1.0 - eps : 0.0);
                dlogits[i] = (rec.probs[i] - t) * scale;
            }
            Eigen::MatrixXd dhid = fc_backward(impl_->head2, rec.h2, dlogits);
            Eigen::VectorXd dsv = fc_backward(impl_->head1, rec.h1, dhid).row(0).transpose();

            dv.features[b].row(rec.video_cursor) += dsv.segment(0, h).transpose();
            ds.features[b].row(rec.text_cursor) += dsv.segment(h, h).transpose();

            Eigen::VectorXd da = dsv.segment(2 * h, cfg_.action_hidden);
            if (rec.onehots.rows() > 0 && da.squaredNorm() > 0.0) {
                Eigen::MatrixXd up = Eigen::MatrixXd::Zero(rec.onehots.rows(), cfg_.action_hidden);
                up.row(up.rows() - 1) = da.transpose();
                impl_->action_lstm.backward(rec.action_cache, up);
            }

            Eigen::VectorXd dm = dsv.segment(2 * h + cfg_.action_hidden, cfg_.matched_hidden);
            if (rec.matched_inputs.rows() > 0) {
                Eigen::MatrixXd up =
                    Eigen::MatrixXd::Zero(rec.matched_inputs.rows(), cfg_.matched_hidden);
                up.row(up.rows() - 1) = dm.transpose();
                Eigen::MatrixXd dinputs = impl_->matched_lstm.backward(rec.matched_cache, up);
                for (int i = 0; i < dinputs.rows(); ++i) {
                    const MatchSlot& slot = rec.slots[i];
                    Eigen::RowVectorXd dva =
                        dinputs.row(i).head(h) / static_cast<double>(slot.videos.size());
                    for (int c : slot.videos) dv.features[b].row(c) += dva;
                    Eigen::RowVectorXd dsa =
                        dinputs.row(i).tail(h) / static_cast<double>(slot.texts.size());
                    for (int t : slot.texts) ds.features[b].row(t) += dsa;
                }
            }
        }
    }

    encode_modality_backward(true, impl_->rp_video, impl_->proj_video, impl_->in_video,
                             impl_->video_lstm, impl_->sbn_video, cache, dv);
    encode_modality_backward(false, impl_->rp_text, impl_->proj_text, impl_->in_text,
                             impl_->text_lstm, impl_->sbn_text, cache, ds);
    return mean_loss;
}

double Model::train_episode(const Episode& ep, const std::vector<Action>& oracle,
                            bool forward_only) {
    return train_batch({&ep}, {oracle}, forward_only);
}

DecodeResult Model::decode_episode(const Episode& ep) {
    const int n = ep.num_clips(), m = ep.num_texts();
    Encoded enc = encode({&ep});
    AlignmentState state;
    state.done = (n == 0 || m == 0);
    int guard = n + m;
    while (!state.done && guard-- > 0) {
        Eigen::VectorXd sv = build_state(ep, 0, enc, state);
        std::vector<Action> valid = valid_actions(state, cfg_.action_set, n, m);
        Eigen::VectorXd probs = classify(sv, valid);
        Action best = valid.front();
        double best_p = -1.0;
        for (Action a : valid) {
            auto it = std::find(cfg_.action_set.begin(), cfg_.action_set.end(), a);
            double p = probs[static_cast<int>(it - cfg_.action_set.begin())];
            if (p > best_p) {
                best_p = p;
                best = a;
            }
        }
        state = step(state, best, n, m);
    }
    return {state_to_alignment(state, n, m), state.history};
}

double Model::action_accuracy(const Episode& ep, const std::vector<Action>& oracle) {
    if (oracle.empty()) return 1.0;
    const int n = ep.num_clips(), m = ep.num_texts();
    Encoded enc = encode({&ep});
    AlignmentState state;
    state.done = (n == 0 || m == 0);
    long correct = 0;
    for (Action act : oracle) {
        Eigen::VectorXd sv = build_state(ep, 0, enc, state);
        std::vector<Action> valid = valid_actions(state, cfg_.action_set, n, m);
        Eigen::VectorXd probs = classify(sv, valid);
        Action best = valid.front();
        double best_p = -1.0;
        for (Action a : valid) {
            auto it = std::find(cfg_.action_set.begin(), cfg_.action_set.end(), a);
            double p = probs[static_cast<int>(it - cfg_.action_set.begin())];
            if (p > best_p) {
                best_p = p;
                best = a;
            }
        }
        if (best == act) ++correct;
        state = step(state, act, n, m);
    }
    return static_cast<double>(correct) / static_cast<double>(oracle.size());
}

// ----- checkpointing -----

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
    return a;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& a, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    std::size_t i = 0;
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = a.at(i++).get<double>();
    return m;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    nlohmann::json j;
    j["video_in_dim"] = c.video_in_dim;
    j["text_in_dim"] = c.text_in_dim;
    j["projected_dim"] = c.projected_dim;
    j["seq_hidden"] = c.seq_hidden;
    j["matched_hidden"] = c.matched_hidden;
    j["action_hidden"] = c.action_hidden;
    j["fc_hidden"] = c.fc_hidden;
    j["lstm_layers"] = c.lstm_layers;
    j["norm"] = norm_name(c.norm);
    j["use_rp"] = c.use_rp;
    nlohmann::json acts = nlohmann::json::array();
    for (Action a : c.action_set) acts.push_back(action_name(a));
    j["action_set"] = acts;
    j["label_smoothing"] = c.label_smoothing;
    j["positional_features"] = c.positional_features;
    return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.video_in_dim = j.at("video_in_dim").get<int>();
    c.text_in_dim = j.at("text_in_dim").get<int>();
    c.projected_dim = j.at("projected_dim").get<int>();
    c.seq_hidden = j.at("seq_hidden").get<int>();
    c.matched_hidden = j.at("matched_hidden").get<int>();
    c.action_hidden = j.at("action_hidden").get<int>();
    c.fc_hidden = j.at("fc_hidden").get<int>();
    c.lstm_layers = j.at("lstm_layers").get<int>();
    c.norm = norm_from_name(j.at("norm").get<std::string>());
    c.use_rp = j.at("use_rp").get<bool>();
    c.action_set.clear();
    for (const auto& a : j.at("action_set")) c.action_set.push_back(action_from_name(a.get<std::string>()));
    c.label_smoothing = j.at("label_smoothing").get<double>();
    c.positional_features = j.at("positional_features").get<int>();
    return c;
}

}  // namespace

std::string Model::to_json_string(const AdamConfig& adam) const {
    nlohmann::json j;
    j["format"] = "neualign-checkpoint-v1";
    j["config"] = config_to_json(cfg_);
    j["seed"] = seed_;
    j["adam"] = {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}, {"step", adam.step}};
    nlohmann::json params = nlohmann::json::array();
    for (ParamTensor* p : const_cast<Model*>(this)->params()) {
        params.push_back({{"name", p->name},
                          {"rows", p->rows()},
                          {"cols", p->cols()},
                          {"value", matrix_to_json(p->value)},
                          {"adam_m", matrix_to_json(p->adam_m)},
                          {"adam_v", matrix_to_json(p->adam_v)},
                          {"lars", p->lars_enabled}});
    }
    j["params"] = params;
    if (impl_->sbn_video) {
        j["sbn"] = {{"video_mean", matrix_to_json(impl_->sbn_video->running_mean)},
                    {"video_var", matrix_to_json(impl_->sbn_video->running_var)},
                    {"text_mean", matrix_to_json(impl_->sbn_text->running_mean)},
                    {"text_var", matrix_to_json(impl_->sbn_text->running_var)}};
    }
    return j.dump();
}

std::pair<Model, AdamConfig> Model::from_json_string(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (j.value("format", "") != "neualign-checkpoint-v1")
        throw IoError("checkpoint: unknown format");
    ModelConfig cfg = config_from_json(j.at("config"));
    Model model(cfg, j.at("seed").get<std::uint64_t>());
    AdamConfig adam;
    adam.beta1 = j.at("adam").at("beta1").get<double>();
    adam.beta2 = j.at("adam").at("beta2").get<double>();
    adam.eps = j.at("adam").at("eps").get<double>();
    adam.step = j.at("adam").at("step").get<long>();

    std::vector<ParamTensor*> params = model.params();
    const auto& jp = j.at("params");
    if (jp.size() != params.size()) throw IoError("checkpoint: parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& e = jp[i];
        ParamTensor* p = params[i];
        if (e.at("name").get<std::string>() != p->name)
            throw IoError("checkpoint: parameter order mismatch at " + p->name);
        Eigen::Index rows = e.at("rows").get<Eigen::Index>();
        Eigen::Index cols = e.at("cols").get<Eigen::Index>();
        if (rows != p->rows() || cols != p->cols())
            throw IoError("checkpoint: shape mismatch for " + p->name);
        p->value = matrix_from_json(e.at("value"), rows, cols);
        p->adam_m = matrix_from_json(e.at("adam_m"), rows, cols);
        p->adam_v = matrix_from_json(e.at("adam_v"), rows, cols);
        p->lars_enabled = e.at("lars").get<bool>();
    }
    if (j.contains("sbn") && model.video_sbn()) {
        const auto& s = j.at("sbn");
        int p = model.config().seq_hidden;
        model.video_sbn()->running_mean = matrix_from_json(s.at("video_mean"), p, 1).col(0);
        model.video_sbn()->running_var = matrix_from_json(s.at("video_var"), p, 1).col(0);
        model.text_sbn()->running_mean = matrix_from_json(s.at("text_mean"), p, 1).col(0);
        model.text_sbn()->running_var = matrix_from_json(s.at("text_var"), p, 1).col(0);
    }
    return {std::move(model), adam};
}

void save_checkpoint(const std::string& path, const Model& model, const AdamConfig& adam) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << model.to_json_string(adam) << "\n";
}

std::pair<Model, AdamConfig> load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return Model::from_json_string(text);
}

}  // namespace align
