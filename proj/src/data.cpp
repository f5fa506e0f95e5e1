#include "align/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "align/errors.hpp"

namespace align {

namespace {

int uniform_int(Rng& rng, int lo, int hi) {
    int span = hi - lo + 1;
    int v = lo + static_cast<int>(rng.uniform() * span);
    return std::min(v, hi);
}

std::string fmt9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::string fmt17(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void append_matrix(std::string& out, const Eigen::MatrixXd& m) {
    out += '[';
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (r) out += ',';
        out += '[';
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out += ',';
            out += fmt9(m(r, c));
        }
        out += ']';
    }
    out += ']';
}

Eigen::MatrixXd parse_matrix(const nlohmann::json& j) {
    int rows = static_cast<int>(j.size());
    int cols = rows ? static_cast<int>(j[0].size()) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    return m;
}

}  // namespace

std::vector<Episode> generate(const GeneratorConfig& cfg) {
    if (cfg.num_episodes < 0 || cfg.clips_min > cfg.clips_max || cfg.texts_min > cfg.texts_max ||
        cfg.clips_per_text_min > cfg.clips_per_text_max || cfg.clips_per_text_min < 1)
        throw ParameterError("generate: invalid range in config");
    if (cfg.unmatched_prob < 0.0 || cfg.unmatched_prob > 1.0)
        throw ParameterError("generate: unmatched_prob outside [0,1]");
    if (cfg.clips_min < cfg.texts_max * cfg.clips_per_text_min)
        throw ParameterError("generate: clips range cannot host texts_max texts");

    Rng base(cfg.seed, 0);
    // shared embedding maps from latent space into each modality
    Rng embed_rng = base.split(1);
    double scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
    Eigen::MatrixXd embed_video = sample_gaussian(embed_rng, cfg.video_dim, cfg.latent_dim, 0, scale);
    Eigen::MatrixXd embed_text = sample_gaussian(embed_rng, cfg.text_dim, cfg.latent_dim, 0, scale);

    std::vector<Episode> out;
    out.reserve(cfg.num_episodes);
    for (int e = 0; e < cfg.num_episodes; ++e) {
        Rng rng = base.split(1000 + static_cast<std::uint64_t>(e));
        int n = uniform_int(rng, cfg.clips_min, cfg.clips_max);
        int m = uniform_int(rng, cfg.texts_min, cfg.texts_max);

        int unmatched = 0;
        for (int i = 0; i < n; ++i)
            if (rng.uniform() < cfg.unmatched_prob) ++unmatched;
        int matched = n - unmatched;
        matched = std::clamp(matched, m * cfg.clips_per_text_min,
                             std::min(n, m * cfg.clips_per_text_max));
        unmatched = n - matched;

        // clips per text within the configured range
        std::vector<int> per_text(m, cfg.clips_per_text_min);
        int remaining = matched - m * cfg.clips_per_text_min;
        while (remaining > 0) {
            int j = uniform_int(rng, 0, m - 1);
            if (per_text[j] < cfg.clips_per_text_max) {
                ++per_text[j];
                --remaining;
            }
        }

        // distractor clips land in one of the m+1 gaps between text groups
        std::vector<int> gap_count(m + 1, 0);
        for (int i = 0; i < unmatched; ++i) ++gap_count[uniform_int(rng, 0, m)];

        Episode ep;
        ep.id = "ep" + std::to_string(cfg.seed) + "_" + std::to_string(e);
        ep.video.resize(n, cfg.video_dim);
        ep.text.resize(m, cfg.text_dim);
        ep.gold.text_to_clips.assign(m, {});

        auto video_feature = [&](const Eigen::VectorXd& latent) {
            return (embed_video * latent +
                    cfg.noise_scale * sample_gaussian(rng, cfg.video_dim, 1).col(0))
                .transpose();
        };

        int clip = 0;
        for (int j = 0; j <= m; ++j) {
            for (int g = 0; g < gap_count[j]; ++g) {
                Eigen::VectorXd distractor = sample_gaussian(rng, cfg.latent_dim, 1).col(0);
                ep.video.row(clip) = video_feature(distractor);
                ep.gold.unmatched.push_back(clip);
                ++clip;
            }
            if (j == m) break;
            Eigen::VectorXd latent = sample_gaussian(rng, cfg.latent_dim, 1).col(0);
            ep.text.row(j) = (embed_text * latent +
                              cfg.noise_scale * sample_gaussian(rng, cfg.text_dim, 1).col(0))
                                 .transpose();
            for (int k = 0; k < per_text[j]; ++k) {
                ep.video.row(clip) = video_feature(latent);
                ep.gold.text_to_clips[j].push_back(clip);
                ++clip;
            }
        }
        std::sort(ep.gold.unmatched.begin(), ep.gold.unmatched.end());

        int frame = 0;
        for (int i = 0; i < n; ++i) {
            int len = uniform_int(rng, 5, 50);
            ep.intervals.emplace_back(frame, frame + len);
            frame += len;
        }
        out.push_back(std::move(ep));
    }
    return out;
}

std::vector<Episode> split_training_episode(const Episode& ep, const ActionSet& set,
                                            int max_actions) {
    std::vector<Action> oracle =
        derive_oracle_actions(ep.gold, set, ep.num_clips(), ep.num_texts());
    if (static_cast<int>(oracle.size()) <= max_actions) return {ep};

    // safe cut points: action indices after which no slot is open
    AlignmentState s;
    std::vector<std::pair<int, std::pair<int, int>>> safe;  // (actions consumed, cursors)
    for (int i = 0; i < static_cast<int>(oracle.size()); ++i) {
        s = step(s, oracle[i], ep.num_clips(), ep.num_texts());
        bool open = !s.slots.empty() && (s.slots.back().open_text || s.slots.back().open_video);
        if (!open) safe.push_back({i + 1, {s.video_cursor, s.text_cursor}});
    }

    std::vector<Episode> out;
    int chunk_start_action = 0, v0 = 0, t0 = 0, piece = 0;
    auto emit = [&](int v1, int t1) {
        Episode sub;
        sub.id = ep.id + "#" + std::to_string(piece++);
        sub.video = ep.video.middleRows(v0, v1 - v0);
        sub.text = ep.text.middleRows(t0, t1 - t0);
        sub.intervals.assign(ep.intervals.begin() + v0, ep.intervals.begin() + v1);
        sub.gold.text_to_clips.assign(t1 - t0, {});
        for (int j = t0; j < t1; ++j)
            for (int c : ep.gold.text_to_clips[j]) sub.gold.text_to_clips[j - t0].push_back(c - v0);
        for (int c : ep.gold.unmatched)
            if (c >= v0 && c < v1) sub.gold.unmatched.push_back(c - v0);
        out.push_back(std::move(sub));
        v0 = v1;
        t0 = t1;
    };

    std::size_t si = 0;
    while (chunk_start_action < static_cast<int>(oracle.size())) {
        if (static_cast<int>(oracle.size()) - chunk_start_action <= max_actions) {
            emit(ep.num_clips(), ep.num_texts());
            break;
        }
        // furthest safe point within budget
        int best = -1;
        std::pair<int, int> cursors{};
        for (std::size_t k = si; k < safe.size() && safe[k].first - chunk_start_action <= max_actions;
             ++k) {
            best = safe[k].first;
            cursors = safe[k].second;
            si = k + 1;
        }
        if (best <= chunk_start_action)
            throw ParameterError("split_training_episode: a single slot exceeds the action budget");
        chunk_start_action = best;
        emit(cursors.first, cursors.second);
    }
    return out;
}

Standardizer fit_standardizer(const std::vector<Episode>& train_episodes) {
    long vrows = 0, trows = 0;
    for (const auto& ep : train_episodes) {
        vrows += ep.num_clips();
        trows += ep.num_texts();
    }
    if (vrows < 2 || trows < 2)
        throw ParameterError("fit_standardizer: needs at least 2 elements per modality");
    int dv = static_cast<int>(train_episodes[0].video.cols());
    int dt = static_cast<int>(train_episodes[0].text.cols());

    auto fit = [](auto get, long rows, int dim, const std::vector<Episode>& eps,
                  Eigen::VectorXd& mean, Eigen::VectorXd& stdv) {
        mean = Eigen::VectorXd::Zero(dim);
        for (const auto& ep : eps) mean += get(ep).colwise().sum().transpose();
        mean /= static_cast<double>(rows);
        Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
        for (const auto& ep : eps) {
            const Eigen::MatrixXd& m = get(ep);
            for (Eigen::Index r = 0; r < m.rows(); ++r)
                var += (m.row(r).transpose() - mean).cwiseAbs2();
        }
        var /= static_cast<double>(rows);
        stdv = var.cwiseSqrt().cwiseMax(1e-8);
    };
    Standardizer st;
    fit([](const Episode& e) -> const Eigen::MatrixXd& { return e.video; }, vrows, dv,
        train_episodes, st.video_mean, st.video_std);
    fit([](const Episode& e) -> const Eigen::MatrixXd& { return e.text; }, trows, dt,
        train_episodes, st.text_mean, st.text_std);
    return st;
}

void Standardizer::apply(Episode& ep) const {
    ep.video = (ep.video.rowwise() - video_mean.transpose()).array().rowwise() /
               video_std.transpose().array();
    ep.text = (ep.text.rowwise() - text_mean.transpose()).array().rowwise() /
              text_std.transpose().array();
}

void write_episodes(const std::string& path, const std::vector<Episode>& episodes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    for (const Episode& ep : episodes) {
        std::string line = "{\"id\":\"" + ep.id + "\",\"video\":";
        append_matrix(line, ep.video);
        line += ",\"intervals\":[";
        for (std::size_t i = 0; i < ep.intervals.size(); ++i) {
            if (i) line += ',';
            line += '[' + std::to_string(ep.intervals[i].first) + ',' +
                    std::to_string(ep.intervals[i].second) + ']';
        }
        line += "],\"text\":";
        append_matrix(line, ep.text);
        line += ",\"gold\":[";
        for (int j = 0; j < ep.gold.text_count(); ++j) {
            if (j) line += ',';
            line += '[' + std::to_string(j) + ",[";
            for (std::size_t k = 0; k < ep.gold.text_to_clips[j].size(); ++k) {
                if (k) line += ',';
                line += std::to_string(ep.gold.text_to_clips[j][k]);
            }
            line += "]]";
        }
        line += "],\"unmatched\":[";
        for (std::size_t k = 0; k < ep.gold.unmatched.size(); ++k) {
            if (k) line += ',';
            line += std::to_string(ep.gold.unmatched[k]);
        }
        line += "]}\n";
        f << line;
    }
}

std::vector<Episode> read_episodes(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    std::vector<Episode> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        Episode ep;
        ep.id = j.at("id").get<std::string>();
        ep.video = parse_matrix(j.at("video"));
        ep.text = parse_matrix(j.at("text"));
        for (const auto& iv : j.at("intervals"))
            ep.intervals.emplace_back(iv[0].get<int>(), iv[1].get<int>());
        ep.gold.text_to_clips.assign(ep.text.rows(), {});
        for (const auto& g : j.at("gold")) {
            int t = g[0].get<int>();
            for (const auto& c : g[1]) ep.gold.text_to_clips.at(t).push_back(c.get<int>());
        }
        for (const auto& c : j.at("unmatched")) ep.gold.unmatched.push_back(c.get<int>());
        out.push_back(std::move(ep));
    }
    return out;
}

void write_standardizer(const std::string& path, const Standardizer& st) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    auto vec = [&](const Eigen::VectorXd& v) {
        std::string s = "[";
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            if (i) s += ',';
            s += fmt17(v[i]);
        }
        return s + "]";
    };
    f << "{\"video_mean\":" << vec(st.video_mean) << ",\"video_std\":" << vec(st.video_std)
      << ",\"text_mean\":" << vec(st.text_mean) << ",\"text_std\":" << vec(st.text_std) << "}\n";
}

Standardizer read_standardizer(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    nlohmann::json j;
    f >> j;
    auto vec = [&](const char* key) {
        const auto& a = j.at(key);
        Eigen::VectorXd v(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) v[i] = a[i].get<double>();
        return v;
    };
    Standardizer st;
    st.video_mean = vec("video_mean");
    st.video_std = vec("video_std");
    st.text_mean = vec("text_mean");
    st.text_std = vec("text_std");
    return st;
}

}  // namespace align
