#include "align/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "align/errors.hpp"

namespace align {

std::string group_name(Group g) {
    switch (g) {
        case Group::VideoStack:
            return "video_stack";
        case Group::TextStack:
            return "text_stack";
        case Group::ActionMatchedStacks:
            return "action_matched_stacks";
        case Group::Fc:
            return "fc";
    }
    throw ParameterError("unknown group");
}

const std::vector<Group>& all_groups() {
    static const std::vector<Group> groups = {Group::VideoStack, Group::TextStack,
                                              Group::ActionMatchedStacks, Group::Fc};
    return groups;
}

ComponentGrouping ComponentGrouping::standard() {
    return {{{"video.", Group::VideoStack},
             {"text.", Group::TextStack},
             {"action.", Group::ActionMatchedStacks},
             {"matched.", Group::ActionMatchedStacks},
             {"head.", Group::Fc}}};
}

Group ComponentGrouping::group_of(const std::string& param_name) const {
    for (const auto& [prefix, group] : prefixes)
        if (param_name.rfind(prefix, 0) == 0) return group;
    throw ParameterError("no component group for param " + param_name);
}

void DiagnosticsLog::record_ratio(int epoch, const std::vector<ParamTensor*>& params,
                                  const ComponentGrouping& grouping) {
    if (!ratios_.empty() && epoch < ratios_.back().epoch)
        throw ContractError("record_ratio: epochs must be non-decreasing");
    for (Group g : all_groups()) {
        double w2 = 0.0, g2 = 0.0;
        for (ParamTensor* p : params) {
            if (grouping.group_of(p->name) != g) continue;
            w2 += p->value.squaredNorm();
            g2 += p->grad.squaredNorm();
        }
        double ratio = (g2 == 0.0) ? std::numeric_limits<double>::infinity()
                                   : std::sqrt(w2) / std::sqrt(g2);
        ratios_.push_back({epoch, g, ratio});
    }
}

void DiagnosticsLog::record_feature_stats(int epoch, const std::string& stack,
                                          const SequenceBatch& encoded, int first_k_dims) {
    const int dims = std::min(first_k_dims, encoded.dim());
    const long m = encoded.unpadded_count();
    if (m == 0) return;
    for (int d = 0; d < dims; ++d) {
        double sum = 0.0, sq = 0.0;
        for (int b = 0; b < encoded.batch(); ++b) {
            for (int t = 0; t < encoded.lengths[b]; ++t) {
                double v = encoded.features[b](t, d);
                sum += v;
                sq += v * v;
            }
        }
        double mean = sum / static_cast<double>(m);
        double var = sq / static_cast<double>(m) - mean * mean;
        feature_stats_.push_back({epoch, stack, d, mean, var});
    }
}

std::vector<GroupSummary> DiagnosticsLog::summarize(int window) const {
    int last_epoch = -1;
    for (const auto& r : ratios_) last_epoch = std::max(last_epoch, r.epoch);
    if (last_epoch < 0) return {};
    int first_epoch = last_epoch;
    for (const auto& r : ratios_) first_epoch = std::min(first_epoch, r.epoch);
    int available = last_epoch - first_epoch + 1;
    bool truncated = available < window;
    int used = std::min(window, available);
    int cutoff = last_epoch - used + 1;

    std::vector<GroupSummary> out;
    for (Group g : all_groups()) {
        double sum = 0.0;
        int n = 0, inf_count = 0;
        for (const auto& r : ratios_) {
            if (r.group != g || r.epoch < cutoff) continue;
            if (std::isinf(r.ratio)) {
                ++inf_count;
            } else {
                sum += r.ratio;
                ++n;
            }
        }
        out.push_back({g, n ? sum / n : std::numeric_limits<double>::quiet_NaN(), inf_count, used,
                       truncated});
    }
    return out;
}

namespace {

std::string csv_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

void DiagnosticsLog::write_ratios_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "epoch,group,ratio\n";
    for (const auto& r : ratios_)
        f << r.epoch << ',' << group_name(r.group) << ',' << csv_double(r.ratio) << '\n';
}

void DiagnosticsLog::write_feature_stats_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "epoch,stack,dim,mean,variance\n";
    for (const auto& r : feature_stats_)
        f << r.epoch << ',' << r.stack << ',' << r.dim << ',' << csv_double(r.mean) << ','
          << csv_double(r.variance) << '\n';
}

DiagnosticsLog DiagnosticsLog::read_ratios_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot read " + path);
    DiagnosticsLog log;
    std::string line;
    std::getline(f, line);  // header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string epoch_s, group_s, ratio_s;
        std::getline(ss, epoch_s, ',');
        std::getline(ss, group_s, ',');
        std::getline(ss, ratio_s, ',');
        Group g = Group::VideoStack;
        for (Group cand : all_groups())
            if (group_name(cand) == group_s) g = cand;
        double ratio = (ratio_s == "inf") ? std::numeric_limits<double>::infinity()
                                          : std::stod(ratio_s);
        log.ratios_.push_back({std::stoi(epoch_s), g, ratio});
    }
    return log;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot write " + path);
    f << "epoch,split,video_accuracy,text_iou,action_accuracy,loss,lr\n";
    for (const auto& r : rows)
        f << r.epoch << ',' << r.split << ',' << csv_double(r.video_accuracy) << ','
          << csv_double(r.text_iou) << ',' << csv_double(r.action_accuracy) << ','
          << csv_double(r.loss) << ',' << csv_double(r.lr) << '\n';
}

}  // namespace align
