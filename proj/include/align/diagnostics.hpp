#pragma once

#include <map>
#include <string>
#include <vector>

#include "align/param.hpp"
#include "align/sequence.hpp"

namespace align {

enum class Group { VideoStack, TextStack, ActionMatchedStacks, Fc };

std::string group_name(Group g);
const std::vector<Group>& all_groups();

// Maps parameter-name prefixes onto the four reporting groups. Every trainable
// param must land in exactly one group.
struct ComponentGrouping {
    std::vector<std::pair<std::string, Group>> prefixes;

    static ComponentGrouping standard();  // video./text./action./matched./head.
    Group group_of(const std::string& param_name) const;
};

struct RatioRow {
    int epoch;
    Group group;
    double ratio;  // +inf when the gradient norm is zero
};

struct FeatureStatRow {
    int epoch;
    std::string stack;  // "video" or "text"
    int dim;
    double mean;
    double variance;
};

struct GroupSummary {
    Group group;
    double mean_ratio;  // over the window, excluding inf sentinels
    int inf_count;
    int window;  // epochs actually used
    bool truncated;  // fewer than the requested epochs were available
};

class DiagnosticsLog {
   public:
    // per-group ||w||/||grad|| from the currently populated gradients
    void record_ratio(int epoch, const std::vector<ParamTensor*>& params,
                      const ComponentGrouping& grouping);

    // per-dimension mean/variance of encoder outputs over unpadded elements
    void record_feature_stats(int epoch, const std::string& stack, const SequenceBatch& encoded,
                              int first_k_dims = 50);

    // last-`window`-epoch mean ratio per group
    std::vector<GroupSummary> summarize(int window = 20) const;

    const std::vector<RatioRow>& ratios() const { return ratios_; }
    const std::vector<FeatureStatRow>& feature_stats() const { return feature_stats_; }

    void write_ratios_csv(const std::string& path) const;
    void write_feature_stats_csv(const std::string& path) const;

    static DiagnosticsLog read_ratios_csv(const std::string& path);

   private:
    std::vector<RatioRow> ratios_;
    std::vector<FeatureStatRow> feature_stats_;
};

struct MetricsRow {
    int epoch;
    std::string split;
    double video_accuracy;
    double text_iou;
    double action_accuracy;
    double loss;
    double lr;
};

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

}  // namespace align
