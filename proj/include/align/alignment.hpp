#pragma once

#include <string>
#include <vector>

namespace align {

enum class Action { PopText, PopVideo, Match, MatchRetainText, MatchRetainVideo };

// wire names: "pop_text", "pop_video", "match", "match_retain_text", "match_retain_video"
std::string action_name(Action a);
Action action_from_name(const std::string& name);

using ActionSet = std::vector<Action>;

// {PopVideo, PopText, MatchRetainText}: sufficient for one-text-to-many-videos
// alignment with unmatched clips, and canonical for oracle derivation.
ActionSet yms_action_set();
ActionSet full_action_set();

// One matched slot: the set of video clips and text snippets matched together.
struct MatchSlot {
    std::vector<int> videos;
    std::vector<int> texts;
    // a retain action may still extend this slot
    bool open_text = false;   // top text element still on its stack
    bool open_video = false;  // top video element still on its stack
};

struct AlignmentState {
    int video_cursor = 0;
    int text_cursor = 0;
    std::vector<Action> history;
    std::vector<MatchSlot> slots;
    bool done = false;
};

// Gold (or predicted) alignment: per text snippet, the matched clip indices in
// temporal order; clips in no slot are unmatched.
struct GoldAlignment {
    std::vector<std::vector<int>> text_to_clips;
    std::vector<int> unmatched;

    int text_count() const { return static_cast<int>(text_to_clips.size()); }
    bool operator==(const GoldAlignment& other) const = default;
};

using AlignmentPrediction = GoldAlignment;

// Applies one action; throws ContractError on an action invalid in `state`.
AlignmentState step(const AlignmentState& state, Action action, int num_videos, int num_texts);

// Actions from `set` executable in `state` without violating stack emptiness.
std::vector<Action> valid_actions(const AlignmentState& state, const ActionSet& set, int num_videos,
                                  int num_texts);

// The unique action sequence (under the chosen regime) whose execution replays
// `gold`. Throws ParameterError if the gold cannot be expressed in `set`.
std::vector<Action> derive_oracle_actions(const GoldAlignment& gold, const ActionSet& set,
                                          int num_videos, int num_texts);

// Replays an action sequence from the initial state into an alignment.
AlignmentPrediction execute_actions(const std::vector<Action>& actions, int num_videos,
                                    int num_texts);
AlignmentPrediction state_to_alignment(const AlignmentState& state, int num_videos, int num_texts);

// Length-weighted fraction of clips whose text assignment (or unmatched
// status) agrees with gold.
double video_accuracy(const AlignmentPrediction& pred, const GoldAlignment& gold,
                      const std::vector<int>& clip_lengths);

// Mean over snippets of the temporal IoU between predicted and gold matched
// clip spans; an empty-vs-empty snippet scores 1.
double text_iou(const AlignmentPrediction& pred, const GoldAlignment& gold,
                const std::vector<std::pair<int, int>>& clip_intervals);

}  // namespace align
