#include "align/alignment.hpp"

#include <algorithm>
#include <set>

#include "align/errors.hpp"

namespace align {

std::string action_name(Action a) {
    switch (a) {
        case Action::PopText:
            return "pop_text";
        case Action::PopVideo:
            return "pop_video";
        case Action::Match:
            return "match";
        case Action::MatchRetainText:
            return "match_retain_text";
        case Action::MatchRetainVideo:
            return "match_retain_video";
    }
    throw ParameterError("unknown action");
}

Action action_from_name(const std::string& name) {
    for (Action a : full_action_set())
        if (action_name(a) == name) return a;
    throw ParameterError("unknown action name: " + name);
}

ActionSet yms_action_set() { return {Action::PopVideo, Action::PopText, Action::MatchRetainText}; }

ActionSet full_action_set() {
    return {Action::PopText, Action::PopVideo, Action::Match, Action::MatchRetainText,
            Action::MatchRetainVideo};
}

namespace {

bool action_legal(const AlignmentState& s, Action a, int n, int m) {
    if (s.done) return false;
    switch (a) {
        case Action::PopText:
            return s.text_cursor < m;
        case Action::PopVideo:
            return s.video_cursor < n;
        default:
            return s.video_cursor < n && s.text_cursor < m;
    }
}

}  // namespace

AlignmentState step(const AlignmentState& state, Action action, int num_videos, int num_texts) {
    if (!action_legal(state, action, num_videos, num_texts))
        throw ContractError("step: action " + action_name(action) + " illegal in current state");
    AlignmentState s = state;
    switch (action) {
        case Action::PopText:
            if (!s.slots.empty()) s.slots.back().open_text = false;
            ++s.text_cursor;
            break;
        case Action::PopVideo:
            if (!s.slots.empty()) s.slots.back().open_video = false;
            ++s.video_cursor;
            break;
        case Action::Match:
            s.slots.push_back({{s.video_cursor}, {s.text_cursor}, false, false});
            ++s.video_cursor;
            ++s.text_cursor;
            break;
        case Action::MatchRetainText: {
            bool extend = !s.slots.empty() && s.slots.back().open_text &&
                          s.slots.back().texts == std::vector<int>{s.text_cursor};
            if (extend)
                s.slots.back().videos.push_back(s.video_cursor);
            else
                s.slots.push_back({{s.video_cursor}, {s.text_cursor}, true, false});
            ++s.video_cursor;
            break;
        }
        case Action::MatchRetainVideo: {
            bool extend = !s.slots.empty() && s.slots.back().open_video &&
                          s.slots.back().videos == std::vector<int>{s.video_cursor};
            if (extend)
                s.slots.back().texts.push_back(s.text_cursor);
            else
                s.slots.push_back({{s.video_cursor}, {s.text_cursor}, false, true});
            ++s.text_cursor;
            break;
        }
    }
    s.history.push_back(action);
    s.done = (s.video_cursor >= num_videos || s.text_cursor >= num_texts);
    return s;
}

std::vector<Action> valid_actions(const AlignmentState& state, const ActionSet& set, int num_videos,
                                  int num_texts) {
    std::vector<Action> out;
    for (Action a : set)
        if (action_legal(state, a, num_videos, num_texts)) out.push_back(a);
    return out;
}

namespace {

void validate_gold(const GoldAlignment& gold, int num_videos, int num_texts) {
    if (gold.text_count() != num_texts)
        throw ParameterError("gold: text count mismatch");
    int last = -1;
    std::set<int> seen;
    for (const auto& clips : gold.text_to_clips) {
        for (int c : clips) {
            if (c < 0 || c >= num_videos) throw ParameterError("gold: clip index out of range");
            if (c <= last) throw ParameterError("gold: matched clips not monotone");
            if (!seen.insert(c).second) throw ParameterError("gold: clip matched twice");
            last = c;
        }
    }
    for (int c : gold.unmatched) {
        if (c < 0 || c >= num_videos) throw ParameterError("gold: unmatched index out of range");
        if (seen.count(c)) throw ParameterError("gold: clip both matched and unmatched");
    }
}

bool contains(const ActionSet& set, Action a) {
    return std::find(set.begin(), set.end(), a) != set.end();
}

}  // namespace

std::vector<Action> derive_oracle_actions(const GoldAlignment& gold, const ActionSet& set,
                                          int num_videos, int num_texts) {
    validate_gold(gold, num_videos, num_texts);
    const bool retain = contains(set, Action::MatchRetainText);
    const bool plain_match = contains(set, Action::Match);
    int max_clips = 0;
    for (const auto& clips : gold.text_to_clips)
        max_clips = std::max(max_clips, static_cast<int>(clips.size()));
    if (!retain && max_clips > 1)
        throw ParameterError(
            "derive_oracle_actions: one-to-many gold needs match_retain_text in the action set");
    if (!retain && !plain_match && max_clips >= 1)
        throw ParameterError("derive_oracle_actions: no matching action available");
    if (!contains(set, Action::PopText) && (retain || max_clips == 0))
        throw ParameterError("derive_oracle_actions: pop_text required but not in the action set");

    std::vector<Action> actions;
    int v = 0, j = 0, matched_in_j = 0;
    while (v < num_videos && j < num_texts) {
        const auto& clips = gold.text_to_clips[j];
        if (matched_in_j < static_cast<int>(clips.size())) {
            int next_clip = clips[matched_in_j];
            if (v == next_clip) {
                if (retain) {
                    actions.push_back(Action::MatchRetainText);
                    ++v;
                    ++matched_in_j;
                } else {
                    actions.push_back(Action::Match);
                    ++v;
                    ++j;
                    matched_in_j = 0;
                }
            } else {
                if (!contains(set, Action::PopVideo))
                    throw ParameterError("derive_oracle_actions: pop_video required");
                actions.push_back(Action::PopVideo);
                ++v;
            }
        } else {
            actions.push_back(Action::PopText);
            ++j;
            matched_in_j = 0;
        }
    }
    return actions;
}

AlignmentPrediction state_to_alignment(const AlignmentState& state, int num_videos, int num_texts) {
    AlignmentPrediction pred;
    pred.text_to_clips.assign(num_texts, {});
    std::vector<bool> matched(num_videos, false);
    for (const MatchSlot& slot : state.slots) {
        for (int t : slot.texts)
            for (int c : slot.videos) pred.text_to_clips[t].push_back(c);
        for (int c : slot.videos) matched[c] = true;
    }
    for (auto& clips : pred.text_to_clips) std::sort(clips.begin(), clips.end());
    for (int c = 0; c < num_videos; ++c)
        if (!matched[c]) pred.unmatched.push_back(c);
    return pred;
}

AlignmentPrediction execute_actions(const std::vector<Action>& actions, int num_videos,
                                    int num_texts) {
    AlignmentState s;
    s.done = (num_videos == 0 || num_texts == 0);
    for (Action a : actions) s = step(s, a, num_videos, num_texts);
    return state_to_alignment(s, num_videos, num_texts);
}

namespace {

// clip index -> matched text index, or -1
std::vector<int> clip_assignment(const GoldAlignment& g, int num_videos) {
    std::vector<int> out(num_videos, -1);
    for (int j = 0; j < g.text_count(); ++j)
        for (int c : g.text_to_clips[j]) out.at(c) = j;
    return out;
}

}  // namespace

double video_accuracy(const AlignmentPrediction& pred, const GoldAlignment& gold,
                      const std::vector<int>& clip_lengths) {
    const int n = static_cast<int>(clip_lengths.size());
    if (pred.text_count() != gold.text_count())
        throw ShapeError("video_accuracy: text count mismatch");
    std::vector<int> pa = clip_assignment(pred, n);
    std::vector<int> ga = clip_assignment(gold, n);
    long total = 0, correct = 0;
    for (int c = 0; c < n; ++c) {
        total += clip_lengths[c];
        if (pa[c] == ga[c]) correct += clip_lengths[c];
    }
    return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

double text_iou(const AlignmentPrediction& pred, const GoldAlignment& gold,
                const std::vector<std::pair<int, int>>& clip_intervals) {
    if (pred.text_count() != gold.text_count())
        throw ShapeError("text_iou: text count mismatch");
    auto clip_len = [&](int c) {
        const auto& iv = clip_intervals.at(c);
        if (iv.second < iv.first) throw ShapeError("text_iou: malformed interval");
        return iv.second - iv.first;
    };
    double total = 0.0;
    for (int j = 0; j < gold.text_count(); ++j) {
        std::set<int> p(pred.text_to_clips[j].begin(), pred.text_to_clips[j].end());
        std::set<int> g(gold.text_to_clips[j].begin(), gold.text_to_clips[j].end());
        if (p.empty() && g.empty()) {
            total += 1.0;
            continue;
        }
        long inter = 0, uni = 0;
        for (int c : p) {
            uni += clip_len(c);
            if (g.count(c)) inter += clip_len(c);
        }
        for (int c : g)
            if (!p.count(c)) uni += clip_len(c);
        total += uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }
    return gold.text_count() == 0 ? 1.0 : total / gold.text_count();
}

}  // namespace align
