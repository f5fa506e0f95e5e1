#include <doctest.h>

#include "align/alignment.hpp"
#include "align/errors.hpp"
#include "align/rng.hpp"

using namespace align;

namespace {

// random monotone gold: per text 0..3 clips, distractors sprinkled in the gaps
GoldAlignment random_gold(Rng& rng, int max_texts, int* out_n, int* out_m) {
    int m = 1 + static_cast<int>(rng.uniform() * max_texts);
    GoldAlignment gold;
    gold.text_to_clips.resize(m);
    int clip = 0;
    for (int j = 0; j <= m; ++j) {
        int distract = static_cast<int>(rng.uniform() * 3);
        for (int d = 0; d < distract; ++d) gold.unmatched.push_back(clip++);
        if (j == m) break;
        int k = static_cast<int>(rng.uniform() * 4);  // 0..3 clips
        for (int c = 0; c < k; ++c) gold.text_to_clips[j].push_back(clip++);
    }
    if (clip == 0) {  // degenerate: force one matched clip
        gold.text_to_clips[0].push_back(0);
        clip = 1;
    }
    *out_n = clip;
    *out_m = m;
    return gold;
}

}  // namespace

TEST_CASE("action names round trip") {
    for (Action a : full_action_set()) CHECK(action_from_name(action_name(a)) == a);
    CHECK(action_name(Action::MatchRetainText) == "match_retain_text");
    CHECK_THROWS_AS(action_from_name("bogus"), ParameterError);
}

TEST_CASE("yms regime content") {
    ActionSet s = yms_action_set();
    REQUIRE(s.size() == 3);
    CHECK(s[0] == Action::PopVideo);
    CHECK(s[1] == Action::PopText);
    CHECK(s[2] == Action::MatchRetainText);
}

TEST_CASE("step: pop and match semantics") {
    AlignmentState st;
    st = step(st, Action::MatchRetainText, 4, 2);  // v0 matched to s0, s0 retained
    CHECK(st.video_cursor == 1);
    CHECK(st.text_cursor == 0);
    REQUIRE(st.slots.size() == 1);
    CHECK(st.slots[0].videos == std::vector<int>{0});
    CHECK(st.slots[0].texts == std::vector<int>{0});
    CHECK(st.slots[0].open_text);

    st = step(st, Action::MatchRetainText, 4, 2);  // v1 joins the open slot
    REQUIRE(st.slots.size() == 1);
    CHECK(st.slots[0].videos == std::vector<int>{0, 1});

    st = step(st, Action::PopText, 4, 2);  // closes s0
    CHECK(st.text_cursor == 1);
    CHECK_FALSE(st.slots[0].open_text);

    st = step(st, Action::PopVideo, 4, 2);  // v2 unmatched
    CHECK(st.video_cursor == 3);

    st = step(st, Action::MatchRetainText, 4, 2);  // v3 to s1; video exhausts
    CHECK(st.done);

    AlignmentPrediction pred = state_to_alignment(st, 4, 2);
    CHECK(pred.text_to_clips == std::vector<std::vector<int>>{{0, 1}, {3}});
    CHECK(pred.unmatched == std::vector<int>{2});
}

TEST_CASE("step: invalid actions rejected") {
    AlignmentState st;
    st = step(st, Action::PopText, 2, 1);  // text stack now empty
    CHECK(st.done);
    CHECK_THROWS_AS(step(st, Action::PopVideo, 2, 1), ContractError);
}

TEST_CASE("valid_actions shrinks near exhaustion") {
    AlignmentState st;
    std::vector<Action> v = valid_actions(st, yms_action_set(), 1, 1);
    CHECK(v.size() == 3);
    st = step(st, Action::PopVideo, 2, 1);
    v = valid_actions(st, yms_action_set(), 2, 1);
    // one clip and one text left: everything still legal
    CHECK(v.size() == 3);
}

TEST_CASE("oracle: documented example") {
    GoldAlignment gold;
    gold.text_to_clips = {{0, 1}, {3}};
    gold.unmatched = {2};
    std::vector<Action> acts = derive_oracle_actions(gold, yms_action_set(), 4, 2);
    std::vector<Action> expect = {Action::MatchRetainText, Action::MatchRetainText,
                                  Action::PopText, Action::PopVideo, Action::MatchRetainText};
    CHECK(acts == expect);
    CHECK(execute_actions(acts, 4, 2) == gold);
}

TEST_CASE("oracle: rejects golds outside the regime") {
    GoldAlignment gold;
    gold.text_to_clips = {{0}, {0}};  // one clip shared by two texts
    CHECK_THROWS_AS(derive_oracle_actions(gold, yms_action_set(), 1, 2), ParameterError);

    GoldAlignment cross;
    cross.text_to_clips = {{1}, {0}};  // non-monotone
    CHECK_THROWS_AS(derive_oracle_actions(cross, yms_action_set(), 2, 2), ParameterError);

    GoldAlignment oob;
    oob.text_to_clips = {{5}};
    CHECK_THROWS_AS(derive_oracle_actions(oob, yms_action_set(), 2, 1), ParameterError);
}

TEST_CASE("round trip: 1000 random monotone golds") {
    Rng rng(77, 0);
    for (int i = 0; i < 1000; ++i) {
        int n = 0, m = 0;
        GoldAlignment gold = random_gold(rng, 6, &n, &m);
        std::vector<Action> acts = derive_oracle_actions(gold, yms_action_set(), n, m);
        AlignmentPrediction pred = execute_actions(acts, n, m);
        REQUIRE(pred == gold);

        std::vector<int> lengths(n, 1);
        std::vector<std::pair<int, int>> intervals;
        for (int c = 0; c < n; ++c) intervals.push_back({c * 10, c * 10 + 10});
        CHECK(video_accuracy(pred, gold, lengths) == 1.0);
        CHECK(text_iou(pred, gold, intervals) == 1.0);
    }
}

TEST_CASE("video accuracy: length weighting") {
    GoldAlignment gold;
    gold.text_to_clips = {{0, 1}, {3}};
    gold.unmatched = {2};
    // prediction assigns clip 2 to text 1: clips 0,1,3... clip 3 also moved
    AlignmentPrediction pred;
    pred.text_to_clips = {{0, 1}, {2, 3}};
    std::vector<int> lengths = {10, 20, 30, 40};
    // clips 0,1,3 correct (10+20+40), clip 2 wrong
    CHECK(video_accuracy(pred, gold, lengths) == doctest::Approx(0.7));

    AlignmentPrediction wrong;
    wrong.text_to_clips = {{}, {0, 1}};
    wrong.unmatched = {2, 3};
    GoldAlignment gold2;
    gold2.text_to_clips = {{0, 1}, {2, 3}};
    CHECK(video_accuracy(wrong, gold2, lengths) == 0.0);
}

TEST_CASE("text iou: interval arithmetic and empty conventions") {
    std::vector<std::pair<int, int>> intervals = {{0, 10}, {10, 30}, {30, 60}};
    GoldAlignment gold;
    gold.text_to_clips = {{0, 1}, {}};
    gold.unmatched = {2};
    AlignmentPrediction pred;
    pred.text_to_clips = {{1, 2}, {}};
    pred.unmatched = {0};
    // snippet 0: pred [10,60), gold [0,30) -> inter [10,30)=20, union [0,60)=60
    // snippet 1: empty vs empty -> 1
    CHECK(text_iou(pred, gold, intervals) == doctest::Approx((20.0 / 60.0 + 1.0) / 2.0));

    AlignmentPrediction half;
    half.text_to_clips = {{0, 1}, {2}};
    // snippet 1: pred nonempty vs gold empty -> 0
    CHECK(text_iou(half, gold, intervals) == doctest::Approx((1.0 + 0.0) / 2.0));
}
