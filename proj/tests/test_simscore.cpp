#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace contrasim;

TEST(PerActionSim, Values) {
    EXPECT_EQ(per_action_sim(Action::Re), 1.0);
    EXPECT_EQ(per_action_sim(Action::S), 0.5);
    EXPECT_EQ(per_action_sim(Action::N), 0.0);
    EXPECT_EQ(per_action_sim(Action::Ra), 0.0);
}

TEST(Score, Examples) {
    EXPECT_EQ(score(ActionCounts{0, 0, 1, 26}), 0.0);
    EXPECT_EQ(score(ActionCounts{2, 0, 0, 0}), 1.0);
    EXPECT_NEAR(score(ActionCounts{1, 1, 0, 2}), std::log(1.0 + 0.375 * (std::exp(1.0) - 1.0)), 1e-15);
    EXPECT_NEAR(score(ActionCounts{1, 1, 0, 2}), 0.49735, 5e-6);
}

TEST(Score, EmptyMultisetRejected) { EXPECT_THROW(score(ActionCounts{}), ArgumentError); }

TEST(Score, FromActionList) {
    const std::vector<Action> a{Action::Ra, Action::Re, Action::S, Action::Ra};
    EXPECT_EQ(score(a), score(ActionCounts{1, 1, 0, 2}));
    EXPECT_EQ(ActionCounts::of(a), (ActionCounts{1, 1, 0, 2}));
}

TEST(Score, RangeAndZeroOneCharacterisation) {
    Rng rng(123);
    for (int i = 0; i < 100000; ++i) {
        ActionCounts c{rng.uniform_index(6), rng.uniform_index(6), rng.uniform_index(6), rng.uniform_index(6)};
        if (c.total() == 0) continue;
        const double s = score(c);
        ASSERT_GE(s, 0.0);
        ASSERT_LE(s, 1.0);
        ASSERT_EQ(s == 0.0, c.re == 0 && c.s == 0);
        ASSERT_EQ(s == 1.0, c.s == 0 && c.n == 0 && c.ra == 0);
    }
}

TEST(Score, ConcaveWeightingDominatesIdentity) {
    for (int i = 0; i <= 100; ++i) {
        const double x = i / 100.0;
        EXPECT_GE(std::log(1.0 + x * (std::exp(1.0) - 1.0)) + 1e-15, x);
    }
}

TEST(ActionNames, RoundTrip) {
    for (Action a : kAllActions) EXPECT_EQ(parse_action(to_string(a)), a);
    EXPECT_THROW(parse_action("X"), ArgumentError);
}
