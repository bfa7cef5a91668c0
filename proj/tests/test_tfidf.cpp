#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace contrasim;

namespace {

std::string repeat_words(const std::vector<std::string>& vocab, std::size_t n) {
    std::string out;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += vocab[i % vocab.size()];
    }
    return out;
}

}  // namespace

TEST(SplitWords, WhitespaceRuns) {
    const auto w = split_words("  a\tbb\n\nccc  ");
    ASSERT_EQ(w.size(), 3u);
    EXPECT_EQ(w[0], "a");
    EXPECT_EQ(w[1], "bb");
    EXPECT_EQ(w[2], "ccc");
    EXPECT_TRUE(split_words("").empty());
}

TEST(TfIdf, SmoothedIdfMatchesFormula) {
    const std::vector<std::string> docs{"a b", "a c", "a b d"};
    const auto m = TfIdfModel::fit(docs);
    EXPECT_DOUBLE_EQ(m.idf("a"), std::log(4.0 / 4.0) + 1.0);
    EXPECT_DOUBLE_EQ(m.idf("b"), std::log(4.0 / 3.0) + 1.0);
    EXPECT_DOUBLE_EQ(m.idf("zzz"), std::log(4.0 / 1.0) + 1.0);
}

TEST(TfIdf, ScoresScaledToTopWord) {
    const std::vector<std::string> docs{"a b", "a c"};
    const auto m = TfIdfModel::fit(docs);
    const auto s = m.scores("a a b");
    const double a = 2.0 * m.idf("a"), b = 1.0 * m.idf("b");
    const double top = std::max(a, b);
    EXPECT_DOUBLE_EQ(s.at("a"), a / top);
    EXPECT_DOUBLE_EQ(s.at("b"), b / top);
}

TEST(TfIdf, JsonRoundTrip) {
    const std::vector<std::string> docs{"x y", "y z z"};
    const auto m = TfIdfModel::fit(docs);
    const auto back = TfIdfModel::from_json(m.to_json());
    for (const char* w : {"x", "y", "z", "q"}) EXPECT_DOUBLE_EQ(back.idf(w), m.idf(w));
}

TEST(TfIdfPrune, ShortTextUnchanged) {
    const std::vector<std::string> docs{"one two"};
    const auto m = TfIdfModel::fit(docs);
    const std::string text = "w1 w2  w3 w4 w5\tw6 w7 w8 w9 w10";
    EXPECT_EQ(tfidf_prune(text, m), text);
}

TEST(TfIdfPrune, EmptyText) {
    const std::vector<std::string> docs{"one"};
    EXPECT_EQ(tfidf_prune("", TfIdfModel::fit(docs)), "");
}

TEST(TfIdfPrune, UniformScoresTruncateToCap) {
    // Every word occurs equally often and is unseen in training, so all score 1.
    const std::vector<std::string> docs{"unrelated"};
    const auto m = TfIdfModel::fit(docs);
    const std::vector<std::string> vocab{"p", "q", "r", "s"};
    const std::string text = repeat_words(vocab, 3100);
    EXPECT_EQ(tfidf_prune(text, m), repeat_words(vocab, 3000));
}

TEST(TfIdfPrune, DropsLowScoringWords) {
    // "the" is everywhere in training (idf 1) and rare in the text; "rally" dominates.
    const std::vector<std::string> docs{"the a", "the b", "the c", "the d"};
    const auto m = TfIdfModel::fit(docs);
    std::string text = "the ";
    for (int i = 0; i < 40; ++i) text += "rally rally rally rally rally rally rally rally rally rally ";
    const auto out = tfidf_prune(text, m, 0.2, 100);
    EXPECT_EQ(split_words(out).size(), 100u);
    EXPECT_EQ(out.find("the"), std::string::npos);
}

TEST(TfIdfPrune, UnfittedModelRejected) {
    EXPECT_THROW(tfidf_prune("a b", TfIdfModel{}), ArgumentError);
}

TEST(TfIdfPrune, NeverExceedsCapAndIdentityBelowIt) {
    Rng rng(17);
    const std::vector<std::string> docs{"a b c", "d e f", "a d g"};
    const auto m = TfIdfModel::fit(docs);
    const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"};
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t cap = 1 + rng.uniform_index(50);
        const std::size_t n = rng.uniform_index(120);
        std::string text;
        for (std::size_t i = 0; i < n; ++i) text += vocab[rng.uniform_index(vocab.size())] + " ";
        const auto out = tfidf_prune(text, m, 0.2, cap);
        EXPECT_LE(split_words(out).size(), cap);
        if (n <= cap) {
            EXPECT_EQ(out, text);
        }
    }
}
