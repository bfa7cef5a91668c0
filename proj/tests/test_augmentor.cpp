#include <gtest/gtest.h>

#include <set>

#include "support.hpp"

using namespace contrasim;
using testing_support::make_corpus;
using testing_support::TempDir;

TEST(Distribution, RenormalizesAndRejectsNegatives) {
    const ActionDistribution d(1, 1, 1, 1);
    for (Action a : kAllActions) EXPECT_DOUBLE_EQ(d.p(a), 0.25);
    EXPECT_TRUE(d.renormalized());

    const ActionDistribution def;
    EXPECT_NEAR(def.raw_sum(), 0.9, 1e-12);
    EXPECT_NEAR(def.p(Action::Ra), 0.775 / 0.9, 1e-12);

    try {
        ActionDistribution(0.1, 0.1, 0.1, -0.1);
        FAIL();
    } catch (const ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find("probability must be >= 0"), std::string::npos);
    }
    EXPECT_THROW(ActionDistribution(0, 0, 0, 0), ArgumentError);
}

TEST(Bands, Boundaries) {
    const QualityBands b;
    EXPECT_TRUE(b.accepts(Action::Re, 0.66));
    EXPECT_TRUE(b.accepts(Action::Re, 1.0));
    EXPECT_FALSE(b.accepts(Action::Re, 0.6599));
    EXPECT_TRUE(b.accepts(Action::S, 0.33));
    EXPECT_FALSE(b.accepts(Action::S, 0.66));
    EXPECT_TRUE(b.accepts(Action::N, 0.0));
    EXPECT_FALSE(b.accepts(Action::N, 0.33));
    EXPECT_THROW((QualityBands{0.7, 0.6}.validate()), ArgumentError);
}

TEST(Sampling, LengthComesFromCorpus) {
    Rng rng(4);
    const std::vector<std::size_t> lengths{2, 5, 9};
    std::set<std::size_t> seen;
    for (int i = 0; i < 300; ++i) seen.insert(sample_length(lengths, rng));
    EXPECT_EQ(seen, (std::set<std::size_t>{2, 5, 9}));
    const std::vector<std::size_t> zero{0};
    EXPECT_EQ(sample_length(zero, rng), 1u);
    EXPECT_THROW(sample_length(std::vector<std::size_t>{}, rng), ArgumentError);
}

TEST(Sampling, ActionFrequencies) {
    Rng rng(5);
    const ActionDistribution d;
    std::array<int, 4> counts{};
    const int n = 200000;
    for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(sample_action(d, rng))];
    for (Action a : kAllActions) EXPECT_NEAR(counts[static_cast<std::size_t>(a)] / double(n), d.p(a), 0.005);
}

TEST(Variant, MockAcceptedFirstTry) {
    MockGenerator gen;
    MockDiscriminator disc;
    const auto day = testing_support::make_day("2024-01-01", {"Stocks climb"});
    for (Action a : {Action::Re, Action::S, Action::N}) {
        const auto v = generate_variant(a, day.headlines[0], gen, disc);
        EXPECT_TRUE(v.accepted);
        EXPECT_EQ(v.attempts, 1u);
        EXPECT_EQ(v.text, std::string(mock_tag(a)) + ": Stocks climb");
    }
    EXPECT_THROW(generate_variant(Action::Ra, day.headlines[0], gen, disc), ArgumentError);
}

TEST(Variant, RetriesThenGivesUp) {
    std::size_t calls = 0;
    FunctionGenerator gen([&](const GenerationRequest& r) {
        ++calls;
        return "  \"try " + std::to_string(r.attempt) + "\"  ";
    });
    FunctionDiscriminator disc([](const std::string&, const std::string&) { return 0.1; });
    const auto day = testing_support::make_day("2024-01-01", {"x"});
    const auto v = generate_variant(Action::Re, day.headlines[0], gen, disc);
    EXPECT_FALSE(v.accepted);
    EXPECT_EQ(calls, 4u);
    EXPECT_EQ(v.attempts, 4u);
    EXPECT_EQ(v.text, "try 3");
}

TEST(Variant, BlankGenerationsAndBadScores) {
    const auto day = testing_support::make_day("2024-01-01", {"x"});
    FunctionGenerator blank([](const GenerationRequest&) { return std::string("   "); });
    MockDiscriminator disc;
    EXPECT_THROW(generate_variant(Action::S, day.headlines[0], blank, disc), ProviderError);

    MockGenerator gen;
    FunctionDiscriminator wild([](const std::string&, const std::string&) { return 1.5; });
    EXPECT_THROW(generate_variant(Action::S, day.headlines[0], gen, wild), ProviderError);
}

TEST(Transform, AllRandomScoresZero) {
    const auto corpus = make_corpus(5);
    MockGenerator gen;
    MockDiscriminator disc;
    Rng rng(1);
    const auto set = transform(corpus[0], corpus, ActionDistribution(0, 0, 0, 1), {gen, disc}, rng);
    EXPECT_EQ(set.s, 0.0);
    EXPECT_EQ(set.slots.size(), 3u);
    for (const auto& sl : set.slots) {
        EXPECT_EQ(sl.action, Action::Ra);
        EXPECT_EQ(sl.source_id->substr(0, 10).find("2024-01-01"), std::string::npos);
    }
}

TEST(Transform, AllRewordedScoresOne) {
    const auto corpus = make_corpus(5);
    MockGenerator gen;
    MockDiscriminator disc;
    Rng rng(2);
    const auto set = transform(corpus[1], corpus, ActionDistribution(1, 0, 0, 0), {gen, disc}, rng);
    EXPECT_EQ(set.s, 1.0);
    for (const auto& sl : set.slots) {
        EXPECT_EQ(sl.action, Action::Re);
        EXPECT_EQ(sl.source_id->substr(0, 10), "2024-01-02");
        EXPECT_TRUE(sl.disc_score.has_value());
    }
}

TEST(Transform, RejectedGenerationsDegradeToRandom) {
    const auto corpus = make_corpus(5);
    MockGenerator gen;
    FunctionDiscriminator never([](const std::string&, const std::string&) { return 0.5; });
    Rng rng(3);
    const auto set = transform(corpus[0], corpus, ActionDistribution(1, 0, 0, 0), {gen, never}, rng);
    EXPECT_EQ(set.s, 0.0);
    for (const auto& sl : set.slots) {
        EXPECT_EQ(sl.action, Action::Ra);
        EXPECT_TRUE(sl.degraded);
        EXPECT_NE(sl.source_id->substr(0, 10), "2024-01-01");
    }
}

TEST(Transform, ScoreMatchesActions) {
    const auto corpus = make_corpus(8, 4);
    MockGenerator gen;
    MockDiscriminator disc;
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const auto set = transform(corpus[i % 8], corpus, ActionDistribution(1, 1, 1, 1), {gen, disc}, rng);
        EXPECT_EQ(set.s, score(std::span<const Action>(set.actions())));
    }
}

TEST(Transform, DeterministicAndConcurrencyInvariant) {
    const auto corpus = make_corpus(6, 4);
    MockGenerator gen;
    MockDiscriminator disc;
    AugmentOptions serial, parallel;
    parallel.max_in_flight = 4;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng a(seed), b(seed);
        const auto x = transform(corpus[2], corpus, ActionDistribution(1, 1, 1, 1), {gen, disc}, a, serial);
        const auto y = transform(corpus[2], corpus, ActionDistribution(1, 1, 1, 1), {gen, disc}, b, parallel);
        EXPECT_EQ(x, y);
    }
}

TEST(Transform, Errors) {
    MockGenerator gen;
    MockDiscriminator disc;
    Rng rng(0);
    const auto one = make_corpus(1);
    EXPECT_THROW(transform(one[0], one, ActionDistribution{}, {gen, disc}, rng), ArgumentError);
    DailyNewsSet empty;
    const auto corpus = make_corpus(3);
    EXPECT_THROW(transform(empty, corpus, ActionDistribution{}, {gen, disc}, rng), ArgumentError);
}

TEST(Records, RoundTripAndTamper) {
    const auto corpus = make_corpus(4);
    MockGenerator gen;
    MockDiscriminator disc;
    Rng rng(6);
    const auto set = transform(corpus[0], corpus, ActionDistribution(1, 1, 1, 1), {gen, disc}, rng);
    const auto line = to_record_line(set);
    EXPECT_EQ(parse_record_line(line), set);

    auto j = nlohmann::json::parse(line);
    j["slots"][0]["text"] = "tampered";
    EXPECT_THROW(parse_record_line(j.dump()), DataError);
    EXPECT_THROW(parse_record_line("{not json"), DataError);
}

namespace {

CorpusSplit two_anchor_split() {
    auto corpus = make_corpus(4);
    CorpusSplit s;
    s.train = {corpus[0], corpus[1]};
    s.valid = {corpus[2]};
    s.test = {corpus[3]};
    return s;
}

}  // namespace

TEST(Build, WritesAnchorsTimesM) {
    TempDir dir;
    MockGenerator gen;
    MockDiscriminator disc;
    const auto split = two_anchor_split();
    const auto stats = build_augmented_dataset(split, 3, ActionDistribution{}, {gen, disc}, {}, 11, dir / "a.jsonl");
    EXPECT_EQ(stats.records_written, 6u);
    const auto recs = load_augmented(dir / "a.jsonl");
    ASSERT_EQ(recs.size(), 6u);
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(recs[i].base_date, split.train[i / 3].date);
    EXPECT_THROW(build_augmented_dataset(split, 0, ActionDistribution{}, {gen, disc}, {}, 11, dir / "b.jsonl"),
                 ArgumentError);
}

TEST(Build, RecordsAreIndependentlyReproducible) {
    TempDir dir;
    MockGenerator gen;
    MockDiscriminator disc;
    const auto split = two_anchor_split();
    build_augmented_dataset(split, 3, ActionDistribution(1, 1, 1, 1), {gen, disc}, {}, 11, dir / "a.jsonl");
    const auto recs = load_augmented(dir / "a.jsonl");
    Rng rng = record_rng(11, split.train[1].date, 2);
    EXPECT_EQ(transform(split.train[1], split.train, ActionDistribution(1, 1, 1, 1), {gen, disc}, rng), recs[5]);
}

TEST(Build, ResumeIsIdempotentAndRepairsTruncation) {
    TempDir dir;
    MockGenerator gen;
    MockDiscriminator disc;
    const auto split = two_anchor_split();
    const auto path = dir / "a.jsonl";
    build_augmented_dataset(split, 3, ActionDistribution{}, {gen, disc}, {}, 11, path);
    const auto original = testing_support::slurp(path);

    auto again = build_augmented_dataset(split, 3, ActionDistribution{}, {gen, disc}, {}, 11, path);
    EXPECT_EQ(again.anchors_resumed, 2u);
    EXPECT_EQ(again.records_written, 0u);
    EXPECT_EQ(testing_support::slurp(path), original);

    // Cut the file in the middle of the fifth record.
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) pos = original.find('\n', pos) + 1;
    testing_support::spit(path, original.substr(0, pos + 20));
    again = build_augmented_dataset(split, 3, ActionDistribution{}, {gen, disc}, {}, 11, path);
    EXPECT_EQ(again.anchors_resumed, 1u);
    EXPECT_EQ(again.records_written, 3u);
    EXPECT_EQ(again.records_dropped, 2u);
    EXPECT_EQ(testing_support::slurp(path), original);
}
