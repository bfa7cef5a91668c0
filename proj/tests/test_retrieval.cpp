#include <gtest/gtest.h>

#include "support.hpp"

using namespace contrasim;
using testing_support::make_corpus;
using testing_support::TempDir;

namespace {

// Fails for any text mentioning the given marker.
class FlakyEmbedder final : public EmbeddingProvider {
public:
    FlakyEmbedder(std::string marker) : marker_(std::move(marker)) {}
    std::size_t dim() const override { return inner_.dim(); }
    std::vector<UnitVector> embed_batch(std::span<const std::string> texts) override {
        for (const auto& t : texts)
            if (t.find(marker_) != std::string::npos) throw ProviderError("refused");
        return inner_.embed_batch(texts);
    }

private:
    std::string marker_;
    MockEmbedder inner_{3, 16};
};

}  // namespace

TEST(Index, BuildSortsAndQueriesByCosine) {
    auto corpus = make_corpus(6);
    std::reverse(corpus.begin(), corpus.end());
    MockEmbedder emb(3, 16);
    const auto idx = build_index(corpus, emb, nullptr, IndexSpace::Encoder);
    ASSERT_EQ(idx.size(), 6u);
    for (std::size_t i = 1; i < idx.size(); ++i) EXPECT_LT(idx.entries[i - 1].date, idx.entries[i].date);

    const auto q = embed_dns(corpus[2], emb);
    const auto r = query(idx, q, 3);
    ASSERT_EQ(r.hits.size(), 3u);
    EXPECT_EQ(r.hits[0].date, corpus[2].date);
    EXPECT_NEAR(r.hits[0].score, 1.0, 1e-12);
    for (std::size_t i = 1; i < r.hits.size(); ++i) EXPECT_GE(r.hits[i - 1].score, r.hits[i].score);
    // Score equals the cosine against the stored vector.
    for (const auto& h : r.hits) EXPECT_NEAR(h.score, q.dot(idx.find(h.date)->vector), 1e-15);
}

TEST(Index, ExcludeTruncateAndErrors) {
    const auto corpus = make_corpus(4);
    MockEmbedder emb(3, 16);
    const auto idx = build_index(corpus, emb, nullptr, IndexSpace::Encoder);
    const auto q = embed_dns(corpus[1], emb);
    const auto r = query(idx, q, 10, corpus[1].date);
    EXPECT_TRUE(r.truncated);
    EXPECT_EQ(r.hits.size(), 3u);
    for (const auto& h : r.hits) EXPECT_NE(h.date, corpus[1].date);
    EXPECT_FALSE(query(idx, q, 4).truncated);
    EXPECT_THROW(query(idx, q, 0), ArgumentError);
    EXPECT_THROW(query(idx, MockEmbedder(1, 8).embed("x"), 1), ArgumentError);
    EXPECT_THROW(query(RetrievalIndex{}, q, 1), ArgumentError);
    EXPECT_THROW(build_index(std::vector<DailyNewsSet>{}, emb, nullptr), ArgumentError);
}

TEST(Index, TiesBreakByEarlierDate) {
    RetrievalIndex idx;
    const auto v = normalize(Eigen::Vector2d(1, 1));
    for (const char* d : {"2024-01-03", "2024-01-01", "2024-01-02"}) idx.entries.push_back({Date::parse(d), v, d});
    idx.sort_and_check();
    const auto r = query(idx, v, 3);
    EXPECT_EQ(r.hits[0].date.iso(), "2024-01-01");
    EXPECT_EQ(r.hits[2].date.iso(), "2024-01-03");
}

TEST(Index, ProjectionSpaceUsesNetwork) {
    const auto corpus = make_corpus(3);
    MockEmbedder emb(3, 16);
    const auto p = init_projection(16, 8, 4, 1);
    const auto idx = build_index(corpus, emb, &p);
    EXPECT_EQ(idx.dim(), 4u);
    EXPECT_EQ(idx.entries[0].vector, project(p, embed_dns(corpus[0], emb)));
    EXPECT_THROW(build_index(corpus, emb, nullptr, IndexSpace::Projection), ArgumentError);
}

TEST(Index, ProviderFailuresSkipDays) {
    const auto corpus = make_corpus(4);
    FlakyEmbedder emb("day 2 ");
    const auto idx = build_index(corpus, emb, nullptr, IndexSpace::Encoder);
    EXPECT_EQ(idx.size(), 3u);
    ASSERT_EQ(idx.warnings.size(), 1u);
    EXPECT_NE(idx.warnings[0].find("2024-01-03"), std::string::npos);
    EXPECT_EQ(idx.find(Date::parse("2024-01-03")), nullptr);
    FlakyEmbedder all("market");
    EXPECT_THROW(build_index(corpus, all, nullptr, IndexSpace::Encoder), ProviderError);
}

TEST(Index, CustomTextAndPersistence) {
    TempDir dir;
    const auto corpus = make_corpus(3);
    MockEmbedder emb(3, 16);
    const auto idx = build_index(corpus, emb, nullptr, IndexSpace::Encoder,
                                 [](const DailyNewsSet& d) { return d.headlines[0].text; });
    EXPECT_EQ(idx.entries[1].vector, emb.embed(corpus[1].headlines[0].text));
    idx.save(dir / "i.jsonl");
    const auto back = RetrievalIndex::load(dir / "i.jsonl");
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back.entries[i].date, idx.entries[i].date);
        EXPECT_EQ(back.entries[i].preview, idx.entries[i].preview);
        EXPECT_NEAR((back.entries[i].vector.values() - idx.entries[i].vector.values()).norm(), 0.0, 1e-15);
    }
    testing_support::spit(dir / "dup.jsonl", testing_support::slurp(dir / "i.jsonl") +
                                                 testing_support::slurp(dir / "i.jsonl"));
    EXPECT_THROW(RetrievalIndex::load(dir / "dup.jsonl"), DataError);
}

TEST(Results, JsonAndTable) {
    QueryResult r;
    r.hits.push_back({Date::parse("2024-02-01"), 0.5, "Stocks rally"});
    r.truncated = true;
    const auto j = r.to_json();
    EXPECT_EQ(j["hits"][0]["date"], "2024-02-01");
    EXPECT_EQ(j["truncated"], true);
    const auto t = r.to_table();
    EXPECT_NE(t.find("+0.500000"), std::string::npos);
    EXPECT_NE(t.find("Stocks rally"), std::string::npos);
}
