#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "support.hpp"

using namespace contrasim;

TEST(Rng, SameSeedSameStream) {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(Rng, DerivedSeedsDiffer) {
    EXPECT_NE(derive_seed(1, "a"), derive_seed(1, "b"));
    EXPECT_NE(derive_seed(1, "a"), derive_seed(2, "a"));
    EXPECT_EQ(derive_seed(9, "split"), derive_seed(9, "split"));
}

TEST(Rng, UniformIndexStaysInRange) {
    Rng r(3);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) ++hits[r.uniform_index(7)];
    for (int h : hits) EXPECT_GT(h, 800);
    EXPECT_THROW(r.uniform_index(0), ArgumentError);
}

TEST(Rng, Uniform01InHalfOpenUnitInterval) {
    Rng r(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = r.uniform01();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Rng, NormalMoments) {
    Rng r(11);
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sq += x * x;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.02);
}

TEST(Rng, ShuffleIsPermutation) {
    Rng r(8);
    std::vector<int> v(50);
    std::iota(v.begin(), v.end(), 0);
    auto w = v;
    r.shuffle(w);
    EXPECT_NE(v, w);
    std::sort(w.begin(), w.end());
    EXPECT_EQ(v, w);
}

TEST(Digest, KnownVectors) {
    EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Digest, FileMatchesString) {
    testing_support::TempDir dir;
    testing_support::spit(dir / "f.txt", "abc");
    EXPECT_EQ(sha256_file(dir / "f.txt"), sha256_hex("abc"));
}

TEST(DateTest, ParseAndFormat) {
    const auto d = Date::parse("2024-02-29");
    EXPECT_EQ(d.year, 2024);
    EXPECT_EQ(d.month, 2);
    EXPECT_EQ(d.day, 29);
    EXPECT_EQ(d.iso(), "2024-02-29");
    EXPECT_LT(Date::parse("2023-12-31"), d);
}

TEST(DateTest, RejectsInvalid) {
    for (const char* s : {"2023-02-29", "2024-13-01", "2024-1-01", "20240101", "", "2024-01-01x", "abcd-ef-gh"})
        EXPECT_THROW(Date::parse(s), DataError) << s;
}
