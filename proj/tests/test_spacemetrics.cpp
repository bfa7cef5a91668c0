#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"

using namespace contrasim;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

LabeledSet random_set(std::size_t n, std::size_t dim, int classes, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Eigen::VectorXd> v;
    std::vector<int> l;
    for (std::size_t i = 0; i < n; ++i) {
        Eigen::VectorXd x(static_cast<Eigen::Index>(dim));
        for (Eigen::Index d = 0; d < x.size(); ++d) x[d] = rng.normal();
        v.push_back(x);
        l.push_back(static_cast<int>(rng.uniform_index(static_cast<std::size_t>(classes))));
    }
    return LabeledSet::from(std::move(v), l);
}

// Two tight clusters far apart, labels 0 and 1.
LabeledSet two_clusters(std::size_t per) {
    Rng rng(1);
    std::vector<Eigen::VectorXd> v;
    std::vector<int> l;
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < per; ++i) {
            v.push_back(vec({c * 10.0 + 0.01 * rng.normal(), 0.01 * rng.normal()}));
            l.push_back(c);
        }
    return LabeledSet::from(std::move(v), l);
}

}  // namespace

TEST(LabeledSetTest, RemapsLabelsInOrder) {
    const std::vector<int> labels{5, 2, 9, 2};
    const auto s = LabeledSet::from({vec({0}), vec({1}), vec({2}), vec({3})}, labels);
    EXPECT_EQ(s.labels, (std::vector<int>{1, 0, 2, 0}));
    EXPECT_EQ(s.n_classes, 3u);
}

TEST(Knn, TiesGoToLowerIndex) {
    const std::vector<Eigen::VectorXd> pts{vec({0}), vec({1}), vec({2}), vec({3})};
    const auto n = knn_indices(pts, 2);
    EXPECT_EQ(n[1], (std::vector<std::size_t>{0, 2}));
    EXPECT_EQ(n[0], (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(n[3], (std::vector<std::size_t>{2, 1}));
    EXPECT_THROW(knn_indices(pts, 4), ArgumentError);
    EXPECT_THROW(knn_indices(pts, 0), ArgumentError);
}

TEST(Knn, MatchesFullSortOracle) {
    const auto s = random_set(40, 3, 3, 5);
    const auto n = knn_indices(s.vectors, 6);
    for (std::size_t i = 0; i < s.size(); ++i) {
        std::vector<std::pair<double, std::size_t>> all;
        for (std::size_t j = 0; j < s.size(); ++j)
            if (j != i) all.emplace_back((s.vectors[i] - s.vectors[j]).norm(), j);
        std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.first < b.first; });
        for (std::size_t t = 0; t < 6; ++t) EXPECT_EQ(n[i][t], all[t].second);
    }
}

TEST(Divergences, Examples) {
    const std::vector<double> a{1, 0}, b{0, 1}, u{0.5, 0.5};
    EXPECT_NEAR(js_divergence(a, b), 1.0, 1e-12);
    EXPECT_EQ(js_divergence(u, u), 0.0);
    EXPECT_NEAR(kl_divergence(u, u), 0.0, 1e-15);
    // eps-smoothing: p' = (p + eps) / (1 + 2 eps).
    const double eps = 1e-9, hi = (1 + eps) / (1 + 2 * eps), lo = eps / (1 + 2 * eps);
    EXPECT_NEAR(kl_divergence(a, u), hi * std::log(hi / 0.5) + lo * std::log(lo / 0.5), 1e-15);
    EXPECT_NEAR(kl_divergence(a, u), std::log(2.0), 1e-7);
    EXPECT_NEAR(entropy(u), std::log(2.0), 1e-15);
    EXPECT_EQ(entropy(a), 0.0);
    // JSD symmetric, bounded.
    Rng rng(2);
    for (int i = 0; i < 1000; ++i) {
        double x = rng.uniform01(), y = rng.uniform01();
        const std::vector<double> p{x, 1 - x}, q{y, 1 - y};
        EXPECT_NEAR(js_divergence(p, q), js_divergence(q, p), 1e-15);
        EXPECT_GE(js_divergence(p, q), 0.0);
        EXPECT_LE(js_divergence(p, q), 1.0);
        EXPECT_GE(kl_divergence(p, q), 0.0);
    }
}

TEST(Metrics, SeparatedClusters) {
    const auto s = two_clusters(6);
    const auto st = neighborhood_stats(s, 5);
    EXPECT_DOUBLE_EQ(st.g_knn, 1.0);
    EXPECT_DOUBLE_EQ(st.knn_accuracy, 1.0);
    EXPECT_NEAR(st.kl, std::log(2.0), 1e-7);
    const double m0 = 0.75, m1 = 0.25;
    const double jsd = 0.5 * std::log2(1.0 / m0) + 0.5 * (0.5 * std::log2(0.5 / m0) + 0.5 * std::log2(0.5 / m1));
    EXPECT_NEAR(st.jsd, jsd, 1e-12);
}

TEST(Metrics, SingleClassIsFullyDense) {
    std::vector<Eigen::VectorXd> v{vec({0}), vec({1}), vec({2})};
    const std::vector<int> l{4, 4, 4};
    const auto s = LabeledSet::from(std::move(v), l);
    EXPECT_EQ(g_knn(s, 1), 1.0);
    EXPECT_EQ(knn_accuracy(s, 2), 1.0);
}

TEST(Metrics, MatchIndependentOracle) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto s = random_set(30, 4, 3, seed);
        const std::size_t k = 4;
        const auto nb = knn_indices(s.vectors, k);
        std::vector<double> global(s.n_classes, 0);
        for (int l : s.labels) global[static_cast<std::size_t>(l)] += 1.0 / s.size();
        double g = 0, acc = 0, kl = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            std::vector<double> p(s.n_classes, 0);
            for (auto j : nb[i]) p[static_cast<std::size_t>(s.labels[j])] += 1.0 / k;
            double h = 0;
            for (double x : p) h += x > 0 ? -x * std::log(x) : 0;
            g += (1 - h / std::log(double(s.n_classes))) / s.size();
            acc += p[static_cast<std::size_t>(s.labels[i])] / s.size();
            const double eps = 1e-9, z = 1 + eps * s.n_classes;
            for (std::size_t c = 0; c < p.size(); ++c) {
                const double ps = (p[c] + eps) / z, qs = (global[c] + eps) / z;
                kl += ps * std::log(ps / qs) / s.size();
            }
        }
        const auto st = neighborhood_stats(s, k);
        EXPECT_NEAR(st.g_knn, g, 1e-12);
        EXPECT_NEAR(st.knn_accuracy, acc, 1e-12);
        EXPECT_NEAR(st.kl, kl, 1e-12);
    }
}

TEST(Baseline, PreservesCountsAndIsDeterministic) {
    const auto s = random_set(25, 3, 3, 7);
    auto counts = [](const LabeledSet& x) {
        std::vector<int> c(x.n_classes, 0);
        for (int l : x.labels) ++c[static_cast<std::size_t>(l)];
        return c;
    };
    const auto want = counts(s);
    const auto b = shuffled_baseline(s, [&](const LabeledSet& x) {
        EXPECT_EQ(counts(x), want);
        return g_knn(x, 3);
    }, 50, 9);
    const auto b2 = shuffled_baseline(s, [](const LabeledSet& x) { return g_knn(x, 3); }, 50, 9);
    EXPECT_EQ(b.mean, b2.mean);
    EXPECT_EQ(b.std, b2.std);
    EXPECT_GT(b.std, 0.0);
    EXPECT_EQ(shuffled_baseline(s, [](const LabeledSet&) { return 1.0; }, 1).std, 0.0);
    EXPECT_THROW(shuffled_baseline(s, [](const LabeledSet&) { return 1.0; }, 0), ArgumentError);
}

TEST(Audit, MatchesStandaloneBaselineAndSeparatesStructure) {
    const auto s = two_clusters(10);
    const auto r = audit_space(s, 5, 200, 3);
    const auto b = shuffled_baseline(s, [](const LabeledSet& x) { return g_knn(x, 5); }, 200, 3);
    EXPECT_NEAR(r.g_knn.baseline.mean, b.mean, 1e-12);
    EXPECT_NEAR(r.g_knn.baseline.std, b.std, 1e-12);
    EXPECT_GT(r.g_knn.value, r.g_knn.baseline.mean + 3 * r.g_knn.baseline.std);
    EXPECT_GT(r.kl.value, r.kl.baseline.mean);
    const auto j = r.to_json();
    EXPECT_EQ(j["metrics"]["g_knn"]["value"].get<double>(), r.g_knn.value);
    EXPECT_NE(r.to_table().find("g-KNN"), std::string::npos);
}

TEST(Shift, MeansPerAction) {
    MockEmbedder e(1, 32);
    auto embed = [&](const std::string& t) { return e.embed(t); };
    const std::vector<ShiftPair> pairs{{"base", "base", "Re", "ctrl"}, {"base", "other", "N", "ctrl"},
                                       {"b2", "b2", "Re", "c2"}};
    const auto out = action_shift_analysis(pairs, embed);
    const auto cos = [&](const char* a, const char* b) { return e.embed(a).dot(e.embed(b)); };
    EXPECT_EQ(out.at("Re").count, 2u);
    EXPECT_NEAR(out.at("Re").mean, ((1 - cos("base", "ctrl")) + (1 - cos("b2", "c2"))) / 2, 1e-12);
    EXPECT_NEAR(out.at("N").mean, cos("base", "other") - cos("base", "ctrl"), 1e-12);
}
