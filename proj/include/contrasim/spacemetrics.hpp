#pragma once

// Information-density audit of a labelled embedding set.
//
// For every point, the label distribution of its k nearest neighbours (self
// excluded, Euclidean distance, ties by lower index) is compared against its
// own label and against the global label distribution:
//
//   g_knn         mean of 1 - H(local) / ln C          (C = classes present)
//   knn_accuracy  mean fraction of neighbours sharing the point's label
//   kl            mean KL(local || global), eps-smoothed, natural log
//   jsd           mean Jensen-Shannon divergence, base 2

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "contrasim/embed.hpp"
#include "contrasim/error.hpp"
#include "contrasim/rng.hpp"

namespace contrasim {

struct LabeledPoint {
    std::string key;
    UnitVector vector;
    int label = 0;
};

// Points with labels re-indexed to 0..C-1 in ascending order of the original label.
struct LabeledSet {
    std::vector<Eigen::VectorXd> vectors;
    std::vector<int> labels;
    std::size_t n_classes = 0;

    std::size_t size() const { return vectors.size(); }

    static LabeledSet from(std::span<const LabeledPoint> points) {
        LabeledSet s;
        std::map<int, int> remap;
        for (const auto& p : points) remap.emplace(p.label, 0);
        int next = 0;
        for (auto& [_, v] : remap) v = next++;
        std::size_t dim = points.empty() ? 0 : points.front().vector.dim();
        for (const auto& p : points) {
            if (p.vector.dim() != dim) throw ArgumentError("labelled points have mixed dimensions");
            s.vectors.push_back(p.vector.values());
            s.labels.push_back(remap.at(p.label));
        }
        s.n_classes = remap.size();
        return s;
    }

    static LabeledSet from(std::vector<Eigen::VectorXd> vectors, std::span<const int> labels) {
        if (vectors.size() != labels.size()) throw ArgumentError("vectors/labels size mismatch");
        LabeledSet s;
        std::map<int, int> remap;
        for (int l : labels) remap.emplace(l, 0);
        int next = 0;
        for (auto& [_, v] : remap) v = next++;
        s.vectors = std::move(vectors);
        for (int l : labels) s.labels.push_back(remap.at(l));
        s.n_classes = remap.size();
        return s;
    }
};

using Neighbors = std::vector<std::vector<std::size_t>>;

// Exact k-nearest neighbours; self excluded; ties broken by ascending index.
inline Neighbors knn_indices(std::span<const Eigen::VectorXd> points, std::size_t k) {
    const std::size_t n = points.size();
    if (n < 2) throw ArgumentError("knn needs at least 2 points");
    if (k == 0 || k >= n) throw ArgumentError("k must satisfy 1 <= k < n (k=" + std::to_string(k) + ", n=" + std::to_string(n) + ")");
    Neighbors out(n);
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) cand.emplace_back((points[i] - points[j]).squaredNorm(), j);
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end());
        for (std::size_t t = 0; t < k; ++t) out[i].push_back(cand[t].second);
    }
    return out;
}

inline std::vector<double> local_distribution(const LabeledSet& set, const std::vector<std::size_t>& nbrs) {
    std::vector<double> p(set.n_classes, 0.0);
    for (std::size_t j : nbrs) p[static_cast<std::size_t>(set.labels[j])] += 1.0;
    for (double& x : p) x /= static_cast<double>(nbrs.size());
    return p;
}

inline std::vector<double> global_distribution(const LabeledSet& set) {
    std::vector<double> p(set.n_classes, 0.0);
    for (int l : set.labels) p[static_cast<std::size_t>(l)] += 1.0;
    for (double& x : p) x /= static_cast<double>(set.size());
    return p;
}

inline double entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log(x);
    return h;
}

inline double kl_divergence(std::span<const double> p, std::span<const double> q, double eps = 1e-9) {
    const double z = 1.0 + eps * static_cast<double>(p.size());
    double kl = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double ps = (p[i] + eps) / z, qs = (q[i] + eps) / z;
        kl += ps * std::log(ps / qs);
    }
    return std::max(0.0, kl);
}

inline double js_divergence(std::span<const double> p, std::span<const double> q) {
    double js = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) js += 0.5 * p[i] * std::log2(p[i] / m);
        if (q[i] > 0.0) js += 0.5 * q[i] * std::log2(q[i] / m);
    }
    return std::clamp(js, 0.0, 1.0);
}

// Per-point values of each metric, averaged by the public functions below.
struct NeighborhoodStats {
    double g_knn = 0.0;
    double mean_entropy = 0.0;
    double knn_accuracy = 0.0;
    double kl = 0.0;
    double jsd = 0.0;
};

inline NeighborhoodStats neighborhood_stats(const LabeledSet& set, const Neighbors& nbrs, double eps = 1e-9) {
    const auto global = global_distribution(set);
    const double log_c = set.n_classes >= 2 ? std::log(static_cast<double>(set.n_classes)) : 0.0;
    NeighborhoodStats s;
    const double inv_n = 1.0 / static_cast<double>(set.size());
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto local = local_distribution(set, nbrs[i]);
        const double h = entropy(local);
        s.mean_entropy += inv_n * h;
        s.g_knn += inv_n * (set.n_classes >= 2 ? 1.0 - h / log_c : 1.0);
        s.knn_accuracy += inv_n * local[static_cast<std::size_t>(set.labels[i])];
        s.kl += inv_n * kl_divergence(local, global, eps);
        s.jsd += inv_n * js_divergence(local, global);
    }
    s.g_knn = std::clamp(s.g_knn, 0.0, 1.0);
    s.knn_accuracy = std::clamp(s.knn_accuracy, 0.0, 1.0);
    return s;
}

inline NeighborhoodStats neighborhood_stats(const LabeledSet& set, std::size_t k, double eps = 1e-9) {
    return neighborhood_stats(set, knn_indices(set.vectors, k), eps);
}

inline double g_knn(const LabeledSet& set, std::size_t k = 5) { return neighborhood_stats(set, k).g_knn; }
inline double knn_accuracy(const LabeledSet& set, std::size_t k = 5) { return neighborhood_stats(set, k).knn_accuracy; }
inline double kl_local_global(const LabeledSet& set, std::size_t k = 5, double eps = 1e-9) {
    return neighborhood_stats(set, k, eps).kl;
}
inline double jsd_local_global(const LabeledSet& set, std::size_t k = 5) { return neighborhood_stats(set, k).jsd; }

struct BaselineEstimate {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation over repeats
    std::size_t repeats = 0;
};

// Metric expectation under uniformly permuted labels (class counts preserved).
// `metric` receives the set with permuted labels.
inline BaselineEstimate shuffled_baseline(const LabeledSet& set, const std::function<double(const LabeledSet&)>& metric,
                                          std::size_t repeats = 1000, std::uint64_t seed = 0) {
    if (repeats == 0) throw ArgumentError("shuffled_baseline: repeats must be >= 1");
    Rng rng(derive_seed(seed, "shuffled-baseline"));
    LabeledSet work = set;
    std::vector<double> values;
    values.reserve(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        work.labels = set.labels;
        rng.shuffle(work.labels);
        values.push_back(metric(work));
    }
    BaselineEstimate b;
    b.repeats = repeats;
    for (double v : values) b.mean += v;
    b.mean /= static_cast<double>(repeats);
    if (repeats > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - b.mean) * (v - b.mean);
        b.std = std::sqrt(ss / static_cast<double>(repeats - 1));
    }
    return b;
}

struct MetricWithBaseline {
    double value = 0.0;
    BaselineEstimate baseline;
};

struct SpaceReport {
    MetricWithBaseline g_knn, knn_acc, kl, jsd;
    double mean_entropy = 0.0;
    std::size_t k = 5;
    std::size_t n_points = 0;
    std::size_t n_classes = 0;
    std::size_t repeats = 0;
    std::string space;

    nlohmann::json to_json() const {
        auto m = [](const MetricWithBaseline& x) {
            return nlohmann::json{{"value", x.value},
                                  {"baseline_mean", x.baseline.mean},
                                  {"baseline_std", x.baseline.std}};
        };
        return {{"space", space},   {"k", k},
                {"n_points", n_points}, {"n_classes", n_classes},
                {"baseline_repeats", repeats},
                {"metrics", {{"g_knn", m(g_knn)}, {"knn_acc", m(knn_acc)}, {"kl", m(kl)}, {"jsd", m(jsd)}}},
                {"mean_entropy", mean_entropy}};
    }

    std::string to_table() const {
        std::ostringstream os;
        os << std::fixed << std::setprecision(4);
        os << "space: " << space << "  n=" << n_points << "  classes=" << n_classes << "  k=" << k
           << "  baseline repeats=" << repeats << "\n";
        os << std::left << std::setw(10) << "metric" << std::right << std::setw(10) << "value" << std::setw(16)
           << "baseline_mean" << std::setw(15) << "baseline_std" << "\n";
        auto row = [&](const char* name, const MetricWithBaseline& x) {
            os << std::left << std::setw(10) << name << std::right << std::setw(10) << x.value << std::setw(16)
               << x.baseline.mean << std::setw(15) << x.baseline.std << "\n";
        };
        row("g-KNN", g_knn);
        row("KNN", knn_acc);
        row("KL", kl);
        row("JSD", jsd);
        return os.str();
    }
};

inline SpaceReport audit_space(const LabeledSet& set, std::size_t k = 5, std::size_t repeats = 1000,
                               std::uint64_t seed = 0, double eps = 1e-9, std::string space = "projection") {
    const auto nbrs = knn_indices(set.vectors, k);
    const auto stats = neighborhood_stats(set, nbrs, eps);
    SpaceReport r;
    r.k = k;
    r.n_points = set.size();
    r.n_classes = set.n_classes;
    r.repeats = repeats;
    r.space = std::move(space);
    r.mean_entropy = stats.mean_entropy;
    r.g_knn.value = stats.g_knn;
    r.knn_acc.value = stats.knn_accuracy;
    r.kl.value = stats.kl;
    r.jsd.value = stats.jsd;

    // Neighbour lists do not depend on labels, so one permutation feeds all four metrics.
    Rng rng(derive_seed(seed, "shuffled-baseline"));
    LabeledSet work = set;
    std::vector<NeighborhoodStats> draws;
    draws.reserve(repeats);
    for (std::size_t t = 0; t < repeats; ++t) {
        work.labels = set.labels;
        rng.shuffle(work.labels);
        draws.push_back(neighborhood_stats(work, nbrs, eps));
    }
    auto summarize = [&](double NeighborhoodStats::*field) {
        BaselineEstimate b;
        b.repeats = repeats;
        if (repeats == 0) return b;
        for (const auto& d : draws) b.mean += d.*field;
        b.mean /= static_cast<double>(repeats);
        if (repeats > 1) {
            double ss = 0.0;
            for (const auto& d : draws) ss += (d.*field - b.mean) * (d.*field - b.mean);
            b.std = std::sqrt(ss / static_cast<double>(repeats - 1));
        }
        return b;
    };
    r.g_knn.baseline = summarize(&NeighborhoodStats::g_knn);
    r.knn_acc.baseline = summarize(&NeighborhoodStats::knn_accuracy);
    r.kl.baseline = summarize(&NeighborhoodStats::kl);
    r.jsd.baseline = summarize(&NeighborhoodStats::jsd);
    return r;
}

// ---- per-action embedding shift ---------------------------------------------

struct ShiftPair {
    std::string base;
    std::string augmented;
    std::string action;
    std::string control;  // headline from a different day
};

struct ShiftSummary {
    double mean = 0.0;
    std::size_t count = 0;
};

// shift = cos(base, augmented) - cos(base, control), averaged per action tag.
inline std::map<std::string, ShiftSummary> action_shift_analysis(std::span<const ShiftPair> pairs,
                                                                 const std::function<UnitVector(const std::string&)>& embed) {
    std::map<std::string, ShiftSummary> out;
    for (const auto& p : pairs) {
        const auto b = embed(p.base);
        const double shift = b.dot(embed(p.augmented)) - b.dot(embed(p.control));
        auto& s = out[p.action];
        s.mean += shift;
        ++s.count;
    }
    for (auto& [_, s] : out) s.mean /= static_cast<double>(s.count);
    return out;
}

}  // namespace contrasim
