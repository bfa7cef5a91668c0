#pragma once

// Market-direction classification heads over projection features, encoder
// features, or both, plus accuracy / macro-F1 evaluation.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contrasim/embed.hpp"
#include "contrasim/error.hpp"
#include "contrasim/mlp.hpp"
#include "contrasim/projnet.hpp"
#include "contrasim/rng.hpp"

namespace contrasim {

enum class FeatureSource { Proj, Enc, Both };

inline std::string_view to_string(FeatureSource s) {
    switch (s) {
        case FeatureSource::Proj: return "proj";
        case FeatureSource::Enc: return "enc";
        case FeatureSource::Both: return "both";
    }
    return "?";
}

inline FeatureSource parse_feature_source(std::string_view s) {
    if (s == "proj") return FeatureSource::Proj;
    if (s == "enc") return FeatureSource::Enc;
    if (s == "both") return FeatureSource::Both;
    throw ArgumentError("unknown feature source '" + std::string(s) + "'");
}

inline std::size_t feature_dim(FeatureSource s, std::size_t proj_dim, std::size_t enc_dim) {
    switch (s) {
        case FeatureSource::Proj: return proj_dim;
        case FeatureSource::Enc: return enc_dim;
        case FeatureSource::Both: return proj_dim + enc_dim;
    }
    return 0;
}

// Concatenation of two unit-normalized parts: [proj ; enc].
inline Eigen::VectorXd concat_features(const UnitVector& proj, const UnitVector& enc) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(proj.dim() + enc.dim()));
    out << proj.values(), enc.values();
    return out;
}

inline Eigen::VectorXd make_features(const UnitVector& encoder_embedding, FeatureSource source,
                                     const ProjectionParams* projection) {
    if (source == FeatureSource::Enc) return encoder_embedding.values();
    if (!projection) throw ArgumentError("make_features: projection parameters required for source " + std::string(to_string(source)));
    const UnitVector p = project(*projection, encoder_embedding);
    if (source == FeatureSource::Proj) return p.values();
    return concat_features(p, encoder_embedding);
}

struct ClassifierConfig {
    std::size_t hidden = 64;
    double lr = 1e-3;
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    // Epochs without validation improvement before stopping; 0 disables.
    std::size_t patience = 10;
    std::uint64_t seed = 0;
};

struct ClassifierParams {
    TwoLayerParams net;
    std::size_t n_classes = 3;
    FeatureSource source = FeatureSource::Enc;

    std::size_t input_dim() const { return net.in_dim(); }

    Eigen::VectorXd logits(const Eigen::VectorXd& x) const {
        if (static_cast<std::size_t>(x.size()) != input_dim())
            throw ArgumentError("classifier input dim " + std::to_string(x.size()) + " != " + std::to_string(input_dim()));
        return net.w2 * (net.w1 * x + net.b1).cwiseMax(0.0) + net.b2;
    }

    Eigen::VectorXd probabilities(const Eigen::VectorXd& x) const { return softmax(logits(x)); }

    // Ties resolve to the lowest class index.
    int predict(const Eigen::VectorXd& x) const {
        const Eigen::VectorXd l = logits(x);
        Eigen::Index best = 0;
        for (Eigen::Index i = 1; i < l.size(); ++i)
            if (l[i] > l[best]) best = i;
        return static_cast<int>(best);
    }

    static Eigen::VectorXd softmax(const Eigen::VectorXd& l) {
        const Eigen::VectorXd e = (l.array() - l.maxCoeff()).exp();
        return e / e.sum();
    }
};

struct Dataset {
    std::vector<Eigen::VectorXd> x;
    std::vector<int> y;

    std::size_t size() const { return x.size(); }
};

namespace detail {

// Mean softmax cross-entropy over `idx`; gradients accumulated when `grads` is set.
inline double cross_entropy(const ClassifierParams& c, const Dataset& d, std::span<const std::size_t> idx,
                            TwoLayerParams* grads) {
    double loss = 0.0;
    const double inv = 1.0 / static_cast<double>(idx.size());
    for (std::size_t i : idx) {
        const Eigen::VectorXd pre = c.net.w1 * d.x[i] + c.net.b1;
        const Eigen::VectorXd h = pre.cwiseMax(0.0);
        const Eigen::VectorXd prob = ClassifierParams::softmax(c.net.w2 * h + c.net.b2);
        const auto y = static_cast<Eigen::Index>(d.y[i]);
        loss -= inv * std::log(std::max(prob[y], std::numeric_limits<double>::min()));
        if (!grads) continue;
        Eigen::VectorXd gz = prob * inv;
        gz[y] -= inv;
        grads->w2.noalias() += gz * h.transpose();
        grads->b2 += gz;
        Eigen::VectorXd gpre = c.net.w2.transpose() * gz;
        for (Eigen::Index k = 0; k < gpre.size(); ++k)
            if (!(pre[k] > 0.0)) gpre[k] = 0.0;
        grads->w1.noalias() += gpre * d.x[i].transpose();
        grads->b1 += gpre;
    }
    return loss;
}

}  // namespace detail

struct TrainedClassifier {
    ClassifierParams params;
    std::size_t epochs_run = 0;
    double best_valid_loss = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::string> warnings;
};

// Softmax cross-entropy with Adam over shuffled mini-batches; keeps the
// parameters with the lowest validation loss when a validation set is given.
inline TrainedClassifier train_classifier(const Dataset& train, const Dataset* valid, std::size_t n_classes,
                                          FeatureSource source, const ClassifierConfig& cfg = {}) {
    if (train.size() == 0) throw ArgumentError("train_classifier: empty training set");
    if (n_classes < 2) throw ArgumentError("train_classifier: need at least 2 classes");
    const std::size_t dim = static_cast<std::size_t>(train.x.front().size());
    auto check = [&](const Dataset& d) {
        if (d.x.size() != d.y.size()) throw ArgumentError("train_classifier: features/labels size mismatch");
        for (std::size_t i = 0; i < d.size(); ++i) {
            if (static_cast<std::size_t>(d.x[i].size()) != dim) throw ArgumentError("train_classifier: mixed feature dimensions");
            if (d.y[i] < 0 || static_cast<std::size_t>(d.y[i]) >= n_classes) throw ArgumentError("train_classifier: label out of range");
        }
    };
    check(train);
    if (valid) check(*valid);

    TrainedClassifier out;
    Rng init_rng(derive_seed(cfg.seed, "classifier-init"));
    out.params = {TwoLayerParams::he_normal(dim, cfg.hidden, n_classes, init_rng), n_classes, source};

    std::vector<std::size_t> present(n_classes, 0);
    for (int y : train.y) ++present[static_cast<std::size_t>(y)];
    const auto n_present = std::count_if(present.begin(), present.end(), [](std::size_t c) { return c > 0; });
    if (n_present == 1) {
        // Constant predictor of the only class seen.
        const auto only = static_cast<Eigen::Index>(std::find_if(present.begin(), present.end(), [](std::size_t c) { return c > 0; }) - present.begin());
        out.params.net = TwoLayerParams::zeros(dim, cfg.hidden, n_classes);
        out.params.net.b2[only] = 1.0;
        out.warnings.push_back("single-class training set; using a constant classifier");
        return out;
    }

    AdamState adam = AdamState::for_params(out.params.net);
    std::vector<std::size_t> order(train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::vector<std::size_t> valid_idx;
    if (valid)
        for (std::size_t i = 0; i < valid->size(); ++i) valid_idx.push_back(i);
    const bool early_stop = valid && valid->size() > 0 && cfg.patience > 0;
    TwoLayerParams best = out.params.net;
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    const std::size_t bs = std::max<std::size_t>(1, cfg.batch_size);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "classifier-epoch:" + std::to_string(epoch)));
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += bs) {
            const auto batch = std::span<const std::size_t>(order).subspan(start, std::min(bs, order.size() - start));
            TwoLayerParams g = TwoLayerParams::zeros_like(out.params.net);
            const double loss = detail::cross_entropy(out.params, train, batch, &g);
            if (!std::isfinite(loss)) throw NumericError("train_classifier: non-finite loss");
            adam_step(out.params.net, g, adam, cfg.lr);
        }
        out.epochs_run = epoch + 1;
        if (early_stop) {
            const double vl = detail::cross_entropy(out.params, *valid, valid_idx, nullptr);
            if (vl < best_loss) {
                best_loss = vl;
                best = out.params.net;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        }
    }
    if (early_stop) {
        out.params.net = best;
        out.best_valid_loss = best_loss;
    }
    return out;
}

struct EvalResult {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [truth][predicted]

    nlohmann::json to_json() const { return {{"accuracy", accuracy}, {"macro_f1", macro_f1}, {"confusion", confusion}}; }
};

// Macro-F1 averages per-class F1 over classes occurring in the truth or the
// predictions; F1 is 0 when precision + recall is 0.
inline EvalResult evaluate_predictions(std::span<const int> predicted, std::span<const int> truth, std::size_t n_classes) {
    if (predicted.size() != truth.size()) throw ArgumentError("evaluate: size mismatch");
    if (truth.empty()) throw ArgumentError("evaluate: empty test set");
    EvalResult r;
    r.confusion.assign(n_classes, std::vector<std::size_t>(n_classes, 0));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= n_classes ||
            static_cast<std::size_t>(predicted[i]) >= n_classes)
            throw ArgumentError("evaluate: label out of range");
        ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
    }
    std::size_t correct = 0;
    for (std::size_t c = 0; c < n_classes; ++c) correct += r.confusion[c][c];
    r.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    double f1_sum = 0.0;
    std::size_t classes = 0;
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::size_t tp = r.confusion[c][c], row = 0, col = 0;
        for (std::size_t k = 0; k < n_classes; ++k) {
            row += r.confusion[c][k];
            col += r.confusion[k][c];
        }
        if (row == 0 && col == 0) continue;
        ++classes;
        const double precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
        const double recall = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
        f1_sum += precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    r.macro_f1 = classes ? f1_sum / static_cast<double>(classes) : 0.0;
    return r;
}

inline EvalResult evaluate(const ClassifierParams& params, const Dataset& test) {
    if (test.size() == 0) throw ArgumentError("evaluate: empty test set");
    std::vector<int> pred;
    pred.reserve(test.size());
    for (const auto& x : test.x) pred.push_back(params.predict(x));
    return evaluate_predictions(pred, test.y, params.n_classes);
}

// Indices of a class-balanced subsample: every class present is cut down to
// the size of the rarest one, chosen uniformly under `seed`. Sorted ascending.
inline std::vector<std::size_t> balance_subsample(std::span<const int> labels, std::uint64_t seed) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
    if (by_class.empty()) return {};
    std::size_t smallest = labels.size();
    for (const auto& [_, v] : by_class) smallest = std::min(smallest, v.size());
    Rng rng(derive_seed(seed, "balance"));
    std::vector<std::size_t> out;
    for (auto& [_, v] : by_class) {
        rng.shuffle(v);
        out.insert(out.end(), v.begin(), v.begin() + static_cast<std::ptrdiff_t>(smallest));
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline Dataset subset(const Dataset& d, std::span<const std::size_t> idx) {
    Dataset out;
    for (std::size_t i : idx) {
        out.x.push_back(d.x[i]);
        out.y.push_back(d.y[i]);
    }
    return out;
}

// Uniform random guesses; the reference "Baseline" row.
inline EvalResult random_baseline(std::span<const int> truth, std::size_t n_classes, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "random-baseline"));
    std::vector<int> pred;
    pred.reserve(truth.size());
    for (std::size_t i = 0; i < truth.size(); ++i) pred.push_back(static_cast<int>(rng.uniform_index(n_classes)));
    return evaluate_predictions(pred, truth, n_classes);
}

}  // namespace contrasim
