#pragma once

// Projection network p = normalize(W2 relu(W1 e + b1) + b2) and its training
// under the two weighted contrastive losses.
//
// WSCL, per (anchor i, augmentation j) pair with d = ||p_i - q_ij||:
//     s d^2 + (1 - s) max(0, margin - d)^2
// CWCL, per anchor over its augmentations:
//     -sum_j s_ij log softmax_j(-d_ij / tau)
// Both are averaged over the number of (i, j) pairs in the batch. Anchors and
// augmentations go through the same network and both receive gradients.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contrasim/embed.hpp"
#include "contrasim/error.hpp"
#include "contrasim/mlp.hpp"
#include "contrasim/rng.hpp"

namespace contrasim {

using ProjectionParams = TwoLayerParams;

enum class LossKind { Wscl, Cwcl };
enum class CwclDistance { Euclidean, NegCosine };

inline std::string_view to_string(LossKind k) { return k == LossKind::Wscl ? "wscl" : "cwcl"; }
inline std::string_view to_string(CwclDistance d) { return d == CwclDistance::Euclidean ? "euclidean" : "neg_cosine"; }

inline LossKind parse_loss_kind(std::string_view s) {
    if (s == "wscl") return LossKind::Wscl;
    if (s == "cwcl") return LossKind::Cwcl;
    throw ArgumentError("unknown loss '" + std::string(s) + "' (expected wscl or cwcl)");
}

inline CwclDistance parse_cwcl_distance(std::string_view s) {
    if (s == "euclidean") return CwclDistance::Euclidean;
    if (s == "neg_cosine") return CwclDistance::NegCosine;
    throw ArgumentError("unknown cwcl_distance '" + std::string(s) + "'");
}

struct TrainConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::size_t epochs = 50;
    std::size_t batch_anchors = 2;
    double margin = 1.0;
    double temperature = 0.1;
    double clip_norm = 1.0;
    LossKind loss = LossKind::Wscl;
    CwclDistance cwcl_distance = CwclDistance::Euclidean;
    std::size_t hidden = 256;
    std::size_t out_dim = 128;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(lr >= 0.0)) throw ArgumentError("lr must be >= 0");
        if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0)) throw ArgumentError("betas must lie in (0, 1)");
        if (!(margin > 0.0)) throw ArgumentError("margin must be > 0");
        if (!(temperature > 0.0)) throw ArgumentError("temperature must be > 0");
        if (!(clip_norm > 0.0)) throw ArgumentError("clip_norm must be > 0");
        if (batch_anchors == 0) throw ArgumentError("batch_anchors must be >= 1");
        if (hidden == 0 || out_dim == 0) throw ArgumentError("layer sizes must be >= 1");
    }
};

// He-normal weights, zero b1, b2 ~ N(0, 1e-3^2) so z = b2 is never exactly zero.
inline ProjectionParams init_projection(std::size_t in_dim, std::size_t hidden, std::size_t out_dim,
                                        std::uint64_t seed) {
    Rng rng(derive_seed(seed, "projection-init"));
    auto p = TwoLayerParams::he_normal(in_dim, hidden, out_dim, rng);
    for (Eigen::Index i = 0; i < p.b2.size(); ++i) p.b2[i] = 1e-3 * rng.normal();
    return p;
}

struct ForwardCache {
    Eigen::VectorXd e;
    Eigen::VectorXd pre;  // W1 e + b1
    Eigen::VectorXd h;    // relu(pre)
    double z_norm = 0.0;
    Eigen::VectorXd p;    // z / ||z||
    std::uint64_t revision = 0;
};

inline ForwardCache forward(const ProjectionParams& params, const Eigen::VectorXd& e) {
    if (static_cast<std::size_t>(e.size()) != params.in_dim())
        throw ArgumentError("forward: input dim " + std::to_string(e.size()) + " != " + std::to_string(params.in_dim()));
    ForwardCache c;
    c.e = e;
    c.pre = params.w1 * e + params.b1;
    c.h = c.pre.cwiseMax(0.0);
    const Eigen::VectorXd z = params.w2 * c.h + params.b2;
    c.z_norm = z.norm();
    if (!(c.z_norm >= kMinNorm)) throw NumericError("forward: projection output has near-zero norm");
    c.p = z / c.z_norm;
    c.revision = params.revision;
    return c;
}

inline ForwardCache forward(const ProjectionParams& params, const UnitVector& e) { return forward(params, e.values()); }

inline UnitVector project(const ProjectionParams& params, const UnitVector& e) {
    return UnitVector::normalize(forward(params, e).p);
}

struct BackwardResult {
    ProjectionParams grads;
    Eigen::VectorXd grad_input;
};

// Chain rule through the output normalization: dp/dz = (I - p p^T) / ||z||.
// Gradients are accumulated into `grads` when given.
inline Eigen::VectorXd backward_into(const ForwardCache& cache, const ProjectionParams& params,
                                     const Eigen::VectorXd& grad_p, ProjectionParams& grads) {
    if (cache.revision != params.revision || static_cast<std::size_t>(cache.e.size()) != params.in_dim())
        throw ArgumentError("backward: stale forward cache");
    const Eigen::VectorXd gz = (grad_p - cache.p * cache.p.dot(grad_p)) / cache.z_norm;
    grads.w2.noalias() += gz * cache.h.transpose();
    grads.b2 += gz;
    Eigen::VectorXd gpre = params.w2.transpose() * gz;
    for (Eigen::Index i = 0; i < gpre.size(); ++i)
        if (!(cache.pre[i] > 0.0)) gpre[i] = 0.0;
    grads.w1.noalias() += gpre * cache.e.transpose();
    grads.b1 += gpre;
    return params.w1.transpose() * gpre;
}

inline BackwardResult backward(const ForwardCache& cache, const ProjectionParams& params,
                               const Eigen::VectorXd& grad_p) {
    BackwardResult r{TwoLayerParams::zeros_like(params), {}};
    r.grad_input = backward_into(cache, params, grad_p, r.grads);
    return r;
}

// ---- losses on projected vectors -------------------------------------------

struct PairGroup {
    Eigen::VectorXd anchor;
    std::vector<Eigen::VectorXd> augs;
    std::vector<double> weights;  // s_ij in [0, 1]
};

struct LossResult {
    double loss = 0.0;
    std::vector<Eigen::VectorXd> grad_anchor;
    std::vector<std::vector<Eigen::VectorXd>> grad_augs;
};

namespace detail {

inline std::size_t pair_count(std::span<const PairGroup> batch) {
    std::size_t n = 0;
    for (const auto& g : batch) {
        if (g.augs.size() != g.weights.size()) throw ArgumentError("loss: weights/augmentations size mismatch");
        if (g.augs.empty()) throw ArgumentError("loss: anchor without augmentations");
        for (double s : g.weights)
            if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("loss: similarity weight outside [0, 1]");
        n += g.augs.size();
    }
    if (n == 0) throw ArgumentError("loss: empty batch");
    return n;
}

inline LossResult zero_result(std::span<const PairGroup> batch) {
    LossResult r;
    for (const auto& g : batch) {
        r.grad_anchor.push_back(Eigen::VectorXd::Zero(g.anchor.size()));
        std::vector<Eigen::VectorXd> ga;
        for (const auto& q : g.augs) ga.push_back(Eigen::VectorXd::Zero(q.size()));
        r.grad_augs.push_back(std::move(ga));
    }
    return r;
}

}  // namespace detail

inline LossResult loss_wscl(std::span<const PairGroup> batch, double margin) {
    if (!(margin > 0.0)) throw ArgumentError("loss_wscl: margin must be positive");
    const double inv_p = 1.0 / static_cast<double>(detail::pair_count(batch));
    LossResult r = detail::zero_result(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& g = batch[i];
        for (std::size_t j = 0; j < g.augs.size(); ++j) {
            const Eigen::VectorXd diff = g.anchor - g.augs[j];
            const double d = diff.norm();
            const double s = g.weights[j];
            const double hinge = std::max(0.0, margin - d);
            r.loss += inv_p * (s * d * d + (1.0 - s) * hinge * hinge);
            // d(s d^2)/dp = 2 s diff; the push term's d/dd is -2 (1-s) hinge,
            // taken as 0 at d = 0.
            Eigen::VectorXd gp = 2.0 * s * diff;
            if (d > 0.0 && hinge > 0.0) gp -= 2.0 * (1.0 - s) * hinge * diff / d;
            gp *= inv_p;
            r.grad_anchor[i] += gp;
            r.grad_augs[i][j] -= gp;
        }
    }
    return r;
}

inline LossResult loss_cwcl(std::span<const PairGroup> batch, double temperature,
                            CwclDistance distance = CwclDistance::Euclidean) {
    if (!(temperature > 0.0)) throw ArgumentError("loss_cwcl: temperature must be positive");
    const double inv_p = 1.0 / static_cast<double>(detail::pair_count(batch));
    LossResult r = detail::zero_result(batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& g = batch[i];
        const std::size_t m = g.augs.size();
        std::vector<double> d(m), logits(m);
        std::vector<Eigen::VectorXd> dd_dp(m);  // gradient of d_ij w.r.t. the anchor
        for (std::size_t j = 0; j < m; ++j) {
            if (distance == CwclDistance::Euclidean) {
                const Eigen::VectorXd diff = g.anchor - g.augs[j];
                d[j] = diff.norm();
                dd_dp[j] = d[j] > 0.0 ? Eigen::VectorXd(diff / d[j]) : Eigen::VectorXd::Zero(diff.size());
            } else {
                d[j] = -g.anchor.dot(g.augs[j]);
                dd_dp[j] = -g.augs[j];
            }
            logits[j] = -d[j] / temperature;
        }
        const double mx = *std::max_element(logits.begin(), logits.end());
        double sum = 0.0;
        for (double l : logits) sum += std::exp(l - mx);
        const double lse = mx + std::log(sum);
        double weight_total = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            r.loss -= inv_p * g.weights[j] * (logits[j] - lse);
            weight_total += g.weights[j];
        }
        for (std::size_t j = 0; j < m; ++j) {
            const double softmax = std::exp(logits[j] - lse);
            // dL/dlogit_j = -s_j + (sum_k s_k) softmax_j; dlogit/dd = -1/tau
            const double dl_dd = inv_p * (g.weights[j] - weight_total * softmax) / temperature;
            if (distance == CwclDistance::Euclidean) {
                r.grad_anchor[i] += dl_dd * dd_dp[j];
                r.grad_augs[i][j] -= dl_dd * dd_dp[j];
            } else {
                r.grad_anchor[i] += dl_dd * dd_dp[j];
                r.grad_augs[i][j] += dl_dd * (-g.anchor);
            }
        }
    }
    return r;
}

// ---- training ---------------------------------------------------------------

struct Pair {
    UnitVector embedding;
    double s = 0.0;
};

struct TrainExample {
    std::string key;  // anchor date, for logs
    UnitVector anchor;
    std::vector<Pair> augs;
};

struct Objective {
    double loss = 0.0;
    ProjectionParams grads;
};

// Loss and parameter gradient for a batch of examples.
inline Objective batch_objective(const ProjectionParams& params, std::span<const TrainExample* const> batch,
                                 const TrainConfig& cfg) {
    std::vector<PairGroup> groups;
    std::vector<ForwardCache> anchor_cache;
    std::vector<std::vector<ForwardCache>> aug_cache;
    for (const TrainExample* ex : batch) {
        PairGroup g;
        anchor_cache.push_back(forward(params, ex->anchor));
        g.anchor = anchor_cache.back().p;
        std::vector<ForwardCache> ac;
        for (const auto& pr : ex->augs) {
            ac.push_back(forward(params, pr.embedding));
            g.augs.push_back(ac.back().p);
            g.weights.push_back(pr.s);
        }
        aug_cache.push_back(std::move(ac));
        groups.push_back(std::move(g));
    }
    const LossResult lr = cfg.loss == LossKind::Wscl ? loss_wscl(groups, cfg.margin)
                                                     : loss_cwcl(groups, cfg.temperature, cfg.cwcl_distance);
    Objective out{lr.loss, TwoLayerParams::zeros_like(params)};
    for (std::size_t i = 0; i < groups.size(); ++i) {
        backward_into(anchor_cache[i], params, lr.grad_anchor[i], out.grads);
        for (std::size_t j = 0; j < aug_cache[i].size(); ++j)
            backward_into(aug_cache[i][j], params, lr.grad_augs[i][j], out.grads);
    }
    return out;
}

inline Objective batch_objective(const ProjectionParams& params, std::span<const TrainExample> batch,
                                 const TrainConfig& cfg) {
    std::vector<const TrainExample*> ptrs;
    for (const auto& ex : batch) ptrs.push_back(&ex);
    return batch_objective(params, std::span<const TrainExample* const>(ptrs), cfg);
}

struct TrainLogEntry {
    std::size_t epoch;
    std::size_t step;
    double lr;
    double loss;
};

struct TrainState {
    ProjectionParams params;
    AdamState optimizer;
    std::size_t step = 0;
};

// Forward, loss, backward, clip, Adam. Returns the batch loss.
inline double train_step(TrainState& state, std::span<const TrainExample* const> batch, const TrainConfig& cfg,
                         double lr) {
    Objective obj = batch_objective(state.params, batch, cfg);
    if (!std::isfinite(obj.loss)) throw NumericError("non-finite loss at step " + std::to_string(state.step));
    adam_step(state.params, clip_gradients(std::move(obj.grads), cfg.clip_norm), state.optimizer, lr,
              {cfg.beta1, cfg.beta2, 1e-8});
    ++state.step;
    return obj.loss;
}

struct TrainResult {
    TrainState state;
    std::vector<TrainLogEntry> log;
    std::vector<double> epoch_mean_loss;
};

// Called after every epoch with (epoch index, state); used for checkpoints.
using EpochCallback = std::function<void(std::size_t, const TrainState&)>;

inline TrainState initial_state(std::size_t in_dim, const TrainConfig& cfg) {
    TrainState st;
    st.params = init_projection(in_dim, cfg.hidden, cfg.out_dim, cfg.seed);
    st.optimizer = AdamState::for_params(st.params);
    return st;
}

// Epochs over shuffled anchors in batches of cfg.batch_anchors, with a cosine
// learning-rate schedule over all steps. Deterministic in (examples, cfg).
inline TrainResult train(std::span<const TrainExample> examples, const TrainConfig& cfg,
                         const EpochCallback& on_epoch = {}) {
    cfg.validate();
    if (examples.empty()) throw ArgumentError("train: no training examples");
    const std::size_t in_dim = examples.front().anchor.dim();
    for (const auto& ex : examples) {
        if (ex.augs.empty()) throw ArgumentError("train: anchor " + ex.key + " has no augmentations");
        if (ex.anchor.dim() != in_dim) throw ArgumentError("train: mixed embedding dimensions");
        for (const auto& a : ex.augs)
            if (a.embedding.dim() != in_dim) throw ArgumentError("train: mixed embedding dimensions");
    }
    TrainResult result{initial_state(in_dim, cfg), {}, {}};
    const std::size_t batches_per_epoch = (examples.size() + cfg.batch_anchors - 1) / cfg.batch_anchors;
    const std::size_t total_steps = cfg.epochs * batches_per_epoch;

    std::vector<const TrainExample*> order;
    for (const auto& ex : examples) order.push_back(&ex);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, "epoch:" + std::to_string(epoch)));
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            const std::size_t start = b * cfg.batch_anchors;
            const std::size_t len = std::min(cfg.batch_anchors, order.size() - start);
            const double lr = cosine_lr(result.state.step, total_steps, cfg.lr);
            const double loss =
                train_step(result.state, std::span<const TrainExample* const>(order.data() + start, len), cfg, lr);
            result.log.push_back({epoch, result.state.step - 1, lr, loss});
            epoch_loss += loss;
        }
        result.epoch_mean_loss.push_back(epoch_loss / static_cast<double>(batches_per_epoch));
        if (on_epoch) on_epoch(epoch, result.state);
    }
    return result;
}

}  // namespace contrasim
