#pragma once

// Single-hidden-layer perceptron parameters and the optimizer machinery shared
// by the projection network and the classification heads.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>

#include "contrasim/error.hpp"
#include "contrasim/rng.hpp"

namespace contrasim {

// y = W2 * relu(W1 * x + b1) + b2
struct TwoLayerParams {
    Eigen::MatrixXd w1;  // hidden x in
    Eigen::VectorXd b1;  // hidden
    Eigen::MatrixXd w2;  // out x hidden
    Eigen::VectorXd b2;  // out
    // Bumped on every in-place update; forward caches remember it.
    std::uint64_t revision = 0;

    std::size_t in_dim() const { return static_cast<std::size_t>(w1.cols()); }
    std::size_t hidden_dim() const { return static_cast<std::size_t>(w1.rows()); }
    std::size_t out_dim() const { return static_cast<std::size_t>(w2.rows()); }
    std::size_t num_parameters() const {
        return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
    }

    static TwoLayerParams zeros(std::size_t in, std::size_t hidden, std::size_t out) {
        const auto i = static_cast<Eigen::Index>(in), h = static_cast<Eigen::Index>(hidden),
                   o = static_cast<Eigen::Index>(out);
        return {Eigen::MatrixXd::Zero(h, i), Eigen::VectorXd::Zero(h), Eigen::MatrixXd::Zero(o, h),
                Eigen::VectorXd::Zero(o), 0};
    }

    static TwoLayerParams zeros_like(const TwoLayerParams& p) { return zeros(p.in_dim(), p.hidden_dim(), p.out_dim()); }

    // He-normal weights, zero biases.
    static TwoLayerParams he_normal(std::size_t in, std::size_t hidden, std::size_t out, Rng& rng) {
        auto p = zeros(in, hidden, out);
        const double s1 = std::sqrt(2.0 / static_cast<double>(in));
        const double s2 = std::sqrt(2.0 / static_cast<double>(hidden));
        for (Eigen::Index c = 0; c < p.w1.cols(); ++c)
            for (Eigen::Index r = 0; r < p.w1.rows(); ++r) p.w1(r, c) = s1 * rng.normal();
        for (Eigen::Index c = 0; c < p.w2.cols(); ++c)
            for (Eigen::Index r = 0; r < p.w2.rows(); ++r) p.w2(r, c) = s2 * rng.normal();
        return p;
    }

    bool same_shape(const TwoLayerParams& o) const {
        return w1.rows() == o.w1.rows() && w1.cols() == o.w1.cols() && w2.rows() == o.w2.rows() &&
               w2.cols() == o.w2.cols() && b1.size() == o.b1.size() && b2.size() == o.b2.size();
    }

    bool all_finite() const { return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite(); }

    double squared_norm() const {
        return w1.squaredNorm() + b1.squaredNorm() + w2.squaredNorm() + b2.squaredNorm();
    }

    TwoLayerParams& operator+=(const TwoLayerParams& o) {
        w1 += o.w1;
        b1 += o.b1;
        w2 += o.w2;
        b2 += o.b2;
        return *this;
    }

    TwoLayerParams& operator*=(double k) {
        w1 *= k;
        b1 *= k;
        w2 *= k;
        b2 *= k;
        return *this;
    }

    // Values only; the revision counter is bookkeeping.
    bool operator==(const TwoLayerParams& o) const {
        return same_shape(o) && w1 == o.w1 && b1 == o.b1 && w2 == o.w2 && b2 == o.b2;
    }
};

// Calls fn(tensor_a, tensor_b, ...) for each of the four tensors in lockstep.
template <typename Fn, typename... P>
void zip_tensors(Fn&& fn, P&... params) {
    fn(params.w1...);
    fn(params.b1...);
    fn(params.w2...);
    fn(params.b2...);
}

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    TwoLayerParams m;
    TwoLayerParams v;
    std::size_t t = 0;

    static AdamState for_params(const TwoLayerParams& p) {
        return {TwoLayerParams::zeros_like(p), TwoLayerParams::zeros_like(p), 0};
    }
};

// Bias-corrected Adam. A non-finite gradient aborts the step and leaves
// params and state untouched.
inline void adam_step(TwoLayerParams& params, const TwoLayerParams& grads, AdamState& state, double lr,
                      const AdamConfig& cfg = {}) {
    if (!params.same_shape(grads) || !params.same_shape(state.m) || !params.same_shape(state.v))
        throw ArgumentError("adam_step: shape mismatch");
    if (!(lr >= 0.0)) throw ArgumentError("adam_step: learning rate must be non-negative");
    if (!grads.all_finite()) throw NumericError("adam_step: non-finite gradient");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    zip_tensors(
        [&](auto& p, const auto& g, auto& m, auto& v) {
            m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
            v = cfg.beta2 * v.array() + (1.0 - cfg.beta2) * g.array().square();
            p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + cfg.eps);
        },
        params, grads, state.m, state.v);
    ++params.revision;
}

inline double global_norm(const TwoLayerParams& g) { return std::sqrt(g.squared_norm()); }

// Rescales so the global L2 norm is at most clip_norm.
inline TwoLayerParams clip_gradients(TwoLayerParams grads, double clip_norm = 1.0) {
    if (!(clip_norm > 0.0)) throw ArgumentError("clip_norm must be positive");
    const double n = global_norm(grads);
    if (n > clip_norm) grads *= clip_norm / n;
    return grads;
}

// lr_min + (lr_max - lr_min) * (1 + cos(pi * t / T)) / 2
inline double cosine_lr(std::size_t t, std::size_t total, double lr_max, double lr_min = 0.0) {
    if (total == 0) throw ArgumentError("cosine_lr: total steps must be at least 1");
    if (t > total) throw ArgumentError("cosine_lr: step beyond schedule");
    const double frac = static_cast<double>(t) / static_cast<double>(total);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

}  // namespace contrasim
