#pragma once

// JSON checkpoints for projection and classifier networks. Matrices are stored
// flat in row-major order; doubles round-trip exactly.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "contrasim/error.hpp"
#include "contrasim/heads.hpp"
#include "contrasim/mlp.hpp"
#include "contrasim/projnet.hpp"

namespace contrasim {

inline constexpr std::string_view kCheckpointFormat = "contrasim-checkpoint";
inline constexpr int kCheckpointVersion = 1;

namespace detail {

inline nlohmann::json flat(const Eigen::MatrixXd& m) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
}

inline Eigen::MatrixXd unflat(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols, const char* name) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != static_cast<std::size_t>(rows * cols))
        throw DataError(std::string("checkpoint: tensor ") + name + " has " + std::to_string(v.size()) + " values, expected " +
                        std::to_string(rows * cols));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = v[static_cast<std::size_t>(r * cols + c)];
    return m;
}

inline nlohmann::json tensors_json(const TwoLayerParams& p) {
    return {{"w1", flat(p.w1)}, {"b1", flat(p.b1)}, {"w2", flat(p.w2)}, {"b2", flat(p.b2)}};
}

inline TwoLayerParams tensors_from(const nlohmann::json& j, std::size_t in, std::size_t hidden, std::size_t out) {
    const auto i = static_cast<Eigen::Index>(in), h = static_cast<Eigen::Index>(hidden), o = static_cast<Eigen::Index>(out);
    TwoLayerParams p;
    p.w1 = unflat(j.at("w1"), h, i, "w1");
    p.b1 = unflat(j.at("b1"), h, 1, "b1");
    p.w2 = unflat(j.at("w2"), o, h, "w2");
    p.b2 = unflat(j.at("b2"), o, 1, "b2");
    return p;
}

}  // namespace detail

struct Checkpoint {
    std::string kind;  // "projection" or "classifier"
    TwoLayerParams params;
    std::optional<AdamState> optimizer;
    std::uint64_t seed = 0;
    nlohmann::json config = nlohmann::json::object();
    nlohmann::json extra = nlohmann::json::object();

    nlohmann::json to_json() const {
        nlohmann::json j{{"format", kCheckpointFormat},
                         {"version", kCheckpointVersion},
                         {"kind", kind},
                         {"shapes", {{"in", params.in_dim()}, {"hidden", params.hidden_dim()}, {"out", params.out_dim()}}},
                         {"params", detail::tensors_json(params)},
                         {"seed", seed},
                         {"config", config},
                         {"extra", extra}};
        if (optimizer)
            j["optimizer"] = {{"t", optimizer->t}, {"m", detail::tensors_json(optimizer->m)}, {"v", detail::tensors_json(optimizer->v)}};
        return j;
    }

    static Checkpoint from_json(const nlohmann::json& j) {
        try {
            if (j.at("format").get<std::string>() != kCheckpointFormat) throw DataError("checkpoint: unknown format");
            if (j.at("version").get<int>() != kCheckpointVersion)
                throw DataError("checkpoint: unsupported version " + j.at("version").dump());
            Checkpoint c;
            c.kind = j.at("kind").get<std::string>();
            const auto& s = j.at("shapes");
            const auto in = s.at("in").get<std::size_t>(), hidden = s.at("hidden").get<std::size_t>(),
                       out = s.at("out").get<std::size_t>();
            c.params = detail::tensors_from(j.at("params"), in, hidden, out);
            if (j.contains("optimizer")) {
                const auto& o = j.at("optimizer");
                c.optimizer = AdamState{detail::tensors_from(o.at("m"), in, hidden, out),
                                        detail::tensors_from(o.at("v"), in, hidden, out), o.at("t").get<std::size_t>()};
            }
            c.seed = j.at("seed").get<std::uint64_t>();
            c.config = j.value("config", nlohmann::json::object());
            c.extra = j.value("extra", nlohmann::json::object());
            return c;
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("checkpoint: ") + e.what());
        }
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write checkpoint " + path.string());
        out << to_json().dump() << '\n';
    }

    static Checkpoint load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open checkpoint " + path.string());
        try {
            return from_json(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ": " + e.what());
        }
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"lr", c.lr},
            {"beta1", c.beta1},
            {"beta2", c.beta2},
            {"epochs", c.epochs},
            {"batch_anchors", c.batch_anchors},
            {"margin", c.margin},
            {"temperature", c.temperature},
            {"clip_norm", c.clip_norm},
            {"loss", to_string(c.loss)},
            {"cwcl_distance", to_string(c.cwcl_distance)},
            {"hidden", c.hidden},
            {"out_dim", c.out_dim},
            {"seed", c.seed}};
}

inline Checkpoint projection_checkpoint(const TrainState& st, const TrainConfig& cfg) {
    return {"projection", st.params, st.optimizer, cfg.seed, to_json(cfg), {{"step", st.step}}};
}

inline ProjectionParams load_projection(const std::filesystem::path& path) {
    auto c = Checkpoint::load(path);
    if (c.kind != "projection") throw DataError(path.string() + ": expected a projection checkpoint, found " + c.kind);
    return c.params;
}

inline Checkpoint classifier_checkpoint(const ClassifierParams& p, const ClassifierConfig& cfg) {
    return {"classifier",
            p.net,
            std::nullopt,
            cfg.seed,
            {{"hidden", cfg.hidden}, {"lr", cfg.lr}, {"epochs", cfg.epochs}, {"batch_size", cfg.batch_size}, {"patience", cfg.patience}},
            {{"n_classes", p.n_classes}, {"source", to_string(p.source)}}};
}

inline ClassifierParams load_classifier(const std::filesystem::path& path) {
    auto c = Checkpoint::load(path);
    if (c.kind != "classifier") throw DataError(path.string() + ": expected a classifier checkpoint, found " + c.kind);
    try {
        return {c.params, c.extra.at("n_classes").get<std::size_t>(),
                parse_feature_source(c.extra.at("source").get<std::string>())};
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

}  // namespace contrasim
