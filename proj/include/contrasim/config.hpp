#pragma once

// Pipeline configuration loaded from TOML. Every problem in a file is collected
// and reported together, each with its key path.

#include <tomlplusplus/toml.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "contrasim/augmentor.hpp"
#include "contrasim/checkpoint.hpp"
#include "contrasim/corpus.hpp"
#include "contrasim/error.hpp"
#include "contrasim/heads.hpp"
#include "contrasim/projnet.hpp"
#include "contrasim/retrieval.hpp"

namespace contrasim {

class ConfigError : public ArgumentError {
public:
    explicit ConfigError(std::vector<std::string> errors)
        : ArgumentError(join(errors)), errors_(std::move(errors)) {}

    const std::vector<std::string>& errors() const { return errors_; }

private:
    static std::string join(const std::vector<std::string>& e) {
        std::string s = "invalid configuration:";
        for (const auto& x : e) s += "\n  " + x;
        return s;
    }
    std::vector<std::string> errors_;
};

enum class ProviderKind { Mock, Http, File };

inline std::string_view to_string(ProviderKind k) {
    switch (k) {
        case ProviderKind::Mock: return "mock";
        case ProviderKind::Http: return "http";
        case ProviderKind::File: return "file";
    }
    return "?";
}

inline ProviderKind parse_provider_kind(std::string_view s) {
    if (s == "mock") return ProviderKind::Mock;
    if (s == "http") return ProviderKind::Http;
    if (s == "file") return ProviderKind::File;
    throw ArgumentError("unknown provider '" + std::string(s) + "' (expected mock, http or file)");
}

struct EndpointConfig {
    std::string url;
    std::string model;
    std::string api_key_env;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";

    struct Dataset {
        std::filesystem::path path;
        std::string split = "chronological";
        double train = 0.8, valid = 0.1, test = 0.1;
        std::filesystem::path references;  // relevance filter seeds; empty disables
        double relevance_threshold = 0.2;
        bool prune = true;
        double tfidf_threshold = 0.2;
        std::size_t max_words = 3000;
    } dataset;

    struct Providers {
        ProviderKind kind = ProviderKind::Mock;
        std::size_t mock_dim = 64;
        std::filesystem::path store;  // used by kind = "file"
        std::size_t timeout_s = 60;
        std::size_t retry_attempts = 3;
        EndpointConfig embed, generator, discriminator;
    } providers;

    struct Augment {
        std::size_t per_anchor = 8;
        double p_re = 0.05, p_s = 0.025, p_n = 0.05, p_ra = 0.775;
        double negated_upper = 0.33, reworded_lower = 0.66;
        double temperature = 0.7;
        std::size_t max_retries = 3;
        std::size_t max_in_flight = 1;
    } augment;

    TrainConfig projection;

    struct Metrics {
        std::size_t k = 5;
        std::size_t baseline_repeats = 1000;
        double eps = 1e-9;
    } metrics;

    struct Heads {
        ClassifierConfig classifier;
        bool balance = true;
    } heads;

    struct Retrieval {
        std::size_t k = 5;
        IndexSpace space = IndexSpace::Projection;
    } retrieval;

    // Informational notes produced while loading (e.g. renormalization).
    std::vector<std::string> notes;

    ActionDistribution distribution() const { return {augment.p_re, augment.p_s, augment.p_n, augment.p_ra}; }
    QualityBands bands() const { return {augment.negated_upper, augment.reworded_lower}; }
    SplitFractions fractions() const { return {dataset.train, dataset.valid, dataset.test}; }
    SplitMode split_mode() const { return dataset.split == "random" ? SplitMode::Random : SplitMode::Chronological; }

    AugmentOptions augment_options() const {
        AugmentOptions o;
        o.bands = bands();
        o.temperature = augment.temperature;
        o.max_retries = augment.max_retries;
        o.max_in_flight = augment.max_in_flight;
        return o;
    }

    ClassifierConfig classifier() const {
        ClassifierConfig c = heads.classifier;
        c.seed = derive_seed(seed, "heads");
        return c;
    }

    TrainConfig train_config() const {
        TrainConfig c = projection;
        c.seed = derive_seed(seed, "projection");
        return c;
    }

    // Constraint checks that apply after overrides too.
    std::vector<std::string> problems() const {
        std::vector<std::string> e;
        for (auto [name, p] : {std::pair{"augment.p_re", augment.p_re}, {"augment.p_s", augment.p_s},
                               {"augment.p_n", augment.p_n}, {"augment.p_ra", augment.p_ra}})
            if (!(p >= 0.0)) e.push_back(std::string(name) + ": probability must be >= 0");
        if (augment.p_re + augment.p_s + augment.p_n + augment.p_ra <= 0.0 && e.empty())
            e.push_back("augment: action probabilities sum to zero");
        if (!(0.0 < augment.negated_upper && augment.negated_upper < augment.reworded_lower && augment.reworded_lower < 1.0))
            e.push_back("augment.negated_upper/reworded_lower: need 0 < negated_upper < reworded_lower < 1");
        if (augment.per_anchor == 0) e.push_back("augment.per_anchor: must be >= 1");
        if (dataset.split != "chronological" && dataset.split != "random")
            e.push_back("dataset.split: expected \"chronological\" or \"random\"");
        for (auto [name, f] : {std::pair{"dataset.train", dataset.train}, {"dataset.valid", dataset.valid}, {"dataset.test", dataset.test}})
            if (!(f >= 0.0 && f <= 1.0)) e.push_back(std::string(name) + ": fraction must lie in [0, 1]");
        if (std::abs(dataset.train + dataset.valid + dataset.test - 1.0) > 1e-9)
            e.push_back("dataset: train + valid + test must sum to 1");
        if (!(dataset.relevance_threshold >= -1.0 && dataset.relevance_threshold <= 1.0))
            e.push_back("dataset.relevance_threshold: must lie in [-1, 1]");
        if (providers.mock_dim == 0) e.push_back("providers.mock_dim: must be >= 1");
        if (providers.kind == ProviderKind::Http) {
            if (providers.embed.url.empty()) e.push_back("providers.embed.url: required when providers.kind = \"http\"");
            if (providers.generator.url.empty()) e.push_back("providers.generator.url: required when providers.kind = \"http\"");
            if (providers.discriminator.url.empty())
                e.push_back("providers.discriminator.url: required when providers.kind = \"http\"");
        }
        if (providers.kind == ProviderKind::File && providers.store.empty())
            e.push_back("providers.store: required when providers.kind = \"file\"");
        try {
            projection.validate();
        } catch (const ArgumentError& x) {
            e.push_back(std::string("projection: ") + x.what());
        }
        if (metrics.k == 0) e.push_back("metrics.k: must be >= 1");
        if (metrics.baseline_repeats == 0) e.push_back("metrics.baseline_repeats: must be >= 1");
        if (!(metrics.eps > 0.0)) e.push_back("metrics.eps: must be > 0");
        if (heads.classifier.hidden == 0) e.push_back("heads.hidden: must be >= 1");
        if (!(heads.classifier.lr >= 0.0)) e.push_back("heads.lr: must be >= 0");
        if (heads.classifier.batch_size == 0) e.push_back("heads.batch_size: must be >= 1");
        if (retrieval.k == 0) e.push_back("retrieval.k: must be >= 1");
        return e;
    }

    void validate() const {
        auto e = problems();
        if (!e.empty()) throw ConfigError(std::move(e));
    }

    // Normalized echo for manifests.
    nlohmann::json to_json() const {
        const auto d = distribution();
        auto endpoint = [](const EndpointConfig& c) {
            return nlohmann::json{{"url", c.url}, {"model", c.model}, {"api_key_env", c.api_key_env}};
        };
        return {{"seed", seed},
                {"output_dir", output_dir.generic_string()},
                {"dataset",
                 {{"path", dataset.path.generic_string()},
                  {"split", dataset.split},
                  {"train", dataset.train},
                  {"valid", dataset.valid},
                  {"test", dataset.test},
                  {"references", dataset.references.generic_string()},
                  {"relevance_threshold", dataset.relevance_threshold},
                  {"prune", dataset.prune},
                  {"tfidf_threshold", dataset.tfidf_threshold},
                  {"max_words", dataset.max_words}}},
                {"providers",
                 {{"kind", to_string(providers.kind)},
                  {"mock_dim", providers.mock_dim},
                  {"store", providers.store.generic_string()},
                  {"timeout_s", providers.timeout_s},
                  {"retry_attempts", providers.retry_attempts},
                  {"embed", endpoint(providers.embed)},
                  {"generator", endpoint(providers.generator)},
                  {"discriminator", endpoint(providers.discriminator)}}},
                {"augment",
                 {{"per_anchor", augment.per_anchor},
                  {"p_re", d.p(Action::Re)},
                  {"p_s", d.p(Action::S)},
                  {"p_n", d.p(Action::N)},
                  {"p_ra", d.p(Action::Ra)},
                  {"negated_upper", augment.negated_upper},
                  {"reworded_lower", augment.reworded_lower},
                  {"temperature", augment.temperature},
                  {"max_retries", augment.max_retries},
                  {"max_in_flight", augment.max_in_flight}}},
                {"projection", contrasim::to_json(projection)},
                {"metrics", {{"k", metrics.k}, {"baseline_repeats", metrics.baseline_repeats}, {"eps", metrics.eps}}},
                {"heads",
                 {{"hidden", heads.classifier.hidden},
                  {"lr", heads.classifier.lr},
                  {"epochs", heads.classifier.epochs},
                  {"batch_size", heads.classifier.batch_size},
                  {"patience", heads.classifier.patience},
                  {"balance", heads.balance}}},
                {"retrieval", {{"k", retrieval.k}, {"space", retrieval.space == IndexSpace::Projection ? "projection" : "encoder"}}}};
    }
};

namespace detail {

class TomlReader {
public:
    std::vector<std::string> errors;

    // Visits `table` at `path`; unknown keys are reported.
    void section(const toml::table& parent, const std::string& key, const std::string& path,
                 const std::function<void(const toml::table&)>& body, const std::set<std::string>& known) {
        const toml::node* n = parent.get(key);
        if (!n) return;
        const auto* t = n->as_table();
        if (!t) {
            errors.push_back(path + ": expected a table");
            return;
        }
        body(*t);
        for (const auto& [k, _] : *t)
            if (!known.contains(std::string(k.str()))) errors.push_back(path + "." + std::string(k.str()) + ": unknown key");
    }

    template <typename T>
    void get(const toml::table& t, const std::string& path, const char* key, T& out) {
        const toml::node* n = t.get(key);
        if (!n) return;
        const std::string where = path.empty() ? std::string(key) : path + "." + key;
        if constexpr (std::is_same_v<T, bool>) {
            if (auto v = n->value_exact<bool>()) out = *v;
            else errors.push_back(where + ": expected a boolean");
        } else if constexpr (std::is_same_v<T, double>) {
            if (auto v = n->value_exact<double>()) out = *v;
            else if (auto i = n->value_exact<std::int64_t>()) out = static_cast<double>(*i);
            else errors.push_back(where + ": expected a number");
        } else if constexpr (std::is_integral_v<T>) {
            auto v = n->value_exact<std::int64_t>();
            if (!v) errors.push_back(where + ": expected an integer");
            else if (*v < 0) errors.push_back(where + ": must be >= 0");
            else out = static_cast<T>(*v);
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (auto v = n->value_exact<std::string>()) out = *v;
            else errors.push_back(where + ": expected a string");
        } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
            if (auto v = n->value_exact<std::string>()) out = *v;
            else errors.push_back(where + ": expected a string");
        }
    }

    template <typename E>
    void get_enum(const toml::table& t, const std::string& path, const char* key, E& out,
                  const std::function<E(std::string_view)>& parse) {
        std::string s;
        const std::size_t before = errors.size();
        if (!t.contains(key)) return;
        get(t, path, key, s);
        if (errors.size() != before) return;
        try {
            out = parse(s);
        } catch (const ArgumentError& e) {
            errors.push_back(path + "." + key + ": " + e.what());
        }
    }
};

}  // namespace detail

// Relative paths in the file resolve against `base_dir`.
inline PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {},
                                   std::string_view source_name = "config") {
    toml::table root;
    try {
        root = toml::parse(text, source_name);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << source_name << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
        throw ConfigError({os.str()});
    }

    PipelineConfig c;
    detail::TomlReader r;
    const std::set<std::string> top{"seed", "output_dir", "dataset", "providers", "augment", "projection", "metrics", "heads", "retrieval"};
    for (const auto& [k, _] : root)
        if (!top.contains(std::string(k.str()))) r.errors.push_back(std::string(k.str()) + ": unknown key");
    r.get(root, "", "seed", c.seed);
    r.get(root, "", "output_dir", c.output_dir);

    r.section(root, "dataset", "dataset", [&](const toml::table& t) {
        auto& d = c.dataset;
        r.get(t, "dataset", "path", d.path);
        r.get(t, "dataset", "split", d.split);
        r.get(t, "dataset", "train", d.train);
        r.get(t, "dataset", "valid", d.valid);
        r.get(t, "dataset", "test", d.test);
        r.get(t, "dataset", "references", d.references);
        r.get(t, "dataset", "relevance_threshold", d.relevance_threshold);
        r.get(t, "dataset", "prune", d.prune);
        r.get(t, "dataset", "tfidf_threshold", d.tfidf_threshold);
        r.get(t, "dataset", "max_words", d.max_words);
    }, {"path", "split", "train", "valid", "test", "references", "relevance_threshold", "prune", "tfidf_threshold", "max_words"});

    r.section(root, "providers", "providers", [&](const toml::table& t) {
        auto& p = c.providers;
        r.get_enum<ProviderKind>(t, "providers", "kind", p.kind, parse_provider_kind);
        r.get(t, "providers", "mock_dim", p.mock_dim);
        r.get(t, "providers", "store", p.store);
        r.get(t, "providers", "timeout_s", p.timeout_s);
        r.get(t, "providers", "retry_attempts", p.retry_attempts);
        for (auto [name, ep] : {std::pair{"embed", &p.embed}, {"generator", &p.generator}, {"discriminator", &p.discriminator}}) {
            const std::string path = std::string("providers.") + name;
            r.section(t, name, path, [&](const toml::table& s) {
                r.get(s, path, "url", ep->url);
                r.get(s, path, "model", ep->model);
                r.get(s, path, "api_key_env", ep->api_key_env);
                if (s.contains("api_key"))
                    r.errors.push_back(path + ".api_key: secrets are not accepted in the config; name an environment variable in api_key_env");
            }, {"url", "model", "api_key_env", "api_key"});
        }
    }, {"kind", "mock_dim", "store", "timeout_s", "retry_attempts", "embed", "generator", "discriminator"});

    r.section(root, "augment", "augment", [&](const toml::table& t) {
        auto& a = c.augment;
        r.get(t, "augment", "per_anchor", a.per_anchor);
        r.get(t, "augment", "p_re", a.p_re);
        r.get(t, "augment", "p_s", a.p_s);
        r.get(t, "augment", "p_n", a.p_n);
        r.get(t, "augment", "p_ra", a.p_ra);
        r.get(t, "augment", "negated_upper", a.negated_upper);
        r.get(t, "augment", "reworded_lower", a.reworded_lower);
        r.get(t, "augment", "temperature", a.temperature);
        r.get(t, "augment", "max_retries", a.max_retries);
        r.get(t, "augment", "max_in_flight", a.max_in_flight);
    }, {"per_anchor", "p_re", "p_s", "p_n", "p_ra", "negated_upper", "reworded_lower", "temperature", "max_retries", "max_in_flight"});

    r.section(root, "projection", "projection", [&](const toml::table& t) {
        auto& p = c.projection;
        r.get(t, "projection", "lr", p.lr);
        r.get(t, "projection", "beta1", p.beta1);
        r.get(t, "projection", "beta2", p.beta2);
        r.get(t, "projection", "epochs", p.epochs);
        r.get(t, "projection", "batch_anchors", p.batch_anchors);
        r.get(t, "projection", "margin", p.margin);
        r.get(t, "projection", "temperature", p.temperature);
        r.get(t, "projection", "clip_norm", p.clip_norm);
        r.get_enum<LossKind>(t, "projection", "loss", p.loss, parse_loss_kind);
        r.get_enum<CwclDistance>(t, "projection", "cwcl_distance", p.cwcl_distance, parse_cwcl_distance);
        r.get(t, "projection", "hidden", p.hidden);
        r.get(t, "projection", "out_dim", p.out_dim);
    }, {"lr", "beta1", "beta2", "epochs", "batch_anchors", "margin", "temperature", "clip_norm", "loss", "cwcl_distance", "hidden", "out_dim"});

    r.section(root, "metrics", "metrics", [&](const toml::table& t) {
        r.get(t, "metrics", "k", c.metrics.k);
        r.get(t, "metrics", "baseline_repeats", c.metrics.baseline_repeats);
        r.get(t, "metrics", "eps", c.metrics.eps);
    }, {"k", "baseline_repeats", "eps"});

    r.section(root, "heads", "heads", [&](const toml::table& t) {
        auto& h = c.heads.classifier;
        r.get(t, "heads", "hidden", h.hidden);
        r.get(t, "heads", "lr", h.lr);
        r.get(t, "heads", "epochs", h.epochs);
        r.get(t, "heads", "batch_size", h.batch_size);
        r.get(t, "heads", "patience", h.patience);
        r.get(t, "heads", "balance", c.heads.balance);
    }, {"hidden", "lr", "epochs", "batch_size", "patience", "balance"});

    r.section(root, "retrieval", "retrieval", [&](const toml::table& t) {
        r.get(t, "retrieval", "k", c.retrieval.k);
        r.get_enum<IndexSpace>(t, "retrieval", "space", c.retrieval.space, [](std::string_view s) {
            if (s == "projection") return IndexSpace::Projection;
            if (s == "encoder") return IndexSpace::Encoder;
            throw ArgumentError("expected \"projection\" or \"encoder\"");
        });
    }, {"k", "space"});

    auto errors = std::move(r.errors);
    if (errors.empty()) {
        auto more = c.problems();
        errors.insert(errors.end(), more.begin(), more.end());
    }
    if (!errors.empty()) throw ConfigError(std::move(errors));

    auto resolve = [&](std::filesystem::path& p) {
        if (!p.empty() && p.is_relative() && !base_dir.empty()) p = (base_dir / p).lexically_normal();
    };
    resolve(c.dataset.path);
    resolve(c.dataset.references);
    resolve(c.providers.store);

    const auto dist = c.distribution();
    if (dist.renormalized()) {
        std::ostringstream os;
        os << "augment: action probabilities sum to " << dist.raw_sum() << "; renormalized to 1";
        c.notes.push_back(os.str());
    }
    return c;
}

inline PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError({"cannot read config file " + path.string()});
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.parent_path(), path.string());
}

}  // namespace contrasim
