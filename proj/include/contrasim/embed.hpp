#pragma once

// Encoder embeddings as unit vectors, from pluggable providers.
//
// The encoder itself is external. Providers are: a precomputed store keyed by
// the SHA-256 of the embedded string, an HTTP embeddings endpoint (see
// http_providers.hpp) and a deterministic mock that maps text to a seeded
// Gaussian vector.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cmath>
#include <concepts>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contrasim/digest.hpp"
#include "contrasim/error.hpp"
#include "contrasim/rng.hpp"

namespace contrasim {

inline constexpr double kMinNorm = 1e-12;
inline constexpr double kUnitTolerance = 1e-9;

// L2-normalized, finite, non-empty real vector.
class UnitVector {
public:
    UnitVector() = default;

    // Throws NumericError when the norm is below kMinNorm or entries are not finite.
    static UnitVector normalize(Eigen::VectorXd v) {
        if (v.size() == 0) throw ArgumentError("normalize: empty vector");
        if (!v.allFinite()) throw NumericError("normalize: non-finite entries");
        const double n = v.norm();
        if (n < kMinNorm) throw NumericError("normalize: near-zero norm");
        v /= n;
        return UnitVector(std::move(v));
    }

    static UnitVector normalize(std::span<const double> v) {
        return normalize(Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()))));
    }

    // Keeps vectors that are already unit-norm bit-for-bit (so stored
    // embeddings round-trip exactly); normalizes anything else.
    static UnitVector adopt(std::span<const double> v) {
        Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        if (x.size() > 0 && x.allFinite() && std::abs(x.norm() - 1.0) <= kUnitTolerance) return UnitVector(std::move(x));
        return normalize(std::move(x));
    }

    const Eigen::VectorXd& values() const { return values_; }
    std::size_t dim() const { return static_cast<std::size_t>(values_.size()); }
    double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

    double dot(const UnitVector& other) const {
        if (other.dim() != dim()) throw ArgumentError("dot: dimension mismatch");
        return values_.dot(other.values_);
    }

    std::vector<double> to_std() const { return {values_.data(), values_.data() + values_.size()}; }

    friend bool operator==(const UnitVector& a, const UnitVector& b) {
        return a.values_.size() == b.values_.size() && a.values_ == b.values_;
    }

private:
    explicit UnitVector(Eigen::VectorXd v) : values_(std::move(v)) {}
    Eigen::VectorXd values_;
};

inline UnitVector normalize(const Eigen::VectorXd& v) { return UnitVector::normalize(v); }

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    // Output dimension, or 0 when not known before the first call.
    virtual std::size_t dim() const = 0;

    virtual std::vector<UnitVector> embed_batch(std::span<const std::string> texts) = 0;

    UnitVector embed(const std::string& text) {
        auto out = embed_batch(std::span<const std::string>(&text, 1));
        if (out.size() != 1) throw ProviderError("provider returned " + std::to_string(out.size()) + " vectors for 1 text");
        return std::move(out.front());
    }
};

inline UnitVector embed_text(const std::string& text, EmbeddingProvider& provider) { return provider.embed(text); }

// text -> seeded Gaussian -> normalize. The seed folds in the SHA-256 of the text.
class MockEmbedder final : public EmbeddingProvider {
public:
    explicit MockEmbedder(std::uint64_t seed = 0, std::size_t dim = 64) : seed_(seed), dim_(dim) {
        if (dim == 0) throw ArgumentError("MockEmbedder: dim must be positive");
    }

    std::size_t dim() const override { return dim_; }

    std::vector<UnitVector> embed_batch(std::span<const std::string> texts) override {
        std::vector<UnitVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(vector_for(t));
        return out;
    }

private:
    UnitVector vector_for(const std::string& text) const {
        const std::string digest = sha256_hex(text);
        const std::uint64_t text_seed = std::stoull(digest.substr(0, 16), nullptr, 16);
        Rng rng(derive_seed(seed_, text_seed));
        Eigen::VectorXd v(static_cast<Eigen::Index>(dim_));
        for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
        return UnitVector::normalize(std::move(v));
    }

    std::uint64_t seed_;
    std::size_t dim_;
};

// Store keys are the lowercase hex SHA-256 of the exact embedded string.
inline std::string store_key(std::string_view text) { return sha256_hex(text); }

// key -> UnitVector, all of one dimension. Serialized as JSONL
// {"key":"<hex>","dim":D,"vector":[...]} sorted by key.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return records_.size(); }
    bool contains(const std::string& key) const { return records_.contains(key); }
    const std::map<std::string, UnitVector>& records() const { return records_; }

    const UnitVector* find(const std::string& key) const {
        auto it = records_.find(key);
        return it == records_.end() ? nullptr : &it->second;
    }

    // Re-inserting an existing key overwrites it.
    void put(std::string key, UnitVector v) {
        if (dim_ == 0) dim_ = v.dim();
        if (v.dim() != dim_)
            throw DataError("embedding store: dimension mismatch for key '" + key + "' (" + std::to_string(v.dim()) +
                            " vs " + std::to_string(dim_) + ")");
        records_.insert_or_assign(std::move(key), std::move(v));
    }

    // Extra per-line fields are preserved by callers that need them (e.g. the
    // retrieval index); the store itself ignores them.
    static EmbeddingStore load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open embedding store " + path.string());
        EmbeddingStore store;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                auto key = j.at("key").get<std::string>();
                const auto dim = j.at("dim").get<std::size_t>();
                const auto vec = j.at("vector").get<std::vector<double>>();
                if (vec.size() != dim) throw DataError("vector length " + std::to_string(vec.size()) + " != dim");
                if (store.contains(key)) throw DataError("duplicate key '" + key + "'");
                store.put(std::move(key), UnitVector::adopt(vec));
            } catch (const nlohmann::json::exception& e) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            } catch (const Error& e) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        return store;
    }

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::trunc);
        if (!out) throw DataError("cannot write embedding store " + path.string());
        for (const auto& [key, v] : records_) out << record_json(key, v).dump() << '\n';
    }

    static nlohmann::json record_json(const std::string& key, const UnitVector& v) {
        return {{"key", key}, {"dim", v.dim()}, {"vector", v.to_std()}};
    }

private:
    std::size_t dim_ = 0;
    std::map<std::string, UnitVector> records_;
};

// File provider: look texts up in a store by their content key.
class StoreEmbedder final : public EmbeddingProvider {
public:
    explicit StoreEmbedder(std::shared_ptr<const EmbeddingStore> store) : store_(std::move(store)) {}

    std::size_t dim() const override { return store_->dim(); }

    std::vector<UnitVector> embed_batch(std::span<const std::string> texts) override {
        std::vector<UnitVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) {
            const auto key = store_key(t);
            const UnitVector* v = store_->find(key);
            if (!v) throw ProviderError("missing embedding for key " + key);
            out.push_back(*v);
        }
        return out;
    }

private:
    std::shared_ptr<const EmbeddingStore> store_;
};

// Store first, then a live provider for anything not precomputed.
class CachedEmbedder final : public EmbeddingProvider {
public:
    CachedEmbedder(std::shared_ptr<const EmbeddingStore> store, std::shared_ptr<EmbeddingProvider> fallback)
        : store_(std::move(store)), fallback_(std::move(fallback)) {}

    std::size_t dim() const override { return store_->dim() ? store_->dim() : fallback_->dim(); }

    std::vector<UnitVector> embed_batch(std::span<const std::string> texts) override {
        std::vector<UnitVector> out(texts.size());
        std::vector<std::string> missing;
        std::vector<std::size_t> missing_at;
        for (std::size_t i = 0; i < texts.size(); ++i) {
            if (const UnitVector* v = store_->find(store_key(texts[i]))) {
                out[i] = *v;
            } else {
                missing.push_back(texts[i]);
                missing_at.push_back(i);
            }
        }
        if (!missing.empty()) {
            if (!fallback_) throw ProviderError("missing embedding for key " + store_key(missing.front()));
            auto fetched = fallback_->embed_batch(missing);
            for (std::size_t i = 0; i < fetched.size(); ++i) {
                if (store_->dim() && fetched[i].dim() != store_->dim())
                    throw ProviderError("dimension mismatch: provider returned " + std::to_string(fetched[i].dim()) +
                                        ", store holds " + std::to_string(store_->dim()));
                out[missing_at[i]] = std::move(fetched[i]);
            }
        }
        return out;
    }

private:
    std::shared_ptr<const EmbeddingStore> store_;
    std::shared_ptr<EmbeddingProvider> fallback_;
};

template <typename Set>
concept TextSet = requires(const Set& s) {
    { s.texts() } -> std::convertible_to<std::vector<std::string>>;
};

inline std::string join_texts(std::span<const std::string> texts, std::string_view joiner) {
    std::string out;
    for (std::size_t i = 0; i < texts.size(); ++i) {
        if (i) out.append(joiner);
        out.append(texts[i]);
    }
    return out;
}

template <TextSet Set>
std::string set_text(const Set& set, std::string_view joiner = "\n") {
    const std::vector<std::string> texts = set.texts();
    return join_texts(texts, joiner);
}

// Embeds the joiner-concatenation of the set's texts in stored order.
template <TextSet Set>
UnitVector embed_dns(const Set& set, EmbeddingProvider& provider, std::string_view joiner = "\n") {
    return provider.embed(set_text(set, joiner));
}

}  // namespace contrasim
