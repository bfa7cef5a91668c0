#pragma once

// Exact similar-day search over projected DNS embeddings.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "contrasim/corpus.hpp"
#include "contrasim/date.hpp"
#include "contrasim/embed.hpp"
#include "contrasim/error.hpp"
#include "contrasim/projnet.hpp"

namespace contrasim {

enum class IndexSpace { Projection, Encoder };

struct IndexEntry {
    Date date;
    UnitVector vector;
    std::string preview;
};

struct RetrievalIndex {
    std::vector<IndexEntry> entries;  // ascending date
    std::vector<std::string> warnings;

    std::size_t size() const { return entries.size(); }
    std::size_t dim() const { return entries.empty() ? 0 : entries.front().vector.dim(); }

    const IndexEntry* find(const Date& d) const {
        auto it = std::lower_bound(entries.begin(), entries.end(), d,
                                   [](const IndexEntry& e, const Date& x) { return e.date < x; });
        return it != entries.end() && it->date == d ? &*it : nullptr;
    }

    // Embedding-store JSONL keyed by ISO date, plus a preview field.
    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw DataError("cannot write index " + path.string());
        for (const auto& e : entries) {
            nlohmann::json j{{"key", e.date.iso()}, {"dim", e.vector.dim()}, {"vector", e.vector.to_std()}, {"preview", e.preview}};
            out << j.dump() << '\n';
        }
    }

    static RetrievalIndex load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw DataError("cannot open index " + path.string());
        RetrievalIndex idx;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            try {
                const auto j = nlohmann::json::parse(line);
                const auto vec = j.at("vector").get<std::vector<double>>();
                if (vec.size() != j.at("dim").get<std::size_t>()) throw DataError("vector length != dim");
                idx.entries.push_back({Date::parse(j.at("key").get<std::string>()),
                                       UnitVector::normalize(std::span<const double>(vec)), j.value("preview", std::string{})});
            } catch (const nlohmann::json::exception& e) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            } catch (const Error& e) {
                throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        idx.sort_and_check();
        return idx;
    }

    void sort_and_check() {
        std::sort(entries.begin(), entries.end(), [](const IndexEntry& a, const IndexEntry& b) { return a.date < b.date; });
        for (std::size_t i = 1; i < entries.size(); ++i) {
            if (entries[i].date == entries[i - 1].date) throw DataError("index: duplicate date " + entries[i].date.iso());
            if (entries[i].vector.dim() != entries[0].vector.dim()) throw DataError("index: mixed dimensions");
        }
    }
};

// Maps an encoder embedding into the search space.
inline UnitVector to_index_space(const UnitVector& e, IndexSpace space, const ProjectionParams* params) {
    if (space == IndexSpace::Encoder) return e;
    if (!params) throw ArgumentError("projection parameters required for projection-space retrieval");
    return project(*params, e);
}

using DayTextFn = std::function<std::string(const DailyNewsSet&)>;

// Days whose embedding the provider cannot supply are skipped with a warning.
// `text_of` gives the string embedded per day (default: headlines joined by newlines).
inline RetrievalIndex build_index(std::span<const DailyNewsSet> days, EmbeddingProvider& provider,
                                  const ProjectionParams* params, IndexSpace space = IndexSpace::Projection,
                                  const DayTextFn& text_of = {}) {
    if (days.empty()) throw ArgumentError("build_index: no days to index");
    RetrievalIndex idx;
    for (const auto& d : days) {
        UnitVector e;
        try {
            e = provider.embed(text_of ? text_of(d) : set_text(d));
        } catch (const ProviderError& err) {
            idx.warnings.push_back("skipping " + d.date.iso() + ": " + err.what());
            continue;
        }
        idx.entries.push_back({d.date, to_index_space(e, space, params), d.headlines.empty() ? std::string{} : d.headlines.front().text});
    }
    if (idx.entries.empty()) throw ProviderError("build_index: no day could be embedded");
    idx.sort_and_check();
    return idx;
}

struct SimilarDayHit {
    Date date;
    double score = 0.0;
    std::string preview;

    nlohmann::json to_json() const { return {{"date", date.iso()}, {"score", score}, {"preview", preview}}; }
};

struct QueryResult {
    std::vector<SimilarDayHit> hits;
    // Set when k exceeded the number of candidates; all of them are returned.
    bool truncated = false;

    nlohmann::json to_json() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& h : hits) arr.push_back(h.to_json());
        return {{"hits", arr}, {"truncated", truncated}};
    }

    std::string to_table() const {
        std::ostringstream os;
        char buf[64];
        os << "rank  date        score     preview\n";
        for (std::size_t i = 0; i < hits.size(); ++i) {
            std::snprintf(buf, sizeof buf, "%-5zu %s  %+.6f ", i + 1, hits[i].date.iso().c_str(), hits[i].score);
            os << buf << hits[i].preview << '\n';
        }
        if (truncated) os << "(fewer candidates than requested)\n";
        return os.str();
    }
};

// Cosine ranking, descending score then ascending date. `exclude` removes
// the query's own day from the candidates.
inline QueryResult query(const RetrievalIndex& idx, const UnitVector& q, std::size_t k,
                         std::optional<Date> exclude = std::nullopt) {
    if (k == 0) throw ArgumentError("query: k must be at least 1");
    if (idx.entries.empty()) throw ArgumentError("query: index is empty");
    if (q.dim() != idx.dim())
        throw ArgumentError("query: dimension " + std::to_string(q.dim()) + " != index dimension " + std::to_string(idx.dim()));
    QueryResult r;
    for (const auto& e : idx.entries) {
        if (exclude && e.date == *exclude) continue;
        r.hits.push_back({e.date, q.dot(e.vector), e.preview});
    }
    std::stable_sort(r.hits.begin(), r.hits.end(), [](const SimilarDayHit& a, const SimilarDayHit& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.date < b.date;
    });
    if (k > r.hits.size()) r.truncated = true;
    else r.hits.resize(k);
    return r;
}

}  // namespace contrasim
