#pragma once

// Daily news sets: ingestion, labelling, relevance filtering and splitting.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contrasim/date.hpp"
#include "contrasim/embed.hpp"
#include "contrasim/error.hpp"
#include "contrasim/rng.hpp"

namespace contrasim {

enum class MarketLabel { Fall = 0, Neutral = 1, Rise = 2 };

inline constexpr std::size_t kNumMarketLabels = 3;

inline std::string_view to_string(MarketLabel l) {
    switch (l) {
        case MarketLabel::Fall: return "Fall";
        case MarketLabel::Neutral: return "Neutral";
        case MarketLabel::Rise: return "Rise";
    }
    return "?";
}

// Review corpora reuse the three slots: Low/Medium/High.
inline std::string_view review_alias(MarketLabel l) {
    switch (l) {
        case MarketLabel::Fall: return "Low";
        case MarketLabel::Neutral: return "Medium";
        case MarketLabel::Rise: return "High";
    }
    return "?";
}

inline MarketLabel parse_label(std::string_view s) {
    if (s == "Fall" || s == "Low") return MarketLabel::Fall;
    if (s == "Neutral" || s == "Medium") return MarketLabel::Neutral;
    if (s == "Rise" || s == "High") return MarketLabel::Rise;
    throw DataError("unknown label '" + std::string(s) + "'");
}

enum class HeadlineSource { Wsj, Tweet, Review, Other };

inline std::string_view to_string(HeadlineSource s) {
    switch (s) {
        case HeadlineSource::Wsj: return "wsj";
        case HeadlineSource::Tweet: return "tweet";
        case HeadlineSource::Review: return "review";
        case HeadlineSource::Other: return "other";
    }
    return "other";
}

inline HeadlineSource parse_source(std::string_view s) {
    if (s == "wsj") return HeadlineSource::Wsj;
    if (s == "tweet") return HeadlineSource::Tweet;
    if (s == "review") return HeadlineSource::Review;
    if (s == "other") return HeadlineSource::Other;
    throw DataError("unknown source '" + std::string(s) + "'");
}

struct Headline {
    std::string id;
    Date date;
    std::string text;
    HeadlineSource source = HeadlineSource::Other;
};

// Headline ids are "<iso date>#<position>".
inline std::string headline_id(const Date& d, std::size_t index) { return d.iso() + "#" + std::to_string(index); }

inline bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

struct LabelDerivation {
    double pct_change;
    MarketLabel label;
};

inline constexpr double kNeutralBand = 0.5;

// Neutral iff -0.5 <= pct <= 0.5, both ends inclusive.
inline MarketLabel label_for_pct(double pct) {
    if (pct < -kNeutralBand) return MarketLabel::Fall;
    if (pct > kNeutralBand) return MarketLabel::Rise;
    return MarketLabel::Neutral;
}

inline LabelDerivation derive_label(double close_prev, double close_curr) {
    if (!(close_prev > 0.0)) throw ArgumentError("derive_label: previous close must be positive");
    if (!std::isfinite(close_curr)) throw ArgumentError("derive_label: current close must be finite");
    const double pct = (close_curr - close_prev) / close_prev * 100.0;
    return {pct, label_for_pct(pct)};
}

struct StarBreakpoints {
    double low_max = 5.5;
    double medium_max = 7.5;
};

inline MarketLabel label_from_stars(double stars, StarBreakpoints bp = {}) {
    if (stars <= bp.low_max) return MarketLabel::Fall;
    if (stars <= bp.medium_max) return MarketLabel::Neutral;
    return MarketLabel::Rise;
}

struct DailyNewsSet {
    Date date;
    std::vector<Headline> headlines;
    std::optional<MarketLabel> label;
    std::optional<double> pct_change;

    std::vector<std::string> texts() const {
        std::vector<std::string> out;
        out.reserve(headlines.size());
        for (const auto& h : headlines) out.push_back(h.text);
        return out;
    }

    // Throws DataError when an invariant does not hold.
    void validate() const {
        if (!date.valid()) throw DataError("invalid date");
        if (headlines.empty()) throw DataError("empty headline list");
        for (const auto& h : headlines) {
            if (h.date != date) throw DataError("headline " + h.id + " dated " + h.date.iso() + " in set for " + date.iso());
            if (is_blank(h.text)) throw DataError("blank headline " + h.id);
        }
        if (label && pct_change && label_for_pct(*pct_change) != *label)
            throw DataError("label " + std::string(to_string(*label)) + " inconsistent with pct_change " +
                            std::to_string(*pct_change));
    }
};

inline DailyNewsSet parse_dns_json(const nlohmann::json& j) {
    if (!j.is_object()) throw DataError("expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        static const std::set<std::string> known{"date", "headlines", "label", "pct_change", "source"};
        if (!known.contains(key)) throw DataError("unknown field '" + key + "'");
    }
    DailyNewsSet dns;
    dns.date = Date::parse(j.at("date").get<std::string>());
    HeadlineSource source = HeadlineSource::Other;
    if (j.contains("source")) source = parse_source(j.at("source").get<std::string>());
    const auto& hs = j.at("headlines");
    if (!hs.is_array()) throw DataError("headlines must be an array");
    if (hs.empty()) throw DataError("empty headline list");
    for (std::size_t i = 0; i < hs.size(); ++i) {
        auto text = hs[i].get<std::string>();
        if (is_blank(text)) throw DataError("headline " + std::to_string(i) + " is blank");
        dns.headlines.push_back({headline_id(dns.date, i), dns.date, std::move(text), source});
    }
    if (j.contains("label") && !j.at("label").is_null()) dns.label = parse_label(j.at("label").get<std::string>());
    if (j.contains("pct_change") && !j.at("pct_change").is_null()) {
        const double pct = j.at("pct_change").get<double>();
        if (!std::isfinite(pct)) throw DataError("pct_change must be finite");
        dns.pct_change = pct;
    }
    dns.validate();
    return dns;
}

inline nlohmann::json to_json(const DailyNewsSet& dns) {
    nlohmann::json j;
    j["date"] = dns.date.iso();
    j["headlines"] = dns.texts();
    if (dns.label) j["label"] = to_string(*dns.label);
    if (dns.pct_change) j["pct_change"] = *dns.pct_change;
    if (!dns.headlines.empty() && dns.headlines.front().source != HeadlineSource::Other)
        j["source"] = to_string(dns.headlines.front().source);
    return j;
}

// One DailyNewsSet per non-blank line, in stream order. Errors carry the line number.
inline std::vector<DailyNewsSet> ingest_dataset(std::istream& in, std::string_view name = "<stream>") {
    std::vector<DailyNewsSet> out;
    std::set<Date> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        auto where = [&] { return std::string(name) + ":" + std::to_string(lineno) + ": "; };
        DailyNewsSet dns;
        try {
            dns = parse_dns_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(where() + "malformed line: " + e.what());
        } catch (const DataError& e) {
            throw DataError(where() + e.what());
        }
        if (!seen.insert(dns.date).second) throw DataError(where() + "duplicate date " + dns.date.iso());
        out.push_back(std::move(dns));
    }
    return out;
}

inline std::vector<DailyNewsSet> ingest_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset " + path.string());
    return ingest_dataset(in, path.string());
}

inline void write_dataset(const std::filesystem::path& path, std::span<const DailyNewsSet> data) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& d : data) out << to_json(d).dump() << '\n';
}

// Keep a headline iff its best cosine against the references reaches `threshold`.
inline std::vector<Headline> relevance_filter(std::span<const Headline> headlines,
                                              std::span<const UnitVector> reference_embeddings,
                                              EmbeddingProvider& embedder, double threshold = 0.2) {
    if (reference_embeddings.empty()) throw ArgumentError("relevance_filter: no reference embeddings");
    const std::size_t dim = reference_embeddings.front().dim();
    for (const auto& r : reference_embeddings)
        if (r.dim() != dim) throw ArgumentError("relevance_filter: reference dimensions differ");

    std::vector<Headline> kept;
    for (const auto& h : headlines) {
        UnitVector e;
        try {
            e = embedder.embed(h.text);
        } catch (const Error& ex) {
            throw ProviderError("embedding headline " + h.id + ": " + ex.what());
        }
        if (e.dim() != dim)
            throw ProviderError("embedding headline " + h.id + ": dimension " + std::to_string(e.dim()) +
                                " does not match references (" + std::to_string(dim) + ")");
        double best = -1.0;
        for (const auto& r : reference_embeddings) best = std::max(best, e.dot(r));
        if (best >= threshold) kept.push_back(h);
    }
    return kept;
}

enum class SplitMode { Chronological, Random };

struct SplitFractions {
    double train = 0.8;
    double valid = 0.1;
    double test = 0.1;
};

struct CorpusSplit {
    std::vector<DailyNewsSet> train;
    std::vector<DailyNewsSet> valid;
    std::vector<DailyNewsSet> test;
    SplitMode mode = SplitMode::Chronological;
    std::uint64_t seed = 0;

    std::vector<DailyNewsSet> all() const {
        std::vector<DailyNewsSet> out = train;
        out.insert(out.end(), valid.begin(), valid.end());
        out.insert(out.end(), test.begin(), test.end());
        return out;
    }
};

struct SplitSizes {
    std::size_t train, valid, test;
};

// Valid and test get round(f * n) elements, at least one each when their
// fraction is positive; train takes the remainder.
inline SplitSizes split_sizes(std::size_t n, SplitFractions f) {
    for (double x : {f.train, f.valid, f.test})
        if (!(x >= 0.0)) throw ArgumentError("split fractions must be non-negative");
    if (std::abs(f.train + f.valid + f.test - 1.0) > 1e-9) throw ArgumentError("split fractions must sum to 1");
    if (n < 3) throw ArgumentError("split_corpus needs at least 3 elements, got " + std::to_string(n));
    auto piece = [&](double frac) -> std::size_t {
        if (frac <= 0.0) return 0;
        return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))));
    };
    const std::size_t valid = piece(f.valid);
    const std::size_t test = piece(f.test);
    if (valid + test >= n && f.train > 0.0) throw ArgumentError("split leaves no training data");
    return {n - valid - test, valid, test};
}

inline CorpusSplit split_corpus(std::vector<DailyNewsSet> data, SplitFractions fractions = {},
                                SplitMode mode = SplitMode::Chronological, std::uint64_t seed = 0) {
    const auto sizes = split_sizes(data.size(), fractions);
    if (mode == SplitMode::Chronological) {
        std::stable_sort(data.begin(), data.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
    } else {
        // Shuffle from a date-sorted order so the result does not depend on input order.
        std::stable_sort(data.begin(), data.end(), [](const auto& a, const auto& b) { return a.date < b.date; });
        Rng rng(derive_seed(seed, "split"));
        rng.shuffle(data);
    }
    CorpusSplit split;
    split.mode = mode;
    split.seed = seed;
    auto it = std::make_move_iterator(data.begin());
    split.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes.train));
    it += static_cast<std::ptrdiff_t>(sizes.train);
    split.valid.assign(it, it + static_cast<std::ptrdiff_t>(sizes.valid));
    it += static_cast<std::ptrdiff_t>(sizes.valid);
    split.test.assign(it, std::make_move_iterator(data.end()));
    return split;
}

}  // namespace contrasim
