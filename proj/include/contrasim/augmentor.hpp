#pragma once

// Stochastic augmentation of a daily news set.
//
// An augmented set has n slots, n drawn from the empirical distribution of set
// sizes. Each slot draws an action: Re/S/N rewrite a uniformly chosen base
// headline through a generation provider and are quality-gated by a
// discriminator; Ra copies a uniformly chosen headline from another day. The
// slots are shuffled and the set is scored with simscore::score.
//
// All random draws happen in a single pre-pass before any provider call, so
// results do not depend on provider latency or on how many slots run at once.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "contrasim/corpus.hpp"
#include "contrasim/digest.hpp"
#include "contrasim/error.hpp"
#include "contrasim/rng.hpp"
#include "contrasim/simscore.hpp"
#include "contrasim/tfidf.hpp"

namespace contrasim {

class ActionDistribution {
public:
    // Probabilities are renormalized to sum to one.
    ActionDistribution(double p_re = 0.05, double p_s = 0.025, double p_n = 0.05, double p_ra = 0.775) {
        const std::array<double, 4> raw{p_re, p_s, p_n, p_ra};
        double sum = 0.0;
        for (double p : raw) {
            if (!(p >= 0.0) || !std::isfinite(p)) throw ArgumentError("probability must be >= 0");
            sum += p;
        }
        if (!(sum > 0.0)) throw ArgumentError("action probabilities sum to zero");
        raw_sum_ = sum;
        for (std::size_t i = 0; i < 4; ++i) p_[i] = raw[i] / sum;
    }

    double p(Action a) const { return p_[static_cast<std::size_t>(a)]; }
    const std::array<double, 4>& probabilities() const { return p_; }
    double raw_sum() const { return raw_sum_; }
    bool renormalized() const { return std::abs(raw_sum_ - 1.0) > 1e-12; }

private:
    std::array<double, 4> p_{};
    double raw_sum_ = 1.0;
};

// Discriminator score bands per action: negated [0, a), shifted [a, b),
// reworded [b, 1].
struct QualityBands {
    double negated_upper = 0.33;
    double reworded_lower = 0.66;

    void validate() const {
        if (!(0.0 < negated_upper && negated_upper < reworded_lower && reworded_lower < 1.0))
            throw ArgumentError("quality bands must satisfy 0 < negated_upper < reworded_lower < 1");
    }

    bool accepts(Action a, double score) const {
        switch (a) {
            case Action::N: return score >= 0.0 && score < negated_upper;
            case Action::S: return score >= negated_upper && score < reworded_lower;
            case Action::Re: return score >= reworded_lower && score <= 1.0;
            case Action::Ra: return true;
        }
        return false;
    }
};

inline std::size_t sample_length(std::span<const std::size_t> corpus_lengths, Rng& rng) {
    if (corpus_lengths.empty()) throw ArgumentError("sample_length: empty length distribution");
    return std::max<std::size_t>(1, corpus_lengths[rng.uniform_index(corpus_lengths.size())]);
}

inline Action sample_action(const ActionDistribution& dist, Rng& rng) {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (Action a : kAllActions) {
        acc += dist.p(a);
        if (u < acc) return a;
    }
    // u landed in the rounding gap above the last cumulative sum.
    for (auto it = kAllActions.rbegin(); it != kAllActions.rend(); ++it)
        if (dist.p(*it) > 0.0) return *it;
    return Action::Ra;
}

struct PromptTemplates {
    std::string reword =
        "Please reword this headline for me, preserving the exact semantic meaning perfectly. Your returned headline "
        "should contain the exact information with no meaning added or subtracted, but just rephrased. Please "
        "generate the headline, and return only that with no other text. Thanks.";
    std::string shift =
        "Please modify this headline slightly, so it is about something related but different. If the headline is "
        "good news, ensure it remains good news, and if it is bad news, ensure it remains bad news. Please generate "
        "the headline, and return only that with no other text. Thanks.";
    std::string negate =
        "Please reword this headline for me such that the information is the same except that it now is about the "
        "opposite meaning. Please generate the headline, and return only that with no other text. Thanks.";

    const std::string& system_for(Action a) const {
        switch (a) {
            case Action::Re: return reword;
            case Action::S: return shift;
            case Action::N: return negate;
            case Action::Ra: break;
        }
        throw ArgumentError("no prompt template for action Ra");
    }

    static std::string user_for(std::string_view headline) { return "\"" + std::string(headline) + "\""; }
};

struct GenerationRequest {
    Action action = Action::Re;
    std::string system;
    std::string user;
    std::string base_text;
    double temperature = 0.7;
    // 0 for the first try; lets deterministic providers vary across retries.
    std::size_t attempt = 0;
};

class GenerationProvider {
public:
    virtual ~GenerationProvider() = default;
    virtual std::string generate(const GenerationRequest& request) = 0;
};

class DiscriminatorProvider {
public:
    virtual ~DiscriminatorProvider() = default;
    // Semantic similarity of (base, candidate) in [0, 1].
    virtual double score(const std::string& text_a, const std::string& text_b) = 0;
};

class FunctionGenerator final : public GenerationProvider {
public:
    explicit FunctionGenerator(std::function<std::string(const GenerationRequest&)> fn) : fn_(std::move(fn)) {}
    std::string generate(const GenerationRequest& r) override { return fn_(r); }

private:
    std::function<std::string(const GenerationRequest&)> fn_;
};

class FunctionDiscriminator final : public DiscriminatorProvider {
public:
    explicit FunctionDiscriminator(std::function<double(const std::string&, const std::string&)> fn)
        : fn_(std::move(fn)) {}
    double score(const std::string& a, const std::string& b) override { return fn_(a, b); }

private:
    std::function<double(const std::string&, const std::string&)> fn_;
};

inline std::string_view mock_tag(Action a) {
    switch (a) {
        case Action::Re: return "RE";
        case Action::S: return "SHIFT";
        case Action::N: return "NEG";
        case Action::Ra: return "RA";
    }
    return "";
}

// "<TAG>: <base>" with TAG in {RE, SHIFT, NEG}; retries append " [k]".
class MockGenerator final : public GenerationProvider {
public:
    std::string generate(const GenerationRequest& r) override {
        std::string out = std::string(mock_tag(r.action)) + ": " + r.base_text;
        if (r.attempt > 0) out += " [" + std::to_string(r.attempt) + "]";
        return out;
    }
};

// Scores mock generations at the centre of their action's band; anything else
// by word-set Jaccard overlap.
class MockDiscriminator final : public DiscriminatorProvider {
public:
    explicit MockDiscriminator(QualityBands bands = {}) : bands_(bands) {}

    double score(const std::string& a, const std::string& b) override {
        auto starts = [&](std::string_view tag) { return b.rfind(std::string(tag) + ": ", 0) == 0; };
        if (starts(mock_tag(Action::Re))) return (bands_.reworded_lower + 1.0) / 2.0;
        if (starts(mock_tag(Action::S))) return (bands_.negated_upper + bands_.reworded_lower) / 2.0;
        if (starts(mock_tag(Action::N))) return bands_.negated_upper / 2.0;
        const auto wa = split_words(a), wb = split_words(b);
        std::set<std::string_view> sa(wa.begin(), wa.end()), sb(wb.begin(), wb.end());
        std::size_t inter = 0;
        for (auto w : sa) inter += sb.count(w);
        const std::size_t uni = sa.size() + sb.size() - inter;
        return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    }

private:
    QualityBands bands_;
};

struct AugmentOptions {
    QualityBands bands;
    PromptTemplates prompts;
    double temperature = 0.7;
    // Retries after the first attempt.
    std::size_t max_retries = 3;
    // Concurrent slot generations; 1 runs them inline.
    std::size_t max_in_flight = 1;
};

struct VariantResult {
    std::string text;
    bool accepted = false;
    double score = 0.0;
    std::size_t attempts = 0;
};

namespace detail {

inline std::string clean_generation(std::string s) {
    auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

}  // namespace detail

inline VariantResult generate_variant(Action action, const Headline& base, GenerationProvider& gen,
                                      DiscriminatorProvider& disc, const AugmentOptions& options = {}) {
    if (action == Action::Ra) throw ArgumentError("generate_variant: Ra is not a generated action");
    GenerationRequest req;
    req.action = action;
    req.system = options.prompts.system_for(action);
    req.user = PromptTemplates::user_for(base.text);
    req.base_text = base.text;
    req.temperature = options.temperature;

    VariantResult result;
    bool any_text = false;
    for (std::size_t attempt = 0; attempt <= options.max_retries; ++attempt) {
        req.attempt = attempt;
        result.attempts = attempt + 1;
        std::string candidate = detail::clean_generation(gen.generate(req));
        if (candidate.empty()) continue;
        any_text = true;
        const double s = disc.score(base.text, candidate);
        if (!std::isfinite(s) || s < 0.0 || s > 1.0)
            throw ProviderError("discriminator score " + std::to_string(s) + " outside [0, 1]");
        result.text = std::move(candidate);
        result.score = s;
        if (options.bands.accepts(action, s)) {
            result.accepted = true;
            return result;
        }
    }
    if (!any_text) throw ProviderError("empty generation for headline " + base.id);
    return result;
}

struct AugmentedSlot {
    Action action = Action::Ra;
    std::optional<std::string> source_id;
    std::string text;
    std::optional<double> disc_score;
    // A Re/S/N slot whose generations all failed the quality gate, replaced by Ra.
    bool degraded = false;

    bool operator==(const AugmentedSlot&) const = default;
};

struct AugmentedSet {
    Date base_date;
    std::vector<AugmentedSlot> slots;
    double s = 0.0;

    std::vector<std::string> texts() const {
        std::vector<std::string> out;
        out.reserve(slots.size());
        for (const auto& sl : slots) out.push_back(sl.text);
        return out;
    }

    std::vector<Action> actions() const {
        std::vector<Action> out;
        for (const auto& sl : slots) out.push_back(sl.action);
        return out;
    }

    bool operator==(const AugmentedSet&) const = default;
};

struct Providers {
    GenerationProvider& gen;
    DiscriminatorProvider& disc;
};

namespace detail {

struct SlotPlan {
    Action action;
    const Headline* source;    // base headline for Re/S/N, corpus headline for Ra
    const Headline* fallback;  // Ra replacement if generation is rejected
};

inline std::vector<const Headline*> random_pool(const DailyNewsSet& base, std::span<const DailyNewsSet> corpus) {
    std::vector<const Headline*> pool;
    for (const auto& d : corpus) {
        if (d.date == base.date) continue;
        for (const auto& h : d.headlines) pool.push_back(&h);
    }
    return pool;
}

}  // namespace detail

// `corpus` is the training split; it supplies both the length distribution and
// the Ra pool (excluding the base day).
inline AugmentedSet transform(const DailyNewsSet& base, std::span<const DailyNewsSet> corpus,
                              const ActionDistribution& dist, Providers providers, Rng& rng,
                              const AugmentOptions& options = {}) {
    if (base.headlines.empty()) throw ArgumentError("transform: base set has no headlines");
    const auto pool = detail::random_pool(base, corpus);
    if (pool.empty()) throw ArgumentError("transform: corpus has no headlines outside the base day");
    std::vector<std::size_t> lengths;
    lengths.reserve(corpus.size());
    for (const auto& d : corpus) lengths.push_back(d.headlines.size());

    // Pre-pass: every random draw, in a fixed order.
    const std::size_t n = sample_length(lengths, rng);
    std::vector<detail::SlotPlan> plan;
    plan.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Action a = sample_action(dist, rng);
        if (a == Action::Ra) {
            plan.push_back({a, pool[rng.uniform_index(pool.size())], nullptr});
        } else {
            const Headline* src = &base.headlines[rng.uniform_index(base.headlines.size())];
            const Headline* fb = pool[rng.uniform_index(pool.size())];
            plan.push_back({a, src, fb});
        }
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);

    // Provider calls; committed by slot index.
    std::vector<AugmentedSlot> slots(n);
    auto run_slot = [&](std::size_t i) {
        const auto& p = plan[i];
        AugmentedSlot slot;
        if (p.action == Action::Ra) {
            slot = {Action::Ra, p.source->id, p.source->text, std::nullopt, false};
        } else {
            auto v = generate_variant(p.action, *p.source, providers.gen, providers.disc, options);
            if (v.accepted)
                slot = {p.action, p.source->id, std::move(v.text), v.score, false};
            else
                slot = {Action::Ra, p.fallback->id, p.fallback->text, std::nullopt, true};
        }
        return slot;
    };
    const std::size_t cap = std::max<std::size_t>(1, options.max_in_flight);
    if (cap == 1) {
        for (std::size_t i = 0; i < n; ++i) slots[i] = run_slot(i);
    } else {
        for (std::size_t start = 0; start < n; start += cap) {
            std::vector<std::future<AugmentedSlot>> inflight;
            const std::size_t end = std::min(n, start + cap);
            for (std::size_t i = start; i < end; ++i) inflight.push_back(std::async(std::launch::async, run_slot, i));
            for (std::size_t i = start; i < end; ++i) slots[i] = inflight[i - start].get();
        }
    }

    AugmentedSet out;
    out.base_date = base.date;
    out.slots.reserve(n);
    for (std::size_t i : order) out.slots.push_back(std::move(slots[i]));
    out.s = score(std::span<const Action>(out.actions()));
    return out;
}

// ---- augmented dataset file ------------------------------------------------

inline nlohmann::json record_body(const AugmentedSet& set) {
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& sl : set.slots) {
        nlohmann::json js;
        js["action"] = to_string(sl.action);
        js["source_id"] = sl.source_id ? nlohmann::json(*sl.source_id) : nlohmann::json(nullptr);
        js["text"] = sl.text;
        js["disc_score"] = sl.disc_score ? nlohmann::json(*sl.disc_score) : nlohmann::json(nullptr);
        if (sl.degraded) js["degraded"] = true;
        slots.push_back(std::move(js));
    }
    return {{"base_date", set.base_date.iso()}, {"slots", std::move(slots)}, {"s", set.s}};
}

inline std::string record_checksum(const nlohmann::json& body) { return sha256_hex(body.dump()); }

inline std::string to_record_line(const AugmentedSet& set) {
    auto j = record_body(set);
    j["checksum"] = record_checksum(j);
    return j.dump();
}

// Throws DataError on schema or checksum mismatch.
inline AugmentedSet parse_record_line(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed augmented record: ") + e.what());
    }
    try {
        const auto checksum = j.at("checksum").get<std::string>();
        j.erase("checksum");
        if (record_checksum(j) != checksum) throw DataError("augmented record checksum mismatch");
        AugmentedSet set;
        set.base_date = Date::parse(j.at("base_date").get<std::string>());
        for (const auto& js : j.at("slots")) {
            AugmentedSlot sl;
            sl.action = parse_action(js.at("action").get<std::string>());
            if (!js.at("source_id").is_null()) sl.source_id = js.at("source_id").get<std::string>();
            sl.text = js.at("text").get<std::string>();
            if (!js.at("disc_score").is_null()) sl.disc_score = js.at("disc_score").get<double>();
            sl.degraded = js.value("degraded", false);
            set.slots.push_back(std::move(sl));
        }
        if (set.slots.empty()) throw DataError("augmented record has no slots");
        set.s = j.at("s").get<double>();
        return set;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed augmented record: ") + e.what());
    }
}

inline std::vector<AugmentedSet> load_augmented(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<AugmentedSet> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (is_blank(line)) continue;
        try {
            out.push_back(parse_record_line(line));
        } catch (const DataError& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// Each (anchor, m) record gets its own generator so any record can be
// regenerated in isolation.
inline Rng record_rng(std::uint64_t seed, const Date& anchor, std::size_t m) {
    return Rng(derive_seed(derive_seed(seed, "augment:" + anchor.iso()), m));
}

struct BuildStats {
    std::size_t records_written = 0;
    std::size_t anchors_resumed = 0;
    std::size_t records_dropped = 0;
};

// Writes `per_anchor` records for every training set, anchor by anchor in split
// order. An existing file is resumed: complete anchors with valid checksums are
// kept, anything after the first incomplete or corrupt record is regenerated.
inline BuildStats build_augmented_dataset(const CorpusSplit& split, std::size_t per_anchor,
                                          const ActionDistribution& dist, Providers providers,
                                          const AugmentOptions& options, std::uint64_t seed,
                                          const std::filesystem::path& path) {
    if (per_anchor == 0) throw ArgumentError("per_anchor (M) must be at least 1");
    if (split.train.empty()) throw ArgumentError("training split is empty");

    BuildStats stats;
    std::vector<std::string> kept;
    if (std::filesystem::exists(path)) {
        std::ifstream in(path);
        std::string line;
        std::size_t anchor = 0, m = 0;
        std::vector<std::string> pending;
        while (std::getline(in, line)) {
            if (anchor >= split.train.size()) break;
            AugmentedSet rec;
            try {
                rec = parse_record_line(line);
            } catch (const DataError&) {
                break;
            }
            if (rec.base_date != split.train[anchor].date) break;
            pending.push_back(line);
            if (++m == per_anchor) {
                kept.insert(kept.end(), pending.begin(), pending.end());
                pending.clear();
                m = 0;
                ++anchor;
            }
        }
        stats.anchors_resumed = anchor;
        std::size_t total_lines = 0;
        {
            std::ifstream again(path);
            while (std::getline(again, line)) ++total_lines;
        }
        stats.records_dropped = total_lines - kept.size();
    }

    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& l : kept) out << l << '\n';
    out.flush();

    for (std::size_t a = stats.anchors_resumed; a < split.train.size(); ++a) {
        const auto& base = split.train[a];
        for (std::size_t m = 0; m < per_anchor; ++m) {
            Rng rng = record_rng(seed, base.date, m);
            const auto set = transform(base, split.train, dist, providers, rng, options);
            out << to_record_line(set) << '\n';
            ++stats.records_written;
        }
        out.flush();
        if (!out) throw DataError("write failed on " + path.string());
    }
    return stats;
}

}  // namespace contrasim
