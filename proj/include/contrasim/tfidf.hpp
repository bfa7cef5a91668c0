#pragma once

// tf-idf pruning of over-long day texts.
//
// Scores follow the common smoothed form: raw term count in the text times
// idf = ln((1 + N) / (1 + df)) + 1 over the N fitted documents, scaled so the
// text's highest-scoring word is 1.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "contrasim/error.hpp"

namespace contrasim {

// Words are maximal runs of non-whitespace.
inline std::vector<std::string_view> split_words(std::string_view text) {
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) words.push_back(text.substr(start, i - start));
    }
    return words;
}

class TfIdfModel {
public:
    TfIdfModel() = default;

    // Fit on the training documents only.
    static TfIdfModel fit(std::span<const std::string> documents) {
        TfIdfModel m;
        m.n_docs_ = documents.size();
        for (const auto& doc : documents) {
            std::set<std::string_view> uniq;
            for (auto w : split_words(doc)) uniq.insert(w);
            for (auto w : uniq) ++m.df_[std::string(w)];
        }
        m.fitted_ = true;
        return m;
    }

    bool fitted() const { return fitted_; }
    std::size_t n_docs() const { return n_docs_; }

    double idf(std::string_view term) const {
        require_fitted();
        auto it = df_.find(std::string(term));
        const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
        return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + df)) + 1.0;
    }

    // count * idf of every distinct word of `text`, divided by the largest
    // such value so the top word scores 1.
    std::unordered_map<std::string_view, double> scores(std::string_view text) const {
        require_fitted();
        std::unordered_map<std::string_view, double> counts;
        for (auto w : split_words(text)) counts[w] += 1.0;
        double top = 0.0;
        for (auto& [w, c] : counts) {
            c *= idf(w);
            top = std::max(top, c);
        }
        if (top > 0.0)
            for (auto& [_, c] : counts) c /= top;
        return counts;
    }

    nlohmann::json to_json() const {
        return {{"n_docs", n_docs_}, {"df", nlohmann::json(df_)}};
    }

    static TfIdfModel from_json(const nlohmann::json& j) {
        TfIdfModel m;
        m.n_docs_ = j.at("n_docs").get<std::size_t>();
        m.df_ = j.at("df").get<std::map<std::string, std::size_t>>();
        m.fitted_ = true;
        return m;
    }

private:
    void require_fitted() const {
        if (!fitted_) throw ArgumentError("tf-idf model is not fitted");
    }

    bool fitted_ = false;
    std::size_t n_docs_ = 0;
    std::map<std::string, std::size_t> df_;
};

// Applies only when `text` has more than max_words words: drops words scoring
// below `threshold`, then truncates to max_words. Kept words are rejoined with
// single spaces in original order.
inline std::string tfidf_prune(std::string_view text, const TfIdfModel& model, double threshold = 0.2,
                               std::size_t max_words = 3000) {
    if (!model.fitted()) throw ArgumentError("tf-idf model is not fitted");
    const auto words = split_words(text);
    if (words.size() <= max_words) return std::string(text);
    const auto scores = model.scores(text);
    std::string out;
    std::size_t kept = 0;
    for (auto w : words) {
        if (kept == max_words) break;
        if (scores.at(w) < threshold) continue;
        if (kept) out.push_back(' ');
        out.append(w);
        ++kept;
    }
    return out;
}

}  // namespace contrasim
