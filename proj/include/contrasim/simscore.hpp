#pragma once

// Logarithmic similarity score of an augmented set against its base:
//
//   s = ln(1 + (sum of per-action similarities / S_max) * (e - 1))
//
// with S_max the all-reworded maximum, i.e. the slot count.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string_view>

#include "contrasim/error.hpp"

namespace contrasim {

// Reword, semantic shift, negate, random replacement.
enum class Action { Re = 0, S = 1, N = 2, Ra = 3 };

inline constexpr std::array<Action, 4> kAllActions{Action::Re, Action::S, Action::N, Action::Ra};

inline std::string_view to_string(Action a) {
    switch (a) {
        case Action::Re: return "Re";
        case Action::S: return "S";
        case Action::N: return "N";
        case Action::Ra: return "Ra";
    }
    return "?";
}

inline Action parse_action(std::string_view s) {
    for (Action a : kAllActions)
        if (to_string(a) == s) return a;
    throw ArgumentError("unknown augmentation action '" + std::string(s) + "'");
}

inline constexpr double per_action_sim(Action a) {
    switch (a) {
        case Action::Re: return 1.0;
        case Action::S: return 0.5;
        case Action::N: return 0.0;
        case Action::Ra: return 0.0;
    }
    return 0.0;
}

struct ActionCounts {
    std::size_t re = 0;
    std::size_t s = 0;
    std::size_t n = 0;
    std::size_t ra = 0;

    std::size_t total() const { return re + s + n + ra; }

    void add(Action a) {
        switch (a) {
            case Action::Re: ++re; break;
            case Action::S: ++s; break;
            case Action::N: ++n; break;
            case Action::Ra: ++ra; break;
        }
    }

    static ActionCounts of(std::span<const Action> actions) {
        ActionCounts c;
        for (Action a : actions) c.add(a);
        return c;
    }

    bool operator==(const ActionCounts&) const = default;
};

inline double score(const ActionCounts& c) {
    const std::size_t total = c.total();
    if (total == 0) throw ArgumentError("similarity score of an empty action multiset");
    const double raw = per_action_sim(Action::Re) * static_cast<double>(c.re) +
                       per_action_sim(Action::S) * static_cast<double>(c.s);
    const double s_max = static_cast<double>(total) * per_action_sim(Action::Re);
    // Endpoints exactly, independent of rounding in e - 1.
    if (raw == 0.0) return 0.0;
    if (raw == s_max) return 1.0;
    const double s = std::log(1.0 + raw / s_max * (std::numbers::e - 1.0));
    return std::clamp(s, 0.0, 1.0);
}

inline double score(std::span<const Action> actions) { return score(ActionCounts::of(actions)); }

}  // namespace contrasim
