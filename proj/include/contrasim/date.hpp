#pragma once

#include <chrono>
#include <compare>
#include <cstdio>
#include <string>
#include <string_view>

#include "contrasim/error.hpp"

namespace contrasim {

// Gregorian calendar date; serialized as ISO "YYYY-MM-DD".
struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    auto operator<=>(const Date&) const = default;

    bool valid() const {
        const std::chrono::year_month_day ymd{std::chrono::year{year},
                                              std::chrono::month{static_cast<unsigned>(month)},
                                              std::chrono::day{static_cast<unsigned>(day)}};
        return year >= 1 && year <= 9999 && ymd.ok();
    }

    std::string iso() const {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", year, month, day);
        return buf;
    }

    static Date parse(std::string_view s) {
        auto digits = [&](std::size_t pos, std::size_t len) {
            int v = 0;
            for (std::size_t i = pos; i < pos + len; ++i) {
                if (s[i] < '0' || s[i] > '9') throw DataError("invalid date '" + std::string(s) + "'");
                v = v * 10 + (s[i] - '0');
            }
            return v;
        };
        if (s.size() != 10 || s[4] != '-' || s[7] != '-')
            throw DataError("invalid date '" + std::string(s) + "', expected YYYY-MM-DD");
        Date d{digits(0, 4), digits(5, 2), digits(8, 2)};
        if (!d.valid()) throw DataError("invalid calendar date '" + std::string(s) + "'");
        return d;
    }
};

}  // namespace contrasim
