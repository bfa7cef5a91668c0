#pragma once

#include <contrasim/contrasim.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

namespace testing_support {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("contrasim-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& body) {
    std::ofstream out(p, std::ios::binary);
    out << body;
}

inline contrasim::DailyNewsSet make_day(const std::string& iso, std::vector<std::string> texts,
                                        std::optional<contrasim::MarketLabel> label = std::nullopt) {
    contrasim::DailyNewsSet d;
    d.date = contrasim::Date::parse(iso);
    for (std::size_t i = 0; i < texts.size(); ++i)
        d.headlines.push_back({contrasim::headline_id(d.date, i), d.date, texts[i], contrasim::HeadlineSource::Other});
    d.label = label;
    return d;
}

// Consecutive calendar days from 2024-01-01, each with `per_day` distinct headlines.
inline std::vector<contrasim::DailyNewsSet> make_corpus(std::size_t n, std::size_t per_day = 3) {
    std::vector<contrasim::DailyNewsSet> out;
    std::chrono::sys_days day = std::chrono::year{2024} / 1 / 1;
    for (std::size_t i = 0; i < n; ++i, day += std::chrono::days{1}) {
        const std::chrono::year_month_day ymd{day};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                      static_cast<unsigned>(ymd.day()));
        std::vector<std::string> texts;
        for (std::size_t j = 0; j < per_day; ++j)
            texts.push_back("headline " + std::to_string(j) + " of day " + std::to_string(i) + " market news");
        out.push_back(make_day(buf, texts, static_cast<contrasim::MarketLabel>(i % 3)));
    }
    return out;
}

}  // namespace testing_support
