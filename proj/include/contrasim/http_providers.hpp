#pragma once

// HTTP-backed providers: embeddings endpoint, chat-completion generator and a
// pairwise discriminator service. Transport failures and 5xx/429 responses are
// retried with exponential backoff; other 4xx responses fail immediately.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "contrasim/augmentor.hpp"
#include "contrasim/embed.hpp"
#include "contrasim/error.hpp"

namespace contrasim {

struct RetryPolicy {
    std::size_t max_attempts = 3;
    std::chrono::milliseconds initial_delay{200};
    double backoff_multiplier = 2.0;
    std::chrono::milliseconds max_delay{5000};

    std::chrono::milliseconds delay_for(std::size_t attempt) const {
        double d = static_cast<double>(initial_delay.count());
        for (std::size_t i = 0; i < attempt; ++i) d *= backoff_multiplier;
        return std::min(max_delay, std::chrono::milliseconds(static_cast<long long>(d)));
    }
};

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;  // /v1/...

    static Endpoint parse(const std::string& url) {
        const auto scheme_end = url.find("://");
        if (scheme_end == std::string::npos) throw ArgumentError("endpoint URL needs a scheme: '" + url + "'");
        const auto path_start = url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) return {url, "/"};
        return {url.substr(0, path_start), url.substr(path_start)};
    }
};

struct HttpOptions {
    std::string url;
    // Name of the environment variable holding a bearer token; never the token itself.
    std::string api_key_env;
    std::chrono::seconds timeout{60};
    RetryPolicy retry;
};

namespace detail {

inline nlohmann::json post_json(const HttpOptions& opts, const nlohmann::json& body) {
    const auto ep = Endpoint::parse(opts.url);
    httplib::Headers headers;
    if (!opts.api_key_env.empty()) {
        const char* key = std::getenv(opts.api_key_env.c_str());
        if (!key || !*key) throw ProviderError("environment variable " + opts.api_key_env + " is not set");
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string payload = body.dump();
    std::string last_error;
    const std::size_t attempts = std::max<std::size_t>(1, opts.retry.max_attempts);
    for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(opts.retry.delay_for(attempt - 1));
        httplib::Client cli(ep.base);
        cli.set_connection_timeout(opts.timeout);
        cli.set_read_timeout(opts.timeout);
        cli.set_write_timeout(opts.timeout);
        auto res = cli.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 200) {
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw ProviderError(opts.url + ": invalid JSON response: " + e.what());
            }
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (res->status != 429 && res->status < 500) break;
    }
    throw ProviderError(opts.url + ": " + last_error);
}

}  // namespace detail

// POST {input:[texts], model?} -> {data:[{embedding:[...]}]}
class HttpEmbedder final : public EmbeddingProvider {
public:
    HttpEmbedder(HttpOptions opts, std::string model = {}, std::size_t expected_dim = 0, std::size_t batch_size = 32)
        : opts_(std::move(opts)), model_(std::move(model)), dim_(expected_dim), batch_size_(std::max<std::size_t>(1, batch_size)) {}

    std::size_t dim() const override { return dim_; }

    std::vector<UnitVector> embed_batch(std::span<const std::string> texts) override {
        std::vector<UnitVector> out;
        out.reserve(texts.size());
        for (std::size_t start = 0; start < texts.size(); start += batch_size_) {
            const auto chunk = texts.subspan(start, std::min(batch_size_, texts.size() - start));
            nlohmann::json body{{"input", std::vector<std::string>(chunk.begin(), chunk.end())}};
            if (!model_.empty()) body["model"] = model_;
            const auto resp = detail::post_json(opts_, body);
            try {
                const auto& data = resp.at("data");
                if (data.size() != chunk.size())
                    throw ProviderError("embeddings endpoint returned " + std::to_string(data.size()) + " vectors for " +
                                        std::to_string(chunk.size()) + " inputs");
                for (const auto& item : data) {
                    const auto v = item.at("embedding").get<std::vector<double>>();
                    auto u = UnitVector::normalize(std::span<const double>(v));
                    if (dim_ == 0) dim_ = u.dim();
                    if (u.dim() != dim_)
                        throw ProviderError("dimension mismatch: got " + std::to_string(u.dim()) + ", expected " +
                                            std::to_string(dim_));
                    out.push_back(std::move(u));
                }
            } catch (const nlohmann::json::exception& e) {
                throw ProviderError(opts_.url + ": unexpected embeddings response: " + e.what());
            }
        }
        return out;
    }

private:
    HttpOptions opts_;
    std::string model_;
    std::size_t dim_;
    std::size_t batch_size_;
};

// Chat-completion style: {model, messages:[system, user], temperature};
// the first choice's message content is the candidate.
class HttpGenerator final : public GenerationProvider {
public:
    HttpGenerator(HttpOptions opts, std::string model) : opts_(std::move(opts)), model_(std::move(model)) {}

    static nlohmann::json request_body(const GenerationRequest& r, const std::string& model) {
        return {{"model", model},
                {"messages", nlohmann::json::array({{{"role", "system"}, {"content", r.system}},
                                                    {{"role", "user"}, {"content", r.user}}})},
                {"temperature", r.temperature}};
    }

    std::string generate(const GenerationRequest& r) override {
        const auto resp = detail::post_json(opts_, request_body(r, model_));
        try {
            return resp.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(opts_.url + ": unexpected chat response: " + e.what());
        }
    }

private:
    HttpOptions opts_;
    std::string model_;
};

// POST {text_a, text_b} -> {score}
class HttpDiscriminator final : public DiscriminatorProvider {
public:
    explicit HttpDiscriminator(HttpOptions opts) : opts_(std::move(opts)) {}

    double score(const std::string& a, const std::string& b) override {
        const auto resp = detail::post_json(opts_, {{"text_a", a}, {"text_b", b}});
        try {
            return resp.at("score").get<double>();
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(opts_.url + ": unexpected discriminator response: " + e.what());
        }
    }

private:
    HttpOptions opts_;
};

}  // namespace contrasim
