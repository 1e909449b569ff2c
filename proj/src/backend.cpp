#include "llmpred/backend.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <random>
#include <semaphore>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <vector>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
#include <json.hpp>

#include "digest.hpp"
#include "llmpred/errors.hpp"

namespace llmpred {

namespace {

using nlohmann::json;

std::vector<std::string> body_lines(const std::string& body) {
    std::vector<std::string> lines;
    std::stringstream ss(body);
    std::string line;
    while (std::getline(ss, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
    }
    return lines;
}

// Seeds the jitter stream from both the caller's seed and the prompt bytes,
// so identical (prompt, seed) pairs replay exactly.
std::uint64_t mix_seed(std::uint64_t seed, const std::string& body) {
    const std::string digest = sha256_hex(body);
    std::uint64_t h = 0;
    for (int i = 0; i < 16; ++i) {
        const char c = digest[i];
        h = (h << 4) | static_cast<std::uint64_t>(c <= '9' ? c - '0' : c - 'a' + 10);
    }
    return seed ^ h;
}

} // namespace

const char* mock_mode_name(MockMode mode) {
    switch (mode) {
        case MockMode::persistence: return "persistence";
        case MockMode::noisy: return "noisy";
        case MockMode::truncated: return "truncated";
        case MockMode::repeat_line: return "repeat_line";
    }
    return "unknown";
}

MockMode mock_mode_from_name(const std::string& name) {
    if (name == "persistence") return MockMode::persistence;
    if (name == "noisy") return MockMode::noisy;
    if (name == "truncated") return MockMode::truncated;
    if (name == "repeat_line") return MockMode::repeat_line;
    throw Error(ErrorCode::config_error, "unknown mock mode \"" + name + "\"");
}

std::string mock_generate(const PromptBundle& prompt, MockMode mode, std::uint64_t seed) {
    const std::vector<std::string> lines = body_lines(prompt.body);
    if (lines.empty() || prompt.expected_cols == 0) {
        throw Error(ErrorCode::unparseable_prompt, "mock backend: prompt body has no rows");
    }
    const std::vector<ChannelOffset> offsets =
        make_offsets(prompt.expected_cols, prompt.decimals);

    const std::string& source =
        mode == MockMode::repeat_line ? lines.front() : lines.back();
    const ParseReport check = parse_output(source + "\n", prompt.expected_cols, offsets, 1);
    if (check.valid_rows != 1) {
        throw Error(ErrorCode::unparseable_prompt,
                    "mock backend: row \"" + source + "\" does not parse as " +
                        std::to_string(prompt.expected_cols) + " in-band values");
    }

    const std::size_t H = prompt.expected_rows;
    std::string out;

    switch (mode) {
        case MockMode::persistence:
        case MockMode::repeat_line: {
            for (std::size_t r = 0; r < H; ++r) {
                out += source;
                out += "\n";
            }
            break;
        }
        case MockMode::noisy: {
            std::mt19937_64 rng(mix_seed(seed, prompt.body));
            std::uniform_real_distribution<double> jitter(-0.25, 0.25);
            const std::vector<double>& base = check.values.front();
            for (std::size_t r = 0; r < H; ++r) {
                for (std::size_t ch = 0; ch < prompt.expected_cols; ++ch) {
                    // Jitter in prompt space, clamp back to the channel band,
                    // then reuse the encoder for faithful formatting.
                    const ChannelOffset& off = offsets[ch];
                    double p = off.c + 0.5 * base[ch] + jitter(rng);
                    p = std::min(off.c + 0.5, std::max(off.c - 0.5, p));
                    if (ch > 0) out += ", ";
                    out += encode_value((p - off.c) / 0.5, off);
                }
                out += "\n";
            }
            break;
        }
        case MockMode::truncated: {
            for (std::size_t r = 0; r < H; ++r) {
                out += source;
                out += "\n";
            }
            out.pop_back(); // no final newline
            const std::size_t dot = out.rfind('.');
            if (dot != std::string::npos) out.erase(dot + 1);
            break;
        }
    }
    return out;
}

Generation MockBackend::generate(const PromptBundle& prompt, const GenParams& params) {
    Generation gen;
    gen.text = mock_generate(prompt, mode_, params.seed);
    gen.latency_ms = 0.0; // defined as zero so replays are byte-identical
    return gen;
}

std::string MockBackend::id() const { return std::string("mock:") + mock_mode_name(mode_); }

Generation generate_checked(Backend& backend, const PromptBundle& prompt, const GenParams& params,
                            const TokenScheme& scheme, bool override_budget) {
    const std::size_t input = count_tokens(prompt.full_text(), scheme);
    const std::size_t output = count_tokens(prompt.body, scheme);
    if (!override_budget && input + output > static_cast<std::size_t>(scheme.context_limit)) {
        throw Error(ErrorCode::budget_exceeded,
                    "prompt needs " + std::to_string(input + output) + " tokens (" +
                        std::to_string(input) + " in + " + std::to_string(output) +
                        " out), limit " + std::to_string(scheme.context_limit));
    }
    return backend.generate(prompt, params);
}

// ---------------------------------------------------------------------------
// HttpBackend

struct HttpBackend::Impl {
    HttpBackendConfig config;
    std::string host; // scheme://authority
    std::string path; // endpoint path
    std::counting_semaphore<1024> in_flight;

    explicit Impl(HttpBackendConfig cfg)
        : config(std::move(cfg)), in_flight(std::min(1024, std::max(1, config.max_in_flight))) {
        const std::string& url = config.base_url;
        const std::size_t scheme_end = url.find("://");
        if (scheme_end == std::string::npos ||
            (url.rfind("http://", 0) != 0 && url.rfind("https://", 0) != 0)) {
            throw Error(ErrorCode::config_error,
                        "backend base_url must start with http:// or https://: " + url);
        }
        std::size_t path_start = url.find('/', scheme_end + 3);
        if (path_start == std::string::npos) {
            host = url;
            path = "/chat/completions";
        } else {
            host = url.substr(0, path_start);
            std::string prefix = url.substr(path_start);
            while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
            path = prefix + "/chat/completions";
        }
    }

    std::string api_key() const {
        const char* key = std::getenv(config.api_key_env.c_str());
        if (key == nullptr || *key == '\0') {
            throw Error(ErrorCode::config_error,
                        "environment variable " + config.api_key_env + " is not set");
        }
        return key;
    }
};

HttpBackend::HttpBackend(HttpBackendConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

Generation HttpBackend::generate(const PromptBundle& prompt, const GenParams& params) {
    impl_->in_flight.acquire();
    struct Release {
        std::counting_semaphore<1024>& sem;
        ~Release() { sem.release(); }
    } release{impl_->in_flight};

    const json request = {
        {"model", impl_->config.model},
        {"messages", json::array({json{{"role", "user"}, {"content", prompt.full_text()}}})},
        {"temperature", params.temperature},
        {"top_p", params.top_p},
        {"max_tokens", params.max_tokens},
    };
    const std::string request_body = request.dump();
    const std::string key = impl_->api_key();

    const auto started = std::chrono::steady_clock::now();
    const int attempts = std::max(0, impl_->config.max_retries) + 1;

    for (int attempt = 0; attempt < attempts; ++attempt) {
        httplib::Client client(impl_->host);
        client.set_connection_timeout(std::chrono::duration<double>(impl_->config.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(impl_->config.timeout_seconds));
        client.set_write_timeout(std::chrono::duration<double>(impl_->config.timeout_seconds));
        client.set_bearer_token_auth(key);

        httplib::Result res = client.Post(impl_->path, request_body, "application/json");

        if (!res) {
            const httplib::Error err = res.error();
            if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read ||
                err == httplib::Error::Write) {
                throw Error(ErrorCode::timeout,
                            "request to " + impl_->host + " timed out after " +
                                std::to_string(impl_->config.timeout_seconds) + " s");
            }
            throw TransportError(0, "", "transport failure contacting " + impl_->host + ": " +
                                            httplib::to_string(err));
        }

        const bool retryable = res->status == 429 || res->status >= 500;
        if (retryable && attempt + 1 < attempts) {
            const double delay = impl_->config.backoff_base_seconds * std::pow(2.0, attempt);
            std::this_thread::sleep_for(std::chrono::duration<double>(delay));
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw TransportError(res->status, res->body,
                                 "backend returned HTTP " + std::to_string(res->status));
        }

        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::exception& e) {
            throw TransportError(res->status, res->body,
                                 std::string("backend returned invalid JSON: ") + e.what());
        }
        if (!reply.contains("choices") || !reply["choices"].is_array() ||
            reply["choices"].empty() || !reply["choices"][0].contains("message")) {
            throw TransportError(res->status, res->body, "backend response missing choices");
        }

        Generation gen;
        gen.text = reply["choices"][0]["message"].value("content", std::string());
        if (reply.contains("usage") && reply["usage"].is_object()) {
            gen.prompt_tokens = reply["usage"].value("prompt_tokens", -1);
            gen.completion_tokens = reply["usage"].value("completion_tokens", -1);
        }
        gen.latency_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - started)
                             .count();
        return gen;
    }

    throw Error(ErrorCode::internal, "retry loop exited unexpectedly");
}

std::string HttpBackend::id() const {
    return "openai-compatible:" + impl_->config.base_url + "#" + impl_->config.model;
}

// ---------------------------------------------------------------------------
// CachingBackend

struct CachingBackend::Impl {
    std::shared_ptr<Backend> inner;
    std::string path;
    std::mutex mutex;
    std::unordered_map<std::string, std::pair<std::string, double>> entries; // key -> (output, ms)
    std::size_t hits = 0;
    std::size_t misses = 0;

    void load() {
        std::ifstream in(path);
        if (!in) return; // a cold cache is simply an absent file
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            // Tolerate a torn final line from an interrupted earlier run.
            json entry = json::parse(line, nullptr, false);
            if (entry.is_discarded() || !entry.contains("key") || !entry["key"].is_string() ||
                !entry.contains("output") || !entry["output"].is_string()) {
                continue;
            }
            entries[entry["key"].get<std::string>()] = {
                entry["output"].get<std::string>(), entry.value("latency_ms", 0.0)};
        }
    }
};

namespace {

std::string cache_key(const PromptBundle& prompt, const GenParams& params) {
    // nlohmann::json objects order keys alphabetically, so this dump is a
    // canonical rendering of the parameters.
    const json canon = {
        {"do_sample", params.do_sample}, {"max_tokens", params.max_tokens},
        {"seed", params.seed},           {"temperature", params.temperature},
        {"top_p", params.top_p},
    };
    return sha256_hex(canon.dump() + "\x1f" + prompt.full_text());
}

} // namespace

CachingBackend::CachingBackend(std::shared_ptr<Backend> inner, std::string cache_path)
    : impl_(std::make_unique<Impl>()) {
    impl_->inner = std::move(inner);
    impl_->path = std::move(cache_path);
    impl_->load();
}

CachingBackend::~CachingBackend() = default;

Generation CachingBackend::generate(const PromptBundle& prompt, const GenParams& params) {
    const std::string key = cache_key(prompt, params);
    {
        std::lock_guard<std::mutex> lock(impl_->mutex);
        auto it = impl_->entries.find(key);
        if (it != impl_->entries.end()) {
            ++impl_->hits;
            Generation gen;
            gen.text = it->second.first;
            gen.latency_ms = it->second.second;
            gen.cache_hit = true;
            return gen;
        }
    }

    Generation gen = impl_->inner->generate(prompt, params);

    std::lock_guard<std::mutex> lock(impl_->mutex);
    ++impl_->misses;
    impl_->entries[key] = {gen.text, gen.latency_ms};
    const json entry = {
        {"key", key},
        {"prompt", prompt.full_text()},
        {"params",
         {{"do_sample", params.do_sample},
          {"max_tokens", params.max_tokens},
          {"seed", params.seed},
          {"temperature", params.temperature},
          {"top_p", params.top_p}}},
        {"output", gen.text},
        {"latency_ms", gen.latency_ms},
    };
    std::ofstream out(impl_->path, std::ios::app);
    if (!out) {
        throw Error(ErrorCode::io_error, "cannot append to cache file " + impl_->path);
    }
    out << entry.dump() << "\n";
    return gen;
}

std::string CachingBackend::id() const { return impl_->inner->id(); }

std::size_t CachingBackend::hits() const {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    return impl_->hits;
}

std::size_t CachingBackend::misses() const {
    std::lock_guard<std::mutex> lock(impl_->mutex);
    return impl_->misses;
}

} // namespace llmpred
