#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "bookrec/prompt.hpp"
#include "bookrec/types.hpp"

namespace bookrec {

// ---------------------------------------------------------------------------
// Parse outcomes
// ---------------------------------------------------------------------------

enum class FailureKind { none, no_number, out_of_scale, wrong_count, bad_element, too_long, transport };

inline std::string to_string(FailureKind k) {
    switch (k) {
    case FailureKind::none: return "none";
    case FailureKind::no_number: return "no_number";
    case FailureKind::out_of_scale: return "out_of_scale";
    case FailureKind::wrong_count: return "wrong_count";
    case FailureKind::bad_element: return "bad_element";
    case FailureKind::too_long: return "too_long";
    case FailureKind::transport: return "transport";
    }
    throw Error("unreachable failure kind");
}

/// Invalid model output is expected control flow (it feeds the retry loop),
/// so parsers return a result instead of throwing.
template <class T>
struct Parsed {
    std::optional<T> value;
    FailureKind kind = FailureKind::none;
    std::string reason;

    bool ok() const { return value.has_value(); }

    static Parsed success(T v) { return {std::move(v), FailureKind::none, {}}; }
    static Parsed failure(FailureKind k, std::string why) { return {std::nullopt, k, std::move(why)}; }
};

/// Rating canonicalized to at most two decimal places.
struct ParsedRating {
    double value = 0.0;
};

inline double canonicalize_two_decimals(double v) {
    return static_cast<double>(std::llround(v * 100.0)) / 100.0;
}

namespace detail {

inline bool parse_full_number(std::string_view text, double& out) {
    const std::string t = trim(text);
    if (t.empty()) return false;
    const char* begin = t.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end != begin + t.size()) return false;
    out = v;
    return true;
}

/// First numeric literal in prose ("The rating is 8.75 because..." -> 8.75).
inline std::optional<double> first_number(std::string_view text) {
    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        bool starts_number = (c >= '0' && c <= '9') ||
                             ((c == '-' || c == '+' || c == '.') && i + 1 < text.size() &&
                              text[i + 1] >= '0' && text[i + 1] <= '9');
        if (!starts_number) continue;
        std::string candidate(text.substr(i));
        const char* begin = candidate.c_str();
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end != begin) return v;
    }
    return std::nullopt;
}

} // namespace detail

/// Strict pass first (the whole trimmed text is one number), lenient pass
/// second (first numeric literal wins). The result is canonicalized to two
/// decimals and range-checked.
inline Parsed<ParsedRating> parse_rating(std::string_view text, const Scale& scale) {
    double v = 0.0;
    if (!detail::parse_full_number(text, v)) {
        auto lenient = detail::first_number(text);
        if (!lenient)
            return Parsed<ParsedRating>::failure(FailureKind::no_number,
                                                 "no numeric literal in response");
        v = *lenient;
    }
    v = canonicalize_two_decimals(v);
    if (!scale.contains(v))
        return Parsed<ParsedRating>::failure(
            FailureKind::out_of_scale, "rating " + format_double(v) + " outside scale [" +
                                           format_double(scale.min) + ", " +
                                           format_double(scale.max) + "]");
    return Parsed<ParsedRating>::success(ParsedRating{v});
}

/// Extracts a bracketed, comma-separated list of numbers; the bracket pair may
/// sit anywhere in the text. Length must equal expected_n exactly.
inline Parsed<std::vector<ParsedRating>> parse_rating_list(std::string_view text,
                                                           std::size_t expected_n,
                                                           const Scale& scale) {
    using Result = Parsed<std::vector<ParsedRating>>;
    if (expected_n < 1) throw ValidationError("parse_rating_list: expected_n must be >= 1");
    auto open = text.find('[');
    if (open == std::string_view::npos)
        return Result::failure(FailureKind::no_number, "no bracketed list in response");
    auto close = text.find(']', open + 1);
    if (close == std::string_view::npos)
        return Result::failure(FailureKind::no_number, "unterminated bracketed list");
    std::string_view body = text.substr(open + 1, close - open - 1);

    std::vector<ParsedRating> values;
    std::size_t start = 0;
    bool body_empty = trim_view(body).empty();
    while (!body_empty && start <= body.size()) {
        auto comma = body.find(',', start);
        std::string_view elem = comma == std::string_view::npos
                                    ? body.substr(start)
                                    : body.substr(start, comma - start);
        double v = 0.0;
        if (!detail::parse_full_number(elem, v))
            return Result::failure(FailureKind::bad_element,
                                   "non-numeric list element '" + trim(elem) + "'");
        v = canonicalize_two_decimals(v);
        if (!scale.contains(v))
            return Result::failure(FailureKind::out_of_scale,
                                   "list element " + format_double(v) + " outside scale [" +
                                       format_double(scale.min) + ", " +
                                       format_double(scale.max) + "]");
        values.push_back(ParsedRating{v});
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    if (values.size() != expected_n)
        return Result::failure(FailureKind::wrong_count,
                               "expected " + std::to_string(expected_n) + " scores, got " +
                                   std::to_string(values.size()));
    return Result::success(std::move(values));
}

/// Length gate for generated summaries. A configurable slack above the stated
/// limit avoids burning the attempt budget on tiny overshoots.
inline Parsed<std::string> validate_summary(std::string_view text,
                                            std::optional<std::int64_t> char_limit,
                                            double slack = 0.10) {
    if (char_limit) {
        const double limit = static_cast<double>(*char_limit) * (1.0 + slack);
        const auto len = static_cast<double>(utf8_length(text));
        if (len > limit)
            return Parsed<std::string>::failure(
                FailureKind::too_long, "summary length " + format_double(len) +
                                           " exceeds limit " + std::to_string(*char_limit) +
                                           " (+" + format_double(slack * 100.0) + "% slack)");
    }
    return Parsed<std::string>::success(std::string(text));
}

// ---------------------------------------------------------------------------
// Requests, exchanges, cache
// ---------------------------------------------------------------------------

struct ChatRequest {
    std::string provider;   // logical provider identity, part of the cache key
    std::string model_name;
    RenderedPrompt prompt;
    double temperature = 0.0;
    int max_attempts = 3;

    void validate() const {
        if (max_attempts < 1) throw ValidationError("chat request: max_attempts must be >= 1");
        if (temperature < 0.0) throw ValidationError("chat request: temperature must be >= 0");
    }
};

/// Content hash identifying one attempt of one request. Stable across runs and
/// platforms so live and replay runs can share a cache file.
inline std::string request_key(const std::string& provider, const std::string& model,
                               const std::string& prompt_text, double temperature, int attempt) {
    std::uint64_t h = fnv1a64(provider);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(model, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(prompt_text, h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(format_double(temperature), h);
    h = fnv1a64("\x1f", h);
    h = fnv1a64(std::to_string(attempt), h);
    return hex64(h);
}

/// One request/response round, the unit of caching.
struct Exchange {
    std::string request_key;
    std::string model;
    std::string prompt_hash;
    std::string raw_response;
    int attempt = 1;
    std::int64_t timestamp_ms = 0;
    std::int64_t latency_ms = 0;
    std::string parse_outcome; // "ok" or the failure reason
};

struct CacheEntry {
    std::string request_key;
    std::string model;
    std::string prompt_hash;
    std::string raw_response;
    int attempt = 1;
    std::int64_t timestamp = 0; // epoch ms
};

/// Append-only exchange cache backed by a line-delimited file. Lookups return
/// the most recent entry per key. Corrupt lines are skipped with a warning,
/// never fatal. Safe for concurrent put/get; append order across threads is
/// unspecified but each line is written whole.
class ExchangeCache {
public:
    ExchangeCache() = default; // in-memory only

    explicit ExchangeCache(const std::string& path, std::vector<std::string>* warnings = nullptr)
        : path_(path) {
        std::ifstream in(path);
        if (!in) return; // missing file = empty cache; created on first put
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (trim_view(line).empty()) continue;
            try {
                nlohmann::json j = nlohmann::json::parse(line);
                CacheEntry e;
                e.request_key = j.at("request_key").get<std::string>();
                e.model = j.at("model").get<std::string>();
                e.prompt_hash = j.at("prompt_hash").get<std::string>();
                e.raw_response = j.at("raw_response").get<std::string>();
                e.attempt = j.at("attempt").get<int>();
                e.timestamp = j.at("timestamp").get<std::int64_t>();
                entries_[e.request_key] = std::move(e);
            } catch (const std::exception& e) {
                ++skipped_;
                if (warnings)
                    warnings->push_back(path + ": line " + std::to_string(line_no) +
                                        ": corrupt cache line skipped (" + e.what() + ")");
            }
        }
    }

    void put(const CacheEntry& entry) {
        std::lock_guard<std::mutex> lock(mutex_);
        entries_[entry.request_key] = entry;
        if (path_.empty()) return;
        std::ofstream out(path_, std::ios::binary | std::ios::app);
        if (!out) throw IoError("cannot append to cache file: " + path_);
        nlohmann::json j{{"request_key", entry.request_key}, {"model", entry.model},
                         {"prompt_hash", entry.prompt_hash}, {"raw_response", entry.raw_response},
                         {"attempt", entry.attempt},         {"timestamp", entry.timestamp}};
        out << j.dump() << '\n';
        out.flush();
        if (!out) throw IoError("cache append failed: " + path_);
    }

    std::optional<CacheEntry> get(const std::string& key) const {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t size() const {
        std::lock_guard<std::mutex> lock(mutex_);
        return entries_.size();
    }
    std::size_t skipped_lines() const { return skipped_; }
    const std::string& path() const { return path_; }

private:
    std::string path_;
    mutable std::mutex mutex_;
    std::map<std::string, CacheEntry> entries_;
    std::size_t skipped_ = 0;
};

// ---------------------------------------------------------------------------
// Throttling
// ---------------------------------------------------------------------------

/// Token bucket; rate <= 0 disables throttling.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_second = 0.0, double burst = 1.0)
        : rate_(requests_per_second), capacity_(burst < 1.0 ? 1.0 : burst),
          tokens_(capacity_), last_(Clock::now()) {}

    void acquire() {
        if (rate_ <= 0.0) return;
        std::unique_lock<std::mutex> lock(mutex_);
        for (;;) {
            refill();
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            const double deficit = 1.0 - tokens_;
            lock.unlock();
            std::this_thread::sleep_for(
                std::chrono::duration<double>(deficit / rate_));
            lock.lock();
        }
    }

private:
    using Clock = std::chrono::steady_clock;

    void refill() {
        auto now = Clock::now();
        double elapsed = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
    }

    double rate_;
    double capacity_;
    double tokens_;
    Clock::time_point last_;
    std::mutex mutex_;
};

/// Caps the number of concurrent provider requests.
class InFlightGate {
public:
    explicit InFlightGate(int limit) : limit_(limit < 1 ? 1 : limit) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [&] { return in_use_ < limit_; });
        ++in_use_;
    }
    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --in_use_;
        }
        cv_.notify_one();
    }

private:
    int limit_;
    int in_use_ = 0;
    std::mutex mutex_;
    std::condition_variable cv_;
};

// ---------------------------------------------------------------------------
// Providers
// ---------------------------------------------------------------------------

enum class ProviderKind { live, replay, mock, scripted };

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string send(const ChatRequest& request, const RenderedPrompt& prompt,
                             int attempt) = 0;
    virtual ProviderKind kind() const = 0;
};

/// Test double: returns the scripted responses in order and counts calls.
class ScriptedProvider : public ChatProvider {
public:
    explicit ScriptedProvider(std::vector<std::string> script) : script_(std::move(script)) {}

    std::string send(const ChatRequest&, const RenderedPrompt&, int) override {
        std::size_t idx = calls_.fetch_add(1);
        if (idx >= script_.size())
            throw Error("scripted provider exhausted after " + std::to_string(script_.size()) +
                        " responses");
        return script_[idx];
    }
    ProviderKind kind() const override { return ProviderKind::scripted; }
    int calls() const { return static_cast<int>(calls_.load()); }

private:
    std::vector<std::string> script_;
    std::atomic<std::size_t> calls_{0};
};

/// Offline deterministic responder used by `--provider mock`. It scans the
/// prompt's format part for the requested shape (single rating, score list,
/// or summary with optional character limit) and fabricates a well-formed
/// response from a content hash, so full pipeline runs work with no network.
class SyntheticProvider : public ChatProvider {
public:
    std::string send(const ChatRequest&, const RenderedPrompt& prompt, int attempt) override {
        const std::string& text = prompt.text;
        std::mt19937_64 rng(fnv1a64(text) ^ (0x9e37u * static_cast<std::uint64_t>(attempt)));

        Scale scale{0.0, 10.0};
        if (auto s = scan_scale(text)) scale = *s;

        if (auto n = scan_count(text)) {
            std::string out = "[";
            for (std::size_t i = 0; i < *n; ++i) {
                if (i) out += ", ";
                out += format_two_decimals(draw(rng, scale));
            }
            out += "]";
            return out;
        }
        if (text.find("summary") != std::string::npos) {
            std::int64_t target = 320;
            if (auto lim = scan_char_limit(text))
                target = std::max<std::int64_t>(24, *lim - *lim / 5);
            return synth_text(rng, target);
        }
        return format_two_decimals(draw(rng, scale));
    }
    ProviderKind kind() const override { return ProviderKind::mock; }

private:
    static double draw(std::mt19937_64& rng, const Scale& scale) {
        double v = scale.min + stable_unit(rng) * (scale.max - scale.min);
        return canonicalize_two_decimals(v);
    }

    static std::optional<Scale> scan_scale(const std::string& text) {
        auto pos = text.find("between ");
        if (pos == std::string::npos) return std::nullopt;
        const char* p = text.c_str() + pos + 8;
        char* end = nullptr;
        double lo = std::strtod(p, &end);
        if (end == p) return std::nullopt;
        auto and_pos = text.find(" and ", static_cast<std::size_t>(end - text.c_str()));
        if (and_pos == std::string::npos) return std::nullopt;
        p = text.c_str() + and_pos + 5;
        double hi = std::strtod(p, &end);
        if (end == p || hi <= lo) return std::nullopt;
        return Scale{lo, hi};
    }

    static std::optional<std::size_t> scan_count(const std::string& text) {
        auto pos = text.find("list of exactly ");
        if (pos == std::string::npos) return std::nullopt;
        const char* p = text.c_str() + pos + 16;
        char* end = nullptr;
        long n = std::strtol(p, &end, 10);
        if (end == p || n < 1) return std::nullopt;
        return static_cast<std::size_t>(n);
    }

    static std::optional<std::int64_t> scan_char_limit(const std::string& text) {
        auto pos = text.find("at most ");
        if (pos == std::string::npos) return std::nullopt;
        const char* p = text.c_str() + pos + 8;
        char* end = nullptr;
        long long n = std::strtoll(p, &end, 10);
        if (end == p || n < 1) return std::nullopt;
        return n;
    }

    static std::string synth_text(std::mt19937_64& rng, std::int64_t target_chars) {
        static const char* words[] = {"story",  "reader", "journey", "world",  "voice",
                                      "memory", "city",   "family",  "secret", "time"};
        std::string out = "A vivid account in which the";
        while (static_cast<std::int64_t>(out.size()) < target_chars - 8) {
            out += ' ';
            out += words[stable_below(rng, 10)];
        }
        out += " endures.";
        if (static_cast<std::int64_t>(out.size()) > target_chars)
            out.resize(static_cast<std::size_t>(target_chars));
        return out;
    }
};

/// Live chat-completion endpoint speaking the common message-array JSON shape.
/// The credential is read from an environment variable and never logged.
class HttpChatProvider : public ChatProvider {
public:
    struct Options {
        std::string endpoint;                      // e.g. "https://api.example.com"
        std::string path = "/v1/chat/completions";
        std::string credential_env = "BOOKREC_API_KEY";
        int timeout_seconds = 60;
    };

    explicit HttpChatProvider(Options opts) : opts_(std::move(opts)) {
        if (opts_.endpoint.empty())
            throw ConfigError("live provider: endpoint URL not configured");
        const char* cred = std::getenv(opts_.credential_env.c_str());
        if (!cred || !*cred)
            throw ConfigError("live provider: credential environment variable " +
                              opts_.credential_env + " is not set");
        credential_ = cred;
    }

    std::string send(const ChatRequest& request, const RenderedPrompt& prompt, int) override;
    ProviderKind kind() const override { return ProviderKind::live; }

private:
    Options opts_;
    std::string credential_;
};

// ---------------------------------------------------------------------------
// Gateway
// ---------------------------------------------------------------------------

template <class T>
struct RetryOutcome {
    T value;
    int attempts_used = 0;
    std::vector<Exchange> exchanges;
};

/// Talks to one provider, applies throttling, records exchanges into the
/// cache, and serves replay runs straight from the cache with zero provider
/// use.
class Gateway {
public:
    struct Options {
        int max_in_flight = 4;
        double requests_per_second = 0.0; // 0 = unlimited
        bool record = true;               // append live/mock exchanges to the cache
    };

    Gateway(std::shared_ptr<ChatProvider> provider, std::shared_ptr<ExchangeCache> cache,
            Options options = {})
        : provider_(std::move(provider)), cache_(std::move(cache)), options_(options),
          limiter_(options.requests_per_second), gate_(options.max_in_flight) {}

    /// Replay gateway: every send is served from the cache.
    static Gateway replay(std::shared_ptr<ExchangeCache> cache, Options options = {}) {
        if (!cache) throw ConfigError("replay gateway requires a cache");
        return Gateway(nullptr, std::move(cache), options);
    }

    bool is_replay() const { return provider_ == nullptr; }

    /// Returns the provider's message text verbatim for one attempt.
    std::string send_chat(const ChatRequest& request, const RenderedPrompt& prompt, int attempt) {
        request.validate();
        const std::string key = request_key(request.provider, request.model_name, prompt.text,
                                            request.temperature, attempt);
        if (is_replay()) {
            auto entry = cache_->get(key);
            if (!entry)
                throw CacheMissError("replay cache has no entry for request_key " + key);
            cache_hits_.fetch_add(1);
            return entry->raw_response;
        }

        limiter_.acquire();
        gate_.acquire();
        std::string raw;
        try {
            raw = provider_->send(request, prompt, attempt);
        } catch (...) {
            gate_.release();
            throw;
        }
        gate_.release();
        provider_calls_.fetch_add(1);

        if (cache_ && options_.record) {
            CacheEntry entry;
            entry.request_key = key;
            entry.model = request.model_name;
            entry.prompt_hash = hex64(fnv1a64(prompt.text));
            entry.raw_response = raw;
            entry.attempt = attempt;
            entry.timestamp = now_ms();
            cache_->put(entry);
        }
        return raw;
    }

    /// Resends until the validator accepts, up to request.max_attempts total
    /// attempts. Every attempt is logged as an Exchange. `reprompt`, when
    /// given, may rebuild the prompt for attempts after a failure.
    template <class T>
    RetryOutcome<T> execute_with_retry(
        const ChatRequest& request,
        const std::function<Parsed<T>(const std::string&)>& validator,
        const std::function<RenderedPrompt(int attempt, const Parsed<T>* last_failure)>& reprompt = {}) {
        request.validate();
        RetryOutcome<T> outcome;
        std::vector<std::string> failures;
        Parsed<T> last;
        for (int attempt = 1; attempt <= request.max_attempts; ++attempt) {
            RenderedPrompt prompt =
                reprompt ? reprompt(attempt, attempt == 1 ? nullptr : &last) : request.prompt;

            Exchange ex;
            ex.model = request.model_name;
            ex.attempt = attempt;
            ex.prompt_hash = hex64(fnv1a64(prompt.text));
            ex.request_key = request_key(request.provider, request.model_name, prompt.text,
                                         request.temperature, attempt);
            ex.timestamp_ms = now_ms();

            const auto t0 = std::chrono::steady_clock::now();
            std::string raw;
            try {
                raw = send_chat(request, prompt, attempt);
            } catch (const TransportError& e) {
                ex.latency_ms = elapsed_ms(t0);
                ex.parse_outcome = std::string("transport: ") + e.what();
                outcome.exchanges.push_back(std::move(ex));
                failures.push_back("attempt " + std::to_string(attempt) + ": transport: " +
                                   e.what());
                continue;
            }
            ex.latency_ms = elapsed_ms(t0);
            ex.raw_response = raw;

            last = validator(raw);
            if (last.ok()) {
                ex.parse_outcome = "ok";
                outcome.exchanges.push_back(std::move(ex));
                outcome.value = std::move(*last.value);
                outcome.attempts_used = attempt;
                return outcome;
            }
            ex.parse_outcome = last.reason;
            outcome.exchanges.push_back(std::move(ex));
            failures.push_back("attempt " + std::to_string(attempt) + ": " + last.reason);
        }
        throw ExhaustedRetriesError(failures, "all " + std::to_string(request.max_attempts) +
                                                  " attempts failed validation");
    }

    std::int64_t provider_calls() const { return provider_calls_.load(); }
    std::int64_t cache_hits() const { return cache_hits_.load(); }
    std::shared_ptr<ExchangeCache> cache() const { return cache_; }

    static std::int64_t now_ms() {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }

private:
    static std::int64_t elapsed_ms(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    }

    std::shared_ptr<ChatProvider> provider_;
    std::shared_ptr<ExchangeCache> cache_;
    Options options_;
    RateLimiter limiter_;
    InFlightGate gate_;
    std::atomic<std::int64_t> provider_calls_{0};
    std::atomic<std::int64_t> cache_hits_{0};
};

} // namespace bookrec

// The HTTP client pulls in cpp-httplib, which is heavy; keep it at the bottom
// so the rest of the header stays cheap to scan.
#include <httplib.h>

namespace bookrec {

inline std::string HttpChatProvider::send(const ChatRequest& request,
                                          const RenderedPrompt& prompt, int) {
    httplib::Client client(opts_.endpoint);
    client.set_connection_timeout(opts_.timeout_seconds, 0);
    client.set_read_timeout(opts_.timeout_seconds, 0);
    client.set_bearer_token_auth(credential_);

    nlohmann::json body{{"model", request.model_name},
                        {"messages", nlohmann::json::array({nlohmann::json{
                                         {"role", "user"}, {"content", prompt.text}}})},
                        {"temperature", request.temperature}};

    auto res = client.Post(opts_.path, body.dump(), "application/json");
    if (!res)
        throw TransportError("live provider: request failed: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw TransportError("live provider: HTTP " + std::to_string(res->status) + ": " +
                             res->body.substr(0, 200));
    try {
        nlohmann::json j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("live provider: malformed response body: ") + e.what());
    }
}

} // namespace bookrec
