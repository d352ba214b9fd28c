#pragma once

#include <cstdint>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bookrec {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File or stream I/O failed.
class IoError : public Error {
public:
    using Error::Error;
};

/// A record or value violated a declared invariant (scale bounds, duplicate
/// ids, malformed rows, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A task protocol rule was violated (mismatched exemplar author, duplicate
/// eval titles, empty eval set, ...).
class ProtocolError : public Error {
public:
    using Error::Error;
};

/// A group or user does not qualify for the requested split.
class IneligibleError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Live provider could not be reached; safe to retry.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Replay provider had no entry for the request key.
class CacheMissError : public Error {
public:
    using Error::Error;
};

/// An eval rating was found in a training matrix.
class LeakageError : public Error {
public:
    using Error::Error;
};

/// A rendered prompt plus its response reserve exceeds the token budget.
class BudgetError : public Error {
public:
    BudgetError(std::int64_t overshoot, const std::string& what)
        : Error(what), overshoot_(overshoot) {}
    std::int64_t overshoot() const { return overshoot_; }

private:
    std::int64_t overshoot_;
};

/// Every attempt of a retried request failed validation.
class ExhaustedRetriesError : public Error {
public:
    ExhaustedRetriesError(std::vector<std::string> failures, const std::string& what)
        : Error(what), failures_(std::move(failures)) {}
    const std::vector<std::string>& failures() const { return failures_; }

private:
    std::vector<std::string> failures_;
};

// ---------------------------------------------------------------------------
// Rating scale
// ---------------------------------------------------------------------------

/// Closed interval of valid ratings, declared per dataset.
struct Scale {
    double min = 0.0;
    double max = 10.0;

    bool contains(double v) const { return v >= min && v <= max; }
    double clamp(double v) const { return v < min ? min : (v > max ? max : v); }
};

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

/// Number of UTF-8 code points in `s` (continuation bytes are not counted).
inline std::size_t utf8_length(std::string_view s) {
    std::size_t n = 0;
    for (unsigned char c : s)
        if ((c & 0xC0) != 0x80) ++n;
    return n;
}

inline std::string_view trim_view(std::string_view s) {
    const char* ws = " \t\r\n\f\v";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::string trim(std::string_view s) { return std::string(trim_view(s)); }

inline bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

inline std::string replace_all(std::string text, std::string_view from, std::string_view to) {
    if (from.empty()) return text;
    std::size_t pos = 0;
    while ((pos = text.find(from, pos)) != std::string::npos) {
        text.replace(pos, from.size(), to);
        pos += to.size();
    }
    return text;
}

/// Fixed two-decimal rendering, e.g. 8.5 -> "8.50".
inline std::string format_two_decimals(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

/// Shortest round-trip rendering, used wherever a double becomes part of a
/// hash key or canonical file.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// Stable hashing and randomness
//
// std::hash, std::uniform_*_distribution and std::sample are all free to vary
// between standard libraries; splits and request keys must not. Everything
// below is pinned bit-for-bit.
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ull) {
    std::uint64_t h = seed;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

/// Mixes a group key into a run seed so per-group plans are independent of
/// iteration order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view group_key) {
    return fnv1a64(group_key, seed ^ 0x9e3779b97f4a7c15ull);
}

/// Unbiased draw from [0, bound) via rejection sampling on raw 64-bit output.
inline std::uint64_t stable_below(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0) throw Error("stable_below: bound must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % bound;
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double stable_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on stable uniforms.
inline double stable_normal(std::mt19937_64& rng) {
    double u1 = stable_unit(rng);
    while (u1 == 0.0) u1 = stable_unit(rng);
    double u2 = stable_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

/// First `count` positions of a seeded Fisher-Yates pass over [0, n).
/// The picks keep their draw order; the complement keeps index order.
inline std::vector<std::size_t> stable_sample(std::size_t n, std::size_t count, std::uint64_t seed) {
    if (count > n) throw Error("stable_sample: count exceeds population");
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + static_cast<std::size_t>(stable_below(rng, n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    return idx;
}

} // namespace bookrec
