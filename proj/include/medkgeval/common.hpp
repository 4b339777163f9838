#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace medkgeval {

using json = nlohmann::json;

inline constexpr std::string_view kToolVersion = "0.1.0";

// Error taxonomy; the CLI maps these onto process exit codes.
class Error : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class ParseError : public Error {
    using Error::Error;
};
class ConfigError : public Error {
    using Error::Error;
};
class IoError : public Error {
    using Error::Error;
};
class BackendError : public Error {
    using Error::Error;
};
class ValidationError : public Error {
    using Error::Error;
};

// --- stable hashing -------------------------------------------------------

// FNV-1a, used for scripted-exchange keys, per-case seed derivation and
// config digests. Stable across platforms and runs, unlike std::hash.
class Fnv1a {
public:
    void update(std::string_view data) {
        for (unsigned char c : data) {
            state_ ^= c;
            state_ *= 0x100000001b3ULL;
        }
    }
    void update_byte(unsigned char c) {
        state_ ^= c;
        state_ *= 0x100000001b3ULL;
    }
    uint64_t digest() const { return state_; }

private:
    uint64_t state_ = 0xcbf29ce484222325ULL;
};

uint64_t fnv1a64(std::string_view data);
std::string hex64(uint64_t value);

// --- deterministic sampling ------------------------------------------------

// mt19937_64 with hand-rolled bounded draws. std::uniform_int_distribution
// and std::shuffle are implementation-defined, which would break the
// byte-identical reproducibility contract across standard libraries.
class DetRng {
public:
    explicit DetRng(uint64_t seed) : engine_(seed) {}

    uint64_t next() { return engine_(); }

    // Uniform in [0, n); rejection sampling avoids modulo bias.
    uint64_t below(uint64_t n);

    // Uniform integer in [lo, hi], inclusive.
    int int_in(int lo, int hi);

    template <typename T>
    const T& pick(const std::vector<T>& items) {
        if (items.empty()) throw ValidationError("DetRng::pick on empty vector");
        return items[static_cast<size_t>(below(items.size()))];
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (size_t i = items.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

// --- string helpers ---------------------------------------------------------

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(std::span<const std::string> parts, std::string_view sep);

// Lowercases ASCII, maps punctuation to spaces, collapses whitespace runs.
// Bytes >= 0x80 (multi-byte UTF-8, e.g. Chinese text) pass through verbatim.
std::string normalize_for_match(std::string_view s);

// Substring test on normalize_for_match'd forms.
bool contains_normalized(std::string_view haystack, std::string_view needle);

// --- newline-delimited JSON -------------------------------------------------

struct JsonlRecord {
    size_t line = 0;  // 1-based
    json value;
};

// Reads every non-blank line; throws ParseError with the line number on bad
// JSON, IoError if the file cannot be opened.
std::vector<JsonlRecord> read_jsonl(const std::filesystem::path& path);

void write_jsonl(const std::filesystem::path& path, std::span<const json> records);

// Every output artifact starts with one of these, so a report can be traced
// back to the exact inputs that produced it.
json artifact_header(uint64_t seed, uint64_t config_digest);
bool is_header_record(const json& value);

}  // namespace medkgeval
