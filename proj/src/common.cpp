#include "medkgeval/common.hpp"

#include <cctype>
#include <fstream>
#include <limits>
#include <sstream>

namespace medkgeval {

uint64_t fnv1a64(std::string_view data) {
    Fnv1a h;
    h.update(data);
    return h.digest();
}

std::string hex64(uint64_t value) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[value & 0xf];
        value >>= 4;
    }
    return out;
}

uint64_t DetRng::below(uint64_t n) {
    if (n == 0) throw ValidationError("DetRng::below(0)");
    const uint64_t max = std::numeric_limits<uint64_t>::max();
    const uint64_t limit = max - max % n;
    uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % n;
}

int DetRng::int_in(int lo, int hi) {
    if (lo > hi) throw ValidationError("DetRng::int_in with lo > hi");
    uint64_t span = static_cast<uint64_t>(static_cast<int64_t>(hi) - lo) + 1;
    return lo + static_cast<int>(below(span));
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

std::string trim(std::string_view s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return std::string(s.substr(b, e - b));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string join(std::span<const std::string> parts, std::string_view sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string normalize_for_match(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (unsigned char c : s) {
        if (c >= 0x80) {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += static_cast<char>(c);
        } else if (std::isalnum(c)) {
            if (pending_space && !out.empty()) out += ' ';
            pending_space = false;
            out += static_cast<char>(std::tolower(c));
        } else {
            pending_space = true;
        }
    }
    return out;
}

bool contains_normalized(std::string_view haystack, std::string_view needle) {
    std::string h = normalize_for_match(haystack);
    std::string n = normalize_for_match(needle);
    if (n.empty()) return false;
    return h.find(n) != std::string::npos;
}

std::vector<JsonlRecord> read_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<JsonlRecord> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json value = json::parse(line, nullptr, false);
        if (value.is_discarded()) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) + ": malformed JSON");
        }
        out.push_back({lineno, std::move(value)});
    }
    if (in.bad()) throw IoError("read failure on " + path.string());
    return out;
}

void write_jsonl(const std::filesystem::path& path, std::span<const json> records) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
    }
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const json& record : records) {
        out << record.dump() << '\n';
    }
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

json artifact_header(uint64_t seed, uint64_t config_digest) {
    return json{{"record", "header"},
                {"tool", "medkgeval"},
                {"version", std::string(kToolVersion)},
                {"seed", seed},
                {"config_digest", hex64(config_digest)}};
}

bool is_header_record(const json& value) {
    return value.is_object() && value.contains("record") && value["record"] == "header";
}

}  // namespace medkgeval
