#pragma once

#include <atomic>
#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "medkgeval/common.hpp"

namespace medkgeval {

struct ChatMessage {
    std::string role;  // "system" | "user" | "assistant"
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

// Enforced on every request: non-empty contents, at most one leading system
// message, then strict user/assistant alternation starting with user.
void validate_messages(std::span<const ChatMessage> messages);

// Stable digest of a role-tagged message sequence; scripted tables and
// recordings key on this.
std::string message_digest(std::span<const ChatMessage> messages);

struct BackendConfig {
    std::string name;
    std::string endpoint;  // e.g. http://127.0.0.1:8080/v1
    std::string model;
    double temperature = 0.0;
    double timeout_seconds = 30.0;
    int max_retries = 2;
    double rate_limit = 0.0;  // requests/sec across all threads; 0 disables
    bool operator==(const BackendConfig&) const = default;
};

void validate_backend_config(const BackendConfig& config);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;
    // Returns the assistant completion; throws BackendError on failure.
    virtual std::string complete(std::span<const ChatMessage> messages) = 0;
    virtual std::string name() const = 0;
};

// Token bucket shared by worker threads; acquire() blocks until a token is
// available.
class TokenBucket {
public:
    TokenBucket(double rate_per_second, double capacity);
    void acquire();

private:
    double rate_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
    std::mutex mutex_;
};

// Replays canned responses keyed by message digest. In strict mode an
// unscripted exchange is an error; otherwise the fallback text is returned.
class ScriptedChatBackend : public ChatBackend {
public:
    explicit ScriptedChatBackend(std::string name = "scripted", bool strict = true,
                                 std::string fallback = "");

    static std::shared_ptr<ScriptedChatBackend> from_file(const std::filesystem::path& path,
                                                          bool strict = true,
                                                          std::string fallback = "");

    void add(const std::string& digest, const std::string& response);
    void add_exchange(std::span<const ChatMessage> messages, const std::string& response);
    size_t size() const { return table_.size(); }

    std::string complete(std::span<const ChatMessage> messages) override;
    std::string name() const override { return name_; }

private:
    std::string name_;
    bool strict_;
    std::string fallback_;
    std::map<std::string, std::string> table_;
    std::mutex mutex_;
};

// Wraps another backend and records each (digest, response) pair so a live
// session can be replayed later through ScriptedChatBackend::from_file.
class RecordingChatBackend : public ChatBackend {
public:
    explicit RecordingChatBackend(std::shared_ptr<ChatBackend> inner);

    std::string complete(std::span<const ChatMessage> messages) override;
    std::string name() const override { return inner_->name(); }

    void save(const std::filesystem::path& path) const;

private:
    std::shared_ptr<ChatBackend> inner_;
    mutable std::mutex mutex_;
    std::vector<std::pair<std::string, std::string>> log_;
};

struct HttpBackendStats {
    long requests = 0;
    long retries = 0;
};

// OpenAI-style /chat/completions client with bounded exponential backoff on
// 408/429/5xx and transport errors. The API key comes from
// MEDKGEVAL_API_KEY_<NAME> (name uppercased, non-alphanumerics mapped to _),
// never from config files.
class HttpChatBackend : public ChatBackend {
public:
    explicit HttpChatBackend(BackendConfig config);

    std::string complete(std::span<const ChatMessage> messages) override;
    std::string name() const override { return config_.name; }

    HttpBackendStats stats() const;
    static std::string api_key_env_var(const std::string& backend_name);

private:
    BackendConfig config_;
    std::string api_key_;
    std::string host_;         // scheme://authority
    std::string path_prefix_;  // e.g. /v1
    std::unique_ptr<TokenBucket> limiter_;
    std::atomic<long> requests_{0};
    std::atomic<long> retries_{0};
};

}  // namespace medkgeval
