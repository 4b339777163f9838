#include "medkgeval/gateway.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>

namespace medkgeval {

void validate_messages(std::span<const ChatMessage> messages) {
    if (messages.empty()) throw ValidationError("empty message sequence");
    size_t start = 0;
    if (messages[0].role == "system") start = 1;
    for (size_t i = 0; i < messages.size(); ++i) {
        const ChatMessage& message = messages[i];
        if (message.role != "system" && message.role != "user" && message.role != "assistant") {
            throw ValidationError("invalid message role '" + message.role + "'");
        }
        if (message.role == "system" && i != 0) {
            throw ValidationError("system message only allowed at the front");
        }
        if (message.content.empty()) {
            throw ValidationError("message " + std::to_string(i) + " has empty content");
        }
    }
    if (start == messages.size()) {
        throw ValidationError("message sequence has no user turn");
    }
    for (size_t i = start; i < messages.size(); ++i) {
        const std::string& expected = ((i - start) % 2 == 0) ? "user" : "assistant";
        if (messages[i].role != expected) {
            throw ValidationError("message " + std::to_string(i) + " should be '" + expected +
                                  "' but is '" + messages[i].role + "'");
        }
    }
    if (messages.back().role != "user") {
        throw ValidationError("message sequence must end with a user turn");
    }
}

std::string message_digest(std::span<const ChatMessage> messages) {
    Fnv1a hash;
    for (const ChatMessage& message : messages) {
        hash.update(message.role);
        hash.update_byte(0x1f);
        hash.update(message.content);
        hash.update_byte(0x1e);
    }
    return hex64(hash.digest());
}

void validate_backend_config(const BackendConfig& config) {
    if (config.name.empty()) throw ConfigError("backend name must be non-empty");
    if (config.temperature < 0.0) {
        throw ConfigError("backend '" + config.name + "': temperature must be >= 0");
    }
    if (config.timeout_seconds <= 0.0) {
        throw ConfigError("backend '" + config.name + "': timeout must be positive");
    }
    if (config.max_retries < 0) {
        throw ConfigError("backend '" + config.name + "': max_retries must be >= 0");
    }
    if (config.rate_limit < 0.0) {
        throw ConfigError("backend '" + config.name + "': rate_limit must be >= 0");
    }
}

TokenBucket::TokenBucket(double rate_per_second, double capacity)
    : rate_(rate_per_second), capacity_(capacity), tokens_(capacity),
      last_(std::chrono::steady_clock::now()) {
    if (rate_ <= 0.0 || capacity_ <= 0.0) {
        throw ConfigError("token bucket rate and capacity must be positive");
    }
}

void TokenBucket::acquire() {
    while (true) {
        double wait_seconds = 0.0;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto now = std::chrono::steady_clock::now();
            double elapsed = std::chrono::duration<double>(now - last_).count();
            last_ = now;
            tokens_ = std::min(capacity_, tokens_ + elapsed * rate_);
            if (tokens_ >= 1.0) {
                tokens_ -= 1.0;
                return;
            }
            wait_seconds = (1.0 - tokens_) / rate_;
        }
        std::this_thread::sleep_for(std::chrono::duration<double>(wait_seconds));
    }
}

ScriptedChatBackend::ScriptedChatBackend(std::string name, bool strict, std::string fallback)
    : name_(std::move(name)), strict_(strict), fallback_(std::move(fallback)) {}

std::shared_ptr<ScriptedChatBackend> ScriptedChatBackend::from_file(
    const std::filesystem::path& path, bool strict, std::string fallback) {
    auto backend = std::make_shared<ScriptedChatBackend>(path.stem().string(), strict,
                                                         std::move(fallback));
    for (const JsonlRecord& record : read_jsonl(path)) {
        const json& value = record.value;
        if (is_header_record(value)) continue;
        std::string where = path.string() + ":" + std::to_string(record.line);
        try {
            std::string response = value.at("response").get<std::string>();
            if (value.contains("messages")) {
                std::vector<ChatMessage> messages;
                for (const json& m : value["messages"]) {
                    messages.push_back(
                        {m.at("role").get<std::string>(), m.at("content").get<std::string>()});
                }
                backend->add_exchange(messages, response);
            } else {
                backend->add(value.at("key").get<std::string>(), response);
            }
        } catch (const json::exception& err) {
            throw ParseError(where + ": " + err.what());
        }
    }
    return backend;
}

void ScriptedChatBackend::add(const std::string& digest, const std::string& response) {
    std::lock_guard<std::mutex> lock(mutex_);
    table_[digest] = response;
}

void ScriptedChatBackend::add_exchange(std::span<const ChatMessage> messages,
                                       const std::string& response) {
    add(message_digest(messages), response);
}

std::string ScriptedChatBackend::complete(std::span<const ChatMessage> messages) {
    validate_messages(messages);
    std::string digest = message_digest(messages);
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = table_.find(digest);
    if (it != table_.end()) return it->second;
    if (strict_ || fallback_.empty()) {
        throw BackendError("backend '" + name_ + "': unscripted exchange " + digest);
    }
    return fallback_;
}

RecordingChatBackend::RecordingChatBackend(std::shared_ptr<ChatBackend> inner)
    : inner_(std::move(inner)) {
    if (!inner_) throw ConfigError("recording backend requires an inner backend");
}

std::string RecordingChatBackend::complete(std::span<const ChatMessage> messages) {
    std::string digest = message_digest(messages);
    std::string response = inner_->complete(messages);
    std::lock_guard<std::mutex> lock(mutex_);
    log_.emplace_back(digest, response);
    return response;
}

void RecordingChatBackend::save(const std::filesystem::path& path) const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<json> records;
    records.push_back(artifact_header(0, fnv1a64(inner_->name())));
    for (const auto& [digest, response] : log_) {
        records.push_back(json{{"record", "exchange"}, {"key", digest}, {"response", response}});
    }
    write_jsonl(path, records);
}

std::string HttpChatBackend::api_key_env_var(const std::string& backend_name) {
    std::string out = "MEDKGEVAL_API_KEY_";
    for (char c : backend_name) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        } else {
            out += '_';
        }
    }
    return out;
}

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
    validate_backend_config(config_);
    if (config_.endpoint.empty()) {
        throw ConfigError("backend '" + config_.name + "': endpoint must be set");
    }
    size_t scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw ConfigError("backend '" + config_.name + "': endpoint must include a scheme");
    }
    std::string scheme = config_.endpoint.substr(0, scheme_end);
    if (scheme != "http") {
        throw ConfigError("backend '" + config_.name + "': unsupported endpoint scheme '" +
                          scheme + "' (this build speaks plain http)");
    }
    size_t path_start = config_.endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        host_ = config_.endpoint;
    } else {
        host_ = config_.endpoint.substr(0, path_start);
        path_prefix_ = config_.endpoint.substr(path_start);
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    if (config_.model.empty()) {
        throw ConfigError("backend '" + config_.name + "': model must be set");
    }
    if (const char* key = std::getenv(api_key_env_var(config_.name).c_str())) {
        api_key_ = key;
    }
    if (config_.rate_limit > 0.0) {
        limiter_ = std::make_unique<TokenBucket>(config_.rate_limit, 1.0);
    }
}

std::string HttpChatBackend::complete(std::span<const ChatMessage> messages) {
    validate_messages(messages);
    json body{{"model", config_.model}, {"temperature", config_.temperature}};
    body["messages"] = json::array();
    for (const ChatMessage& message : messages) {
        body["messages"].push_back({{"role", message.role}, {"content", message.content}});
    }
    std::string payload = body.dump();

    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            ++retries_;
            double backoff = std::min(0.1 * std::pow(2.0, attempt - 1), 2.0);
            std::this_thread::sleep_for(std::chrono::duration<double>(backoff));
        }
        if (limiter_) limiter_->acquire();
        ++requests_;

        httplib::Client client(host_);
        client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        client.set_write_timeout(std::chrono::duration<double>(config_.timeout_seconds));
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

        auto result = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                                  "application/json");
        if (!result) {
            last_error = "transport error: " + httplib::to_string(result.error());
            continue;
        }
        int status = result->status;
        if (status == 200) {
            json reply = json::parse(result->body, nullptr, false);
            if (reply.is_discarded()) {
                throw BackendError("backend '" + config_.name + "': malformed response body");
            }
            try {
                std::string content =
                    reply.at("choices").at(0).at("message").at("content").get<std::string>();
                if (content.empty()) {
                    throw BackendError("backend '" + config_.name + "': empty completion");
                }
                return content;
            } catch (const json::exception& err) {
                throw BackendError("backend '" + config_.name +
                                   "': response missing choices[0].message.content");
            }
        }
        bool retryable = status == 408 || status == 429 || status >= 500;
        if (!retryable) {
            throw BackendError("backend '" + config_.name + "': status " +
                               std::to_string(status) + ": " + result->body);
        }
        last_error = "status " + std::to_string(status);
    }
    throw BackendError("backend '" + config_.name + "': giving up after " +
                       std::to_string(config_.max_retries + 1) + " attempts (" + last_error + ")");
}

HttpBackendStats HttpChatBackend::stats() const {
    return {requests_.load(), retries_.load()};
}

}  // namespace medkgeval
