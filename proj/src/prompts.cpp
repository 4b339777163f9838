#include "medkgeval/prompts.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace medkgeval {

PromptTemplate PromptTemplate::from_string(std::string text) {
    PromptTemplate out;
    out.text_ = std::move(text);
    return out;
}

PromptTemplate PromptTemplate::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open prompt template " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_string(buffer.str());
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    out.reserve(text_.size());
    size_t i = 0;
    while (i < text_.size()) {
        char c = text_[i];
        if (c != '{') {
            out += c;
            ++i;
            continue;
        }
        size_t j = i + 1;
        while (j < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[j])) || text_[j] == '_')) {
            ++j;
        }
        if (j == i + 1 || j == text_.size() || text_[j] != '}') {
            out += c;
            ++i;
            continue;
        }
        std::string key = text_.substr(i + 1, j - i - 1);
        auto it = values.find(key);
        if (it == values.end()) {
            throw ConfigError("prompt placeholder '" + key + "' has no binding");
        }
        out += it->second;
        i = j + 1;
    }
    return out;
}

const std::vector<std::string>& PromptLibrary::required_names() {
    static const std::vector<std::string> names = {
        "patient_system", "patient_turn",  "doctor_system_mc", "doctor_system_dd",
        "judge_system",   "judge_turn",    "director_guidance",
    };
    return names;
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& directory) {
    PromptLibrary library;
    for (const std::string& name : required_names()) {
        std::filesystem::path file = directory / (name + ".txt");
        if (!std::filesystem::exists(file)) {
            throw ConfigError("missing prompt template " + file.string());
        }
        library.templates_.emplace(name, PromptTemplate::from_file(file));
    }
    return library;
}

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) {
        throw ConfigError("unknown prompt template '" + name + "'");
    }
    return it->second;
}

}  // namespace medkgeval
