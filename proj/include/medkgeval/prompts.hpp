#pragma once

#include <map>
#include <string>

#include "medkgeval/common.hpp"

namespace medkgeval {

// Plain text with {placeholder} slots. Placeholders are [A-Za-z0-9_]+; every
// slot must be bound at render time.
class PromptTemplate {
public:
    static PromptTemplate from_string(std::string text);
    static PromptTemplate from_file(const std::filesystem::path& path);

    std::string render(const std::map<std::string, std::string>& values) const;
    const std::string& text() const { return text_; }

private:
    std::string text_;
};

// The fixed template set the agents render. Templates live as editable text
// files (<name>.txt) so prompts can be tuned without recompiling.
class PromptLibrary {
public:
    static const std::vector<std::string>& required_names();
    static PromptLibrary load(const std::filesystem::path& directory);

    const PromptTemplate& get(const std::string& name) const;

private:
    std::map<std::string, PromptTemplate> templates_;
};

}  // namespace medkgeval
