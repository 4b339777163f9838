#pragma once

#include <map>

#include "medkgeval/gateway.hpp"

namespace medkgeval {

// Effective settings for one suite run. Built from a sectioned key-value
// file plus command-line overrides; the digest of the emitted form goes
// into every artifact header.
struct RunConfig {
    std::string graph;
    std::string rules;
    std::string prompts = "prompts";
    std::string out = "out";
    std::string task = "dd";
    std::string language;  // empty means any
    std::string mode = "multi";
    bool director_enabled = true;
    int workers = 1;
    uint64_t seed = 0;
    size_t n_cases = 10;
    size_t symptom_budget = 6;
    int schedule_chunk = 2;
    std::string single_turn_style = "narrative";

    // Backend specs per role, e.g. "sim-patient" or "http:gpt4".
    std::string patient_backend = "sim-patient";
    std::string doctor_backend = "sim-doctor";
    std::string judge_backend = "sim-judge";
    std::string director_phrasing_backend;
    std::string claim_classifier_backend;

    double patient_temperature = 0.7;
    double doctor_temperature = 0.7;
    double judge_temperature = 0.0;
    double director_temperature = 0.0;

    // Named [backend.<name>] sections for http backends and embedders. A
    // section temperature of -1 means unset; the role default applies.
    std::map<std::string, BackendConfig> backends;

    bool operator==(const RunConfig&) const = default;
};

RunConfig default_config();

// Parses the sectioned key-value file, fills defaults, rejects unknown
// sections and keys by name. Referenced graph/rules/prompts paths must
// exist when set.
RunConfig validate_config(const std::filesystem::path& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");

// Canonical text form; validate_config(emit_config(c)) round-trips.
std::string emit_config(const RunConfig& config);

// FNV-1a of the canonical text, hex encoded.
std::string config_digest(const RunConfig& config);

}  // namespace medkgeval
