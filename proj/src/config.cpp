#include "medkgeval/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace medkgeval {

namespace {

const std::set<std::string> kRunKeys = {
    "graph",           "rules",
    "prompts",         "out",
    "task",            "language",
    "mode",            "director",
    "workers",         "seed",
    "n_cases",         "symptom_budget",
    "schedule_chunk",  "single_turn_style",
    "patient_temperature", "doctor_temperature",
    "judge_temperature",   "director_temperature"};

const std::set<std::string> kBackendsKeys = {"patient", "doctor", "judge", "director_phrasing",
                                             "claim_classifier"};

const std::set<std::string> kBackendSectionKeys = {"endpoint",        "model",       "temperature",
                                                   "timeout_seconds", "max_retries", "rate_limit"};

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("key '" + key + "' expects true or false, got '" + value + "'");
}

long long parse_int(const std::string& value, const std::string& key) {
    try {
        size_t used = 0;
        long long parsed = std::stoll(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects an integer, got '" + value + "'");
    }
}

uint64_t parse_u64(const std::string& value, const std::string& key) {
    try {
        size_t used = 0;
        uint64_t parsed = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects an unsigned integer, got '" + value + "'");
    }
}

double parse_double(const std::string& value, const std::string& key) {
    try {
        size_t used = 0;
        double parsed = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "' expects a number, got '" + value + "'");
    }
}

std::string format_number(double value) {
    std::ostringstream out;
    out.precision(12);
    out << value;
    return out.str();
}

void apply_run_key(RunConfig& config, const std::string& key, const std::string& value) {
    if (key == "graph") config.graph = value;
    else if (key == "rules") config.rules = value;
    else if (key == "prompts") config.prompts = value;
    else if (key == "out") config.out = value;
    else if (key == "task") config.task = value;
    else if (key == "language") config.language = value;
    else if (key == "mode") config.mode = value;
    else if (key == "director") config.director_enabled = parse_bool(value, key);
    else if (key == "workers") config.workers = static_cast<int>(parse_int(value, key));
    else if (key == "seed") config.seed = parse_u64(value, key);
    else if (key == "n_cases") config.n_cases = static_cast<size_t>(parse_int(value, key));
    else if (key == "symptom_budget")
        config.symptom_budget = static_cast<size_t>(parse_int(value, key));
    else if (key == "schedule_chunk")
        config.schedule_chunk = static_cast<int>(parse_int(value, key));
    else if (key == "single_turn_style") config.single_turn_style = value;
    else if (key == "patient_temperature") config.patient_temperature = parse_double(value, key);
    else if (key == "doctor_temperature") config.doctor_temperature = parse_double(value, key);
    else if (key == "judge_temperature") config.judge_temperature = parse_double(value, key);
    else if (key == "director_temperature")
        config.director_temperature = parse_double(value, key);
}

void apply_backends_key(RunConfig& config, const std::string& key, const std::string& value) {
    if (key == "patient") config.patient_backend = value;
    else if (key == "doctor") config.doctor_backend = value;
    else if (key == "judge") config.judge_backend = value;
    else if (key == "director_phrasing") config.director_phrasing_backend = value;
    else if (key == "claim_classifier") config.claim_classifier_backend = value;
}

void apply_backend_section_key(BackendConfig& backend, const std::string& key,
                               const std::string& value) {
    if (key == "endpoint") backend.endpoint = value;
    else if (key == "model") backend.model = value;
    else if (key == "temperature") backend.temperature = parse_double(value, key);
    else if (key == "timeout_seconds") backend.timeout_seconds = parse_double(value, key);
    else if (key == "max_retries") backend.max_retries = static_cast<int>(parse_int(value, key));
    else if (key == "rate_limit") backend.rate_limit = parse_double(value, key);
}

void check_semantics(const RunConfig& config, const std::string& origin) {
    if (config.task != "mc" && config.task != "dd") {
        throw ConfigError(origin + ": task must be mc or dd, got '" + config.task + "'");
    }
    if (config.mode != "multi" && config.mode != "single") {
        throw ConfigError(origin + ": mode must be multi or single, got '" + config.mode + "'");
    }
    if (config.single_turn_style != "narrative" && config.single_turn_style != "list") {
        throw ConfigError(origin + ": single_turn_style must be narrative or list");
    }
    if (config.workers < 1) throw ConfigError(origin + ": workers must be at least 1");
    if (config.schedule_chunk != 1 && config.schedule_chunk != 2) {
        throw ConfigError(origin + ": schedule_chunk must be 1 or 2");
    }
    if (config.symptom_budget == 0) {
        throw ConfigError(origin + ": symptom_budget must be positive");
    }
    if (!config.language.empty() && config.language != "en" && config.language != "zh") {
        throw ConfigError(origin + ": language must be en, zh or empty");
    }
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig config;
    std::istringstream in(text);
    std::string line;
    std::string section;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string trimmed = trim(line);
        if (trimmed.empty() || trimmed[0] == '#' || trimmed[0] == ';') continue;
        std::string where = origin + ":" + std::to_string(lineno);
        if (trimmed.front() == '[') {
            if (trimmed.back() != ']') throw ConfigError(where + ": unterminated section header");
            section = trim(trimmed.substr(1, trimmed.size() - 2));
            if (section != "run" && section != "backends" &&
                !section.starts_with("backend.")) {
                throw ConfigError(where + ": unknown section '" + section + "'");
            }
            if (section.starts_with("backend.")) {
                std::string name = section.substr(8);
                if (name.empty()) throw ConfigError(where + ": backend section needs a name");
                if (config.backends.count(name)) {
                    throw ConfigError(where + ": duplicate section '" + section + "'");
                }
                config.backends[name].name = name;
                config.backends[name].temperature = -1.0;
            }
            continue;
        }
        size_t eq = trimmed.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(where + ": expected key = value");
        }
        std::string key = trim(trimmed.substr(0, eq));
        std::string value = trim(trimmed.substr(eq + 1));
        if (key.empty()) throw ConfigError(where + ": empty key");
        if (section.empty() || section == "run") {
            if (!kRunKeys.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
            apply_run_key(config, key, value);
        } else if (section == "backends") {
            if (!kBackendsKeys.count(key)) {
                throw ConfigError(where + ": unknown key '" + key + "'");
            }
            apply_backends_key(config, key, value);
        } else {
            if (!kBackendSectionKeys.count(key)) {
                throw ConfigError(where + ": unknown key '" + key + "'");
            }
            apply_backend_section_key(config.backends[section.substr(8)], key, value);
        }
    }
    check_semantics(config, origin);
    return config;
}

RunConfig validate_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::stringstream buffer;
    buffer << in.rdbuf();
    RunConfig config = parse_config_text(buffer.str(), path.string());
    auto require_exists = [&path](const char* label, const std::string& value) {
        if (!value.empty() && !std::filesystem::exists(value)) {
            throw ConfigError(path.string() + ": " + label + " path '" + value +
                              "' does not exist");
        }
    };
    require_exists("graph", config.graph);
    require_exists("rules", config.rules);
    require_exists("prompts", config.prompts);
    return config;
}

std::string emit_config(const RunConfig& config) {
    std::ostringstream out;
    out << "[run]\n";
    out << "graph = " << config.graph << "\n";
    out << "rules = " << config.rules << "\n";
    out << "prompts = " << config.prompts << "\n";
    out << "out = " << config.out << "\n";
    out << "task = " << config.task << "\n";
    out << "language = " << config.language << "\n";
    out << "mode = " << config.mode << "\n";
    out << "director = " << (config.director_enabled ? "true" : "false") << "\n";
    out << "workers = " << config.workers << "\n";
    out << "seed = " << config.seed << "\n";
    out << "n_cases = " << config.n_cases << "\n";
    out << "symptom_budget = " << config.symptom_budget << "\n";
    out << "schedule_chunk = " << config.schedule_chunk << "\n";
    out << "single_turn_style = " << config.single_turn_style << "\n";
    out << "patient_temperature = " << format_number(config.patient_temperature) << "\n";
    out << "doctor_temperature = " << format_number(config.doctor_temperature) << "\n";
    out << "judge_temperature = " << format_number(config.judge_temperature) << "\n";
    out << "director_temperature = " << format_number(config.director_temperature) << "\n";
    out << "\n[backends]\n";
    out << "patient = " << config.patient_backend << "\n";
    out << "doctor = " << config.doctor_backend << "\n";
    out << "judge = " << config.judge_backend << "\n";
    out << "director_phrasing = " << config.director_phrasing_backend << "\n";
    out << "claim_classifier = " << config.claim_classifier_backend << "\n";
    for (const auto& [name, backend] : config.backends) {
        out << "\n[backend." << name << "]\n";
        out << "endpoint = " << backend.endpoint << "\n";
        out << "model = " << backend.model << "\n";
        out << "temperature = " << format_number(backend.temperature) << "\n";
        out << "timeout_seconds = " << format_number(backend.timeout_seconds) << "\n";
        out << "max_retries = " << backend.max_retries << "\n";
        out << "rate_limit = " << format_number(backend.rate_limit) << "\n";
    }
    return out.str();
}

std::string config_digest(const RunConfig& config) { return hex64(fnv1a64(emit_config(config))); }

}  // namespace medkgeval
