#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "medkgeval/config.hpp"

using namespace medkgeval;

namespace {

std::filesystem::path write_config(const std::string& name, const std::string& body) {
    auto dir = std::filesystem::temp_directory_path() / "medkgeval-test-config";
    std::filesystem::create_directories(dir);
    auto path = dir / name;
    std::ofstream out(path, std::ios::trunc);
    out << body;
    return path;
}

}  // namespace

TEST_CASE("defaults") {
    RunConfig config = default_config();
    CHECK(config.task == "dd");
    CHECK(config.mode == "multi");
    CHECK(config.director_enabled);
    CHECK(config.workers == 1);
    CHECK(config.n_cases == 10);
    CHECK(config.symptom_budget == 6);
    CHECK(config.schedule_chunk == 2);
    CHECK(config.single_turn_style == "narrative");
    CHECK(config.patient_backend == "sim-patient");
    CHECK(config.doctor_backend == "sim-doctor");
    CHECK(config.judge_backend == "sim-judge");
    CHECK(config.patient_temperature == 0.7);
    CHECK(config.doctor_temperature == 0.7);
    CHECK(config.judge_temperature == 0.0);
    CHECK(config.director_temperature == 0.0);
    CHECK(config.backends.empty());
    // An empty file is just the defaults.
    CHECK(parse_config_text("") == config);
}

TEST_CASE("a full config file parses into the expected struct") {
    std::string text = R"(# suite setup
[run]
task = mc
language = zh
mode = multi
director = false
workers = 4
seed = 99
n_cases = 3
symptom_budget = 5
schedule_chunk = 1
judge_temperature = 0.25

[backends]
doctor = http:remote
judge = sim-judge

[backend.remote]
endpoint = http://127.0.0.1:8000/v1
model = big-model
temperature = 0.1
timeout_seconds = 12
max_retries = 5
rate_limit = 2.5
)";
    RunConfig config = parse_config_text(text);
    CHECK(config.task == "mc");
    CHECK(config.language == "zh");
    CHECK_FALSE(config.director_enabled);
    CHECK(config.workers == 4);
    CHECK(config.seed == 99);
    CHECK(config.n_cases == 3);
    CHECK(config.symptom_budget == 5);
    CHECK(config.schedule_chunk == 1);
    CHECK(config.judge_temperature == 0.25);
    CHECK(config.doctor_backend == "http:remote");
    CHECK(config.patient_backend == "sim-patient");

    REQUIRE(config.backends.count("remote") == 1);
    const BackendConfig& remote = config.backends.at("remote");
    CHECK(remote.name == "remote");
    CHECK(remote.endpoint == "http://127.0.0.1:8000/v1");
    CHECK(remote.model == "big-model");
    CHECK(remote.temperature == 0.1);
    CHECK(remote.timeout_seconds == 12.0);
    CHECK(remote.max_retries == 5);
    CHECK(remote.rate_limit == 2.5);
}

TEST_CASE("keys outside any section belong to the run section") {
    RunConfig config = parse_config_text("task = mc\nseed = 7\n");
    CHECK(config.task == "mc");
    CHECK(config.seed == 7);
}

TEST_CASE("a backend section with no temperature keeps the unset sentinel") {
    RunConfig config = parse_config_text(
        "[backend.quiet]\nendpoint = http://h/v1\nmodel = m\n");
    CHECK(config.backends.at("quiet").temperature == -1.0);
}

TEST_CASE("unknown sections and keys are rejected by name and location") {
    auto check_error = [](const std::string& text, const std::string& needle) {
        try {
            parse_config_text(text, "conf.ini");
            FAIL_CHECK("expected ConfigError for: " << needle);
        } catch (const ConfigError& err) {
            std::string what = err.what();
            CHECK(what.find(needle) != std::string::npos);
            CHECK(what.find("conf.ini") != std::string::npos);
        }
    };
    check_error("[misc]\nx = 1\n", "unknown section 'misc'");
    check_error("[run]\ncolor = red\n", "unknown key 'color'");
    check_error("[backends]\nnurse = sim\n", "unknown key 'nurse'");
    check_error("[backend.a]\nport = 1\n", "unknown key 'port'");
    check_error("[backend.]\nmodel = m\n", "backend section needs a name");
    check_error("[backend.a]\nmodel = m\n[backend.a]\nmodel = n\n",
                "duplicate section 'backend.a'");
    check_error("[run\ntask = mc\n", "unterminated section");
    check_error("[run]\njust a line\n", "expected key = value");
    check_error("[run]\n= value\n", "empty key");

    // The line number points at the offender.
    try {
        parse_config_text("[run]\ntask = mc\ncolor = red\n", "conf.ini");
        FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
        CHECK(std::string(err.what()).find("conf.ini:3") != std::string::npos);
    }
}

TEST_CASE("semantic validation on parsed values") {
    CHECK_THROWS_AS(parse_config_text("task = triage\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("mode = duplex\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("single_turn_style = haiku\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("workers = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("schedule_chunk = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("symptom_budget = 0\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("language = fr\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("workers = many\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("director = yes\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("seed = soon\n"), ConfigError);
}

TEST_CASE("emit and parse round trip, including backend sections") {
    RunConfig config = default_config();
    config.graph = "";
    config.task = "mc";
    config.language = "en";
    config.seed = 1234567;
    config.workers = 8;
    config.patient_temperature = 0.123456789;
    BackendConfig remote;
    remote.name = "remote";
    remote.endpoint = "http://127.0.0.1:9000/v1";
    remote.model = "m";
    remote.temperature = -1.0;  // unset sentinel survives the round trip
    config.backends["remote"] = remote;

    std::string text = emit_config(config);
    RunConfig back = parse_config_text(text);
    CHECK(back == config);
    CHECK(emit_config(back) == text);
}

TEST_CASE("config digest tracks content, not formatting") {
    RunConfig a = default_config();
    RunConfig b = default_config();
    CHECK(config_digest(a) == config_digest(b));
    CHECK(config_digest(a).size() == 16);

    b.seed = 1;
    CHECK(config_digest(a) != config_digest(b));

    // Reparsing the canonical emission cannot change the digest.
    RunConfig c = parse_config_text(emit_config(a));
    CHECK(config_digest(c) == config_digest(a));
}

TEST_CASE("validate_config checks file existence for referenced paths") {
    auto missing_graph = write_config("missing_graph.ini", "graph = /no/such/graph.jsonl\n");
    try {
        validate_config(missing_graph);
        FAIL("expected ConfigError");
    } catch (const ConfigError& err) {
        CHECK(std::string(err.what()).find("/no/such/graph.jsonl") != std::string::npos);
    }

    std::string graph_path =
        (std::filesystem::path(MEDKGEVAL_SOURCE_DIR) / "data/demo_graph.jsonl").string();
    std::string prompts_path = (std::filesystem::path(MEDKGEVAL_SOURCE_DIR) / "prompts").string();
    auto good = write_config("good.ini", "graph = " + graph_path + "\nprompts = " + prompts_path +
                                             "\ntask = mc\n");
    RunConfig config = validate_config(good);
    CHECK(config.graph == graph_path);
    CHECK(config.task == "mc");

    CHECK_THROWS_AS(
        validate_config(std::filesystem::path("/no/such/dir") / "conf.ini"), IoError);
}
