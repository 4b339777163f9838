#include "medkgeval/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "medkgeval/metrics.hpp"
#include "medkgeval/rules.hpp"
#include "medkgeval/sims.hpp"

namespace medkgeval {

namespace {

std::map<std::string, std::string> parse_spec_options(const std::string& text,
                                                      const std::string& spec) {
    std::map<std::string, std::string> out;
    if (text.empty()) return out;
    for (const std::string& item : split(text, '&')) {
        size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw ConfigError("backend spec '" + spec + "': expected key=value, got '" + item +
                              "'");
        }
        out[item.substr(0, eq)] = item.substr(eq + 1);
    }
    return out;
}

bool spec_bool(const std::string& value, const std::string& spec) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("backend spec '" + spec + "': expected true or false, got '" + value + "'");
}

int spec_int(const std::string& value, const std::string& spec) {
    try {
        size_t used = 0;
        int parsed = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument("trailing");
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError("backend spec '" + spec + "': expected an integer, got '" + value +
                          "'");
    }
}

std::string format_value(double value) {
    std::ostringstream out;
    out.precision(12);
    out << value;
    return out.str();
}

// First record of a JSONL artifact if it is a header, else a placeholder.
json read_artifact_header(const std::filesystem::path& path) {
    std::vector<JsonlRecord> records = read_jsonl(path);
    if (!records.empty() && is_header_record(records.front().value)) {
        return records.front().value;
    }
    return artifact_header(0, fnv1a64("unheadered:" + path.string()));
}

uint64_t header_seed(const json& header) {
    if (header.contains("seed") && header["seed"].is_number_unsigned()) {
        return header["seed"].get<uint64_t>();
    }
    return 0;
}

void write_json_file(const std::filesystem::path& path, const json& body) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << body.dump(2) << "\n";
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace

BackendHandle make_backend(const std::string& spec, const RunConfig& config,
                           double role_temperature) {
    if (spec.empty()) throw ConfigError("backend spec must be non-empty");

    if (spec.starts_with("record:")) {
        std::string rest = spec.substr(7);
        size_t at = rest.rfind('@');
        if (at == std::string::npos || at == 0 || at + 1 == rest.size()) {
            throw ConfigError("backend spec '" + spec + "': expected record:SPEC@PATH");
        }
        BackendHandle inner = make_backend(rest.substr(0, at), config, role_temperature);
        if (inner.recorder) {
            throw ConfigError("backend spec '" + spec + "': nested record: is not supported");
        }
        BackendHandle handle;
        handle.recorder = std::make_shared<RecordingChatBackend>(inner.backend);
        handle.backend = handle.recorder;
        handle.record_path = rest.substr(at + 1);
        return handle;
    }

    BackendHandle handle;
    if (spec == "sim-patient") {
        handle.backend = std::make_shared<SimPatientBackend>();
        return handle;
    }
    if (spec == "sim-judge") {
        handle.backend = std::make_shared<SimJudgeBackend>();
        return handle;
    }
    if (spec == "sim-doctor" || spec.starts_with("sim-doctor:")) {
        SimDoctorOptions options;
        std::string raw = spec == "sim-doctor" ? "" : spec.substr(11);
        for (const auto& [key, value] : parse_spec_options(raw, spec)) {
            if (key == "claim") options.claim = value;
            else if (key == "claim_after") options.claim_after = spec_int(value, spec);
            else if (key == "thorough") options.thorough = spec_bool(value, spec);
            else if (key == "never_claim") options.never_claim = spec_bool(value, spec);
            else throw ConfigError("backend spec '" + spec + "': unknown option '" + key + "'");
        }
        handle.backend = std::make_shared<SimDoctorBackend>(options);
        return handle;
    }
    if (spec.starts_with("scripted:")) {
        std::string rest = spec.substr(9);
        std::string path = rest;
        bool strict = true;
        std::string fallback;
        size_t mark = rest.find('?');
        if (mark != std::string::npos) {
            path = rest.substr(0, mark);
            for (const auto& [key, value] : parse_spec_options(rest.substr(mark + 1), spec)) {
                if (key == "strict") strict = spec_bool(value, spec);
                else if (key == "fallback") fallback = value;
                else throw ConfigError("backend spec '" + spec + "': unknown option '" + key +
                                       "'");
            }
        }
        if (path.empty()) throw ConfigError("backend spec '" + spec + "': missing path");
        handle.backend = ScriptedChatBackend::from_file(path, strict, fallback);
        return handle;
    }
    if (spec.starts_with("http:")) {
        std::string name = spec.substr(5);
        auto it = config.backends.find(name);
        if (it == config.backends.end()) {
            throw ConfigError("backend spec '" + spec + "': no [backend." + name +
                              "] section in the config");
        }
        BackendConfig backend = it->second;
        if (backend.temperature < 0.0) backend.temperature = role_temperature;
        handle.backend = std::make_shared<HttpChatBackend>(backend);
        return handle;
    }
    throw ConfigError("unknown backend spec '" + spec + "'");
}

namespace {

void add_kg_stats(CLI::App& app, std::ostream& out) {
    auto state = std::make_shared<std::pair<std::string, bool>>("", false);
    CLI::App* sub = app.add_subcommand("kg-stats", "Entity and relation counts for a graph");
    sub->add_option("--graph", state->first, "Graph JSONL file")->required();
    sub->add_flag("--json", state->second, "Emit JSON instead of a table");
    sub->callback([state, &out]() {
        KnowledgeGraph graph = load_graph(state->first);
        StatsReport stats = graph_stats(graph);
        if (state->second) {
            out << stats_to_json(stats).dump(2) << "\n";
            return;
        }
        for (const auto& [kind, count] : stats.entity_counts) {
            out << kind_name(kind) << "\t" << count << "\n";
        }
        out << "triples\t" << stats.relation_count << "\n";
    });
}

struct FilterArgs {
    std::string graph;
    std::string rules;
    std::string out_path;
    std::string log_path;
};

void add_kg_filter(CLI::App& app, std::ostream& out) {
    auto args = std::make_shared<FilterArgs>();
    CLI::App* sub =
        app.add_subcommand("kg-filter", "Drop triples violating the constraint rules");
    sub->add_option("--graph", args->graph, "Graph JSONL file")->required();
    sub->add_option("--rules", args->rules, "Rules JSONL file")->required();
    sub->add_option("--out", args->out_path, "Filtered graph output path")->required();
    sub->add_option("--log", args->log_path, "Removal log output path");
    sub->callback([args, &out]() {
        KnowledgeGraph graph = load_graph(args->graph);
        std::vector<ConstraintRule> rules = load_rules(args->rules, graph);
        FilterResult result = semantic_consistency_filter(graph, rules);
        RunConfig effective;
        effective.graph = args->graph;
        effective.rules = args->rules;
        json header = artifact_header(0, fnv1a64(emit_config(effective)));
        save_graph(result.graph, args->out_path, header);
        if (!args->log_path.empty()) {
            save_removal_log(result.removals, args->log_path, header);
        }
        out << "kept " << result.graph.triples().size() << " triples, removed "
            << result.removals.size() << " -> " << args->out_path << "\n";
    });
}

struct GenArgs {
    std::string graph;
    std::string rules;
    std::string task;
    size_t n = 10;
    uint64_t seed = 0;
    size_t budget = 6;
    int chunk = 2;
    std::string language;
    std::string out_path;
};

void add_gen(CLI::App& app, std::ostream& out) {
    auto args = std::make_shared<GenArgs>();
    CLI::App* sub = app.add_subcommand("gen", "Generate test cases from a graph");
    sub->add_option("--graph", args->graph, "Graph JSONL file")->required();
    sub->add_option("--rules", args->rules, "Apply this rules file before sampling");
    sub->add_option("--task", args->task, "Task kind")
        ->required()
        ->check(CLI::IsMember({"mc", "dd"}));
    sub->add_option("--n", args->n, "Number of cases");
    sub->add_option("--seed", args->seed, "Master seed");
    sub->add_option("--budget", args->budget, "Symptom budget per diagnosis case");
    sub->add_option("--chunk", args->chunk, "Symptoms revealed per turn (1 or 2)");
    sub->add_option("--language", args->language, "Restrict focus entities to one language");
    sub->add_option("--out", args->out_path, "Cases output path")->required();
    sub->callback([args, &out]() {
        KnowledgeGraph graph = load_graph(args->graph);
        if (!args->rules.empty()) {
            std::vector<ConstraintRule> rules = load_rules(args->rules, graph);
            graph = semantic_consistency_filter(graph, rules).graph;
        }
        CaseGenOptions options;
        options.symptom_budget = args->budget;
        options.schedule_chunk = args->chunk;
        CaseGenerator generator(graph, options);
        CaseFile cases;
        cases.task = args->task;
        if (args->task == "mc") {
            cases.medication =
                generator.sample_medication_cases(args->n, args->seed, args->language);
        } else {
            cases.diagnosis =
                generator.sample_diagnosis_cases(args->n, args->seed, args->language);
        }
        RunConfig effective;
        effective.graph = args->graph;
        effective.rules = args->rules;
        effective.task = args->task;
        effective.language = args->language;
        effective.seed = args->seed;
        effective.n_cases = args->n;
        effective.symptom_budget = args->budget;
        effective.schedule_chunk = args->chunk;
        save_cases(cases, args->out_path, artifact_header(args->seed, fnv1a64(emit_config(effective))));
        out << "generated " << cases.size() << " " << args->task << " cases -> "
            << args->out_path << "\n";
    });
}

struct RunArgs {
    std::string cases;
    std::string config_path;
    std::string patient;
    std::string doctor;
    std::string judge;
    std::string director_phrasing;
    std::string claim_classifier;
    std::string mode;
    bool no_director = false;
    int workers = 0;
    std::string out_path;
    std::string prompts;
    bool resume = false;
};

void add_run(CLI::App& app, std::ostream& out, int& exit_code) {
    auto args = std::make_shared<RunArgs>();
    CLI::App* sub = app.add_subcommand("run", "Run the dialogue suite over a cases file");
    sub->add_option("--cases", args->cases, "Cases JSONL file")->required();
    sub->add_option("--config", args->config_path, "Sectioned key-value config file");
    sub->add_option("--patient", args->patient, "Patient backend spec");
    sub->add_option("--doctor", args->doctor, "Doctor backend spec");
    sub->add_option("--judge", args->judge, "Judge backend spec");
    sub->add_option("--director-phrasing", args->director_phrasing,
                    "Optional guidance rephrasing backend spec");
    sub->add_option("--claim-classifier", args->claim_classifier,
                    "Optional diagnosis-claim classifier backend spec");
    sub->add_option("--mode", args->mode, "Dialogue mode")
        ->check(CLI::IsMember({"multi", "single"}));
    sub->add_flag("--no-director", args->no_director, "Ablate the Director agent");
    sub->add_option("--workers", args->workers, "Worker thread count");
    sub->add_option("--out", args->out_path, "Transcripts output path")->required();
    sub->add_option("--prompts", args->prompts, "Prompt template directory");
    sub->add_flag("--resume", args->resume, "Keep existing transcripts, run the rest");
    sub->callback([args, sub, &out, &exit_code]() {
        RunConfig config =
            args->config_path.empty() ? default_config() : validate_config(args->config_path);
        if (sub->count("--patient")) config.patient_backend = args->patient;
        if (sub->count("--doctor")) config.doctor_backend = args->doctor;
        if (sub->count("--judge")) config.judge_backend = args->judge;
        if (sub->count("--director-phrasing")) {
            config.director_phrasing_backend = args->director_phrasing;
        }
        if (sub->count("--claim-classifier")) {
            config.claim_classifier_backend = args->claim_classifier;
        }
        if (sub->count("--mode")) config.mode = args->mode;
        if (args->no_director) config.director_enabled = false;
        if (sub->count("--workers")) config.workers = args->workers;
        if (sub->count("--prompts")) config.prompts = args->prompts;
        if (config.workers < 1) throw ConfigError("workers must be at least 1");
        config.out = args->out_path;

        CaseFile cases = load_cases(args->cases);
        config.task = cases.task;
        config.seed = header_seed(read_artifact_header(args->cases));

        AgentBundle agents;
        agents.prompts = PromptLibrary::load(config.prompts);
        agents.director_enabled = config.director_enabled;
        agents.single_turn_style = config.single_turn_style;
        std::vector<BackendHandle> handles;
        handles.push_back(make_backend(config.patient_backend, config, config.patient_temperature));
        agents.patient = handles.back().backend;
        handles.push_back(make_backend(config.doctor_backend, config, config.doctor_temperature));
        agents.doctor = handles.back().backend;
        handles.push_back(make_backend(config.judge_backend, config, config.judge_temperature));
        agents.judge = handles.back().backend;
        if (!config.director_phrasing_backend.empty()) {
            handles.push_back(make_backend(config.director_phrasing_backend, config,
                                           config.director_temperature));
            agents.director_phrasing = handles.back().backend;
        }
        if (!config.claim_classifier_backend.empty()) {
            handles.push_back(
                make_backend(config.claim_classifier_backend, config, config.judge_temperature));
            agents.claim_classifier = handles.back().backend;
        }

        SuiteOptions options;
        options.mode =
            config.mode == "single" ? DialogueMode::SingleTurn : DialogueMode::MultiTurn;
        options.workers = config.workers;

        std::vector<DialogueTranscript> existing;
        if (args->resume && std::filesystem::exists(args->out_path)) {
            existing = load_transcripts(args->out_path);
        }

        SuiteResult result = run_suite(cases, agents, options, existing);
        // The digest covers content-determining settings only; the output
        // path and worker count never change the artifact bytes.
        RunConfig canonical = config;
        canonical.out.clear();
        canonical.workers = 1;
        save_transcripts(result.transcripts, args->out_path,
                         artifact_header(config.seed, fnv1a64(emit_config(canonical))));
        for (const BackendHandle& handle : handles) {
            if (handle.recorder) handle.recorder->save(handle.record_path);
        }

        size_t completed = 0, flagged = 0;
        for (const DialogueTranscript& transcript : result.transcripts) {
            if (transcript.status == TranscriptStatus::Completed) ++completed;
            if (transcript.status == TranscriptStatus::Flagged) ++flagged;
        }
        out << "ran " << result.executed << " cases (" << result.skipped
            << " resumed): " << completed << " completed, " << flagged << " flagged, "
            << result.aborted << " aborted -> " << args->out_path << "\n";
        if (result.aborted > 0) exit_code = 3;
    });
}

struct ReportArgs {
    std::string transcripts;
    std::string out_dir;
};

void add_report(CLI::App& app, std::ostream& out) {
    auto args = std::make_shared<ReportArgs>();
    CLI::App* sub = app.add_subcommand("report", "Aggregate transcript scores into report files");
    sub->add_option("--transcripts", args->transcripts, "Transcripts JSONL file")->required();
    sub->add_option("--out", args->out_dir, "Report output directory")->required();
    sub->callback([args, &out]() {
        std::vector<DialogueTranscript> transcripts = load_transcripts(args->transcripts);
        json header = read_artifact_header(args->transcripts);
        RunReport report = build_report(transcripts);
        write_report_files(report, args->out_dir, header);
        out << "report over " << report.total_cases << " cases (" << report.completed
            << " completed, " << report.flagged << " flagged, " << report.aborted
            << " aborted, " << report.invalid_scores << " invalid scores) -> " << args->out_dir
            << "\n";
        for (const AggregateRow& row : report.aggregates) {
            out << "  " << row.task << " " << row.language << " " << metric_name(row.metric)
                << " per_case_mean=" << format_value(row.per_case_mean)
                << " cases=" << row.case_count << "\n";
        }
    });
}

struct ConsistencyArgs {
    std::string groups;
    std::vector<std::string> transcripts;
    std::string embedder = "hash";
    size_t dim = 64;
    std::string config_path;
    std::string out_path;
};

void add_consistency(CLI::App& app, std::ostream& out) {
    auto args = std::make_shared<ConsistencyArgs>();
    CLI::App* sub =
        app.add_subcommand("consistency", "Patient-query consistency across repeated runs");
    sub->add_option("--groups", args->groups, "Grouped queries JSONL file");
    sub->add_option("--transcripts", args->transcripts,
                    "Two or more transcript files of the same cases");
    sub->add_option("--embedder", args->embedder, "hash or http:NAME");
    sub->add_option("--dim", args->dim, "Hash embedder dimension");
    sub->add_option("--config", args->config_path, "Config file defining http embedders");
    sub->add_option("--out", args->out_path, "Optional JSON report path");
    sub->callback([args, &out]() {
        ConsistencyInput input;
        if (!args->groups.empty()) {
            input = load_consistency_groups(args->groups);
        } else if (!args->transcripts.empty()) {
            std::vector<std::vector<DialogueTranscript>> runs;
            runs.reserve(args->transcripts.size());
            for (const std::string& path : args->transcripts) {
                runs.push_back(load_transcripts(path));
            }
            input = consistency_groups_from_transcripts(runs);
        } else {
            throw ConfigError("consistency needs --groups or --transcripts");
        }
        std::unique_ptr<Embedder> embedder;
        if (args->embedder == "hash") {
            embedder = std::make_unique<HashProjectionEmbedder>(args->dim);
        } else if (args->embedder.starts_with("http:")) {
            if (args->config_path.empty()) {
                throw ConfigError("http embedder needs --config");
            }
            RunConfig config = validate_config(args->config_path);
            std::string name = args->embedder.substr(5);
            auto it = config.backends.find(name);
            if (it == config.backends.end()) {
                throw ConfigError("no [backend." + name + "] section in the config");
            }
            BackendConfig backend = it->second;
            if (backend.temperature < 0.0) backend.temperature = 0.0;
            embedder = std::make_unique<HttpEmbedder>(backend);
        } else {
            throw ConfigError("unknown embedder '" + args->embedder + "'");
        }
        ConsistencyReport report = consistency_score(input, *embedder);
        out << "cons " << format_value(report.cons) << "\n";
        out << "percent " << format_value(report.percent) << "\n";
        out << "groups " << report.groups << " pairs " << report.pairs << "\n";
        if (!args->out_path.empty()) {
            json body = artifact_header(0, fnv1a64("consistency"));
            body["cons"] = report.cons;
            body["percent"] = report.percent;
            body["groups"] = report.groups;
            body["pairs"] = report.pairs;
            write_json_file(args->out_path, body);
        }
    });
}

struct AlignArgs {
    std::string transcripts;
    std::string cases;
    std::string out_path;
};

void add_align(CLI::App& app, std::ostream& out) {
    auto args = std::make_shared<AlignArgs>();
    CLI::App* sub =
        app.add_subcommand("align", "Entity alignment rate of patient turns against the cases");
    sub->add_option("--transcripts", args->transcripts, "Transcripts JSONL file")->required();
    sub->add_option("--cases", args->cases, "Cases JSONL file")->required();
    sub->add_option("--out", args->out_path, "Optional JSON report path");
    sub->callback([args, &out]() {
        std::vector<DialogueTranscript> transcripts = load_transcripts(args->transcripts);
        CaseFile cases = load_cases(args->cases);
        AlignmentReport report = entity_alignment_rate(transcripts, cases);
        out << "alignment_rate " << format_value(report.rate) << " (" << report.matched << "/"
            << report.patient_turns << " patient turns)\n";
        if (!args->out_path.empty()) {
            json rows = json::array();
            for (const AlignmentCaseRow& row : report.cases) {
                rows.push_back(json{{"case_id", row.case_id},
                                    {"matched", row.matched},
                                    {"patient_turns", row.patient_turns},
                                    {"rate", row.rate}});
            }
            json body = artifact_header(0, fnv1a64("align"));
            body["rate"] = report.rate;
            body["matched"] = report.matched;
            body["patient_turns"] = report.patient_turns;
            body["cases"] = rows;
            write_json_file(args->out_path, body);
        }
    });
}

struct MaeArgs {
    std::string transcripts;
    std::string human;
};

void add_mae(CLI::App& app, std::ostream& out) {
    auto args = std::make_shared<MaeArgs>();
    CLI::App* sub =
        app.add_subcommand("mae", "Mean absolute error of judge scores against human ratings");
    sub->add_option("--transcripts", args->transcripts, "Transcripts JSONL file")->required();
    sub->add_option("--human", args->human, "Human ratings CSV (case_id,metric,score)")
        ->required();
    sub->callback([args, &out]() {
        std::map<std::pair<std::string, Metric>, double> judge =
            judge_raw_means(load_transcripts(args->transcripts));
        std::map<std::pair<std::string, Metric>, double> human;
        for (const HumanRating& rating : load_human_ratings(args->human)) {
            auto key = std::make_pair(rating.case_id, rating.metric);
            if (human.count(key)) {
                throw ParseError("duplicate human rating for (" + rating.case_id + ", " +
                                 std::string(metric_name(rating.metric)) + ")");
            }
            human[key] = rating.score;
        }
        MaeReport report = mae_against_human(judge, human);
        out << "mae_overall " << format_value(report.overall) << " over " << report.pairs
            << " pairs\n";
        for (const auto& [metric, value] : report.per_metric) {
            out << "mae." << metric_name(metric) << " " << format_value(value) << "\n";
        }
    });
}

}  // namespace

int cli_dispatch(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Knowledge-graph-driven dialogue evaluation for clinical language models"};
    app.name("medkgeval");
    app.require_subcommand(1);
    int exit_code = 0;

    add_kg_stats(app, out);
    add_kg_filter(app, out);
    add_gen(app, out);
    add_run(app, out, exit_code);
    add_report(app, out);
    add_consistency(app, out);
    add_align(app, out);
    add_mae(app, out);

    try {
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    } catch (const BackendError& e) {
        err << "error: " << e.what() << "\n";
        return 4;
    }
    return exit_code;
}

}  // namespace medkgeval
