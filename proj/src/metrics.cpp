#include "medkgeval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

namespace medkgeval {

double normalize_score(int raw, int max) {
    if (max <= 0) throw ValidationError("rubric maximum must be positive");
    if (raw < 0 || raw > max) {
        throw ValidationError("raw score " + std::to_string(raw) + " outside [0, " +
                              std::to_string(max) + "]");
    }
    return static_cast<double>(raw) / static_cast<double>(max);
}

std::vector<ScoreRow> score_rows(std::span<const DialogueTranscript> transcripts) {
    std::vector<ScoreRow> rows;
    for (const DialogueTranscript& transcript : transcripts) {
        if (transcript.status == TranscriptStatus::Aborted) continue;
        std::map<Metric, std::pair<double, size_t>> normalized_sums;
        std::map<Metric, double> raw_sums;
        for (const TranscriptTurn& turn : transcript.turns) {
            for (const TurnScore& score : turn.scores) {
                auto& [sum, count] = normalized_sums[score.metric];
                sum += score.normalized;
                count += 1;
                raw_sums[score.metric] += score.raw;
            }
        }
        for (const auto& [metric, sum_count] : normalized_sums) {
            ScoreRow row;
            row.case_id = transcript.case_id;
            row.task = transcript.task;
            row.language = transcript.language;
            row.metric = metric;
            row.value = sum_count.first / static_cast<double>(sum_count.second);
            row.raw_mean = raw_sums[metric] / static_cast<double>(sum_count.second);
            row.turn_count = transcript.turn_count;
            row.status = transcript.status;
            rows.push_back(std::move(row));
        }
    }
    std::sort(rows.begin(), rows.end(), [](const ScoreRow& a, const ScoreRow& b) {
        if (a.case_id != b.case_id) return a.case_id < b.case_id;
        return metric_name(a.metric) < metric_name(b.metric);
    });
    return rows;
}

std::vector<AggregateRow> aggregate(std::span<const ScoreRow> rows) {
    std::map<std::tuple<std::string, std::string, std::string>, AggregateRow> table;
    for (const ScoreRow& row : rows) {
        auto key = std::make_tuple(row.task, row.language, std::string(metric_name(row.metric)));
        AggregateRow& cell = table[key];
        cell.task = row.task;
        cell.language = row.language;
        cell.metric = row.metric;
        cell.per_case_mean += row.value;
        cell.case_count += 1;
    }
    std::vector<AggregateRow> out;
    out.reserve(table.size());
    for (auto& [key, cell] : table) {
        cell.per_case_mean /= static_cast<double>(cell.case_count);
        out.push_back(cell);
    }
    return out;
}

std::vector<TurnBucketRow> turn_breakdown(std::span<const ScoreRow> rows) {
    std::map<std::tuple<std::string, int, std::string>, TurnBucketRow> table;
    std::map<std::pair<std::string, int>, std::set<std::string>> bucket_cases;
    for (const ScoreRow& row : rows) {
        auto key =
            std::make_tuple(row.task, row.turn_count, std::string(metric_name(row.metric)));
        TurnBucketRow& cell = table[key];
        cell.task = row.task;
        cell.turn_count = row.turn_count;
        cell.metric = row.metric;
        cell.mean += row.value;
        cell.rows += 1;
        bucket_cases[{row.task, row.turn_count}].insert(row.case_id);
    }
    std::vector<TurnBucketRow> out;
    out.reserve(table.size());
    for (auto& [key, cell] : table) {
        cell.mean /= static_cast<double>(cell.rows);
        cell.cases = bucket_cases[{cell.task, cell.turn_count}].size();
        out.push_back(cell);
    }
    return out;
}

RunReport build_report(std::span<const DialogueTranscript> transcripts) {
    RunReport report;
    report.total_cases = transcripts.size();
    for (const DialogueTranscript& transcript : transcripts) {
        switch (transcript.status) {
            case TranscriptStatus::Completed: ++report.completed; break;
            case TranscriptStatus::Flagged: ++report.flagged; break;
            case TranscriptStatus::Aborted: ++report.aborted; break;
        }
        for (const TranscriptTurn& turn : transcript.turns) {
            report.invalid_scores += turn.invalid_scores.size();
        }
    }
    report.rows = score_rows(transcripts);
    report.aggregates = aggregate(report.rows);
    report.turn_breakdown = turn_breakdown(report.rows);

    // Pooled per-turn means over the individual turn scores.
    std::map<std::tuple<std::string, std::string, std::string>, std::pair<double, size_t>> pooled;
    for (const DialogueTranscript& transcript : transcripts) {
        if (transcript.status == TranscriptStatus::Aborted) continue;
        for (const TranscriptTurn& turn : transcript.turns) {
            for (const TurnScore& score : turn.scores) {
                auto key = std::make_tuple(transcript.task, transcript.language,
                                           std::string(metric_name(score.metric)));
                pooled[key].first += score.normalized;
                pooled[key].second += 1;
            }
        }
    }
    for (AggregateRow& cell : report.aggregates) {
        auto key = std::make_tuple(cell.task, cell.language,
                                   std::string(metric_name(cell.metric)));
        auto it = pooled.find(key);
        if (it != pooled.end() && it->second.second > 0) {
            cell.per_turn_mean = it->second.first / static_cast<double>(it->second.second);
            cell.score_count = it->second.second;
        }
    }
    return report;
}

json report_to_json(const RunReport& report) {
    json rows = json::array();
    for (const ScoreRow& row : report.rows) {
        rows.push_back(json{{"case_id", row.case_id},
                            {"task", row.task},
                            {"language", row.language},
                            {"metric", std::string(metric_name(row.metric))},
                            {"value", row.value},
                            {"raw_mean", row.raw_mean},
                            {"turn_count", row.turn_count},
                            {"status", std::string(status_name(row.status))}});
    }
    json aggregates = json::array();
    for (const AggregateRow& cell : report.aggregates) {
        aggregates.push_back(json{{"task", cell.task},
                                  {"language", cell.language},
                                  {"metric", std::string(metric_name(cell.metric))},
                                  {"per_case_mean", cell.per_case_mean},
                                  {"case_count", cell.case_count},
                                  {"per_turn_mean", cell.per_turn_mean},
                                  {"score_count", cell.score_count}});
    }
    json buckets = json::array();
    for (const TurnBucketRow& cell : report.turn_breakdown) {
        buckets.push_back(json{{"task", cell.task},
                               {"turn_count", cell.turn_count},
                               {"cases", cell.cases},
                               {"metric", std::string(metric_name(cell.metric))},
                               {"mean", cell.mean},
                               {"rows", cell.rows}});
    }
    return json{{"total_cases", report.total_cases},
                {"completed", report.completed},
                {"flagged", report.flagged},
                {"aborted", report.aborted},
                {"invalid_scores", report.invalid_scores},
                {"rows", rows},
                {"aggregates", aggregates},
                {"turn_breakdown", buckets}};
}

namespace {

std::string csv_field(const std::string& value) {
    if (value.find_first_of(",\"\n") == std::string::npos) return value;
    std::string out = "\"";
    for (char c : value) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string format_double(double value) {
    std::ostringstream out;
    out.precision(12);
    out << value;
    return out.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw IoError("write failure on " + path.string());
}

}  // namespace

void write_report_files(const RunReport& report, const std::filesystem::path& directory,
                        const json& header) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);

    json body = report_to_json(report);
    for (const auto& [key, value] : header.items()) {
        if (key != "record") body[key] = value;
    }
    write_text_file(directory / "report.json", body.dump(2) + "\n");

    std::string rows_csv = "case_id,task,language,metric,value,raw_mean,turn_count,status\n";
    for (const ScoreRow& row : report.rows) {
        rows_csv += csv_field(row.case_id) + "," + row.task + "," + row.language + "," +
                    std::string(metric_name(row.metric)) + "," + format_double(row.value) + "," +
                    format_double(row.raw_mean) + "," + std::to_string(row.turn_count) + "," +
                    std::string(status_name(row.status)) + "\n";
    }
    write_text_file(directory / "rows.csv", rows_csv);

    std::string buckets_csv = "task,turn,count,metric,mean\n";
    for (const TurnBucketRow& cell : report.turn_breakdown) {
        buckets_csv += cell.task + "," + std::to_string(cell.turn_count) + "," +
                       std::to_string(cell.cases) + "," + std::string(metric_name(cell.metric)) +
                       "," + format_double(cell.mean) + "\n";
    }
    write_text_file(directory / "turn_breakdown.csv", buckets_csv);
}

std::vector<HumanRating> load_human_ratings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<HumanRating> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string trimmed = trim(line);
        if (trimmed.empty()) continue;
        std::vector<std::string> fields = split(trimmed, ',');
        if (lineno == 1) {
            if (fields.size() != 3 || trim(fields[0]) != "case_id" ||
                trim(fields[1]) != "metric" || trim(fields[2]) != "score") {
                throw ParseError(path.string() + ": expected header 'case_id,metric,score'");
            }
            continue;
        }
        if (fields.size() != 3) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": expected 3 fields");
        }
        HumanRating rating;
        rating.case_id = trim(fields[0]);
        rating.metric = parse_metric(trim(fields[1]));
        try {
            rating.score = std::stod(trim(fields[2]));
        } catch (const std::exception&) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": score is not a number");
        }
        int max = metric_max(rating.metric);
        if (rating.score < 0.0 || rating.score > max) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": score outside [0, " + std::to_string(max) + "]");
        }
        out.push_back(std::move(rating));
    }
    return out;
}

std::map<std::pair<std::string, Metric>, double> judge_raw_means(
    std::span<const DialogueTranscript> transcripts) {
    std::map<std::pair<std::string, Metric>, double> out;
    for (const ScoreRow& row : score_rows(transcripts)) {
        out[{row.case_id, row.metric}] = row.raw_mean;
    }
    return out;
}

MaeReport mae_against_human(const std::map<std::pair<std::string, Metric>, double>& judge,
                            const std::map<std::pair<std::string, Metric>, double>& human) {
    MaeReport report;
    double total = 0.0;
    std::map<Metric, std::pair<double, size_t>> per_metric;
    for (const auto& [key, human_score] : human) {
        auto it = judge.find(key);
        if (it == judge.end()) continue;
        double diff = std::fabs(it->second - human_score);
        total += diff;
        ++report.pairs;
        auto& [sum, count] = per_metric[key.second];
        sum += diff;
        count += 1;
    }
    if (report.pairs == 0) {
        throw ValidationError("no overlapping (case, metric) keys between judge and human scores");
    }
    report.overall = total / static_cast<double>(report.pairs);
    for (const auto& [metric, sum_count] : per_metric) {
        report.per_metric[metric] = sum_count.first / static_cast<double>(sum_count.second);
    }
    return report;
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("cosine: dimension mismatch");
    if (a.empty()) throw ValidationError("cosine: empty vectors");
    bool identical = true;
    double dot = 0.0, norm_a = 0.0, norm_b = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] != b[i]) identical = false;
        dot += a[i] * b[i];
        norm_a += a[i] * a[i];
        norm_b += b[i] * b[i];
    }
    if (norm_a == 0.0 || norm_b == 0.0) throw ValidationError("cosine: zero vector");
    if (identical) return 1.0;
    return dot / (std::sqrt(norm_a) * std::sqrt(norm_b));
}

HashProjectionEmbedder::HashProjectionEmbedder(size_t dimension) : dimension_(dimension) {
    if (dimension_ == 0) throw ConfigError("embedder dimension must be positive");
}

std::vector<double> HashProjectionEmbedder::embed(const std::string& text) {
    std::vector<double> out(dimension_, 0.0);
    std::string normalized = normalize_for_match(text);
    std::vector<std::string> tokens;
    for (const std::string& token : split(normalized, ' ')) {
        if (!token.empty()) tokens.push_back(token);
    }
    if (tokens.empty()) tokens.push_back(text.empty() ? "<empty>" : text);
    for (const std::string& token : tokens) {
        uint64_t digest = fnv1a64(token);
        size_t bucket = static_cast<size_t>(digest % dimension_);
        double sign = ((digest >> 32) & 1) ? 1.0 : -1.0;
        out[bucket] += sign;
    }
    double norm = 0.0;
    for (double component : out) norm += component * component;
    if (norm == 0.0) {
        out[0] = 1.0;
        return out;
    }
    norm = std::sqrt(norm);
    for (double& component : out) component /= norm;
    return out;
}

HttpEmbedder::HttpEmbedder(BackendConfig config) : config_(std::move(config)) {
    validate_backend_config(config_);
    size_t scheme_end = config_.endpoint.find("://");
    if (scheme_end == std::string::npos || config_.endpoint.substr(0, scheme_end) != "http") {
        throw ConfigError("embedder '" + config_.name + "': endpoint must be a plain http URL");
    }
    size_t path_start = config_.endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        host_ = config_.endpoint;
    } else {
        host_ = config_.endpoint.substr(0, path_start);
        path_prefix_ = config_.endpoint.substr(path_start);
    }
    while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::vector<double> HttpEmbedder::embed(const std::string& text) {
    httplib::Client client(host_);
    client.set_connection_timeout(std::chrono::duration<double>(config_.timeout_seconds));
    client.set_read_timeout(std::chrono::duration<double>(config_.timeout_seconds));
    httplib::Headers headers;
    if (const char* key =
            std::getenv(HttpChatBackend::api_key_env_var(config_.name).c_str())) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    json body{{"model", config_.model}, {"input", text}};
    auto result = client.Post(path_prefix_ + "/embeddings", headers, body.dump(),
                              "application/json");
    if (!result || result->status != 200) {
        throw BackendError("embedder '" + config_.name + "': request failed" +
                           (result ? " with status " + std::to_string(result->status) : ""));
    }
    json reply = json::parse(result->body, nullptr, false);
    if (reply.is_discarded()) {
        throw BackendError("embedder '" + config_.name + "': malformed response");
    }
    try {
        return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
    } catch (const json::exception&) {
        throw BackendError("embedder '" + config_.name +
                           "': response missing data[0].embedding");
    }
}

ConsistencyInput load_consistency_groups(const std::filesystem::path& path) {
    ConsistencyInput input;
    for (const JsonlRecord& record : read_jsonl(path)) {
        const json& value = record.value;
        if (is_header_record(value)) continue;
        try {
            std::string id = value.at("id").get<std::string>();
            std::vector<std::string> responses =
                value.at("responses").get<std::vector<std::string>>();
            auto [it, inserted] = input.groups.emplace(id, std::move(responses));
            if (!inserted) {
                throw ParseError("duplicate group id '" + id + "'");
            }
        } catch (const json::exception& err) {
            throw ParseError(path.string() + ":" + std::to_string(record.line) + ": " +
                             err.what());
        } catch (const ParseError& err) {
            throw ParseError(path.string() + ":" + std::to_string(record.line) + ": " +
                             err.what());
        }
    }
    return input;
}

ConsistencyInput consistency_groups_from_transcripts(
    const std::vector<std::vector<DialogueTranscript>>& runs) {
    ConsistencyInput input;
    for (const std::vector<DialogueTranscript>& run : runs) {
        for (const DialogueTranscript& transcript : run) {
            if (transcript.status == TranscriptStatus::Aborted) continue;
            std::string queries;
            for (const TranscriptTurn& turn : transcript.turns) {
                if (turn.speaker != Speaker::Patient) continue;
                if (!queries.empty()) queries += '\n';
                queries += turn.text;
            }
            if (!queries.empty()) input.groups[transcript.case_id].push_back(queries);
        }
    }
    return input;
}

ConsistencyReport consistency_score(const ConsistencyInput& input, Embedder& embedder) {
    if (input.groups.empty()) throw ValidationError("consistency: no groups");
    ConsistencyReport report;
    double group_total = 0.0;
    for (const auto& [condition, queries] : input.groups) {
        size_t n = queries.size();
        if (n < 2) {
            throw ValidationError("consistency: group '" + condition +
                                  "' has fewer than 2 queries");
        }
        std::vector<std::vector<double>> embeddings;
        embeddings.reserve(n);
        for (const std::string& query : queries) embeddings.push_back(embedder.embed(query));
        double pair_total = 0.0;
        size_t pair_count = 0;
        for (size_t i = 0; i < n; ++i) {
            for (size_t j = i + 1; j < n; ++j) {
                pair_total += cosine_similarity(embeddings[i], embeddings[j]);
                ++pair_count;
            }
        }
        group_total += pair_total / static_cast<double>(pair_count);
        report.pairs += pair_count;
        ++report.groups;
    }
    report.cons = group_total / static_cast<double>(report.groups);
    report.percent = report.cons * 100.0;
    return report;
}

AlignmentReport entity_alignment_rate(std::span<const DialogueTranscript> transcripts,
                                      const CaseFile& cases) {
    std::map<std::string, std::vector<std::string>> vocab;
    auto add_vocab = [&vocab](const std::string& case_id, const Subgraph& subgraph) {
        std::vector<std::string>& names = vocab[case_id];
        for (const auto& [id, entity] : subgraph.graph.entities()) {
            names.push_back(normalize_for_match(entity.name));
            for (const std::string& alias : entity.aliases) {
                names.push_back(normalize_for_match(alias));
            }
        }
    };
    for (const MedicationCase& mcase : cases.medication) add_vocab(mcase.case_id, mcase.subgraph);
    for (const DiagnosisCase& dcase : cases.diagnosis) add_vocab(dcase.case_id, dcase.subgraph);

    AlignmentReport report;
    for (const DialogueTranscript& transcript : transcripts) {
        auto it = vocab.find(transcript.case_id);
        if (it == vocab.end()) {
            throw ValidationError("transcript '" + transcript.case_id +
                                  "' has no matching case in the cases file");
        }
        AlignmentCaseRow row;
        row.case_id = transcript.case_id;
        for (const TranscriptTurn& turn : transcript.turns) {
            if (turn.speaker != Speaker::Patient) continue;
            ++row.patient_turns;
            std::string normalized = normalize_for_match(turn.text);
            for (const std::string& name : it->second) {
                if (!name.empty() && normalized.find(name) != std::string::npos) {
                    ++row.matched;
                    break;
                }
            }
        }
        row.rate = row.patient_turns == 0
                       ? 0.0
                       : static_cast<double>(row.matched) / static_cast<double>(row.patient_turns);
        report.matched += row.matched;
        report.patient_turns += row.patient_turns;
        report.cases.push_back(std::move(row));
    }
    std::sort(report.cases.begin(), report.cases.end(),
              [](const AlignmentCaseRow& a, const AlignmentCaseRow& b) {
                  return a.case_id < b.case_id;
              });
    report.rate = report.patient_turns == 0
                      ? 0.0
                      : static_cast<double>(report.matched) /
                            static_cast<double>(report.patient_turns);
    return report;
}

}  // namespace medkgeval
