#pragma once

#include <map>
#include <optional>

#include "medkgeval/cases.hpp"
#include "medkgeval/gateway.hpp"
#include "medkgeval/transcript.hpp"

namespace medkgeval {

double normalize_score(int raw, int max);

// One (case, metric) measurement: the mean of that metric's normalized turn
// scores within the case, plus the raw-scale mean used for the human MAE.
struct ScoreRow {
    std::string case_id;
    std::string task;
    std::string language;
    Metric metric = Metric::DrugCorrectness;
    double value = 0.0;     // mean normalized
    double raw_mean = 0.0;  // mean on rubric units
    int turn_count = 0;
    TranscriptStatus status = TranscriptStatus::Completed;
};

// Rows for completed/flagged transcripts; aborted ones contribute counts only.
std::vector<ScoreRow> score_rows(std::span<const DialogueTranscript> transcripts);

struct AggregateRow {
    std::string task;
    std::string language;
    Metric metric = Metric::DrugCorrectness;
    double per_case_mean = 0.0;  // unweighted mean over case rows
    size_t case_count = 0;
    double per_turn_mean = 0.0;  // pooled mean over individual turn scores
    size_t score_count = 0;
};

struct TurnBucketRow {
    std::string task;
    int turn_count = 0;
    size_t cases = 0;
    Metric metric = Metric::DrugCorrectness;
    double mean = 0.0;
    size_t rows = 0;
};

struct RunReport {
    size_t total_cases = 0;
    size_t completed = 0;
    size_t flagged = 0;
    size_t aborted = 0;
    size_t invalid_scores = 0;
    std::vector<ScoreRow> rows;
    std::vector<AggregateRow> aggregates;       // only metrics with >=1 valid row
    std::vector<TurnBucketRow> turn_breakdown;  // bucket case counts partition valid cases
};

std::vector<AggregateRow> aggregate(std::span<const ScoreRow> rows);
std::vector<TurnBucketRow> turn_breakdown(std::span<const ScoreRow> rows);
RunReport build_report(std::span<const DialogueTranscript> transcripts);

json report_to_json(const RunReport& report);

// Writes report.json, rows.csv and turn_breakdown.csv into `directory`.
void write_report_files(const RunReport& report, const std::filesystem::path& directory,
                        const json& header);

// --- judge vs human -----------------------------------------------------

struct HumanRating {
    std::string case_id;
    Metric metric = Metric::DrugCorrectness;
    double score = 0.0;  // raw rubric units
};

// CSV with a "case_id,metric,score" header row.
std::vector<HumanRating> load_human_ratings(const std::filesystem::path& path);

struct MaeReport {
    double overall = 0.0;
    std::map<Metric, double> per_metric;
    size_t pairs = 0;
};

// Mean |judge - human| on raw rubric units over the key intersection.
MaeReport mae_against_human(const std::map<std::pair<std::string, Metric>, double>& judge,
                            const std::map<std::pair<std::string, Metric>, double>& human);
std::map<std::pair<std::string, Metric>, double> judge_raw_means(
    std::span<const DialogueTranscript> transcripts);

// --- consistency (patient-query stability across runs) -------------------

double cosine_similarity(std::span<const double> a, std::span<const double> b);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<double> embed(const std::string& text) = 0;
};

// Deterministic test embedder: tokens hash into signed buckets, L2-normalized.
class HashProjectionEmbedder : public Embedder {
public:
    explicit HashProjectionEmbedder(size_t dimension = 64);
    std::vector<double> embed(const std::string& text) override;

private:
    size_t dimension_;
};

// OpenAI-style /embeddings endpoint.
class HttpEmbedder : public Embedder {
public:
    explicit HttpEmbedder(BackendConfig config);
    std::vector<double> embed(const std::string& text) override;

private:
    BackendConfig config_;
    std::string host_;
    std::string path_prefix_;
};

struct ConsistencyInput {
    // condition id -> patient query texts from different runs of the case
    std::map<std::string, std::vector<std::string>> groups;
};

ConsistencyInput load_consistency_groups(const std::filesystem::path& path);

// Groups the patient turns of the same case id across several runs' worth of
// transcripts, one concatenated query text per run.
ConsistencyInput consistency_groups_from_transcripts(
    const std::vector<std::vector<DialogueTranscript>>& runs);

struct ConsistencyReport {
    double cons = 0.0;     // in [-1, 1]
    double percent = 0.0;  // cons * 100, meaningful for nonnegative sims
    size_t groups = 0;
    size_t pairs = 0;
};

// Per condition: mean similarity over unordered query pairs; then the
// unweighted mean over conditions. Every group needs at least two queries.
ConsistencyReport consistency_score(const ConsistencyInput& input, Embedder& embedder);

// --- entity alignment -----------------------------------------------------

struct AlignmentCaseRow {
    std::string case_id;
    size_t matched = 0;
    size_t patient_turns = 0;
    double rate = 0.0;
};

struct AlignmentReport {
    double rate = 0.0;
    size_t matched = 0;
    size_t patient_turns = 0;
    std::vector<AlignmentCaseRow> cases;
};

// Fraction of patient turns mentioning at least one subgraph entity name or
// alias of their case, after case/punctuation normalization.
AlignmentReport entity_alignment_rate(std::span<const DialogueTranscript> transcripts,
                                      const CaseFile& cases);

}  // namespace medkgeval
