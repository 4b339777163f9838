#include "medkgeval/rubric.hpp"

#include <array>

namespace medkgeval {

namespace {

constexpr std::array<RubricRow, 3> kDrugCorrectness = {{
    {0, "All key facts incorrect; content contradicts medical knowledge."},
    {1, "Mixed correctness; some key facts incorrect, others accurate."},
    {2, "Fully accurate; all key facts align with reference."},
}};

constexpr std::array<RubricRow, 3> kDrugComprehensiveness = {{
    {0, "Omits all relevant information."},
    {1, "Includes partial relevant info; misses minor but meaningful points."},
    {2, "Fully covers all user-query-relevant information."},
}};

constexpr std::array<RubricRow, 4> kDiseaseCorrectness = {{
    {0, "Diagnosis is clinically unrelated to ground truth (no symptom, cause, or taxonomy "
        "overlap)."},
    {1, "Clinically similar but no ontological relation (e.g., symptom overlap but different "
        "categories)."},
    {2, "Ontologically related (e.g., parent-child disease, shared mechanism)."},
    {3, "Exact match or clinical synonym."},
}};

constexpr std::array<RubricRow, 3> kHistoryTaking = {{
    {0, "Collected info is irrelevant; cannot support any differential diagnosis."},
    {1, "Partial core info collected; misses discriminative/exclusionary features."},
    {2, "Structured inquiry; covers key disease-specific features."},
}};

constexpr std::array<Metric, 4> kAllMetrics = {
    Metric::DrugCorrectness,
    Metric::DrugComprehensiveness,
    Metric::DiseaseCorrectness,
    Metric::HistoryTaking,
};

}  // namespace

int metric_max(Metric metric) {
    switch (metric) {
        case Metric::DrugCorrectness: return 2;
        case Metric::DrugComprehensiveness: return 2;
        case Metric::DiseaseCorrectness: return 3;
        case Metric::HistoryTaking: return 2;
    }
    throw ValidationError("unknown metric");
}

std::string_view metric_name(Metric metric) {
    switch (metric) {
        case Metric::DrugCorrectness: return "drug_correctness";
        case Metric::DrugComprehensiveness: return "drug_comprehensiveness";
        case Metric::DiseaseCorrectness: return "disease_correctness";
        case Metric::HistoryTaking: return "history_taking";
    }
    throw ValidationError("unknown metric");
}

Metric parse_metric(std::string_view token) {
    for (Metric metric : kAllMetrics) {
        if (metric_name(metric) == token) return metric;
    }
    throw ParseError("unknown metric '" + std::string(token) + "'");
}

std::span<const Metric> all_metrics() { return kAllMetrics; }

std::span<const RubricRow> rubric_rows(Metric metric) {
    switch (metric) {
        case Metric::DrugCorrectness: return kDrugCorrectness;
        case Metric::DrugComprehensiveness: return kDrugComprehensiveness;
        case Metric::DiseaseCorrectness: return kDiseaseCorrectness;
        case Metric::HistoryTaking: return kHistoryTaking;
    }
    throw ValidationError("unknown metric");
}

std::string rubric_text(Metric metric) {
    std::string out;
    for (const RubricRow& row : rubric_rows(metric)) {
        out += std::to_string(row.score);
        out += ": ";
        out += row.criteria;
        out += '\n';
    }
    if (!out.empty()) out.pop_back();
    return out;
}

TurnScore make_turn_score(Metric metric, int raw, int turn_index, std::string rationale) {
    int max = metric_max(metric);
    if (raw < 0 || raw > max) {
        throw ValidationError("score " + std::to_string(raw) + " outside [0, " +
                              std::to_string(max) + "] for " + std::string(metric_name(metric)));
    }
    TurnScore score;
    score.metric = metric;
    score.raw = raw;
    score.max = max;
    score.normalized = static_cast<double>(raw) / static_cast<double>(max);
    score.turn_index = turn_index;
    score.rationale = std::move(rationale);
    return score;
}

json turn_score_to_json(const TurnScore& score) {
    return json{{"metric", std::string(metric_name(score.metric))},
                {"raw", score.raw},
                {"max", score.max},
                {"normalized", score.normalized},
                {"turn_index", score.turn_index},
                {"rationale", score.rationale}};
}

TurnScore turn_score_from_json(const json& value) {
    TurnScore score = make_turn_score(parse_metric(value.at("metric").get<std::string>()),
                                      value.at("raw").get<int>(),
                                      value.at("turn_index").get<int>(),
                                      value.value("rationale", std::string()));
    return score;
}

}  // namespace medkgeval
