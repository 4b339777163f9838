#pragma once

#include <string>
#include <vector>

#include "medkgeval/common.hpp"

namespace medkgeval {

enum class Metric {
    DrugCorrectness,        // max 2, medication consultation
    DrugComprehensiveness,  // max 2, medication consultation
    DiseaseCorrectness,     // max 3, diagnosis final turn
    HistoryTaking,          // max 2, diagnosis intermediate turns
};

int metric_max(Metric metric);
std::string_view metric_name(Metric metric);
Metric parse_metric(std::string_view token);
std::span<const Metric> all_metrics();

struct RubricRow {
    int score;
    std::string_view criteria;
};

std::span<const RubricRow> rubric_rows(Metric metric);

// Rubric rendered one "score: criteria" line per level, for judge prompts.
std::string rubric_text(Metric metric);

struct TurnScore {
    Metric metric = Metric::DrugCorrectness;
    int raw = 0;
    int max = 0;
    double normalized = 0.0;  // raw / max
    int turn_index = 0;       // 1-based doctor turn
    std::string rationale;
};

// Validates 0 <= raw <= metric_max and fills the normalized value.
TurnScore make_turn_score(Metric metric, int raw, int turn_index, std::string rationale);

// A judge reply that never produced a usable integer; kept apart from the
// valid scores so means stay well-defined.
struct InvalidScore {
    Metric metric = Metric::DrugCorrectness;
    int turn_index = 0;
    std::string response;
};

json turn_score_to_json(const TurnScore& score);
TurnScore turn_score_from_json(const json& value);

}  // namespace medkgeval
