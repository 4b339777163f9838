#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medkgeval/cases.hpp"
#include "medkgeval/rubric.hpp"

namespace medkgeval {

enum class DirectorAction {
    RevealAttribute,   // medication consultation round
    DiscloseSymptoms,  // scheduled symptom chunk
    AnswerDoctorQuery, // doctor asked about a pending fact
    RequestDiagnosis,  // schedule exhausted, push for a conclusion
    Terminate,
};

std::string_view director_action_name(DirectorAction action);
DirectorAction parse_director_action(std::string_view token);

struct DirectorDecision {
    DirectorAction action = DirectorAction::Terminate;
    std::vector<Fact> facts;
    std::string guidance;
    int turn_index = 0;  // 1-based patient turn this decision drives
    std::optional<AttributeKind> round_kind;
};

json director_decision_to_json(const DirectorDecision& decision);
DirectorDecision director_decision_from_json(const json& value);

enum class Speaker { Patient, Doctor };

struct TranscriptTurn {
    Speaker speaker = Speaker::Patient;
    std::string text;
    std::optional<DirectorDecision> decision;  // patient turns in directed runs
    std::vector<TurnScore> scores;             // doctor turns
    std::vector<InvalidScore> invalid_scores;
};

enum class DialogueMode { MultiTurn, SingleTurn };
enum class TranscriptStatus { Completed, Flagged, Aborted };

std::string_view status_name(TranscriptStatus status);
TranscriptStatus parse_status(std::string_view token);

struct DialogueTranscript {
    std::string case_id;
    std::string task;  // "mc" | "dd"
    DialogueMode mode = DialogueMode::MultiTurn;
    bool director_enabled = true;
    std::string language;
    int turn_count = 0;  // doctor turns
    TranscriptStatus status = TranscriptStatus::Completed;
    std::optional<std::string> final_diagnosis;
    std::vector<TranscriptTurn> turns;
    std::vector<std::string> flags;  // e.g. "patient-drift", "max-turns"
    std::string error;               // abort reason

    int doctor_turns() const;
    const TranscriptTurn* last_doctor_turn() const;
};

// Patient/doctor alternation starting with the patient, plus turn_count
// consistency.
void validate_transcript(const DialogueTranscript& transcript);

json transcript_to_json(const DialogueTranscript& transcript);
DialogueTranscript transcript_from_json(const json& value);

void save_transcripts(std::span<const DialogueTranscript> transcripts,
                      const std::filesystem::path& path, const json& header);
std::vector<DialogueTranscript> load_transcripts(const std::filesystem::path& path);

}  // namespace medkgeval
