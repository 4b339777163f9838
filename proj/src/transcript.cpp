#include "medkgeval/transcript.hpp"

#include <algorithm>

namespace medkgeval {

namespace {

constexpr std::array<std::pair<DirectorAction, std::string_view>, 5> kActions = {{
    {DirectorAction::RevealAttribute, "reveal_attribute"},
    {DirectorAction::DiscloseSymptoms, "disclose_symptoms"},
    {DirectorAction::AnswerDoctorQuery, "answer_doctor_query"},
    {DirectorAction::RequestDiagnosis, "request_diagnosis"},
    {DirectorAction::Terminate, "terminate"},
}};

json facts_to_json(const std::vector<Fact>& facts) {
    json out = json::array();
    for (const Fact& fact : facts) out.push_back({{"id", fact.id}, {"name", fact.name}});
    return out;
}

std::vector<Fact> facts_from_json(const json& value) {
    std::vector<Fact> out;
    for (const json& fact : value) {
        out.push_back({fact.at("id").get<std::string>(), fact.at("name").get<std::string>()});
    }
    return out;
}

}  // namespace

std::string_view director_action_name(DirectorAction action) {
    for (const auto& [a, name] : kActions) {
        if (a == action) return name;
    }
    throw ValidationError("unknown director action");
}

DirectorAction parse_director_action(std::string_view token) {
    for (const auto& [a, name] : kActions) {
        if (name == token) return a;
    }
    throw ParseError("unknown director action '" + std::string(token) + "'");
}

json director_decision_to_json(const DirectorDecision& decision) {
    json out{{"action", std::string(director_action_name(decision.action))},
             {"facts", facts_to_json(decision.facts)},
             {"guidance", decision.guidance},
             {"turn_index", decision.turn_index}};
    if (decision.round_kind) {
        out["round_kind"] = std::string(attribute_kind_name(*decision.round_kind));
    }
    return out;
}

DirectorDecision director_decision_from_json(const json& value) {
    DirectorDecision decision;
    decision.action = parse_director_action(value.at("action").get<std::string>());
    decision.facts = facts_from_json(value.at("facts"));
    decision.guidance = value.value("guidance", std::string());
    decision.turn_index = value.at("turn_index").get<int>();
    if (value.contains("round_kind")) {
        decision.round_kind = parse_attribute_kind(value["round_kind"].get<std::string>());
    }
    return decision;
}

std::string_view status_name(TranscriptStatus status) {
    switch (status) {
        case TranscriptStatus::Completed: return "completed";
        case TranscriptStatus::Flagged: return "flagged";
        case TranscriptStatus::Aborted: return "aborted";
    }
    throw ValidationError("unknown transcript status");
}

TranscriptStatus parse_status(std::string_view token) {
    if (token == "completed") return TranscriptStatus::Completed;
    if (token == "flagged") return TranscriptStatus::Flagged;
    if (token == "aborted") return TranscriptStatus::Aborted;
    throw ParseError("unknown transcript status '" + std::string(token) + "'");
}

int DialogueTranscript::doctor_turns() const {
    return static_cast<int>(std::count_if(turns.begin(), turns.end(), [](const TranscriptTurn& t) {
        return t.speaker == Speaker::Doctor;
    }));
}

const TranscriptTurn* DialogueTranscript::last_doctor_turn() const {
    for (auto it = turns.rbegin(); it != turns.rend(); ++it) {
        if (it->speaker == Speaker::Doctor) return &*it;
    }
    return nullptr;
}

void validate_transcript(const DialogueTranscript& transcript) {
    for (size_t i = 0; i < transcript.turns.size(); ++i) {
        Speaker expected = (i % 2 == 0) ? Speaker::Patient : Speaker::Doctor;
        if (transcript.turns[i].speaker != expected) {
            throw ValidationError("transcript '" + transcript.case_id + "' turn " +
                                  std::to_string(i) + " breaks patient/doctor alternation");
        }
        if (transcript.turns[i].text.empty()) {
            throw ValidationError("transcript '" + transcript.case_id + "' turn " +
                                  std::to_string(i) + " has empty text");
        }
    }
    if (transcript.turn_count != transcript.doctor_turns()) {
        throw ValidationError("transcript '" + transcript.case_id +
                              "' turn_count does not match its doctor turns");
    }
}

json transcript_to_json(const DialogueTranscript& transcript) {
    json turns = json::array();
    for (const TranscriptTurn& turn : transcript.turns) {
        json out{{"speaker", turn.speaker == Speaker::Patient ? "patient" : "doctor"},
                 {"text", turn.text}};
        if (turn.decision) out["decision"] = director_decision_to_json(*turn.decision);
        if (!turn.scores.empty()) {
            json scores = json::array();
            for (const TurnScore& score : turn.scores) scores.push_back(turn_score_to_json(score));
            out["scores"] = scores;
        }
        if (!turn.invalid_scores.empty()) {
            json invalid = json::array();
            for (const InvalidScore& score : turn.invalid_scores) {
                invalid.push_back(json{{"metric", std::string(metric_name(score.metric))},
                                       {"turn_index", score.turn_index},
                                       {"response", score.response}});
            }
            out["invalid_scores"] = invalid;
        }
        turns.push_back(std::move(out));
    }
    json out{{"record", "transcript"},
             {"case_id", transcript.case_id},
             {"task", transcript.task},
             {"mode", transcript.mode == DialogueMode::MultiTurn ? "multi" : "single"},
             {"director_enabled", transcript.director_enabled},
             {"language", transcript.language},
             {"turn_count", transcript.turn_count},
             {"status", std::string(status_name(transcript.status))},
             {"turns", turns},
             {"flags", transcript.flags}};
    if (transcript.final_diagnosis) out["final_diagnosis"] = *transcript.final_diagnosis;
    if (!transcript.error.empty()) out["error"] = transcript.error;
    return out;
}

DialogueTranscript transcript_from_json(const json& value) {
    DialogueTranscript transcript;
    transcript.case_id = value.at("case_id").get<std::string>();
    transcript.task = value.at("task").get<std::string>();
    std::string mode = value.at("mode").get<std::string>();
    if (mode != "multi" && mode != "single") throw ParseError("unknown mode '" + mode + "'");
    transcript.mode = mode == "multi" ? DialogueMode::MultiTurn : DialogueMode::SingleTurn;
    transcript.director_enabled = value.at("director_enabled").get<bool>();
    transcript.language = value.at("language").get<std::string>();
    transcript.turn_count = value.at("turn_count").get<int>();
    transcript.status = parse_status(value.at("status").get<std::string>());
    if (value.contains("final_diagnosis")) {
        transcript.final_diagnosis = value["final_diagnosis"].get<std::string>();
    }
    if (value.contains("flags")) transcript.flags = value["flags"].get<std::vector<std::string>>();
    if (value.contains("error")) transcript.error = value["error"].get<std::string>();
    for (const json& turn : value.at("turns")) {
        TranscriptTurn out;
        std::string speaker = turn.at("speaker").get<std::string>();
        if (speaker != "patient" && speaker != "doctor") {
            throw ParseError("unknown speaker '" + speaker + "'");
        }
        out.speaker = speaker == "patient" ? Speaker::Patient : Speaker::Doctor;
        out.text = turn.at("text").get<std::string>();
        if (turn.contains("decision")) {
            out.decision = director_decision_from_json(turn["decision"]);
        }
        if (turn.contains("scores")) {
            for (const json& score : turn["scores"]) {
                out.scores.push_back(turn_score_from_json(score));
            }
        }
        if (turn.contains("invalid_scores")) {
            for (const json& score : turn["invalid_scores"]) {
                out.invalid_scores.push_back(
                    {parse_metric(score.at("metric").get<std::string>()),
                     score.at("turn_index").get<int>(),
                     score.value("response", std::string())});
            }
        }
        transcript.turns.push_back(std::move(out));
    }
    return transcript;
}

void save_transcripts(std::span<const DialogueTranscript> transcripts,
                      const std::filesystem::path& path, const json& header) {
    std::vector<const DialogueTranscript*> ordered;
    ordered.reserve(transcripts.size());
    for (const DialogueTranscript& transcript : transcripts) ordered.push_back(&transcript);
    std::sort(ordered.begin(), ordered.end(),
              [](const DialogueTranscript* a, const DialogueTranscript* b) {
                  return a->case_id < b->case_id;
              });
    std::vector<json> records;
    records.reserve(ordered.size() + 1);
    records.push_back(header);
    for (const DialogueTranscript* transcript : ordered) {
        records.push_back(transcript_to_json(*transcript));
    }
    write_jsonl(path, records);
}

std::vector<DialogueTranscript> load_transcripts(const std::filesystem::path& path) {
    std::vector<DialogueTranscript> out;
    for (const JsonlRecord& record : read_jsonl(path)) {
        if (is_header_record(record.value)) continue;
        try {
            out.push_back(transcript_from_json(record.value));
        } catch (const json::exception& err) {
            throw ParseError(path.string() + ":" + std::to_string(record.line) + ": " +
                             err.what());
        } catch (const ParseError& err) {
            throw ParseError(path.string() + ":" + std::to_string(record.line) + ": " +
                             err.what());
        }
    }
    return out;
}

}  // namespace medkgeval
