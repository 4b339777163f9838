#pragma once

#include <memory>

#include "medkgeval/cases.hpp"
#include "medkgeval/gateway.hpp"
#include "medkgeval/prompts.hpp"
#include "medkgeval/transcript.hpp"

namespace medkgeval {

// Short deterministic detail string for a fact, derived from the case id and
// fact id so the same case always narrates the same way.
std::string canned_guidance(const std::string& case_id, const Fact& fact);

// '?' or the full-width question mark.
bool has_question_mark(const std::string& text);

// Deterministic Director state machines. State is derived entirely from the
// case and the transcript so far, so the functions stay pure.
DirectorDecision director_next(const MedicationCase& mcase, const DialogueTranscript& transcript);
DirectorDecision director_next(const DiagnosisCase& dcase, const DialogueTranscript& transcript);

// Marker scan for "FINAL DIAGNOSIS: <name>" (case-insensitive, ASCII or
// full-width colon). When no marker is found and a classifier backend is
// given, the backend is asked; its failures are treated as "no claim".
std::optional<std::string> detect_diagnosis_claim(const std::string& text,
                                                  ChatBackend* classifier = nullptr);

struct PatientUtterance {
    std::string text;
    bool drifted = false;  // post-check still failing after one regeneration
};

class PatientAgent {
public:
    PatientAgent(std::shared_ptr<ChatBackend> backend, const PromptLibrary& prompts);

    // Directed turn. The utterance must name every decision fact (or one of
    // its subgraph aliases); one regeneration is attempted before the drift
    // flag is raised.
    PatientUtterance utter(const Persona& persona, const DirectorDecision& decision,
                           const DialogueTranscript& transcript, const Subgraph& subgraph) const;

    // Ablated turn: persona plus the raw subgraph only.
    PatientUtterance utter_ablated(const Persona& persona, const Subgraph& subgraph,
                                   const DialogueTranscript& transcript,
                                   bool request_diagnosis) const;

    // Single-turn presentation of the full scheduled fact list.
    PatientUtterance utter_single_turn(const Persona& persona, const std::vector<Fact>& facts,
                                       const Subgraph& subgraph) const;

private:
    std::string generate(const Persona& persona, std::map<std::string, std::string> values,
                         const std::vector<Fact>& must_mention, const Subgraph* subgraph,
                         bool* drifted) const;

    std::shared_ptr<ChatBackend> backend_;
    const PromptLibrary* prompts_;
};

class DoctorAgent {
public:
    DoctorAgent(std::shared_ptr<ChatBackend> backend, const PromptLibrary& prompts);

    // Sends the system prompt plus the full session history (patient turns as
    // user, doctor turns as assistant) and returns the reply unmodified.
    std::string respond(const std::string& task, const DialogueTranscript& transcript) const;

private:
    std::shared_ptr<ChatBackend> backend_;
    const PromptLibrary* prompts_;
};

struct JudgeResult {
    std::optional<TurnScore> score;  // empty when the reply never parsed
    std::string raw_response;
};

class JudgeAgent {
public:
    JudgeAgent(std::shared_ptr<ChatBackend> backend, const PromptLibrary& prompts);

    // Scores the most recent doctor turn. Unparseable or out-of-range output
    // gets one reprompt; a second failure yields an empty score.
    JudgeResult score(Metric metric, const std::vector<std::string>& reference_names,
                      const DialogueTranscript& transcript, int turn_index) const;

private:
    std::shared_ptr<ChatBackend> backend_;
    const PromptLibrary* prompts_;
};

// "patient: ...\ndoctor: ..." rendering shared by prompts.
std::string render_dialogue(const DialogueTranscript& transcript);

}  // namespace medkgeval
