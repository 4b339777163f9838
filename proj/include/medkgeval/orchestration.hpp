#pragma once

#include <memory>

#include "medkgeval/agents.hpp"

namespace medkgeval {

struct AgentBundle {
    std::shared_ptr<ChatBackend> patient;
    std::shared_ptr<ChatBackend> doctor;
    std::shared_ptr<ChatBackend> judge;
    std::shared_ptr<ChatBackend> director_phrasing;  // optional guidance rephraser
    std::shared_ptr<ChatBackend> claim_classifier;   // optional, marker scan otherwise
    PromptLibrary prompts;
    bool director_enabled = true;
    // "narrative" sends the single-turn presentation through the patient
    // backend; "list" emits a plain deterministic symptom list instead.
    std::string single_turn_style = "narrative";
};

AgentBundle set_director_ablation(AgentBundle agents, bool disabled);

DialogueTranscript run_medication_dialogue(const MedicationCase& mcase, const AgentBundle& agents,
                                           DialogueMode mode);
DialogueTranscript run_diagnosis_dialogue(const DiagnosisCase& dcase, const AgentBundle& agents,
                                          DialogueMode mode);

struct SuiteOptions {
    DialogueMode mode = DialogueMode::MultiTurn;
    int workers = 1;
};

struct SuiteResult {
    std::vector<DialogueTranscript> transcripts;  // merged, sorted by case id
    size_t executed = 0;
    size_t skipped = 0;  // present in the existing output, not rerun
    size_t aborted = 0;  // among the merged set
};

// Runs every case not already covered by `existing` on a bounded worker
// pool. Individual case failures become aborted transcripts; they never
// abort the suite.
SuiteResult run_suite(const CaseFile& cases, const AgentBundle& agents,
                      const SuiteOptions& options,
                      std::span<const DialogueTranscript> existing = {});

}  // namespace medkgeval
