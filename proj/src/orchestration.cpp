#include "medkgeval/orchestration.hpp"

#include <algorithm>
#include <atomic>
#include <set>
#include <thread>

namespace medkgeval {

namespace {

void add_flag(DialogueTranscript& transcript, const std::string& flag) {
    if (!std::count(transcript.flags.begin(), transcript.flags.end(), flag)) {
        transcript.flags.push_back(flag);
    }
}

void judge_and_attach(const JudgeAgent& judge, Metric metric,
                      const std::vector<std::string>& reference, DialogueTranscript& transcript,
                      TranscriptTurn& doctor_turn, int turn_index) {
    try {
        JudgeResult result = judge.score(metric, reference, transcript, turn_index);
        if (result.score) {
            doctor_turn.scores.push_back(*result.score);
        } else {
            doctor_turn.invalid_scores.push_back({metric, turn_index, result.raw_response});
        }
    } catch (const BackendError& err) {
        doctor_turn.invalid_scores.push_back({metric, turn_index, err.what()});
    }
}

// Optional LLM rephrasing of the canned guidance; the decision keeps its
// facts either way, and a rewrite that drops a fact name is discarded.
void finalize_guidance(DirectorDecision& decision, const AgentBundle& agents) {
    if (!agents.director_phrasing || decision.guidance.empty()) return;
    std::string plan = std::string(director_action_name(decision.action)) + " | facts: ";
    for (size_t i = 0; i < decision.facts.size(); ++i) {
        if (i) plan += "; ";
        plan += decision.facts[i].name;
    }
    plan += " | detail: " + decision.guidance;
    std::vector<ChatMessage> messages = {
        {"system", "You write one-sentence stage directions."},
        {"user", agents.prompts.get("director_guidance").render({{"plan", plan}})},
    };
    try {
        std::string rewritten = trim(agents.director_phrasing->complete(messages));
        if (rewritten.empty()) return;
        for (const Fact& fact : decision.facts) {
            if (!contains_normalized(rewritten, fact.name)) return;
        }
        decision.guidance = rewritten;
    } catch (const BackendError&) {
        // canned guidance stands
    }
}

std::vector<std::string> fact_names(const std::vector<Fact>& facts) {
    std::vector<std::string> out;
    out.reserve(facts.size());
    for (const Fact& fact : facts) out.push_back(fact.name);
    return out;
}

}  // namespace

AgentBundle set_director_ablation(AgentBundle agents, bool disabled) {
    agents.director_enabled = !disabled;
    return agents;
}

DialogueTranscript run_medication_dialogue(const MedicationCase& mcase, const AgentBundle& agents,
                                           DialogueMode mode) {
    if (mode != DialogueMode::MultiTurn) {
        throw ConfigError("medication consultation only supports multi-turn mode");
    }
    DialogueTranscript transcript;
    transcript.case_id = mcase.case_id;
    transcript.task = "mc";
    transcript.mode = mode;
    transcript.director_enabled = agents.director_enabled;
    transcript.language = mcase.language;

    PatientAgent patient(agents.patient, agents.prompts);
    DoctorAgent doctor(agents.doctor, agents.prompts);
    JudgeAgent judge(agents.judge, agents.prompts);

    try {
        for (size_t round = 0; round < mcase.rounds.size(); ++round) {
            TranscriptTurn patient_turn;
            patient_turn.speaker = Speaker::Patient;
            if (agents.director_enabled) {
                DirectorDecision decision = director_next(mcase, transcript);
                if (decision.action == DirectorAction::Terminate) break;
                finalize_guidance(decision, agents);
                PatientUtterance utterance =
                    patient.utter(mcase.persona, decision, transcript, mcase.subgraph);
                patient_turn.text = utterance.text;
                patient_turn.decision = std::move(decision);
                if (utterance.drifted) add_flag(transcript, "patient-drift");
            } else {
                PatientUtterance utterance =
                    patient.utter_ablated(mcase.persona, mcase.subgraph, transcript, false);
                patient_turn.text = utterance.text;
            }
            transcript.turns.push_back(std::move(patient_turn));

            std::string reply = doctor.respond("mc", transcript);
            transcript.turns.push_back({Speaker::Doctor, reply, std::nullopt, {}, {}});
            int turn_index = ++transcript.turn_count;

            std::vector<std::string> reference = fact_names(mcase.rounds[round].facts);
            TranscriptTurn& doctor_turn = transcript.turns.back();
            judge_and_attach(judge, Metric::DrugCorrectness, reference, transcript, doctor_turn,
                             turn_index);
            judge_and_attach(judge, Metric::DrugComprehensiveness, reference, transcript,
                             doctor_turn, turn_index);
        }
    } catch (const BackendError& err) {
        transcript.status = TranscriptStatus::Aborted;
        transcript.error = err.what();
    }
    if (transcript.status != TranscriptStatus::Aborted && !transcript.flags.empty()) {
        transcript.status = TranscriptStatus::Flagged;
    }
    validate_transcript(transcript);
    return transcript;
}

namespace {

void score_final_diagnosis(const JudgeAgent& judge, const DiagnosisCase& dcase,
                           DialogueTranscript& transcript) {
    TranscriptTurn* doctor_turn = nullptr;
    for (auto it = transcript.turns.rbegin(); it != transcript.turns.rend(); ++it) {
        if (it->speaker == Speaker::Doctor) {
            doctor_turn = &*it;
            break;
        }
    }
    if (!doctor_turn) return;
    judge_and_attach(judge, Metric::DiseaseCorrectness, {dcase.reference_disease_name},
                     transcript, *doctor_turn, transcript.turn_count);
}

}  // namespace

DialogueTranscript run_diagnosis_dialogue(const DiagnosisCase& dcase, const AgentBundle& agents,
                                          DialogueMode mode) {
    DialogueTranscript transcript;
    transcript.case_id = dcase.case_id;
    transcript.task = "dd";
    transcript.mode = mode;
    transcript.director_enabled = agents.director_enabled;
    transcript.language = dcase.language;

    PatientAgent patient(agents.patient, agents.prompts);
    DoctorAgent doctor(agents.doctor, agents.prompts);
    JudgeAgent judge(agents.judge, agents.prompts);

    std::vector<Fact> scheduled;
    for (const std::vector<std::string>& entry : dcase.symptom_schedule) {
        for (const std::string& id : entry) {
            scheduled.push_back({id, dcase.subgraph.graph.at(id).name});
        }
    }
    std::vector<std::string> scheduled_names = fact_names(scheduled);

    try {
        if (mode == DialogueMode::SingleTurn) {
            TranscriptTurn patient_turn;
            patient_turn.speaker = Speaker::Patient;
            if (agents.single_turn_style == "list") {
                patient_turn.text =
                    "Symptoms: " + join(scheduled_names, "; ") + ". Please provide a diagnosis.";
            } else {
                PatientUtterance utterance =
                    patient.utter_single_turn(dcase.persona, scheduled, dcase.subgraph);
                patient_turn.text = utterance.text;
                if (utterance.drifted) add_flag(transcript, "patient-drift");
            }
            transcript.turns.push_back(std::move(patient_turn));
            std::string reply = doctor.respond("dd", transcript);
            transcript.turns.push_back({Speaker::Doctor, reply, std::nullopt, {}, {}});
            transcript.turn_count = 1;
            transcript.final_diagnosis = detect_diagnosis_claim(reply,
                                                                agents.claim_classifier.get());
            score_final_diagnosis(judge, dcase, transcript);
        } else {
            size_t planned_ablated_turns = dcase.symptom_schedule.size() + 1;
            while (true) {
                bool requested = false;
                TranscriptTurn patient_turn;
                patient_turn.speaker = Speaker::Patient;
                if (agents.director_enabled) {
                    DirectorDecision decision = director_next(dcase, transcript);
                    if (decision.action == DirectorAction::Terminate) {
                        if (!transcript.final_diagnosis && transcript.turn_count > 0) {
                            add_flag(transcript, "max-turns");
                            score_final_diagnosis(judge, dcase, transcript);
                        }
                        break;
                    }
                    requested = decision.action == DirectorAction::RequestDiagnosis;
                    finalize_guidance(decision, agents);
                    PatientUtterance utterance =
                        patient.utter(dcase.persona, decision, transcript, dcase.subgraph);
                    patient_turn.text = utterance.text;
                    patient_turn.decision = std::move(decision);
                    if (utterance.drifted) add_flag(transcript, "patient-drift");
                } else {
                    size_t patient_turns = (transcript.turns.size() + 1) / 2;
                    if (transcript.turn_count >= dcase.max_turns ||
                        patient_turns >= planned_ablated_turns) {
                        if (!transcript.final_diagnosis && transcript.turn_count > 0) {
                            add_flag(transcript, "max-turns");
                            score_final_diagnosis(judge, dcase, transcript);
                        }
                        break;
                    }
                    requested = patient_turns == planned_ablated_turns - 1;
                    PatientUtterance utterance = patient.utter_ablated(
                        dcase.persona, dcase.subgraph, transcript, requested);
                    patient_turn.text = utterance.text;
                }
                transcript.turns.push_back(std::move(patient_turn));

                std::string reply = doctor.respond("dd", transcript);
                transcript.turns.push_back({Speaker::Doctor, reply, std::nullopt, {}, {}});
                int turn_index = ++transcript.turn_count;

                std::optional<std::string> claim =
                    detect_diagnosis_claim(reply, agents.claim_classifier.get());
                if (claim || requested) {
                    if (claim) transcript.final_diagnosis = claim;
                    score_final_diagnosis(judge, dcase, transcript);
                    break;
                }
                judge_and_attach(judge, Metric::HistoryTaking, scheduled_names, transcript,
                                 transcript.turns.back(), turn_index);
            }
        }
    } catch (const BackendError& err) {
        transcript.status = TranscriptStatus::Aborted;
        transcript.error = err.what();
    }
    if (transcript.status != TranscriptStatus::Aborted && !transcript.flags.empty()) {
        transcript.status = TranscriptStatus::Flagged;
    }
    validate_transcript(transcript);
    return transcript;
}

SuiteResult run_suite(const CaseFile& cases, const AgentBundle& agents,
                      const SuiteOptions& options, std::span<const DialogueTranscript> existing) {
    if (options.workers < 1) throw ConfigError("workers must be >= 1");
    if (cases.task == "mc" && options.mode == DialogueMode::SingleTurn) {
        throw ConfigError("single-turn mode applies to diagnosis cases only");
    }

    std::set<std::string> done;
    for (const DialogueTranscript& transcript : existing) done.insert(transcript.case_id);

    std::vector<size_t> todo;
    size_t total = cases.size();
    for (size_t i = 0; i < total; ++i) {
        const std::string& id =
            cases.task == "mc" ? cases.medication[i].case_id : cases.diagnosis[i].case_id;
        if (!done.count(id)) todo.push_back(i);
    }

    SuiteResult result;
    result.skipped = total - todo.size();
    result.executed = todo.size();

    std::vector<DialogueTranscript> fresh(todo.size());
    std::atomic<size_t> cursor{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&]() {
        while (true) {
            size_t slot = cursor.fetch_add(1);
            if (slot >= todo.size()) return;
            size_t index = todo[slot];
            try {
                fresh[slot] = cases.task == "mc"
                                  ? run_medication_dialogue(cases.medication[index], agents,
                                                            options.mode)
                                  : run_diagnosis_dialogue(cases.diagnosis[index], agents,
                                                           options.mode);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };

    size_t thread_count = std::min(static_cast<size_t>(options.workers), todo.size());
    if (thread_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(thread_count);
        for (size_t i = 0; i < thread_count; ++i) threads.emplace_back(worker);
        for (std::thread& thread : threads) thread.join();
    }
    if (failure) std::rethrow_exception(failure);

    result.transcripts.assign(existing.begin(), existing.end());
    result.transcripts.insert(result.transcripts.end(), fresh.begin(), fresh.end());
    std::sort(result.transcripts.begin(), result.transcripts.end(),
              [](const DialogueTranscript& a, const DialogueTranscript& b) {
                  return a.case_id < b.case_id;
              });
    for (const DialogueTranscript& transcript : result.transcripts) {
        if (transcript.status == TranscriptStatus::Aborted) ++result.aborted;
    }
    return result;
}

}  // namespace medkgeval
