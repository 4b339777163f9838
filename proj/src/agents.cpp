#include "medkgeval/agents.hpp"

#include <algorithm>
#include <set>

namespace medkgeval {

namespace {

const std::vector<std::string> kGuidancePool = {
    "it is mild and began a day or two ago",
    "it comes and goes through the day",
    "it is most noticeable at night",
    "it has been getting slightly worse",
};

std::vector<Fact> schedule_facts(const DiagnosisCase& dcase,
                                 const std::vector<std::string>& ids) {
    std::vector<Fact> out;
    out.reserve(ids.size());
    for (const std::string& id : ids) out.push_back({id, dcase.subgraph.graph.at(id).name});
    return out;
}

// Fact ids revealed by prior director decisions in this transcript.
std::set<std::string> revealed_ids(const DialogueTranscript& transcript) {
    std::set<std::string> out;
    for (const TranscriptTurn& turn : transcript.turns) {
        if (!turn.decision) continue;
        for (const Fact& fact : turn.decision->facts) out.insert(fact.id);
    }
    return out;
}

bool request_already_issued(const DialogueTranscript& transcript) {
    for (const TranscriptTurn& turn : transcript.turns) {
        if (turn.decision && turn.decision->action == DirectorAction::RequestDiagnosis) {
            return true;
        }
    }
    return false;
}

int patient_turn_count(const DialogueTranscript& transcript) {
    int count = 0;
    for (const TranscriptTurn& turn : transcript.turns) {
        if (turn.speaker == Speaker::Patient) ++count;
    }
    return count;
}

bool mentions_entity(const std::string& text, const Entity& entity) {
    if (contains_normalized(text, entity.name)) return true;
    for (const std::string& alias : entity.aliases) {
        if (contains_normalized(text, alias)) return true;
    }
    return false;
}

std::string join_names(const std::vector<Fact>& facts) {
    std::vector<std::string> names;
    names.reserve(facts.size());
    for (const Fact& fact : facts) names.push_back(fact.name);
    return join(names, "; ");
}

std::string instruction_for(const DirectorDecision& decision) {
    switch (decision.action) {
        case DirectorAction::RevealAttribute:
            switch (*decision.round_kind) {
                case AttributeKind::Indication:
                    return "Tell the pharmacist which conditions you hope this medication will "
                           "treat, naming each fact listed above, and ask whether it will help.";
                case AttributeKind::Contraindication:
                    return "Mention the other conditions you have, naming each fact listed above, "
                           "and ask whether you can still take the medication.";
                case AttributeKind::Precaution:
                    return "Ask what you should watch out for while taking it, naming each fact "
                           "listed above.";
                case AttributeKind::Interaction:
                    return "Tell the pharmacist which other medications you already take, naming "
                           "each one listed above, and ask whether they clash.";
            }
            return "";
        case DirectorAction::DiscloseSymptoms:
            return "Describe the symptoms listed above in your own words, naming each one and "
                   "folding in the guidance.";
        case DirectorAction::AnswerDoctorQuery:
            return "Answer the doctor's last question using only the facts listed above, naming "
                   "each one and folding in the guidance. If the doctor asked about anything "
                   "else, say you have noticed no abnormality there.";
        case DirectorAction::RequestDiagnosis:
            return "Briefly recap the facts listed above and ask the doctor directly for a "
                   "diagnosis.";
        case DirectorAction::Terminate:
            break;
    }
    throw ValidationError("no patient instruction for terminate decisions");
}

}  // namespace

std::string canned_guidance(const std::string& case_id, const Fact& fact) {
    uint64_t digest = fnv1a64(case_id + "|" + fact.id);
    return kGuidancePool[static_cast<size_t>(digest % kGuidancePool.size())];
}

bool has_question_mark(const std::string& text) {
    return text.find('?') != std::string::npos || text.find("\xef\xbc\x9f") != std::string::npos;
}

DirectorDecision director_next(const MedicationCase& mcase,
                               const DialogueTranscript& transcript) {
    DirectorDecision decision;
    decision.turn_index = patient_turn_count(transcript) + 1;
    size_t round = static_cast<size_t>(patient_turn_count(transcript));
    if (round >= mcase.rounds.size()) {
        decision.action = DirectorAction::Terminate;
        return decision;
    }
    decision.action = DirectorAction::RevealAttribute;
    decision.round_kind = mcase.rounds[round].kind;
    decision.facts = mcase.rounds[round].facts;
    return decision;
}

DirectorDecision director_next(const DiagnosisCase& dcase, const DialogueTranscript& transcript) {
    DirectorDecision decision;
    decision.turn_index = patient_turn_count(transcript) + 1;
    decision.action = DirectorAction::Terminate;
    if (transcript.final_diagnosis) return decision;
    if (transcript.doctor_turns() >= dcase.max_turns) return decision;
    if (request_already_issued(transcript)) return decision;

    std::set<std::string> revealed = revealed_ids(transcript);
    std::vector<std::string> pending;
    for (const std::vector<std::string>& entry : dcase.symptom_schedule) {
        for (const std::string& id : entry) {
            if (!revealed.count(id)) pending.push_back(id);
        }
    }

    const TranscriptTurn* doctor = transcript.last_doctor_turn();
    if (doctor && has_question_mark(doctor->text)) {
        for (const std::string& id : pending) {
            if (mentions_entity(doctor->text, dcase.subgraph.graph.at(id))) {
                decision.action = DirectorAction::AnswerDoctorQuery;
                decision.facts = schedule_facts(dcase, {id});
                decision.guidance = canned_guidance(dcase.case_id, decision.facts[0]);
                return decision;
            }
        }
    }

    if (!pending.empty()) {
        // Next schedule entry that still has something unrevealed.
        for (const std::vector<std::string>& entry : dcase.symptom_schedule) {
            std::vector<std::string> fresh;
            for (const std::string& id : entry) {
                if (!revealed.count(id)) fresh.push_back(id);
            }
            if (fresh.empty()) continue;
            decision.action = DirectorAction::DiscloseSymptoms;
            decision.facts = schedule_facts(dcase, fresh);
            decision.guidance = canned_guidance(dcase.case_id, decision.facts[0]);
            return decision;
        }
    }

    decision.action = DirectorAction::RequestDiagnosis;
    decision.facts = schedule_facts(dcase, dcase.symptom_schedule.front());
    return decision;
}

std::optional<std::string> detect_diagnosis_claim(const std::string& text,
                                                  ChatBackend* classifier) {
    std::string lowered = to_lower_ascii(text);
    const std::string marker = "final diagnosis";
    size_t pos = lowered.find(marker);
    while (pos != std::string::npos) {
        size_t cursor = pos + marker.size();
        while (cursor < text.size() && (text[cursor] == ' ' || text[cursor] == '\t')) ++cursor;
        bool has_colon = false;
        if (cursor < text.size() && text[cursor] == ':') {
            has_colon = true;
            ++cursor;
        } else if (text.compare(cursor, 3, "\xef\xbc\x9a") == 0) {
            has_colon = true;
            cursor += 3;
        }
        if (has_colon) {
            size_t end = text.find('\n', cursor);
            if (end == std::string::npos) end = text.size();
            std::string name = trim(text.substr(cursor, end - cursor));
            while (!name.empty() &&
                   (name.back() == '.' || name.back() == '!' || name.back() == ',')) {
                name.pop_back();
            }
            if (name.size() >= 3 && name.compare(name.size() - 3, 3, "\xe3\x80\x82") == 0) {
                name.erase(name.size() - 3);
            }
            name = trim(name);
            if (!name.empty()) return name;
        }
        pos = lowered.find(marker, pos + marker.size());
    }
    if (!classifier) return std::nullopt;
    std::vector<ChatMessage> messages = {
        {"system",
         "You classify whether a doctor's chat message commits to a final diagnosis. Reply with "
         "exactly one line: 'CLAIM: <disease name>' if it does, or 'NO_CLAIM' if it does not."},
        {"user", text},
    };
    try {
        std::string reply = classifier->complete(messages);
        std::string lowered_reply = to_lower_ascii(reply);
        size_t claim = lowered_reply.find("claim:");
        if (claim != std::string::npos && lowered_reply.find("no_claim") == std::string::npos) {
            size_t end = reply.find('\n', claim);
            if (end == std::string::npos) end = reply.size();
            std::string name = trim(reply.substr(claim + 6, end - claim - 6));
            if (!name.empty()) return name;
        }
        return std::nullopt;
    } catch (const BackendError&) {
        return std::nullopt;
    }
}

std::string render_dialogue(const DialogueTranscript& transcript) {
    if (transcript.turns.empty()) return "(the conversation has not started)";
    std::string out;
    for (const TranscriptTurn& turn : transcript.turns) {
        out += turn.speaker == Speaker::Patient ? "patient: " : "doctor: ";
        out += turn.text;
        out += '\n';
    }
    out.pop_back();
    return out;
}

PatientAgent::PatientAgent(std::shared_ptr<ChatBackend> backend, const PromptLibrary& prompts)
    : backend_(std::move(backend)), prompts_(&prompts) {
    if (!backend_) throw ConfigError("patient agent requires a backend");
}

std::string PatientAgent::generate(const Persona& persona,
                                   std::map<std::string, std::string> values,
                                   const std::vector<Fact>& must_mention,
                                   const Subgraph* subgraph, bool* drifted) const {
    std::map<std::string, std::string> system_values = {
        {"age", std::to_string(persona.age)},
        {"sex", persona.sex},
        {"style", persona.style},
        {"history", persona.history.empty() ? "none" : join(persona.history, "; ")},
        {"language", persona.language},
    };
    std::string system = prompts_->get("patient_system").render(system_values);

    auto mentioned = [&](const std::string& text) {
        for (const Fact& fact : must_mention) {
            bool found = contains_normalized(text, fact.name);
            if (!found && subgraph) {
                if (const Entity* entity = subgraph->graph.find(fact.id)) {
                    for (const std::string& alias : entity->aliases) {
                        if (contains_normalized(text, alias)) {
                            found = true;
                            break;
                        }
                    }
                }
            }
            if (!found) return false;
        }
        return true;
    };

    std::string user = prompts_->get("patient_turn").render(values);
    std::vector<ChatMessage> messages = {{"system", system}, {"user", user}};
    std::string text = backend_->complete(messages);
    if (mentioned(text)) return text;

    std::vector<std::string> names;
    for (const Fact& fact : must_mention) names.push_back(fact.name);
    values["instruction"] += " You must name every one of these facts exactly: " +
                             join(names, "; ") + ".";
    user = prompts_->get("patient_turn").render(values);
    messages = {{"system", system}, {"user", user}};
    text = backend_->complete(messages);
    if (!mentioned(text) && drifted) *drifted = true;
    return text;
}

PatientUtterance PatientAgent::utter(const Persona& persona, const DirectorDecision& decision,
                                     const DialogueTranscript& transcript,
                                     const Subgraph& subgraph) const {
    if (decision.action == DirectorAction::Terminate) {
        throw ValidationError("patient cannot act on a terminate decision");
    }
    std::map<std::string, std::string> values = {
        {"turn", std::to_string(decision.turn_index)},
        {"intent", std::string(director_action_name(decision.action))},
        {"round_kind",
         decision.round_kind ? std::string(attribute_kind_name(*decision.round_kind)) : "none"},
        {"facts", decision.facts.empty() ? "none" : join_names(decision.facts)},
        {"known_facts", "none"},
        {"guidance", decision.guidance.empty() ? "none" : decision.guidance},
        {"dialogue", render_dialogue(transcript)},
        {"instruction", instruction_for(decision)},
    };
    PatientUtterance out;
    out.text = generate(persona, std::move(values), decision.facts, &subgraph, &out.drifted);
    return out;
}

PatientUtterance PatientAgent::utter_ablated(const Persona& persona, const Subgraph& subgraph,
                                             const DialogueTranscript& transcript,
                                             bool request_diagnosis) const {
    std::vector<std::string> names;
    for (const auto& [id, entity] : subgraph.graph.entities()) {
        if (id != subgraph.focus) names.push_back(entity.name);
    }
    std::map<std::string, std::string> values = {
        {"turn", std::to_string(patient_turn_count(transcript) + 1)},
        {"intent", request_diagnosis ? "ablated_request" : "ablated"},
        {"round_kind", "none"},
        {"facts", "none"},
        {"known_facts", names.empty() ? "none" : join(names, "; ")},
        {"guidance", "none"},
        {"dialogue", render_dialogue(transcript)},
        {"instruction", request_diagnosis
                            ? "Ask the doctor directly for a diagnosis now."
                            : "Continue describing how you feel, in your own words."},
    };
    PatientUtterance out;
    out.text = generate(persona, std::move(values), {}, nullptr, nullptr);
    return out;
}

PatientUtterance PatientAgent::utter_single_turn(const Persona& persona,
                                                 const std::vector<Fact>& facts,
                                                 const Subgraph& subgraph) const {
    std::map<std::string, std::string> values = {
        {"turn", "1"},
        {"intent", "single_turn"},
        {"round_kind", "none"},
        {"facts", join_names(facts)},
        {"known_facts", "none"},
        {"guidance", "none"},
        {"dialogue", "(the conversation has not started)"},
        {"instruction",
         "Give one full account of your illness that names every fact listed above, then ask for "
         "a diagnosis in the same message."},
    };
    PatientUtterance out;
    out.text = generate(persona, std::move(values), facts, &subgraph, &out.drifted);
    return out;
}

DoctorAgent::DoctorAgent(std::shared_ptr<ChatBackend> backend, const PromptLibrary& prompts)
    : backend_(std::move(backend)), prompts_(&prompts) {
    if (!backend_) throw ConfigError("doctor agent requires a backend");
}

std::string DoctorAgent::respond(const std::string& task,
                                 const DialogueTranscript& transcript) const {
    if (transcript.turns.empty() || transcript.turns.back().speaker != Speaker::Patient) {
        throw ValidationError("doctor can only respond to a patient turn");
    }
    const std::string& name = task == "mc" ? "doctor_system_mc" : "doctor_system_dd";
    std::vector<ChatMessage> messages = {{"system", prompts_->get(name).render({})}};
    for (const TranscriptTurn& turn : transcript.turns) {
        messages.push_back(
            {turn.speaker == Speaker::Patient ? "user" : "assistant", turn.text});
    }
    return backend_->complete(messages);
}

JudgeAgent::JudgeAgent(std::shared_ptr<ChatBackend> backend, const PromptLibrary& prompts)
    : backend_(std::move(backend)), prompts_(&prompts) {
    if (!backend_) throw ConfigError("judge agent requires a backend");
}

namespace {

// Parses "SCORE: <int>" out of a judge reply; nullopt when absent.
std::optional<int> parse_score_line(const std::string& reply) {
    std::string lowered = to_lower_ascii(reply);
    size_t pos = lowered.find("score");
    while (pos != std::string::npos) {
        size_t cursor = pos + 5;
        while (cursor < reply.size() && (reply[cursor] == ' ' || reply[cursor] == ':')) ++cursor;
        size_t start = cursor;
        if (cursor < reply.size() && (reply[cursor] == '-' || reply[cursor] == '+')) ++cursor;
        while (cursor < reply.size() && std::isdigit(static_cast<unsigned char>(reply[cursor]))) {
            ++cursor;
        }
        if (cursor > start && std::isdigit(static_cast<unsigned char>(reply[cursor - 1]))) {
            try {
                return std::stoi(reply.substr(start, cursor - start));
            } catch (const std::exception&) {
                return std::nullopt;
            }
        }
        pos = lowered.find("score", pos + 5);
    }
    return std::nullopt;
}

std::string parse_rationale(const std::string& reply) {
    std::string lowered = to_lower_ascii(reply);
    size_t pos = lowered.find("rationale");
    if (pos == std::string::npos) return trim(reply);
    size_t cursor = pos + 9;
    while (cursor < reply.size() && (reply[cursor] == ' ' || reply[cursor] == ':')) ++cursor;
    size_t end = reply.find('\n', cursor);
    if (end == std::string::npos) end = reply.size();
    return trim(reply.substr(cursor, end - cursor));
}

}  // namespace

JudgeResult JudgeAgent::score(Metric metric, const std::vector<std::string>& reference_names,
                              const DialogueTranscript& transcript, int turn_index) const {
    std::map<std::string, std::string> values = {
        {"metric", std::string(metric_name(metric))},
        {"rubric", rubric_text(metric)},
        {"reference", reference_names.empty() ? "none" : join(reference_names, "; ")},
        {"dialogue", render_dialogue(transcript)},
    };
    std::vector<ChatMessage> messages = {
        {"system", prompts_->get("judge_system").render({})},
        {"user", prompts_->get("judge_turn").render(values)},
    };
    int max = metric_max(metric);
    JudgeResult result;
    for (int attempt = 0; attempt < 2; ++attempt) {
        std::string reply = backend_->complete(messages);
        result.raw_response = reply;
        std::optional<int> raw = parse_score_line(reply);
        if (raw && *raw >= 0 && *raw <= max) {
            result.score = make_turn_score(metric, *raw, turn_index, parse_rationale(reply));
            return result;
        }
        messages.push_back({"assistant", reply});
        messages.push_back({"user", "Your reply must contain 'SCORE: <n>' where n is an integer "
                                    "between 0 and " +
                                        std::to_string(max) +
                                        ", followed by 'RATIONALE: <one sentence>'."});
    }
    return result;
}

}  // namespace medkgeval
