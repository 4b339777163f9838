#include <doctest.h>

#include <filesystem>
#include <set>

#include "medkgeval/agents.hpp"

using namespace medkgeval;

namespace {

const std::filesystem::path kSource = std::filesystem::path(MEDKGEVAL_SOURCE_DIR);

// Returns queued replies in order and keeps every request for inspection.
class QueueBackend : public ChatBackend {
public:
    explicit QueueBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}

    std::string complete(std::span<const ChatMessage> messages) override {
        validate_messages(messages);
        requests.emplace_back(messages.begin(), messages.end());
        if (index_ >= replies_.size()) throw BackendError("queue exhausted");
        return replies_[index_++];
    }
    std::string name() const override { return "queue"; }

    std::vector<std::vector<ChatMessage>> requests;

private:
    std::vector<std::string> replies_;
    size_t index_ = 0;
};

Entity ent(std::string id, EntityKind kind) {
    Entity entity;
    entity.id = id;
    entity.name = id + " name";
    entity.kind = kind;
    return entity;
}

Triple tri(std::string head, Relation relation, std::string tail) {
    Triple triple;
    triple.head = std::move(head);
    triple.relation = relation;
    triple.tail = std::move(tail);
    return triple;
}

KnowledgeGraph five_symptom_graph() {
    return KnowledgeGraph::from_records(
        {ent("dz-a", EntityKind::Disease), ent("sy-1", EntityKind::Symptom),
         ent("sy-2", EntityKind::Symptom), ent("sy-3", EntityKind::Symptom),
         ent("sy-4", EntityKind::Symptom), ent("sy-5", EntityKind::Symptom)},
        {tri("dz-a", Relation::HasSymptom, "sy-1"), tri("dz-a", Relation::HasSymptom, "sy-2"),
         tri("dz-a", Relation::HasSymptom, "sy-3"), tri("dz-a", Relation::HasSymptom, "sy-4"),
         tri("dz-a", Relation::HasSymptom, "sy-5")});
}

void push_patient(DialogueTranscript& transcript, const DirectorDecision& decision,
                  const std::string& text) {
    TranscriptTurn turn;
    turn.speaker = Speaker::Patient;
    turn.text = text;
    turn.decision = decision;
    transcript.turns.push_back(std::move(turn));
}

void push_doctor(DialogueTranscript& transcript, const std::string& text) {
    TranscriptTurn turn;
    turn.speaker = Speaker::Doctor;
    turn.text = text;
    transcript.turns.push_back(std::move(turn));
    transcript.turn_count = transcript.doctor_turns();
}

}  // namespace

TEST_CASE("canned guidance is deterministic and drawn from a small pool") {
    Fact fact{"sy-1", "headache"};
    CHECK(canned_guidance("dd-0001-x", fact) == canned_guidance("dd-0001-x", fact));
    std::set<std::string> seen;
    for (int i = 0; i < 16; ++i) {
        seen.insert(canned_guidance("dd-" + std::to_string(i), fact));
    }
    CHECK(seen.size() > 1);
    CHECK(seen.size() <= 4);
}

TEST_CASE("question mark detection covers ascii and full-width forms") {
    CHECK(has_question_mark("any fever?"));
    CHECK(has_question_mark("发烧吗？"));
    CHECK(has_question_mark("mixed? 是"));
    CHECK_FALSE(has_question_mark("no question here."));
    CHECK_FALSE(has_question_mark(""));
}

TEST_CASE("diagnosis claims are parsed from marker lines") {
    CHECK(detect_diagnosis_claim("FINAL DIAGNOSIS: influenza") == "influenza");
    CHECK(detect_diagnosis_claim("final diagnosis: gout.") == "gout");
    CHECK(detect_diagnosis_claim("Final Diagnosis:   tension headache , ") == "tension headache");
    CHECK(detect_diagnosis_claim("I think this is it.\nFINAL DIAGNOSIS: mono\nTake rest.") ==
          "mono");
    CHECK(detect_diagnosis_claim("FINAL DIAGNOSIS： 流感。") == "流感");
    CHECK(detect_diagnosis_claim("FINAL DIAGNOSIS:") == std::nullopt);
    CHECK(detect_diagnosis_claim("we will reach a final diagnosis soon") == std::nullopt);
    CHECK(detect_diagnosis_claim("no commitment at all") == std::nullopt);
    // The first marker lacks a colon; the scan keeps going.
    CHECK(detect_diagnosis_claim("final diagnosis pending\nFINAL DIAGNOSIS: strep throat!") ==
          "strep throat");
}

TEST_CASE("the claim classifier backend is a fallback only") {
    QueueBackend claims({"CLAIM: migraine"});
    CHECK(detect_diagnosis_claim("it is most likely your migraines acting up", &claims) ==
          "migraine");
    REQUIRE(claims.requests.size() == 1);
    CHECK(claims.requests[0][0].role == "system");

    QueueBackend no_claim({"NO_CLAIM"});
    CHECK(detect_diagnosis_claim("could be several things", &no_claim) == std::nullopt);

    // A marker line wins without consulting the classifier.
    QueueBackend untouched({"CLAIM: wrong"});
    CHECK(detect_diagnosis_claim("FINAL DIAGNOSIS: anemia", &untouched) == "anemia");
    CHECK(untouched.requests.empty());

    // Classifier failures mean no claim, not an abort.
    QueueBackend broken({});
    CHECK(detect_diagnosis_claim("hard to say", &broken) == std::nullopt);
}

TEST_CASE("medication director walks the rounds in order then terminates") {
    KnowledgeGraph demo = load_graph(kSource / "data/demo_graph.jsonl");
    CaseGenerator gen(demo);
    MedicationCase mcase = gen.generate_medication_case("r-warfarin", 3, "mc-0000-r-warfarin");
    REQUIRE(mcase.rounds.size() == 2);

    DialogueTranscript transcript;
    transcript.case_id = mcase.case_id;
    transcript.task = "mc";

    DirectorDecision first = director_next(mcase, transcript);
    CHECK(first.action == DirectorAction::RevealAttribute);
    CHECK(first.round_kind == AttributeKind::Precaution);
    CHECK(first.turn_index == 1);
    CHECK(first.facts.size() == mcase.rounds[0].facts.size());

    push_patient(transcript, first, "What should I watch for?");
    push_doctor(transcript, "Watch for bleeding.");

    DirectorDecision second = director_next(mcase, transcript);
    CHECK(second.action == DirectorAction::RevealAttribute);
    CHECK(second.round_kind == AttributeKind::Interaction);
    CHECK(second.turn_index == 2);

    push_patient(transcript, second, "I also take ibuprofen and amoxicillin.");
    push_doctor(transcript, "Those interact; be careful.");

    CHECK(director_next(mcase, transcript).action == DirectorAction::Terminate);
}

TEST_CASE("diagnosis director discloses, answers queries, then requests a diagnosis") {
    KnowledgeGraph graph = five_symptom_graph();
    CaseGenerator gen(graph);
    DiagnosisCase dcase = gen.generate_diagnosis_case("dz-a", 3, "dd-0000-dz-a");
    REQUIRE(dcase.symptom_schedule.size() == 3);

    DialogueTranscript transcript;
    transcript.case_id = dcase.case_id;
    transcript.task = "dd";

    DirectorDecision opening = director_next(dcase, transcript);
    CHECK(opening.action == DirectorAction::DiscloseSymptoms);
    REQUIRE(opening.facts.size() == 2);
    CHECK(opening.facts[0].id == "sy-1");
    CHECK(opening.facts[1].id == "sy-2");
    CHECK_FALSE(opening.guidance.empty());

    push_patient(transcript, opening, "I have sy-1 name and sy-2 name.");
    push_doctor(transcript, "Do you also have sy-4 name?");

    // The doctor asked about a pending scheduled symptom by name.
    DirectorDecision answer = director_next(dcase, transcript);
    CHECK(answer.action == DirectorAction::AnswerDoctorQuery);
    REQUIRE(answer.facts.size() == 1);
    CHECK(answer.facts[0].id == "sy-4");

    push_patient(transcript, answer, "Yes, sy-4 name too.");
    push_doctor(transcript, "Do you have sy-1 name still?");

    // Questions about already revealed symptoms fall back to the schedule.
    DirectorDecision disclose = director_next(dcase, transcript);
    CHECK(disclose.action == DirectorAction::DiscloseSymptoms);
    REQUIRE(disclose.facts.size() == 1);
    CHECK(disclose.facts[0].id == "sy-3");

    push_patient(transcript, disclose, "Also sy-3 name.");
    push_doctor(transcript, "Noted.");

    DirectorDecision tail = director_next(dcase, transcript);
    CHECK(tail.action == DirectorAction::DiscloseSymptoms);
    REQUIRE(tail.facts.size() == 1);
    CHECK(tail.facts[0].id == "sy-5");

    push_patient(transcript, tail, "And sy-5 name.");
    push_doctor(transcript, "Let me think.");

    // Schedule exhausted: push for a conclusion, exactly once.
    DirectorDecision request = director_next(dcase, transcript);
    CHECK(request.action == DirectorAction::RequestDiagnosis);
    push_patient(transcript, request, "So what is it, doctor?");
    push_doctor(transcript, "FINAL DIAGNOSIS: dz-a name");

    CHECK(director_next(dcase, transcript).action == DirectorAction::Terminate);
}

TEST_CASE("diagnosis director terminates on a claim or the turn cap") {
    KnowledgeGraph graph = five_symptom_graph();
    CaseGenerator gen(graph);
    DiagnosisCase dcase = gen.generate_diagnosis_case("dz-a", 3);

    DialogueTranscript claimed;
    claimed.final_diagnosis = "dz-a name";
    CHECK(director_next(dcase, claimed).action == DirectorAction::Terminate);

    DiagnosisCase capped = dcase;
    capped.max_turns = 1;
    DialogueTranscript at_cap;
    push_patient(at_cap, director_next(capped, at_cap), "I have sy-1 name and sy-2 name.");
    push_doctor(at_cap, "Tell me more.");
    CHECK(director_next(capped, at_cap).action == DirectorAction::Terminate);
}

TEST_CASE("dialogue rendering") {
    DialogueTranscript transcript;
    CHECK(render_dialogue(transcript) == "(the conversation has not started)");

    DirectorDecision decision;
    decision.action = DirectorAction::DiscloseSymptoms;
    push_patient(transcript, decision, "I feel awful.");
    push_doctor(transcript, "Since when?");
    CHECK(render_dialogue(transcript) == "patient: I feel awful.\ndoctor: Since when?");
}

TEST_CASE("patient agent regenerates once and then flags drift") {
    PromptLibrary prompts = PromptLibrary::load(kSource / "prompts");
    KnowledgeGraph demo = load_graph(kSource / "data/demo_graph.jsonl");
    CaseGenerator gen(demo);
    MedicationCase mcase =
        gen.generate_medication_case("r-omeprazole", 3, "mc-0000-r-omeprazole");

    DialogueTranscript transcript;
    transcript.case_id = mcase.case_id;
    transcript.task = "mc";
    DirectorDecision decision = director_next(mcase, transcript);
    REQUIRE(decision.round_kind == AttributeKind::Indication);

    // A reply that never names the facts fails the post-check twice.
    auto vague = std::make_shared<ScriptedChatBackend>("vague", false, "I just feel off.");
    PatientAgent vague_patient(vague, prompts);
    PatientUtterance drifted = vague_patient.utter(mcase.persona, decision, transcript,
                                                   mcase.subgraph);
    CHECK(drifted.drifted);
    CHECK(drifted.text == "I just feel off.");

    // Naming an alias of the decision fact satisfies the post-check.
    auto alias = std::make_shared<ScriptedChatBackend>(
        "alias", false, "Will this help my acid reflux?");
    PatientAgent alias_patient(alias, prompts);
    PatientUtterance ok = alias_patient.utter(mcase.persona, decision, transcript, mcase.subgraph);
    CHECK_FALSE(ok.drifted);

    CHECK_THROWS_AS(PatientAgent(nullptr, prompts), ConfigError);
    DirectorDecision terminate;
    terminate.action = DirectorAction::Terminate;
    CHECK_THROWS_AS(alias_patient.utter(mcase.persona, terminate, transcript, mcase.subgraph),
                    ValidationError);
}

TEST_CASE("patient regeneration hardens the instruction") {
    PromptLibrary prompts = PromptLibrary::load(kSource / "prompts");
    KnowledgeGraph graph = five_symptom_graph();
    CaseGenerator gen(graph);
    DiagnosisCase dcase = gen.generate_diagnosis_case("dz-a", 3, "dd-0000-dz-a");

    DialogueTranscript transcript;
    transcript.case_id = dcase.case_id;
    transcript.task = "dd";
    DirectorDecision decision = director_next(dcase, transcript);

    auto queue = std::make_shared<QueueBackend>(
        std::vector<std::string>{"something vague", "I have sy-1 name and sy-2 name."});
    PatientAgent patient(queue, prompts);
    PatientUtterance out = patient.utter(dcase.persona, decision, transcript, dcase.subgraph);
    CHECK_FALSE(out.drifted);
    CHECK(out.text == "I have sy-1 name and sy-2 name.");
    REQUIRE(queue->requests.size() == 2);
    std::string second_user = queue->requests[1].back().content;
    CHECK(second_user.find("You must name every one of these facts exactly") !=
          std::string::npos);
    CHECK(second_user.find("sy-1 name") != std::string::npos);
}

TEST_CASE("doctor agent replays the dialogue as alternating chat turns") {
    PromptLibrary prompts = PromptLibrary::load(kSource / "prompts");
    auto queue = std::make_shared<QueueBackend>(std::vector<std::string>{"How long?"});
    DoctorAgent doctor(queue, prompts);

    DialogueTranscript transcript;
    CHECK_THROWS_AS(doctor.respond("dd", transcript), ValidationError);

    DirectorDecision decision;
    decision.action = DirectorAction::DiscloseSymptoms;
    push_patient(transcript, decision, "I have a headache.");
    push_doctor(transcript, "Any nausea?");
    CHECK_THROWS_AS(doctor.respond("dd", transcript), ValidationError);

    push_patient(transcript, decision, "No nausea.");
    CHECK(doctor.respond("dd", transcript) == "How long?");
    REQUIRE(queue->requests.size() == 1);
    const auto& messages = queue->requests[0];
    REQUIRE(messages.size() == 4);
    CHECK(messages[0].role == "system");
    CHECK(messages[0].content == prompts.get("doctor_system_dd").text());
    CHECK(messages[1] == ChatMessage{"user", "I have a headache."});
    CHECK(messages[2] == ChatMessage{"assistant", "Any nausea?"});
    CHECK(messages[3] == ChatMessage{"user", "No nausea."});
}

TEST_CASE("judge parses scores, reprompts once, then reports an invalid reply") {
    PromptLibrary prompts = PromptLibrary::load(kSource / "prompts");
    DialogueTranscript transcript;
    DirectorDecision decision;
    decision.action = DirectorAction::DiscloseSymptoms;
    push_patient(transcript, decision, "I have a fever.");
    push_doctor(transcript, "Sounds viral.");

    auto clean = std::make_shared<QueueBackend>(
        std::vector<std::string>{"SCORE: 2\nRATIONALE: covered the key features"});
    JudgeResult good = JudgeAgent(clean, prompts).score(Metric::HistoryTaking, {"influenza"},
                                                        transcript, 1);
    REQUIRE(good.score.has_value());
    CHECK(good.score->raw == 2);
    CHECK(good.score->max == 2);
    CHECK(good.score->normalized == 1.0);
    CHECK(good.score->turn_index == 1);
    CHECK(good.score->rationale == "covered the key features");
    REQUIRE(clean->requests.size() == 1);
    std::string prompt_text = clean->requests[0].back().content;
    CHECK(prompt_text.find("history_taking") != std::string::npos);
    CHECK(prompt_text.find("influenza") != std::string::npos);
    CHECK(prompt_text.find("doctor: Sounds viral.") != std::string::npos);

    auto recovers = std::make_shared<QueueBackend>(
        std::vector<std::string>{"I would rate this highly.", "SCORE: 1\nRATIONALE: partial"});
    JudgeResult retried = JudgeAgent(recovers, prompts).score(Metric::HistoryTaking, {}, transcript, 1);
    REQUIRE(retried.score.has_value());
    CHECK(retried.score->raw == 1);
    REQUIRE(recovers->requests.size() == 2);
    CHECK(recovers->requests[1].back().content.find("SCORE: <n>") != std::string::npos);

    // Out-of-range scores count as parse failures.
    auto hopeless = std::make_shared<QueueBackend>(
        std::vector<std::string>{"SCORE: 9", "SCORE: -1"});
    JudgeResult invalid = JudgeAgent(hopeless, prompts).score(Metric::HistoryTaking, {}, transcript, 1);
    CHECK_FALSE(invalid.score.has_value());
    CHECK(invalid.raw_response == "SCORE: -1");

    // DiseaseCorrectness accepts its wider range.
    auto top = std::make_shared<QueueBackend>(std::vector<std::string>{"SCORE: 3"});
    JudgeResult disease = JudgeAgent(top, prompts).score(Metric::DiseaseCorrectness, {"flu"},
                                                         transcript, 2);
    REQUIRE(disease.score.has_value());
    CHECK(disease.score->raw == 3);
    CHECK(disease.score->normalized == 1.0);
}
