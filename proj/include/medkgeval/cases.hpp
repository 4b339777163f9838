#pragma once

#include <string>
#include <vector>

#include "medkgeval/graph.hpp"

namespace medkgeval {

struct Persona {
    int age = 0;
    std::string sex;                     // "male" | "female"
    std::vector<std::string> history;    // prior conditions, possibly empty
    std::string style;                   // "anxious" | "terse" | "verbose"
    std::string language = "en";
    uint64_t seed = 0;
};

json persona_to_json(const Persona& persona);
Persona persona_from_json(const json& value);

struct Fact {
    std::string id;
    std::string name;
    bool operator==(const Fact&) const = default;
};

// The four drug attribute families a consultation walks through, in the
// order the rounds are scheduled.
enum class AttributeKind {
    Indication,
    Contraindication,
    Precaution,
    Interaction,
};

std::string_view attribute_kind_name(AttributeKind kind);
AttributeKind parse_attribute_kind(std::string_view token);

struct MedicationRound {
    AttributeKind kind = AttributeKind::Indication;
    std::vector<Fact> facts;
};

struct MedicationCase {
    std::string case_id;
    std::string drug;
    std::string language;
    Persona persona;
    std::vector<MedicationRound> rounds;  // one per populated attribute kind
    Subgraph subgraph;
    uint64_t seed = 0;
};

struct DiagnosisCase {
    std::string case_id;
    std::string disease;
    std::string language;
    Persona persona;
    // Symptom ids in disclosure order, chunked per turn.
    std::vector<std::vector<std::string>> symptom_schedule;
    int max_turns = 0;
    std::string reference_disease_name;
    Subgraph subgraph;
    uint64_t seed = 0;
};

struct CaseGenOptions {
    size_t symptom_budget = 6;  // most discriminative symptoms kept
    int schedule_chunk = 2;     // symptoms revealed in the opening turn
};

uint64_t derive_case_seed(const std::string& case_id, uint64_t master_seed);

class CaseGenerator {
public:
    explicit CaseGenerator(const KnowledgeGraph& graph, CaseGenOptions options = {});

    // Drugs with at least one populated attribute family.
    std::vector<std::string> eligible_drugs(const std::string& language = "") const;
    // Diseases with at least one has_symptom edge.
    std::vector<std::string> eligible_diseases(const std::string& language = "") const;

    // Sampled against subgraph constraints (sex_specific, age bounds); the
    // same seed always yields the same persona.
    Persona generate_persona(const Subgraph& subgraph, uint64_t seed) const;

    MedicationCase generate_medication_case(const std::string& drug, uint64_t seed,
                                            const std::string& case_id = "") const;
    DiagnosisCase generate_diagnosis_case(const std::string& disease, uint64_t seed,
                                          const std::string& case_id = "") const;

    // Shuffles the eligible pool with master_seed, takes the first n and
    // derives per-case seeds from the case ids, so regeneration with a wider
    // n extends rather than reshuffles existing case content.
    std::vector<MedicationCase> sample_medication_cases(size_t n, uint64_t master_seed,
                                                        const std::string& language = "") const;
    std::vector<DiagnosisCase> sample_diagnosis_cases(size_t n, uint64_t master_seed,
                                                      const std::string& language = "") const;

private:
    const KnowledgeGraph& graph_;
    CaseGenOptions options_;
};

json medication_case_to_json(const MedicationCase& mcase);
json diagnosis_case_to_json(const DiagnosisCase& dcase);
MedicationCase medication_case_from_json(const json& value);
DiagnosisCase diagnosis_case_from_json(const json& value);

// A case file holds one task kind; "mc" or "dd".
struct CaseFile {
    std::string task;
    std::vector<MedicationCase> medication;
    std::vector<DiagnosisCase> diagnosis;

    size_t size() const { return task == "mc" ? medication.size() : diagnosis.size(); }
};

void save_cases(const CaseFile& cases, const std::filesystem::path& path, const json& header);
CaseFile load_cases(const std::filesystem::path& path);

}  // namespace medkgeval
