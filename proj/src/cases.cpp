#include "medkgeval/cases.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace medkgeval {

namespace {

const std::vector<std::string> kStyles = {"anxious", "terse", "verbose"};
const std::vector<std::string> kHistoryPool = {
    "appendectomy at age twelve",
    "childhood asthma that resolved",
    "mild seasonal allergies",
    "occasional migraines",
};

int parse_age_attr(const Entity& entity, const std::string& key, const std::string& raw) {
    try {
        size_t used = 0;
        int value = std::stoi(raw, &used);
        if (used != raw.size()) throw std::invalid_argument(raw);
        return value;
    } catch (const std::exception&) {
        throw ValidationError("entity '" + entity.id + "' has non-integer " + key + " '" + raw +
                              "'");
    }
}

std::string padded_index(size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04zu", index);
    return buf;
}

std::vector<Fact> facts_for(const KnowledgeGraph& graph, const std::string& drug,
                            AttributeKind kind) {
    std::vector<std::string> ids;
    auto push_all = [&ids](std::span<const std::string> range) {
        ids.insert(ids.end(), range.begin(), range.end());
    };
    switch (kind) {
        case AttributeKind::Indication:
            push_all(graph.neighbors(drug, Relation::HasIndication));
            break;
        case AttributeKind::Contraindication:
            push_all(graph.neighbors(drug, Relation::HasContraindication));
            break;
        case AttributeKind::Precaution:
            push_all(graph.neighbors(drug, Relation::HasPrecaution));
            break;
        case AttributeKind::Interaction:
            push_all(graph.neighbors(drug, Relation::InteractsWith));
            push_all(graph.incoming(drug, Relation::InteractsWith));
            break;
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<Fact> facts;
    facts.reserve(ids.size());
    for (const std::string& id : ids) facts.push_back({id, graph.at(id).name});
    return facts;
}

constexpr std::array<std::pair<AttributeKind, std::string_view>, 4> kAttributeKinds = {{
    {AttributeKind::Indication, "indication"},
    {AttributeKind::Contraindication, "contraindication"},
    {AttributeKind::Precaution, "precaution"},
    {AttributeKind::Interaction, "interaction"},
}};

}  // namespace

std::string_view attribute_kind_name(AttributeKind kind) {
    for (const auto& [k, name] : kAttributeKinds) {
        if (k == kind) return name;
    }
    throw ValidationError("unknown attribute kind");
}

AttributeKind parse_attribute_kind(std::string_view token) {
    for (const auto& [k, name] : kAttributeKinds) {
        if (name == token) return k;
    }
    throw ParseError("unknown attribute kind '" + std::string(token) + "'");
}

json persona_to_json(const Persona& persona) {
    return json{{"age", persona.age},       {"sex", persona.sex},
                {"history", persona.history}, {"style", persona.style},
                {"language", persona.language}, {"seed", persona.seed}};
}

Persona persona_from_json(const json& value) {
    Persona persona;
    persona.age = value.at("age").get<int>();
    persona.sex = value.at("sex").get<std::string>();
    persona.history = value.at("history").get<std::vector<std::string>>();
    persona.style = value.at("style").get<std::string>();
    persona.language = value.at("language").get<std::string>();
    persona.seed = value.at("seed").get<uint64_t>();
    return persona;
}

uint64_t derive_case_seed(const std::string& case_id, uint64_t master_seed) {
    return fnv1a64(case_id) ^ master_seed;
}

CaseGenerator::CaseGenerator(const KnowledgeGraph& graph, CaseGenOptions options)
    : graph_(graph), options_(options) {
    if (options_.symptom_budget == 0) throw ConfigError("symptom budget must be positive");
    if (options_.schedule_chunk < 1 || options_.schedule_chunk > 2) {
        throw ConfigError("schedule chunk must be 1 or 2");
    }
}

std::vector<std::string> CaseGenerator::eligible_drugs(const std::string& language) const {
    std::vector<std::string> out;
    for (const std::string& id : graph_.ids_of_kind(EntityKind::Drug)) {
        if (!language.empty() && graph_.at(id).language != language) continue;
        bool populated = false;
        for (const auto& [kind, name] : kAttributeKinds) {
            if (!facts_for(graph_, id, kind).empty()) {
                populated = true;
                break;
            }
        }
        if (populated) out.push_back(id);
    }
    return out;
}

std::vector<std::string> CaseGenerator::eligible_diseases(const std::string& language) const {
    std::vector<std::string> out;
    for (const std::string& id : graph_.ids_of_kind(EntityKind::Disease)) {
        if (!language.empty() && graph_.at(id).language != language) continue;
        if (!graph_.neighbors(id, Relation::HasSymptom).empty()) out.push_back(id);
    }
    return out;
}

Persona CaseGenerator::generate_persona(const Subgraph& subgraph, uint64_t seed) const {
    DetRng rng(seed);
    std::set<std::string> allowed = {"female", "male"};
    int age_lo = 18;
    int age_hi = 80;
    for (const auto& [id, entity] : subgraph.graph.entities()) {
        auto sex = entity.attributes.find("sex_specific");
        if (sex != entity.attributes.end() && sex->second != "any") {
            std::set<std::string> constrained = {sex->second};
            std::set<std::string> next;
            std::set_intersection(allowed.begin(), allowed.end(), constrained.begin(),
                                  constrained.end(), std::inserter(next, next.begin()));
            allowed = std::move(next);
        }
        auto lo = entity.attributes.find("age_min");
        if (lo != entity.attributes.end()) {
            age_lo = std::max(age_lo, parse_age_attr(entity, "age_min", lo->second));
        }
        auto hi = entity.attributes.find("age_max");
        if (hi != entity.attributes.end()) {
            age_hi = std::min(age_hi, parse_age_attr(entity, "age_max", hi->second));
        }
    }
    if (allowed.empty()) {
        throw ValidationError("subgraph of '" + subgraph.focus +
                              "' admits no persona sex; check sex_specific attributes");
    }
    if (age_lo > age_hi) {
        throw ValidationError("subgraph of '" + subgraph.focus +
                              "' admits no persona age in [18, 80]");
    }
    std::vector<std::string> sexes(allowed.begin(), allowed.end());
    Persona persona;
    persona.sex = sexes[static_cast<size_t>(rng.below(sexes.size()))];
    persona.age = age_lo + static_cast<int>(rng.below(static_cast<uint64_t>(age_hi - age_lo) + 1));
    persona.style = kStyles[static_cast<size_t>(rng.below(kStyles.size()))];
    if (rng.below(10) >= 4) {
        persona.history.push_back(kHistoryPool[static_cast<size_t>(rng.below(kHistoryPool.size()))]);
    }
    persona.language = subgraph.graph.at(subgraph.focus).language;
    persona.seed = seed;
    return persona;
}

MedicationCase CaseGenerator::generate_medication_case(const std::string& drug, uint64_t seed,
                                                       const std::string& case_id) const {
    MedicationCase mcase;
    mcase.case_id = case_id.empty() ? "mc-" + drug : case_id;
    mcase.drug = drug;
    mcase.seed = seed;
    mcase.subgraph = extract_drug_subgraph(graph_, drug);
    mcase.language = graph_.at(drug).language;
    for (const auto& [kind, name] : kAttributeKinds) {
        std::vector<Fact> facts = facts_for(mcase.subgraph.graph, drug, kind);
        if (!facts.empty()) mcase.rounds.push_back({kind, std::move(facts)});
    }
    if (mcase.rounds.empty()) {
        throw ValidationError("drug '" + drug + "' has no populated attribute families");
    }
    mcase.persona = generate_persona(mcase.subgraph, seed);
    return mcase;
}

DiagnosisCase CaseGenerator::generate_diagnosis_case(const std::string& disease, uint64_t seed,
                                                     const std::string& case_id) const {
    DiagnosisCase dcase;
    dcase.case_id = case_id.empty() ? "dd-" + disease : case_id;
    dcase.disease = disease;
    dcase.seed = seed;
    dcase.subgraph = extract_disease_subgraph(graph_, disease);
    dcase.language = graph_.at(disease).language;
    dcase.reference_disease_name = graph_.at(disease).name;
    std::vector<std::string> symptoms =
        select_discriminative_symptoms(graph_, disease, options_.symptom_budget);
    size_t chunk = static_cast<size_t>(options_.schedule_chunk);
    for (size_t i = 0; i < symptoms.size(); i += chunk) {
        size_t end = std::min(i + chunk, symptoms.size());
        dcase.symptom_schedule.emplace_back(symptoms.begin() + static_cast<long>(i),
                                            symptoms.begin() + static_cast<long>(end));
    }
    dcase.max_turns = static_cast<int>(dcase.symptom_schedule.size()) + 3;
    dcase.persona = generate_persona(dcase.subgraph, seed);
    return dcase;
}

std::vector<MedicationCase> CaseGenerator::sample_medication_cases(
    size_t n, uint64_t master_seed, const std::string& language) const {
    std::vector<std::string> pool = eligible_drugs(language);
    if (n > pool.size()) {
        throw ConfigError("requested " + std::to_string(n) + " medication cases but only " +
                          std::to_string(pool.size()) + " drugs are eligible");
    }
    DetRng rng(master_seed);
    rng.shuffle(pool);
    std::vector<MedicationCase> cases;
    cases.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        std::string case_id = "mc-" + padded_index(i) + "-" + pool[i];
        cases.push_back(
            generate_medication_case(pool[i], derive_case_seed(case_id, master_seed), case_id));
    }
    return cases;
}

std::vector<DiagnosisCase> CaseGenerator::sample_diagnosis_cases(
    size_t n, uint64_t master_seed, const std::string& language) const {
    std::vector<std::string> pool = eligible_diseases(language);
    if (n > pool.size()) {
        throw ConfigError("requested " + std::to_string(n) + " diagnosis cases but only " +
                          std::to_string(pool.size()) + " diseases are eligible");
    }
    DetRng rng(master_seed);
    rng.shuffle(pool);
    std::vector<DiagnosisCase> cases;
    cases.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        std::string case_id = "dd-" + padded_index(i) + "-" + pool[i];
        cases.push_back(
            generate_diagnosis_case(pool[i], derive_case_seed(case_id, master_seed), case_id));
    }
    return cases;
}

json medication_case_to_json(const MedicationCase& mcase) {
    json rounds = json::array();
    for (const MedicationRound& round : mcase.rounds) {
        json facts = json::array();
        for (const Fact& fact : round.facts) facts.push_back({{"id", fact.id}, {"name", fact.name}});
        rounds.push_back({{"kind", std::string(attribute_kind_name(round.kind))}, {"facts", facts}});
    }
    return json{{"record", "case"},
                {"task", "mc"},
                {"case_id", mcase.case_id},
                {"drug", mcase.drug},
                {"language", mcase.language},
                {"persona", persona_to_json(mcase.persona)},
                {"rounds", rounds},
                {"subgraph", subgraph_to_json(mcase.subgraph)},
                {"seed", mcase.seed}};
}

json diagnosis_case_to_json(const DiagnosisCase& dcase) {
    return json{{"record", "case"},
                {"task", "dd"},
                {"case_id", dcase.case_id},
                {"disease", dcase.disease},
                {"language", dcase.language},
                {"persona", persona_to_json(dcase.persona)},
                {"symptom_schedule", dcase.symptom_schedule},
                {"max_turns", dcase.max_turns},
                {"reference_disease_name", dcase.reference_disease_name},
                {"subgraph", subgraph_to_json(dcase.subgraph)},
                {"seed", dcase.seed}};
}

MedicationCase medication_case_from_json(const json& value) {
    MedicationCase mcase;
    mcase.case_id = value.at("case_id").get<std::string>();
    mcase.drug = value.at("drug").get<std::string>();
    mcase.language = value.at("language").get<std::string>();
    mcase.persona = persona_from_json(value.at("persona"));
    for (const json& round : value.at("rounds")) {
        MedicationRound out;
        out.kind = parse_attribute_kind(round.at("kind").get<std::string>());
        for (const json& fact : round.at("facts")) {
            out.facts.push_back({fact.at("id").get<std::string>(),
                                 fact.at("name").get<std::string>()});
        }
        mcase.rounds.push_back(std::move(out));
    }
    mcase.subgraph = subgraph_from_json(value.at("subgraph"));
    mcase.seed = value.at("seed").get<uint64_t>();
    return mcase;
}

DiagnosisCase diagnosis_case_from_json(const json& value) {
    DiagnosisCase dcase;
    dcase.case_id = value.at("case_id").get<std::string>();
    dcase.disease = value.at("disease").get<std::string>();
    dcase.language = value.at("language").get<std::string>();
    dcase.persona = persona_from_json(value.at("persona"));
    dcase.symptom_schedule =
        value.at("symptom_schedule").get<std::vector<std::vector<std::string>>>();
    dcase.max_turns = value.at("max_turns").get<int>();
    dcase.reference_disease_name = value.at("reference_disease_name").get<std::string>();
    dcase.subgraph = subgraph_from_json(value.at("subgraph"));
    dcase.seed = value.at("seed").get<uint64_t>();
    return dcase;
}

void save_cases(const CaseFile& cases, const std::filesystem::path& path, const json& header) {
    std::vector<json> records;
    records.push_back(header);
    if (cases.task == "mc") {
        for (const MedicationCase& mcase : cases.medication) {
            records.push_back(medication_case_to_json(mcase));
        }
    } else if (cases.task == "dd") {
        for (const DiagnosisCase& dcase : cases.diagnosis) {
            records.push_back(diagnosis_case_to_json(dcase));
        }
    } else {
        throw ValidationError("unknown task '" + cases.task + "'");
    }
    write_jsonl(path, records);
}

CaseFile load_cases(const std::filesystem::path& path) {
    CaseFile cases;
    for (const JsonlRecord& record : read_jsonl(path)) {
        const json& value = record.value;
        if (is_header_record(value)) continue;
        std::string where = path.string() + ":" + std::to_string(record.line);
        try {
            std::string task = value.at("task").get<std::string>();
            if (cases.task.empty()) {
                if (task != "mc" && task != "dd") throw ParseError("unknown task '" + task + "'");
                cases.task = task;
            } else if (cases.task != task) {
                throw ParseError("mixed tasks in one case file");
            }
            if (task == "mc") {
                cases.medication.push_back(medication_case_from_json(value));
            } else {
                cases.diagnosis.push_back(diagnosis_case_from_json(value));
            }
        } catch (const json::exception& err) {
            throw ParseError(where + ": " + err.what());
        } catch (const ValidationError& err) {
            throw ParseError(where + ": " + err.what());
        } catch (const ParseError& err) {
            throw ParseError(where + ": " + err.what());
        }
    }
    if (cases.task.empty()) throw ParseError(path.string() + ": no case records");
    return cases;
}

}  // namespace medkgeval
