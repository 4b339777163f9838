#include "medkgeval/graph.hpp"

#include <algorithm>
#include <array>
#include <set>

namespace medkgeval {

namespace {

constexpr std::array<std::pair<EntityKind, std::string_view>, 7> kKindNames = {{
    {EntityKind::Drug, "Drug"},
    {EntityKind::Disease, "Disease"},
    {EntityKind::Symptom, "Symptom"},
    {EntityKind::Indication, "Indication"},
    {EntityKind::Complication, "Complication"},
    {EntityKind::AdverseReaction, "AdverseReaction"},
    {EntityKind::Precaution, "Precaution"},
}};

constexpr std::array<std::pair<Relation, std::string_view>, 7> kRelationNames = {{
    {Relation::HasSymptom, "has_symptom"},
    {Relation::HasIndication, "has_indication"},
    {Relation::HasContraindication, "has_contraindication"},
    {Relation::HasPrecaution, "has_precaution"},
    {Relation::HasAdverseReaction, "has_adverse_reaction"},
    {Relation::HasComplication, "has_complication"},
    {Relation::InteractsWith, "interacts_with"},
}};

const std::array<EntityKind, 7> kAllKinds = {
    EntityKind::Drug,           EntityKind::Disease,     EntityKind::Symptom,
    EntityKind::Indication,     EntityKind::Complication, EntityKind::AdverseReaction,
    EntityKind::Precaution,
};

const std::array<Relation, 7> kAllRelations = {
    Relation::HasSymptom,        Relation::HasIndication, Relation::HasContraindication,
    Relation::HasPrecaution,     Relation::HasAdverseReaction,
    Relation::HasComplication,   Relation::InteractsWith,
};

bool triple_key_less(const Triple& a, const Triple& b) {
    if (a.head != b.head) return a.head < b.head;
    if (a.relation != b.relation) return static_cast<int>(a.relation) < static_cast<int>(b.relation);
    return a.tail < b.tail;
}

std::string require_string(const json& value, const char* field) {
    if (!value.contains(field) || !value[field].is_string()) {
        throw ParseError(std::string("missing or non-string field '") + field + "'");
    }
    return value[field].get<std::string>();
}

}  // namespace

std::string_view kind_name(EntityKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    throw ValidationError("unknown entity kind");
}

std::string_view relation_name(Relation relation) {
    for (const auto& [r, name] : kRelationNames) {
        if (r == relation) return name;
    }
    throw ValidationError("unknown relation");
}

EntityKind parse_kind(std::string_view token) {
    for (const auto& [k, name] : kKindNames) {
        if (name == token) return k;
    }
    throw ParseError("unknown entity kind '" + std::string(token) + "'");
}

Relation parse_relation(std::string_view token) {
    for (const auto& [r, name] : kRelationNames) {
        if (name == token) return r;
    }
    throw ParseError("unknown relation '" + std::string(token) + "'");
}

std::span<const EntityKind> all_kinds() { return kAllKinds; }
std::span<const Relation> all_relations() { return kAllRelations; }

json entity_to_json(const Entity& entity) {
    json out{{"record", "entity"},
             {"id", entity.id},
             {"name", entity.name},
             {"kind", std::string(kind_name(entity.kind))},
             {"language", entity.language}};
    if (!entity.attributes.empty()) out["attributes"] = entity.attributes;
    if (!entity.aliases.empty()) out["aliases"] = entity.aliases;
    return out;
}

json triple_to_json(const Triple& triple) {
    json out{{"record", "triple"},
             {"head", triple.head},
             {"relation", std::string(relation_name(triple.relation))},
             {"tail", triple.tail},
             {"confidence", triple.confidence}};
    if (!triple.source.empty()) out["source"] = triple.source;
    return out;
}

Entity entity_from_json(const json& value) {
    Entity entity;
    entity.id = require_string(value, "id");
    entity.name = require_string(value, "name");
    entity.kind = parse_kind(require_string(value, "kind"));
    if (value.contains("language")) {
        entity.language = require_string(value, "language");
    }
    if (value.contains("attributes")) {
        const json& attrs = value["attributes"];
        if (!attrs.is_object()) throw ParseError("entity 'attributes' must be an object");
        for (const auto& [key, item] : attrs.items()) {
            if (!item.is_string()) throw ParseError("attribute '" + key + "' must be a string");
            entity.attributes[key] = item.get<std::string>();
        }
    }
    if (value.contains("aliases")) {
        const json& aliases = value["aliases"];
        if (!aliases.is_array()) throw ParseError("entity 'aliases' must be an array");
        for (const json& alias : aliases) {
            if (!alias.is_string()) throw ParseError("alias entries must be strings");
            entity.aliases.push_back(alias.get<std::string>());
        }
    }
    return entity;
}

Triple triple_from_json(const json& value) {
    Triple triple;
    triple.head = require_string(value, "head");
    triple.relation = parse_relation(require_string(value, "relation"));
    triple.tail = require_string(value, "tail");
    if (value.contains("confidence")) {
        if (!value["confidence"].is_number()) throw ParseError("'confidence' must be a number");
        triple.confidence = value["confidence"].get<double>();
    }
    if (value.contains("source")) triple.source = require_string(value, "source");
    return triple;
}

KnowledgeGraph KnowledgeGraph::from_records(std::vector<Entity> entities,
                                            std::vector<Triple> triples,
                                            std::vector<std::string>* warnings) {
    KnowledgeGraph graph;
    for (Entity& entity : entities) {
        if (entity.id.empty()) throw ValidationError("entity with empty id");
        if (entity.name.empty()) throw ValidationError("entity '" + entity.id + "' has empty name");
        if (entity.language != "en" && entity.language != "zh") {
            throw ValidationError("entity '" + entity.id + "' has unsupported language '" +
                                  entity.language + "'");
        }
        auto sex = entity.attributes.find("sex_specific");
        if (sex != entity.attributes.end() && sex->second != "male" && sex->second != "female" &&
            sex->second != "any") {
            throw ValidationError("entity '" + entity.id + "' has invalid sex_specific value '" +
                                  sex->second + "'");
        }
        std::sort(entity.aliases.begin(), entity.aliases.end());
        entity.aliases.erase(std::unique(entity.aliases.begin(), entity.aliases.end()),
                             entity.aliases.end());
        auto [it, inserted] = graph.entities_.emplace(entity.id, entity);
        if (!inserted) {
            const Entity& prev = it->second;
            bool identical = prev.name == entity.name && prev.kind == entity.kind &&
                             prev.attributes == entity.attributes &&
                             prev.aliases == entity.aliases && prev.language == entity.language;
            if (!identical) {
                throw ValidationError("duplicate entity id '" + entity.id +
                                      "' with conflicting fields");
            }
        }
    }

    std::map<std::tuple<std::string, Relation, std::string>, Triple> unique;
    for (const Triple& triple : triples) {
        if (!graph.entities_.count(triple.head)) {
            throw ValidationError("triple references unknown head '" + triple.head + "'");
        }
        if (!graph.entities_.count(triple.tail)) {
            throw ValidationError("triple references unknown tail '" + triple.tail + "'");
        }
        if (!(triple.confidence >= 0.0 && triple.confidence <= 1.0)) {
            throw ValidationError("triple (" + triple.head + ", " +
                                  std::string(relation_name(triple.relation)) + ", " + triple.tail +
                                  ") has confidence outside [0, 1]");
        }
        auto key = std::make_tuple(triple.head, triple.relation, triple.tail);
        auto [it, inserted] = unique.emplace(key, triple);
        if (!inserted && it->second.confidence != triple.confidence) {
            if (warnings) {
                warnings->push_back("duplicate triple (" + triple.head + ", " +
                                    std::string(relation_name(triple.relation)) + ", " +
                                    triple.tail + ") with conflicting confidence; keeping maximum");
            }
            it->second.confidence = std::max(it->second.confidence, triple.confidence);
        }
    }

    graph.triples_.reserve(unique.size());
    for (auto& [key, triple] : unique) graph.triples_.push_back(std::move(triple));
    std::sort(graph.triples_.begin(), graph.triples_.end(), triple_key_less);

    for (const Triple& triple : graph.triples_) {
        graph.forward_[{triple.head, triple.relation}].push_back(triple.tail);
        graph.reverse_[{triple.tail, triple.relation}].push_back(triple.head);
    }
    for (auto& [key, heads] : graph.reverse_) std::sort(heads.begin(), heads.end());
    return graph;
}

const Entity* KnowledgeGraph::find(const std::string& id) const {
    auto it = entities_.find(id);
    return it == entities_.end() ? nullptr : &it->second;
}

const Entity& KnowledgeGraph::at(const std::string& id) const {
    const Entity* entity = find(id);
    if (!entity) throw ValidationError("unknown entity id '" + id + "'");
    return *entity;
}

std::span<const std::string> KnowledgeGraph::neighbors(const std::string& head,
                                                       Relation relation) const {
    auto it = forward_.find({head, relation});
    if (it == forward_.end()) return {};
    return it->second;
}

std::span<const std::string> KnowledgeGraph::incoming(const std::string& tail,
                                                      Relation relation) const {
    auto it = reverse_.find({tail, relation});
    if (it == reverse_.end()) return {};
    return it->second;
}

std::vector<std::string> KnowledgeGraph::ids_of_kind(EntityKind kind) const {
    std::vector<std::string> out;
    for (const auto& [id, entity] : entities_) {
        if (entity.kind == kind) out.push_back(id);
    }
    return out;
}

std::vector<std::string> KnowledgeGraph::attribute_keys() const {
    std::set<std::string> keys;
    for (const auto& [id, entity] : entities_) {
        for (const auto& [key, value] : entity.attributes) keys.insert(key);
    }
    return {keys.begin(), keys.end()};
}

KnowledgeGraph load_graph(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::vector<Entity> entities;
    std::vector<Triple> triples;
    for (const JsonlRecord& record : read_jsonl(path)) {
        const json& value = record.value;
        if (is_header_record(value)) continue;
        std::string where = path.string() + ":" + std::to_string(record.line);
        if (!value.is_object() || !value.contains("record") || !value["record"].is_string()) {
            throw ParseError(where + ": expected an object with a 'record' field");
        }
        std::string kind = value["record"].get<std::string>();
        try {
            if (kind == "entity") {
                entities.push_back(entity_from_json(value));
            } else if (kind == "triple") {
                triples.push_back(triple_from_json(value));
            } else {
                throw ParseError("unknown record type '" + kind + "'");
            }
        } catch (const ParseError& err) {
            throw ParseError(where + ": " + err.what());
        }
    }
    try {
        return KnowledgeGraph::from_records(std::move(entities), std::move(triples), warnings);
    } catch (const ValidationError& err) {
        throw ParseError(path.string() + ": " + err.what());
    }
}

void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path,
                const json& header) {
    std::vector<json> records;
    records.reserve(1 + graph.entity_count() + graph.triple_count());
    records.push_back(header);
    for (const auto& [id, entity] : graph.entities()) records.push_back(entity_to_json(entity));
    for (const Triple& triple : graph.triples()) records.push_back(triple_to_json(triple));
    write_jsonl(path, records);
}

StatsReport graph_stats(const KnowledgeGraph& graph) {
    StatsReport stats;
    for (EntityKind kind : all_kinds()) stats.entity_counts[kind] = 0;
    for (const auto& [id, entity] : graph.entities()) ++stats.entity_counts[entity.kind];
    stats.relation_count = graph.triple_count();
    return stats;
}

json stats_to_json(const StatsReport& stats) {
    json counts = json::object();
    for (const auto& [kind, count] : stats.entity_counts) {
        counts[std::string(kind_name(kind))] = count;
    }
    return json{{"entities", counts}, {"relations", stats.relation_count}};
}

std::vector<std::string> select_discriminative_symptoms(const KnowledgeGraph& graph,
                                                        const std::string& disease,
                                                        size_t k) {
    if (k == 0) throw ValidationError("symptom budget must be positive");
    const Entity& entity = graph.at(disease);
    if (entity.kind != EntityKind::Disease) {
        throw ValidationError("entity '" + disease + "' is not a Disease");
    }
    auto symptoms = graph.neighbors(disease, Relation::HasSymptom);
    if (symptoms.empty()) {
        throw ValidationError("disease '" + disease + "' has no has_symptom edges");
    }
    std::vector<std::pair<size_t, std::string>> ranked;
    ranked.reserve(symptoms.size());
    for (const std::string& symptom : symptoms) {
        size_t df = graph.incoming(symptom, Relation::HasSymptom).size();
        ranked.emplace_back(df, symptom);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::string> out;
    for (const auto& [df, id] : ranked) {
        if (out.size() == k) break;
        out.push_back(id);
    }
    return out;
}

namespace {

Subgraph build_subgraph(const KnowledgeGraph& graph, const std::string& focus,
                        const std::vector<Triple>& kept) {
    std::set<std::string> ids{focus};
    for (const Triple& triple : kept) {
        ids.insert(triple.head);
        ids.insert(triple.tail);
    }
    std::vector<Entity> entities;
    entities.reserve(ids.size());
    for (const std::string& id : ids) entities.push_back(graph.at(id));
    Subgraph out;
    out.focus = focus;
    out.graph = KnowledgeGraph::from_records(std::move(entities), kept);
    return out;
}

}  // namespace

Subgraph extract_disease_subgraph(const KnowledgeGraph& graph, const std::string& disease) {
    const Entity& entity = graph.at(disease);
    if (entity.kind != EntityKind::Disease) {
        throw ValidationError("entity '" + disease + "' is not a Disease");
    }
    std::vector<Triple> kept;
    for (const Triple& triple : graph.triples()) {
        bool outgoing = triple.head == disease && (triple.relation == Relation::HasSymptom ||
                                                   triple.relation == Relation::HasComplication);
        bool incoming = triple.tail == disease && triple.relation == Relation::HasIndication;
        if (outgoing || incoming) kept.push_back(triple);
    }
    return build_subgraph(graph, disease, kept);
}

Subgraph extract_drug_subgraph(const KnowledgeGraph& graph, const std::string& drug) {
    const Entity& entity = graph.at(drug);
    if (entity.kind != EntityKind::Drug) {
        throw ValidationError("entity '" + drug + "' is not a Drug");
    }
    std::vector<Triple> kept;
    for (const Triple& triple : graph.triples()) {
        bool outgoing = triple.head == drug && (triple.relation == Relation::HasIndication ||
                                                triple.relation == Relation::HasContraindication ||
                                                triple.relation == Relation::HasPrecaution ||
                                                triple.relation == Relation::HasAdverseReaction ||
                                                triple.relation == Relation::InteractsWith);
        bool incoming = triple.tail == drug && triple.relation == Relation::InteractsWith;
        if (outgoing || incoming) kept.push_back(triple);
    }
    return build_subgraph(graph, drug, kept);
}

json subgraph_to_json(const Subgraph& subgraph) {
    json entities = json::array();
    for (const auto& [id, entity] : subgraph.graph.entities()) {
        entities.push_back(entity_to_json(entity));
    }
    json triples = json::array();
    for (const Triple& triple : subgraph.graph.triples()) {
        triples.push_back(triple_to_json(triple));
    }
    return json{{"focus", subgraph.focus}, {"entities", entities}, {"triples", triples}};
}

Subgraph subgraph_from_json(const json& value) {
    Subgraph out;
    out.focus = value.at("focus").get<std::string>();
    std::vector<Entity> entities;
    for (const json& item : value.at("entities")) entities.push_back(entity_from_json(item));
    std::vector<Triple> triples;
    for (const json& item : value.at("triples")) triples.push_back(triple_from_json(item));
    out.graph = KnowledgeGraph::from_records(std::move(entities), std::move(triples));
    return out;
}

}  // namespace medkgeval
