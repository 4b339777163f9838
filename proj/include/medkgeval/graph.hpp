#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "medkgeval/common.hpp"

namespace medkgeval {

enum class EntityKind {
    Drug,
    Disease,
    Symptom,
    Indication,
    Complication,
    AdverseReaction,
    Precaution,
};

enum class Relation {
    HasSymptom,
    HasIndication,
    HasContraindication,
    HasPrecaution,
    HasAdverseReaction,
    HasComplication,
    InteractsWith,
};

std::string_view kind_name(EntityKind kind);
std::string_view relation_name(Relation relation);
EntityKind parse_kind(std::string_view token);       // throws ParseError
Relation parse_relation(std::string_view token);     // throws ParseError
std::span<const EntityKind> all_kinds();
std::span<const Relation> all_relations();

struct Entity {
    std::string id;
    std::string name;
    EntityKind kind = EntityKind::Disease;
    std::map<std::string, std::string> attributes;
    std::vector<std::string> aliases;
    std::string language = "en";  // "zh" or "en"
};

struct Triple {
    std::string head;
    Relation relation = Relation::HasSymptom;
    std::string tail;
    double confidence = 1.0;
    std::string source;
};

json entity_to_json(const Entity& entity);
json triple_to_json(const Triple& triple);
Entity entity_from_json(const json& value);  // throws ParseError
Triple triple_from_json(const json& value);

// Immutable once constructed. Entities are held sorted by id and triples
// sorted by (head, relation, tail), so serialization order, iteration order
// and every downstream sample are reproducible.
class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    // Validates ids, kinds, attribute values and triple endpoints, dedups,
    // then freezes the adjacency index. Conflicting duplicate confidences
    // keep the maximum and append a note to `warnings` when given.
    static KnowledgeGraph from_records(std::vector<Entity> entities,
                                       std::vector<Triple> triples,
                                       std::vector<std::string>* warnings = nullptr);

    const std::map<std::string, Entity>& entities() const { return entities_; }
    const std::vector<Triple>& triples() const { return triples_; }

    const Entity* find(const std::string& id) const;
    const Entity& at(const std::string& id) const;  // throws ValidationError

    size_t entity_count() const { return entities_.size(); }
    size_t triple_count() const { return triples_.size(); }

    // Tails of (head, relation, *), ascending by id; empty span if none.
    std::span<const std::string> neighbors(const std::string& head, Relation relation) const;

    // Heads of (*, relation, tail), ascending by id.
    std::span<const std::string> incoming(const std::string& tail, Relation relation) const;

    std::vector<std::string> ids_of_kind(EntityKind kind) const;

    // Every attribute key observed on any entity; rule validation runs
    // against this set.
    std::vector<std::string> attribute_keys() const;

private:
    std::map<std::string, Entity> entities_;
    std::vector<Triple> triples_;
    std::map<std::pair<std::string, Relation>, std::vector<std::string>> forward_;
    std::map<std::pair<std::string, Relation>, std::vector<std::string>> reverse_;
};

KnowledgeGraph load_graph(const std::filesystem::path& path,
                          std::vector<std::string>* warnings = nullptr);
void save_graph(const KnowledgeGraph& graph, const std::filesystem::path& path,
                const json& header);

struct StatsReport {
    std::map<EntityKind, size_t> entity_counts;  // all kinds, zeros included
    size_t relation_count = 0;
};

StatsReport graph_stats(const KnowledgeGraph& graph);
json stats_to_json(const StatsReport& stats);

// Symptoms of `disease` ranked by specificity 1/df, where df counts diseases
// linked to the symptom via has_symptom. Ties break on ascending symptom id.
// Returns at most k ids; throws ValidationError on unknown disease, no
// symptoms, or k == 0.
std::vector<std::string> select_discriminative_symptoms(const KnowledgeGraph& graph,
                                                        const std::string& disease,
                                                        size_t k);

// One-hop case neighborhood around a focus entity, closed over the entities
// its triples reference.
struct Subgraph {
    std::string focus;
    KnowledgeGraph graph;
};

// Disease view: outgoing has_symptom / has_complication plus incoming
// has_indication (drugs indicated for the disease).
Subgraph extract_disease_subgraph(const KnowledgeGraph& graph, const std::string& disease);

// Drug view: outgoing has_indication / has_contraindication / has_precaution /
// has_adverse_reaction / interacts_with plus incoming interacts_with.
Subgraph extract_drug_subgraph(const KnowledgeGraph& graph, const std::string& drug);

json subgraph_to_json(const Subgraph& subgraph);
Subgraph subgraph_from_json(const json& value);

}  // namespace medkgeval
