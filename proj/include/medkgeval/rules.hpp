#pragma once

#include <optional>
#include <string>
#include <vector>

#include "medkgeval/graph.hpp"

namespace medkgeval {

enum class PredicateForm {
    // Fires when head and tail both carry `attribute`, neither equals the
    // neutral value, and the two values differ (e.g. a male-only disease
    // listed as a complication of a female-only one).
    AttributeConflict,
    // Fires on a (head kind, relation, tail kind) combination that is never
    // clinically meaningful.
    RelationProhibition,
};

struct ConstraintRule {
    std::string id;
    std::string description;
    PredicateForm form = PredicateForm::AttributeConflict;

    // AttributeConflict parameters.
    std::string attribute;
    std::string neutral_value = "any";

    // RelationProhibition parameters.
    std::optional<Relation> relation;
    std::optional<EntityKind> head_kind;
    std::optional<EntityKind> tail_kind;

    bool applies(const Triple& triple, const KnowledgeGraph& graph) const;
};

// Parses a JSONL rules file and validates it against the graph: unknown
// predicate forms, missing params and attribute names the graph never uses
// are all rejected here rather than at filter time.
std::vector<ConstraintRule> load_rules(const std::filesystem::path& path,
                                       const KnowledgeGraph& graph);

struct RemovalRecord {
    Triple triple;
    std::string rule_id;  // first rule in file order that fired
};

struct FilterResult {
    KnowledgeGraph graph;
    std::vector<RemovalRecord> removals;
};

// Keeps every triple no rule fires on; entities are always retained.
FilterResult semantic_consistency_filter(const KnowledgeGraph& graph,
                                         const std::vector<ConstraintRule>& rules);

void save_removal_log(const std::vector<RemovalRecord>& removals,
                      const std::filesystem::path& path, const json& header);

}  // namespace medkgeval
