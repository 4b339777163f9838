#include "medkgeval/rules.hpp"

#include <algorithm>

namespace medkgeval {

bool ConstraintRule::applies(const Triple& triple, const KnowledgeGraph& graph) const {
    const Entity& head = graph.at(triple.head);
    const Entity& tail = graph.at(triple.tail);
    if (form == PredicateForm::AttributeConflict) {
        auto hv = head.attributes.find(attribute);
        auto tv = tail.attributes.find(attribute);
        if (hv == head.attributes.end() || tv == tail.attributes.end()) return false;
        if (hv->second == neutral_value || tv->second == neutral_value) return false;
        return hv->second != tv->second;
    }
    if (triple.relation != *relation) return false;
    return head.kind == *head_kind && tail.kind == *tail_kind;
}

std::vector<ConstraintRule> load_rules(const std::filesystem::path& path,
                                       const KnowledgeGraph& graph) {
    std::vector<std::string> known_attrs = graph.attribute_keys();
    std::vector<ConstraintRule> rules;
    std::vector<std::string> seen_ids;
    for (const JsonlRecord& record : read_jsonl(path)) {
        const json& value = record.value;
        if (is_header_record(value)) continue;
        std::string where = path.string() + ":" + std::to_string(record.line);
        try {
            if (!value.is_object()) throw ParseError("rule must be an object");
            ConstraintRule rule;
            rule.id = value.at("id").get<std::string>();
            if (rule.id.empty()) throw ParseError("rule id must be non-empty");
            if (std::count(seen_ids.begin(), seen_ids.end(), rule.id)) {
                throw ParseError("duplicate rule id '" + rule.id + "'");
            }
            seen_ids.push_back(rule.id);
            rule.description = value.value("description", std::string());
            std::string form = value.at("predicate_form").get<std::string>();
            const json& params = value.contains("params") ? value["params"] : json::object();
            if (!params.is_object()) throw ParseError("rule 'params' must be an object");
            if (form == "attribute_conflict") {
                rule.form = PredicateForm::AttributeConflict;
                rule.attribute = params.at("attribute").get<std::string>();
                rule.neutral_value = params.value("neutral_value", std::string("any"));
                if (!std::count(known_attrs.begin(), known_attrs.end(), rule.attribute)) {
                    throw ParseError("rule '" + rule.id + "' references attribute '" +
                                     rule.attribute + "' that no graph entity carries");
                }
            } else if (form == "relation_prohibition") {
                rule.form = PredicateForm::RelationProhibition;
                rule.relation = parse_relation(params.at("relation").get<std::string>());
                rule.head_kind = parse_kind(params.at("head_kind").get<std::string>());
                rule.tail_kind = parse_kind(params.at("tail_kind").get<std::string>());
            } else {
                throw ParseError("unknown predicate_form '" + form + "'");
            }
            rules.push_back(std::move(rule));
        } catch (const json::exception& err) {
            throw ParseError(where + ": " + err.what());
        } catch (const ParseError& err) {
            throw ParseError(where + ": " + err.what());
        }
    }
    return rules;
}

FilterResult semantic_consistency_filter(const KnowledgeGraph& graph,
                                         const std::vector<ConstraintRule>& rules) {
    std::vector<Triple> kept;
    std::vector<RemovalRecord> removals;
    for (const Triple& triple : graph.triples()) {
        const ConstraintRule* fired = nullptr;
        for (const ConstraintRule& rule : rules) {
            if (rule.applies(triple, graph)) {
                fired = &rule;
                break;
            }
        }
        if (fired) {
            removals.push_back({triple, fired->id});
        } else {
            kept.push_back(triple);
        }
    }
    std::vector<Entity> entities;
    entities.reserve(graph.entity_count());
    for (const auto& [id, entity] : graph.entities()) entities.push_back(entity);
    FilterResult result;
    result.graph = KnowledgeGraph::from_records(std::move(entities), std::move(kept));
    result.removals = std::move(removals);
    return result;
}

void save_removal_log(const std::vector<RemovalRecord>& removals,
                      const std::filesystem::path& path, const json& header) {
    std::vector<json> records;
    records.reserve(removals.size() + 1);
    records.push_back(header);
    for (const RemovalRecord& removal : removals) {
        json row = triple_to_json(removal.triple);
        row["record"] = "removal";
        row["rule_id"] = removal.rule_id;
        records.push_back(std::move(row));
    }
    write_jsonl(path, records);
}

}  // namespace medkgeval
