#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "medkgeval/cli.hpp"
#include "medkgeval/metrics.hpp"
#include "medkgeval/rules.hpp"

namespace py = pybind11;

namespace mk = medkgeval;

PYBIND11_MODULE(_core, m) {
    m.doc() = "Knowledge-graph-driven dialogue evaluation core";
    m.attr("__version__") = std::string(mk::kToolVersion);

    py::register_exception<mk::Error>(m, "Error");

    m.def(
        "run_cli",
        [](std::vector<std::string> args) {
            std::ostringstream out, err;
            int code = mk::cli_dispatch(std::move(args), out, err);
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"),
        "Dispatch a medkgeval command line; returns (exit_code, stdout, stderr).");

    m.def(
        "graph_stats",
        [](const std::string& path) {
            mk::KnowledgeGraph graph = mk::load_graph(path);
            mk::StatsReport stats = mk::graph_stats(graph);
            py::dict entities;
            for (const auto& [kind, count] : stats.entity_counts) {
                entities[py::str(std::string(mk::kind_name(kind)))] = count;
            }
            py::dict result;
            result["entities"] = entities;
            result["triples"] = stats.relation_count;
            return result;
        },
        py::arg("graph_path"));

    m.def(
        "filter_graph",
        [](const std::string& graph_path, const std::string& rules_path) {
            mk::KnowledgeGraph graph = mk::load_graph(graph_path);
            std::vector<mk::ConstraintRule> rules = mk::load_rules(rules_path, graph);
            mk::FilterResult result = mk::semantic_consistency_filter(graph, rules);
            py::list removed;
            for (const mk::RemovalRecord& removal : result.removals) {
                py::dict row;
                row["head"] = removal.triple.head;
                row["relation"] = std::string(mk::relation_name(removal.triple.relation));
                row["tail"] = removal.triple.tail;
                row["rule_id"] = removal.rule_id;
                removed.append(row);
            }
            py::dict out;
            out["kept_triples"] = result.graph.triples().size();
            out["removed"] = removed;
            return out;
        },
        py::arg("graph_path"), py::arg("rules_path"));

    m.def(
        "discriminative_symptoms",
        [](const std::string& graph_path, const std::string& disease, size_t k) {
            mk::KnowledgeGraph graph = mk::load_graph(graph_path);
            return mk::select_discriminative_symptoms(graph, disease, k);
        },
        py::arg("graph_path"), py::arg("disease"), py::arg("k"));

    m.def("normalize_score", &mk::normalize_score, py::arg("raw"), py::arg("max"));

    m.def(
        "cosine_similarity",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            return mk::cosine_similarity(a, b);
        },
        py::arg("a"), py::arg("b"));

    m.def(
        "consistency",
        [](std::map<std::string, std::vector<std::string>> groups, size_t dim) {
            mk::ConsistencyInput input;
            input.groups = std::move(groups);
            mk::HashProjectionEmbedder embedder(dim);
            mk::ConsistencyReport report = mk::consistency_score(input, embedder);
            py::dict out;
            out["cons"] = report.cons;
            out["percent"] = report.percent;
            out["groups"] = report.groups;
            out["pairs"] = report.pairs;
            return out;
        },
        py::arg("groups"), py::arg("dim") = 64,
        "Mean over conditions of mean pairwise query cosine similarity.");

    m.def("derive_case_seed", &mk::derive_case_seed, py::arg("case_id"), py::arg("master_seed"));

    m.def(
        "message_digest",
        [](const std::vector<std::pair<std::string, std::string>>& messages) {
            std::vector<mk::ChatMessage> converted;
            converted.reserve(messages.size());
            for (const auto& [role, content] : messages) {
                converted.push_back(mk::ChatMessage{role, content});
            }
            return mk::message_digest(converted);
        },
        py::arg("messages"), "Digest of (role, content) pairs, as scripted backends key it.");
}
