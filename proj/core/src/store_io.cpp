#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "hyperwalker/hypergraph.hpp"
#include "hyperwalker/io.hpp"

namespace hyperwalker {

using nlohmann::json;
namespace fs = std::filesystem;

std::string edge_to_json(const Hyperedge& e) {
    json j;
    j["edge_id"] = e.edge_id;
    j["kind"] = to_string(e.kind);
    j["seed"] = e.seed_node;
    j["members"] = e.members;
    json weights = json::array();
    for (const auto& m : e.members) weights.push_back(e.weights.at(m));
    j["weights"] = weights;
    return j.dump();
}

Hyperedge edge_from_json(const std::string& text) {
    json j = json::parse(text);
    Hyperedge e;
    e.edge_id = j.at("edge_id").get<std::string>();
    e.kind = edge_kind_from_string(j.at("kind").get<std::string>());
    e.seed_node = j.at("seed").get<std::string>();
    e.members = j.at("members").get<std::vector<std::string>>();
    auto weights = j.at("weights").get<std::vector<double>>();
    if (weights.size() != e.members.size())
        throw DomainError("edge weights/members length mismatch for " + e.edge_id);
    for (size_t i = 0; i < e.members.size(); ++i) e.weights[e.members[i]] = weights[i];
    return e;
}

void save_store(const HypergraphStore& store, const std::string& dir) {
    fs::create_directories(dir);

    {
        std::ofstream f(fs::path(dir) / "nodes.jsonl", std::ios::trunc);
        if (!f) throw DomainError("cannot write nodes.jsonl under " + dir);
        for (const auto& [id, n] : store.nodes()) {
            json j;
            j["node_id"] = n.node_id;
            j["subject_id"] = n.subject_id;
            j["study_id"] = n.study_id;
            j["modality"] = to_string(n.modality);
            j["embedding"] = n.embedding;
            if (!n.merged_from.empty()) j["merged_from"] = n.merged_from;
            f << j.dump() << '\n';
        }
    }
    {
        std::ofstream f(fs::path(dir) / "edges.jsonl", std::ios::trunc);
        if (!f) throw DomainError("cannot write edges.jsonl under " + dir);
        for (const auto& [id, e] : store.edges()) f << edge_to_json(e) << '\n';
    }
    write_file((fs::path(dir) / "index.bin").string(), store.index().save());
    {
        json meta;
        meta["tau_sim"] = store.tau_sim();
        meta["nodes"] = store.nodes().size();
        meta["edges"] = store.edges().size();
        std::ofstream f(fs::path(dir) / "meta.json", std::ios::trunc);
        f << meta.dump(2) << '\n';
    }
}

HypergraphStore load_store(const std::string& dir) {
    const fs::path base(dir);
    if (!fs::exists(base / "meta.json")) throw DomainError("not a store directory: " + dir);
    json meta;
    {
        std::ifstream f(base / "meta.json");
        f >> meta;
    }
    HnswIndex index = HnswIndex::load(read_file((base / "index.bin").string()));

    std::vector<ClinicalNode> nodes;
    {
        std::ifstream f(base / "nodes.jsonl");
        if (!f) throw DomainError("missing nodes.jsonl under " + dir);
        std::string line;
        while (std::getline(f, line)) {
            if (line.empty()) continue;
            json j = json::parse(line);
            ClinicalNode n;
            n.node_id = j.at("node_id").get<std::string>();
            n.subject_id = j.at("subject_id").get<std::string>();
            n.study_id = j.at("study_id").get<std::string>();
            n.modality = modality_from_string(j.at("modality").get<std::string>());
            n.embedding = j.at("embedding").get<Vec>();
            if (j.contains("merged_from"))
                n.merged_from = j.at("merged_from").get<std::vector<std::string>>();
            nodes.push_back(std::move(n));
        }
    }

    HypergraphStore store(meta.value("tau_sim", 0.8), index.params());
    store.load_prebuilt(nodes, std::move(index));
    {
        std::ifstream f(base / "edges.jsonl");
        if (f) {
            std::string line;
            while (std::getline(f, line)) {
                if (line.empty()) continue;
                store.add_edge(edge_from_json(line));
            }
        }
    }
    store.audit_incidence();
    return store;
}

}  // namespace hyperwalker
