#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "hyperwalker/hnsw.hpp"
#include "hyperwalker/manifold.hpp"

namespace hyperwalker {

enum class EdgeKind { IdBased, SimilarityBased, ReportBased, DiseaseBased };

std::string to_string(EdgeKind k);
EdgeKind edge_kind_from_string(const std::string& s);

struct Hyperedge {
    std::string edge_id;
    EdgeKind kind = EdgeKind::IdBased;
    std::string seed_node;
    std::vector<std::string> members;          // sorted, includes seed
    std::map<std::string, double> weights;     // incidence strengths
};

// Nodes, induced hyperedges, incidence map, and the HNSW index over the
// pruned manifold. Build phase is exclusive; reads are concurrent after.
class HypergraphStore {
public:
    explicit HypergraphStore(double tau_sim = 0.8, HnswParams index_params = {});

    // Prunes per study (tau_prune) and indexes the survivors.
    void load_nodes(const std::vector<ClinicalNode>& nodes, double tau_prune = 0.9);

    // Restores a persisted store: nodes already pruned, index already built,
    // edges re-attached via add_edge.
    void load_prebuilt(const std::vector<ClinicalNode>& nodes, HnswIndex index);
    void add_edge(Hyperedge e);

    size_t induce_id_edges();
    std::optional<Hyperedge> induce_similarity_edge(const std::string& node_id);
    std::optional<Hyperedge> induce_report_edge(const std::string& report_node_id);
    Hyperedge induce_disease_edge(const std::string& report_node_id);
    // Runs all four inductions over every applicable node.
    void induce_all_edges();

    // BFS over the node-hyperedge bipartite graph; crossing one hyperedge is
    // one depth unit. Excludes the start node.
    std::vector<std::pair<std::string, int>> expand_neighborhood(const std::string& node_id,
                                                                 int depth) const;

    const ClinicalNode& node(const std::string& id) const;
    bool has_node(const std::string& id) const { return nodes_.count(id) > 0; }
    const std::map<std::string, ClinicalNode>& nodes() const { return nodes_; }
    const std::map<std::string, Hyperedge>& edges() const { return edges_; }
    const std::vector<std::string>& edges_of(const std::string& node_id) const;
    const HnswIndex& index() const { return index_; }
    HnswIndex& index() { return index_; }
    double tau_sim() const { return tau_sim_; }

    // Verifies the node_to_edges map is the exact inverse of edge membership.
    void audit_incidence() const;

private:
    // ANN threshold-ball retrieval: double ef until the farthest hit clears
    // the threshold distance or ef covers the whole index, then exact-filter.
    std::vector<std::string> threshold_neighbors(const std::string& seed_id) const;
    std::optional<Hyperedge> induce_threshold_edge(const std::string& seed_id, EdgeKind kind);
    void register_edge(Hyperedge e);

    double tau_sim_;
    HnswParams index_params_;
    std::map<std::string, ClinicalNode> nodes_;
    std::map<std::string, Hyperedge> edges_;
    std::unordered_map<std::string, std::vector<std::string>> node_to_edges_;
    HnswIndex index_;
    size_t next_edge_ = 0;
};

// Directory layout: nodes.jsonl, index.bin, edges.jsonl, meta.json.
void save_store(const HypergraphStore& store, const std::string& dir);
HypergraphStore load_store(const std::string& dir);

std::string edge_to_json(const Hyperedge& e);
Hyperedge edge_from_json(const std::string& text);

}  // namespace hyperwalker
