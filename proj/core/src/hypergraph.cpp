#include "hyperwalker/hypergraph.hpp"

#include <algorithm>
#include <deque>
#include <limits>

namespace hyperwalker {

std::string to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::IdBased: return "id";
        case EdgeKind::SimilarityBased: return "similarity";
        case EdgeKind::ReportBased: return "report";
        case EdgeKind::DiseaseBased: return "disease";
    }
    throw ContractViolation("invalid edge kind");
}

EdgeKind edge_kind_from_string(const std::string& s) {
    if (s == "id") return EdgeKind::IdBased;
    if (s == "similarity") return EdgeKind::SimilarityBased;
    if (s == "report") return EdgeKind::ReportBased;
    if (s == "disease") return EdgeKind::DiseaseBased;
    throw DomainError("unknown edge kind: " + s);
}

HypergraphStore::HypergraphStore(double tau_sim, HnswParams index_params)
    : tau_sim_(tau_sim), index_params_(index_params), index_(index_params) {}

void HypergraphStore::load_nodes(const std::vector<ClinicalNode>& nodes, double tau_prune) {
    std::map<std::string, std::vector<ClinicalNode>> by_study;
    for (const auto& n : nodes) by_study[n.study_id].push_back(n);

    nodes_.clear();
    edges_.clear();
    node_to_edges_.clear();
    index_ = HnswIndex(index_params_);
    next_edge_ = 0;

    for (auto& [study, group] : by_study) {
        for (auto& n : prune_study_nodes(group, tau_prune)) {
            if (nodes_.count(n.node_id))
                throw DomainError("duplicate node_id across studies: " + n.node_id);
            n.embedding = l2_normalize(n.embedding);
            nodes_.emplace(n.node_id, std::move(n));
        }
    }
    for (const auto& [id, n] : nodes_) index_.insert(id, n.embedding);
}

void HypergraphStore::load_prebuilt(const std::vector<ClinicalNode>& nodes, HnswIndex index) {
    nodes_.clear();
    edges_.clear();
    node_to_edges_.clear();
    next_edge_ = 0;
    for (const auto& n : nodes) {
        if (!index.contains(n.node_id))
            throw DomainError("load_prebuilt: node missing from index: " + n.node_id);
        nodes_.emplace(n.node_id, n);
    }
    index_ = std::move(index);
}

void HypergraphStore::add_edge(Hyperedge e) {
    for (const auto& m : e.members) node(m);  // members must exist
    // Keep next_edge_ ahead of any numeric edge id we are handed.
    if (e.edge_id.size() > 1 && e.edge_id[0] == 'e') {
        try {
            next_edge_ = std::max(next_edge_, std::stoul(e.edge_id.substr(1)) + 1);
        } catch (const std::exception&) {
        }
    }
    register_edge(std::move(e));
}

const ClinicalNode& HypergraphStore::node(const std::string& id) const {
    auto it = nodes_.find(id);
    if (it == nodes_.end()) throw NotFoundError("unknown node: " + id);
    return it->second;
}

const std::vector<std::string>& HypergraphStore::edges_of(const std::string& node_id) const {
    static const std::vector<std::string> empty;
    auto it = node_to_edges_.find(node_id);
    return it == node_to_edges_.end() ? empty : it->second;
}

void HypergraphStore::register_edge(Hyperedge e) {
    std::sort(e.members.begin(), e.members.end());
    for (const auto& m : e.members) node_to_edges_[m].push_back(e.edge_id);
    edges_.emplace(e.edge_id, std::move(e));
}

size_t HypergraphStore::induce_id_edges() {
    std::map<std::string, std::vector<std::string>> by_study;
    for (const auto& [id, n] : nodes_) by_study[n.study_id].push_back(id);
    size_t created = 0;
    for (const auto& [study, ids] : by_study) {
        if (ids.size() < 2) continue;
        Hyperedge e;
        e.edge_id = "e" + std::to_string(next_edge_++);
        e.kind = EdgeKind::IdBased;
        e.seed_node = ids.front();
        e.members = ids;
        for (const auto& m : ids) e.weights[m] = 1.0;
        register_edge(std::move(e));
        ++created;
    }
    return created;
}

std::vector<std::string> HypergraphStore::threshold_neighbors(const std::string& seed_id) const {
    const Vec& z = node(seed_id).embedding;
    const double max_dist = 1.0 - tau_sim_;
    size_t ef = index_params_.ef_search;
    while (true) {
        auto hits = index_.search(z, ef, ef);
        const bool covered = hits.size() < ef || hits.back().distance > max_dist;
        if (covered || ef >= index_.size()) {
            std::vector<std::string> out;
            // Loose prefilter; the caller applies the exact strict threshold.
            for (const auto& h : hits)
                if (h.id != seed_id && h.distance < max_dist + 1e-6) out.push_back(h.id);
            return out;
        }
        ef *= 2;
    }
}

std::optional<Hyperedge> HypergraphStore::induce_threshold_edge(const std::string& seed_id,
                                                                EdgeKind kind) {
    const ClinicalNode& seed = node(seed_id);
    Hyperedge e;
    e.kind = kind;
    e.seed_node = seed_id;
    e.members.push_back(seed_id);
    e.weights[seed_id] = 1.0;
    for (const auto& cand_id : threshold_neighbors(seed_id)) {
        const ClinicalNode& cand = node(cand_id);
        if (kind == EdgeKind::SimilarityBased) {
            if (cand.modality != Modality::Ehr && cand.modality != Modality::Image) continue;
        } else {
            if (cand.modality != Modality::Report) continue;
        }
        // Exact recheck of the strict threshold; the index is approximate.
        const double s = cosine_similarity(seed.embedding, cand.embedding);
        if (s > tau_sim_) {
            e.members.push_back(cand_id);
            e.weights[cand_id] = s;
        }
    }
    if (e.members.size() < 2) return std::nullopt;
    e.edge_id = "e" + std::to_string(next_edge_++);
    register_edge(e);
    return e;
}

std::optional<Hyperedge> HypergraphStore::induce_similarity_edge(const std::string& node_id) {
    node(node_id);  // not-found check
    return induce_threshold_edge(node_id, EdgeKind::SimilarityBased);
}

std::optional<Hyperedge> HypergraphStore::induce_report_edge(const std::string& report_node_id) {
    if (node(report_node_id).modality != Modality::Report)
        throw ContractViolation("induce_report_edge: node is not a report: " + report_node_id);
    return induce_threshold_edge(report_node_id, EdgeKind::ReportBased);
}

Hyperedge HypergraphStore::induce_disease_edge(const std::string& report_node_id) {
    const ClinicalNode& report = node(report_node_id);
    if (report.modality != Modality::Report)
        throw ContractViolation("induce_disease_edge: node is not a report: " + report_node_id);

    // Always created, no threshold: argmax over knowledge nodes, smallest id on ties.
    std::string best_id;
    double best_s = -std::numeric_limits<double>::infinity();
    for (const auto& [id, n] : nodes_) {
        if (n.modality != Modality::Knowledge) continue;
        const double s = cosine_similarity(report.embedding, n.embedding);
        if (s > best_s) {
            best_s = s;
            best_id = id;
        }
    }
    if (best_id.empty()) throw DomainError("induce_disease_edge: no knowledge nodes in store");

    Hyperedge e;
    e.edge_id = "e" + std::to_string(next_edge_++);
    e.kind = EdgeKind::DiseaseBased;
    e.seed_node = report_node_id;
    e.members = {report_node_id, best_id};
    e.weights[report_node_id] = 1.0;
    e.weights[best_id] = best_s;
    register_edge(e);
    return e;
}

void HypergraphStore::induce_all_edges() {
    induce_id_edges();
    bool have_kb = false;
    for (const auto& [id, n] : nodes_)
        if (n.modality == Modality::Knowledge) have_kb = true;
    for (const auto& [id, n] : nodes_) {
        if (n.modality == Modality::Ehr || n.modality == Modality::Image)
            induce_similarity_edge(id);
        if (n.modality == Modality::Report) {
            induce_report_edge(id);
            if (have_kb) induce_disease_edge(id);
        }
    }
}

std::vector<std::pair<std::string, int>> HypergraphStore::expand_neighborhood(
    const std::string& node_id, int depth) const {
    if (depth < 1) throw ContractViolation("expand_neighborhood: depth must be >= 1");
    node(node_id);

    std::map<std::string, int> reached;
    std::deque<std::pair<std::string, int>> frontier{{node_id, 0}};
    std::set<std::string> visited{node_id};
    while (!frontier.empty()) {
        auto [cur, d] = frontier.front();
        frontier.pop_front();
        if (d >= depth) continue;
        for (const auto& eid : edges_of(cur)) {
            for (const auto& m : edges_.at(eid).members) {
                if (visited.count(m)) continue;
                visited.insert(m);
                reached[m] = d + 1;
                frontier.emplace_back(m, d + 1);
            }
        }
    }
    return {reached.begin(), reached.end()};
}

void HypergraphStore::audit_incidence() const {
    for (const auto& [eid, e] : edges_) {
        if (e.members.empty()) throw DomainError("audit: empty hyperedge " + eid);
        if (std::find(e.members.begin(), e.members.end(), e.seed_node) == e.members.end())
            throw DomainError("audit: seed not a member of " + eid);
        for (const auto& m : e.members) {
            const auto& incident = edges_of(m);
            if (std::find(incident.begin(), incident.end(), eid) == incident.end())
                throw DomainError("audit: incidence map missing " + eid + " for " + m);
        }
    }
    for (const auto& [nid, eids] : node_to_edges_) {
        for (const auto& eid : eids) {
            const auto& e = edges_.at(eid);
            if (std::find(e.members.begin(), e.members.end(), nid) == e.members.end())
                throw DomainError("audit: stale incidence entry " + eid + " for " + nid);
        }
    }
}

}  // namespace hyperwalker
