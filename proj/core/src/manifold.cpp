#include "hyperwalker/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hyperwalker {

std::string to_string(Modality m) {
    switch (m) {
        case Modality::Ehr: return "ehr";
        case Modality::Image: return "image";
        case Modality::Report: return "report";
        case Modality::Knowledge: return "knowledge";
    }
    throw ContractViolation("invalid modality enum value");
}

Modality modality_from_string(const std::string& s) {
    if (s == "ehr") return Modality::Ehr;
    if (s == "image") return Modality::Image;
    if (s == "report") return Modality::Report;
    if (s == "knowledge") return Modality::Knowledge;
    throw DomainError("unknown modality: " + s);
}

double dot(const Vec& a, const Vec& b) {
    if (a.size() != b.size())
        throw ContractViolation("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

double norm(const Vec& v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

double cosine_similarity(const Vec& a, const Vec& b) {
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0) throw DegenerateVectorError("cosine_similarity: first operand is the zero vector");
    if (nb == 0.0) throw DegenerateVectorError("cosine_similarity: second operand is the zero vector");
    double s = dot(a, b) / (na * nb);
    return std::clamp(s, -1.0, 1.0);
}

double cosine_distance(const Vec& a, const Vec& b) {
    return 1.0 - cosine_similarity(a, b);
}

Vec l2_normalize(const Vec& v) {
    const double n = norm(v);
    if (n < 1e-6) throw DegenerateVectorError("l2_normalize: norm below 1e-6");
    Vec out(v.size());
    for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i] / n);
    return out;
}

bool is_unit(const Vec& v, double tol) {
    return std::abs(norm(v) - 1.0) <= tol;
}

namespace {

// Merge one connected component into its representative node.
ClinicalNode merge_component(const std::vector<ClinicalNode>& nodes,
                             const std::vector<size_t>& member_idx) {
    const size_t n = member_idx.size();
    if (n == 1) return nodes[member_idx[0]];

    // Weight each member by its mean similarity to the others, normalized to sum 1.
    std::vector<double> weights(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            acc += cosine_similarity(nodes[member_idx[i]].embedding, nodes[member_idx[j]].embedding);
        }
        weights[i] = acc / static_cast<double>(n - 1);
    }
    double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (wsum <= 0.0) {
        std::fill(weights.begin(), weights.end(), 1.0);
        wsum = static_cast<double>(n);
    }

    const size_t dim = nodes[member_idx[0]].embedding.size();
    std::vector<double> centroid(dim, 0.0);
    for (size_t i = 0; i < n; ++i) {
        const Vec& e = nodes[member_idx[i]].embedding;
        const double w = weights[i] / wsum;
        for (size_t d = 0; d < dim; ++d) centroid[d] += w * e[d];
    }
    Vec emb(dim);
    for (size_t d = 0; d < dim; ++d) emb[d] = static_cast<float>(centroid[d]);
    emb = l2_normalize(emb);

    size_t rep = member_idx[0];
    for (size_t i : member_idx)
        if (nodes[i].node_id < nodes[rep].node_id) rep = i;

    ClinicalNode out = nodes[rep];
    out.embedding = std::move(emb);
    for (size_t i : member_idx) {
        if (i == rep) continue;
        out.merged_from.push_back(nodes[i].node_id);
        // Absorbed nodes may themselves carry merge history.
        for (const auto& id : nodes[i].merged_from) out.merged_from.push_back(id);
    }
    for (const auto& id : nodes[rep].merged_from) out.merged_from.push_back(id);
    std::sort(out.merged_from.begin(), out.merged_from.end());
    return out;
}

// One transitive-merge pass. Returns true if anything merged.
bool prune_pass(std::vector<ClinicalNode>& nodes, double tau) {
    const size_t n = nodes.size();
    std::vector<size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };

    bool merged_any = false;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (cosine_similarity(nodes[i].embedding, nodes[j].embedding) > tau) {
                size_t a = find(i), b = find(j);
                if (a != b) {
                    parent[b] = a;
                    merged_any = true;
                }
            }
        }
    }
    if (!merged_any) return false;

    std::vector<std::vector<size_t>> components(n);
    for (size_t i = 0; i < n; ++i) components[find(i)].push_back(i);

    std::vector<ClinicalNode> out;
    for (const auto& comp : components)
        if (!comp.empty()) out.push_back(merge_component(nodes, comp));
    nodes = std::move(out);
    return true;
}

}  // namespace

std::vector<ClinicalNode> prune_study_nodes(const std::vector<ClinicalNode>& nodes,
                                            double tau_prune) {
    if (nodes.empty()) return {};
    if (tau_prune <= 0.0 || tau_prune >= 1.0)
        throw ContractViolation("tau_prune must lie in (0, 1)");
    const std::string& study = nodes.front().study_id;
    for (const auto& n : nodes)
        if (n.study_id != study)
            throw ContractViolation("prune_study_nodes: mixed study_ids (" + study + " vs " +
                                    n.study_id + ")");

    std::vector<ClinicalNode> work = nodes;
    // Merged centroids can re-exceed the threshold; repeat until stable.
    while (prune_pass(work, tau_prune)) {
    }
    std::sort(work.begin(), work.end(),
              [](const ClinicalNode& a, const ClinicalNode& b) { return a.node_id < b.node_id; });
    return work;
}

}  // namespace hyperwalker
