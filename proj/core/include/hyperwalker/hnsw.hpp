#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "hyperwalker/common.hpp"
#include "hyperwalker/manifold.hpp"

namespace hyperwalker {

struct HnswParams {
    uint32_t M = 16;                // max neighbors per node per upper layer
    uint32_t M0 = 32;               // base-layer max
    uint32_t ef_construction = 200;
    uint32_t ef_search = 64;
    double level_multiplier = 0.0;  // 0 means 1/ln(M)
    uint64_t seed = 0;

    double effective_multiplier() const;
};

struct SearchHit {
    std::string id;
    double distance;  // cosine distance, ascending
};

// Hierarchical navigable small world graph over cosine distance.
// Vectors are normalized on insert so distance is monotone with dot product.
// Single writer, multiple readers on a quiescent index.
class HnswIndex {
public:
    explicit HnswIndex(HnswParams params = {});

    void insert(const std::string& id, const Vec& v);
    std::vector<SearchHit> search(const Vec& q, size_t k, size_t ef = 0) const;

    size_t size() const { return ids_.size(); }
    bool contains(const std::string& id) const { return id_to_idx_.count(id) > 0; }
    const Vec& vector_of(const std::string& id) const;
    const HnswParams& params() const { return params_; }

    std::vector<uint8_t> save() const;
    static HnswIndex load(const std::vector<uint8_t>& bytes);

    // Structural audit: verifies degree bounds, layer nesting, entry point level.
    void audit() const;

private:
    struct NodeGraph {
        int max_level = 0;
        std::vector<std::vector<uint32_t>> neighbors;  // one list per level 0..max_level
    };

    double dist(const Vec& q, uint32_t idx) const;
    int draw_level();
    uint32_t greedy_descend(const Vec& q, uint32_t start, int from_level, int to_level) const;
    // ef-bounded best-first search within one layer; returns (distance, idx) ascending.
    std::vector<std::pair<double, uint32_t>> search_layer(const Vec& q, uint32_t entry, size_t ef,
                                                          int level) const;
    std::vector<std::pair<double, uint32_t>> search_layer_multi(
        const Vec& q, const std::vector<uint32_t>& entries, size_t ef, int level) const;
    std::vector<uint32_t> select_neighbors(const Vec& base,
                                           std::vector<std::pair<double, uint32_t>> candidates,
                                           size_t m, bool backfill = true) const;
    void shrink_neighbors(uint32_t idx, int level);

    HnswParams params_;
    Rng rng_;
    std::vector<std::string> ids_;
    std::vector<Vec> vectors_;
    std::vector<NodeGraph> graph_;
    std::unordered_map<std::string, uint32_t> id_to_idx_;
    uint32_t entry_point_ = 0;
    int max_level_ = -1;  // -1 when empty
};

}  // namespace hyperwalker
