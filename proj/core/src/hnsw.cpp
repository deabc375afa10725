#include "hyperwalker/hnsw.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

#include "hyperwalker/io.hpp"

namespace hyperwalker {

namespace {
constexpr char kMagic[4] = {'H', 'W', 'I', 'X'};
constexpr uint32_t kVersion = 1;
}  // namespace

double HnswParams::effective_multiplier() const {
    return level_multiplier > 0.0 ? level_multiplier : 1.0 / std::log(static_cast<double>(M));
}

HnswIndex::HnswIndex(HnswParams params) : params_(params), rng_(params.seed) {
    if (params_.M < 2 || params_.M0 < 2) throw ContractViolation("HNSW M parameters must be >= 2");
}

double HnswIndex::dist(const Vec& q, uint32_t idx) const {
    // Stored vectors are unit; q must be too.
    return 1.0 - dot(q, vectors_[idx]);
}

int HnswIndex::draw_level() {
    double u = uniform01(rng_);
    return static_cast<int>(-std::log(u) * params_.effective_multiplier());
}

uint32_t HnswIndex::greedy_descend(const Vec& q, uint32_t start, int from_level,
                                   int to_level) const {
    uint32_t cur = start;
    double cur_d = dist(q, cur);
    for (int level = from_level; level > to_level; --level) {
        bool improved = true;
        while (improved) {
            improved = false;
            for (uint32_t nb : graph_[cur].neighbors[level]) {
                double d = dist(q, nb);
                if (d < cur_d) {
                    cur = nb;
                    cur_d = d;
                    improved = true;
                }
            }
        }
    }
    return cur;
}

std::vector<std::pair<double, uint32_t>> HnswIndex::search_layer(const Vec& q, uint32_t entry,
                                                                 size_t ef, int level) const {
    return search_layer_multi(q, {entry}, ef, level);
}

std::vector<std::pair<double, uint32_t>> HnswIndex::search_layer_multi(
    const Vec& q, const std::vector<uint32_t>& entries, size_t ef, int level) const {
    using Item = std::pair<double, uint32_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> candidates;  // closest first
    std::priority_queue<Item> results;                                        // farthest first
    std::vector<bool> visited(ids_.size(), false);

    for (uint32_t entry : entries) {
        if (visited[entry]) continue;
        double d0 = dist(q, entry);
        candidates.emplace(d0, entry);
        results.emplace(d0, entry);
        visited[entry] = true;
    }
    while (results.size() > ef) results.pop();

    while (!candidates.empty()) {
        auto [d, idx] = candidates.top();
        if (d > results.top().first && results.size() >= ef) break;
        candidates.pop();
        for (uint32_t nb : graph_[idx].neighbors[level]) {
            if (visited[nb]) continue;
            visited[nb] = true;
            double dn = dist(q, nb);
            if (results.size() < ef || dn < results.top().first) {
                candidates.emplace(dn, nb);
                results.emplace(dn, nb);
                if (results.size() > ef) results.pop();
            }
        }
    }

    std::vector<Item> out;
    out.reserve(results.size());
    while (!results.empty()) {
        out.push_back(results.top());
        results.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
}

std::vector<uint32_t> HnswIndex::select_neighbors(const Vec& base,
                                                  std::vector<std::pair<double, uint32_t>> candidates,
                                                  size_t m, bool backfill) const {
    std::sort(candidates.begin(), candidates.end());
    std::vector<uint32_t> selected;
    std::vector<std::pair<double, uint32_t>> discarded;
    // Diversity heuristic: keep a candidate only if it is closer to the base
    // than to every already-selected neighbor.
    for (const auto& [d, idx] : candidates) {
        if (selected.size() >= m) break;
        bool keep = true;
        for (uint32_t s : selected) {
            if (1.0 - dot(vectors_[idx], vectors_[s]) < d) {
                keep = false;
                break;
            }
        }
        if (keep)
            selected.push_back(idx);
        else
            discarded.emplace_back(d, idx);
    }
    // Backfill with nearest discarded so sparse regions stay connected.
    if (backfill) {
        for (const auto& [d, idx] : discarded) {
            if (selected.size() >= m) break;
            selected.push_back(idx);
        }
    }
    return selected;
}

void HnswIndex::shrink_neighbors(uint32_t idx, int level) {
    const size_t cap = level == 0 ? params_.M0 : params_.M;
    auto& nbs = graph_[idx].neighbors[level];
    if (nbs.size() <= cap) return;
    std::vector<std::pair<double, uint32_t>> cands;
    cands.reserve(nbs.size());
    for (uint32_t nb : nbs) cands.emplace_back(1.0 - dot(vectors_[idx], vectors_[nb]), nb);
    // Pure heuristic here: overflow shrink keeps only diverse links so hub
    // nodes do not fill up with near-duplicates.
    nbs = select_neighbors(vectors_[idx], std::move(cands), cap, false);
}

void HnswIndex::insert(const std::string& id, const Vec& v) {
    if (contains(id)) throw DomainError("duplicate insert: " + id);
    Vec unit = l2_normalize(v);  // throws on (near-)zero input

    const uint32_t idx = static_cast<uint32_t>(ids_.size());
    const int level = draw_level();

    ids_.push_back(id);
    vectors_.push_back(std::move(unit));
    NodeGraph node;
    node.max_level = level;
    node.neighbors.resize(level + 1);
    graph_.push_back(std::move(node));
    id_to_idx_[id] = idx;

    if (max_level_ < 0) {
        entry_point_ = idx;
        max_level_ = level;
        return;
    }

    const Vec& q = vectors_[idx];
    uint32_t ep = entry_point_;
    if (max_level_ > level) ep = greedy_descend(q, ep, max_level_, level);

    for (int lc = std::min(level, max_level_); lc >= 0; --lc) {
        auto cands = search_layer(q, ep, params_.ef_construction, lc);
        ep = cands.front().second;
        const size_t cap = lc == 0 ? params_.M0 : params_.M;
        auto nbs = select_neighbors(q, cands, cap);
        graph_[idx].neighbors[lc] = nbs;
        for (uint32_t nb : nbs) {
            graph_[nb].neighbors[lc].push_back(idx);
            if (graph_[nb].neighbors[lc].size() > cap) shrink_neighbors(nb, lc);
        }
    }

    if (level > max_level_) {
        max_level_ = level;
        entry_point_ = idx;
    }
}

std::vector<SearchHit> HnswIndex::search(const Vec& q, size_t k, size_t ef) const {
    if (ids_.empty()) throw DomainError("search on empty index");
    if (k < 1) throw ContractViolation("k must be >= 1");
    if (ef == 0) ef = params_.ef_search;
    ef = std::max(ef, k);

    Vec unit = l2_normalize(q);
    // Beam descent: a small ef on the upper layers gives layer 0 a better
    // entry point than a pure greedy walk, which measurably lifts recall at
    // moderate ef_search.
    std::vector<uint32_t> eps{entry_point_};
    for (int level = max_level_; level > 0; --level) {
        auto beam = search_layer_multi(unit, eps, 8, level);
        eps.clear();
        for (const auto& [d, idx] : beam) eps.push_back(idx);
    }
    auto found = search_layer_multi(unit, eps, ef, 0);
    std::vector<SearchHit> out;
    out.reserve(std::min(k, found.size()));
    for (size_t i = 0; i < found.size() && i < k; ++i)
        out.push_back({ids_[found[i].second], found[i].first});
    return out;
}

const Vec& HnswIndex::vector_of(const std::string& id) const {
    auto it = id_to_idx_.find(id);
    if (it == id_to_idx_.end()) throw NotFoundError("unknown node id: " + id);
    return vectors_[it->second];
}

void HnswIndex::audit() const {
    if (ids_.empty()) return;
    if (graph_[entry_point_].max_level != max_level_)
        throw DomainError("audit: entry point not at max level");
    for (size_t i = 0; i < graph_.size(); ++i) {
        const auto& node = graph_[i];
        if (static_cast<int>(node.neighbors.size()) != node.max_level + 1)
            throw DomainError("audit: layer list size mismatch");
        for (int lv = 0; lv <= node.max_level; ++lv) {
            const size_t cap = lv == 0 ? params_.M0 : params_.M;
            if (node.neighbors[lv].size() > cap) throw DomainError("audit: degree bound exceeded");
            for (uint32_t nb : node.neighbors[lv]) {
                if (nb >= graph_.size() || graph_[nb].max_level < lv)
                    throw DomainError("audit: neighbor missing at level");
            }
        }
    }
}

std::vector<uint8_t> HnswIndex::save() const {
    ByteWriter w;
    w.pod(kMagic);
    w.pod(kVersion);
    w.pod(params_.M);
    w.pod(params_.M0);
    w.pod(params_.ef_construction);
    w.pod(params_.ef_search);
    w.pod(params_.level_multiplier);
    w.pod(params_.seed);
    std::ostringstream rng_state;
    rng_state << rng_;
    w.str(rng_state.str());
    w.pod(static_cast<uint32_t>(ids_.size()));
    w.pod(entry_point_);
    w.pod(static_cast<int32_t>(max_level_));
    for (size_t i = 0; i < ids_.size(); ++i) {
        w.str(ids_[i]);
        w.floats(vectors_[i]);
        w.pod(static_cast<int32_t>(graph_[i].max_level));
        for (const auto& nbs : graph_[i].neighbors) w.u32s(nbs);
    }
    return w.finish();
}

HnswIndex HnswIndex::load(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    char magic[4];
    magic[0] = r.pod<char>();
    magic[1] = r.pod<char>();
    magic[2] = r.pod<char>();
    magic[3] = r.pod<char>();
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad index magic");
    uint32_t version = r.pod<uint32_t>();
    if (version != kVersion) throw FormatError("unsupported index version");

    HnswParams p;
    p.M = r.pod<uint32_t>();
    p.M0 = r.pod<uint32_t>();
    p.ef_construction = r.pod<uint32_t>();
    p.ef_search = r.pod<uint32_t>();
    p.level_multiplier = r.pod<double>();
    p.seed = r.pod<uint64_t>();

    HnswIndex index(p);
    std::istringstream rng_state(r.str());
    rng_state >> index.rng_;
    uint32_t n = r.pod<uint32_t>();
    index.entry_point_ = r.pod<uint32_t>();
    index.max_level_ = r.pod<int32_t>();
    index.ids_.reserve(n);
    index.vectors_.reserve(n);
    index.graph_.reserve(n);
    for (uint32_t i = 0; i < n; ++i) {
        std::string id = r.str();
        Vec v = r.floats();
        NodeGraph g;
        g.max_level = r.pod<int32_t>();
        g.neighbors.resize(g.max_level + 1);
        for (auto& nbs : g.neighbors) nbs = r.u32s();
        index.id_to_idx_[id] = i;
        index.ids_.push_back(std::move(id));
        index.vectors_.push_back(std::move(v));
        index.graph_.push_back(std::move(g));
    }
    if (!r.done()) throw CorruptionError("trailing bytes in index stream");
    return index;
}

}  // namespace hyperwalker
