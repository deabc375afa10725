#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include <hyperwalker/hypergraph.hpp>

using namespace hyperwalker;

namespace {

ClinicalNode make_node(std::string id, Vec emb, std::string study, Modality m) {
    ClinicalNode n;
    n.node_id = std::move(id);
    n.study_id = std::move(study);
    n.subject_id = "subj_" + n.study_id;
    n.modality = m;
    n.embedding = l2_normalize(emb);
    return n;
}

Vec random_unit(size_t dims, Rng& rng) {
    Vec v(dims);
    for (auto& x : v) x = static_cast<float>(gaussian(rng));
    return l2_normalize(v);
}

// Vector at a chosen cosine similarity to the base, in the plane spanned
// with a random orthogonal direction.
Vec at_similarity(const Vec& base, double target_sim, Rng& rng) {
    Vec r = random_unit(base.size(), rng);
    const double proj = dot(r, base);
    Vec ortho(base.size());
    for (size_t i = 0; i < base.size(); ++i)
        ortho[i] = static_cast<float>(r[i] - proj * base[i]);
    ortho = l2_normalize(ortho);
    Vec out(base.size());
    const double s = std::sqrt(std::max(0.0, 1.0 - target_sim * target_sim));
    for (size_t i = 0; i < base.size(); ++i)
        out[i] = static_cast<float>(target_sim * base[i] + s * ortho[i]);
    return l2_normalize(out);
}

}  // namespace

TEST_CASE("id edges group by study") {
    HypergraphStore store;
    std::vector<ClinicalNode> nodes;
    SUBCASE("one study, three nodes -> one edge of three") {
        nodes.push_back(make_node("a", {1, 0, 0}, "s1", Modality::Ehr));
        nodes.push_back(make_node("b", {0, 1, 0}, "s1", Modality::Image));
        nodes.push_back(make_node("c", {0, 0, 1}, "s1", Modality::Report));
        store.load_nodes(nodes);
        CHECK(store.induce_id_edges() == 1);
        CHECK(store.edges().begin()->second.members.size() == 3);
        for (const auto& [m, w] : store.edges().begin()->second.weights) CHECK(w == 1.0);
    }
    SUBCASE("three singleton studies -> no edges") {
        nodes.push_back(make_node("a", {1, 0, 0}, "s1", Modality::Ehr));
        nodes.push_back(make_node("b", {0, 1, 0}, "s2", Modality::Ehr));
        nodes.push_back(make_node("c", {0, 0, 1}, "s3", Modality::Ehr));
        store.load_nodes(nodes);
        CHECK(store.induce_id_edges() == 0);
    }
    SUBCASE("studies of size 3 and 2") {
        nodes.push_back(make_node("a", {1, 0, 0}, "sA", Modality::Ehr));
        nodes.push_back(make_node("b", {0, 1, 0}, "sA", Modality::Image));
        nodes.push_back(make_node("c", {0, 0, 1}, "sA", Modality::Report));
        nodes.push_back(make_node("d", {1, 1, 0}, "sB", Modality::Ehr));
        nodes.push_back(make_node("e", {1, 0, 1}, "sB", Modality::Image));
        store.load_nodes(nodes);
        CHECK(store.induce_id_edges() == 2);
        std::multiset<size_t> sizes;
        for (const auto& [id, e] : store.edges()) sizes.insert(e.members.size());
        CHECK(sizes == std::multiset<size_t>{2, 3});
    }
}

TEST_CASE("similarity edge respects threshold and modality filter") {
    Rng rng(21);
    Vec seed_vec = random_unit(16, rng);
    std::vector<ClinicalNode> nodes;
    nodes.push_back(make_node("seed", seed_vec, "s0", Modality::Ehr));

    SUBCASE("one EHR neighbor at S=0.9 joins with weight 0.9") {
        nodes.push_back(make_node("nb", at_similarity(seed_vec, 0.9, rng), "s1", Modality::Ehr));
        HypergraphStore store;
        store.load_nodes(nodes);
        auto e = store.induce_similarity_edge("seed");
        REQUIRE(e.has_value());
        CHECK(e->members.size() == 2);
        CHECK(e->weights.at("nb") == doctest::Approx(0.9).epsilon(1e-5));
        CHECK(e->weights.at("seed") == 1.0);
    }
    SUBCASE("all nodes at or below the threshold -> none") {
        nodes.push_back(make_node("nb", at_similarity(seed_vec, 0.75, rng), "s1", Modality::Ehr));
        HypergraphStore store;
        store.load_nodes(nodes);
        CHECK_FALSE(store.induce_similarity_edge("seed").has_value());
    }
    SUBCASE("report above threshold is excluded by the modality filter") {
        nodes.push_back(
            make_node("rep", at_similarity(seed_vec, 0.95, rng), "s1", Modality::Report));
        HypergraphStore store;
        store.load_nodes(nodes);
        CHECK_FALSE(store.induce_similarity_edge("seed").has_value());
    }
    SUBCASE("unknown node") {
        HypergraphStore store;
        store.load_nodes(nodes);
        CHECK_THROWS_AS(store.induce_similarity_edge("ghost"), NotFoundError);
    }
}

TEST_CASE("report edges draw from reports only") {
    Rng rng(22);
    Vec seed_vec = random_unit(16, rng);
    std::vector<ClinicalNode> nodes;
    nodes.push_back(make_node("r0", seed_vec, "s0", Modality::Report));
    nodes.push_back(make_node("r1", at_similarity(seed_vec, 0.97, rng), "s1", Modality::Report));
    nodes.push_back(make_node("e1", at_similarity(seed_vec, 0.97, rng), "s2", Modality::Ehr));
    HypergraphStore store;
    store.load_nodes(nodes);

    auto e = store.induce_report_edge("r0");
    REQUIRE(e.has_value());
    CHECK(e->members == std::vector<std::string>{"r0", "r1"});

    CHECK_THROWS_AS(store.induce_report_edge("e1"), ContractViolation);
}

TEST_CASE("report with no similar peers yields no edge") {
    Rng rng(23);
    Vec a = {1, 0, 0, 0};
    std::vector<ClinicalNode> nodes;
    nodes.push_back(make_node("r0", a, "s0", Modality::Report));
    nodes.push_back(make_node("r1", {0, 1, 0, 0}, "s1", Modality::Report));
    HypergraphStore store;
    store.load_nodes(nodes);
    CHECK_FALSE(store.induce_report_edge("r0").has_value());
}

TEST_CASE("disease edge is an argmax anchor, always created") {
    std::vector<ClinicalNode> nodes;
    nodes.push_back(make_node("rep", l2_normalize({0.9f, 0.1f}), "s0", Modality::Report));
    nodes.push_back(make_node("k1", {1, 0}, "kb1", Modality::Knowledge));
    nodes.push_back(make_node("k2", {0, 1}, "kb2", Modality::Knowledge));
    HypergraphStore store;
    store.load_nodes(nodes);

    auto e = store.induce_disease_edge("rep");
    CHECK(e.kind == EdgeKind::DiseaseBased);
    REQUIRE(e.members.size() == 2);
    CHECK(std::count(e.members.begin(), e.members.end(), "k1") == 1);
}

TEST_CASE("disease edge created even at low similarity") {
    std::vector<ClinicalNode> nodes;
    nodes.push_back(make_node("rep", {1, 0, 0}, "s0", Modality::Report));
    nodes.push_back(make_node("k1", l2_normalize({0.1f, 1, 0}), "kb1", Modality::Knowledge));
    HypergraphStore store;
    store.load_nodes(nodes);
    auto e = store.induce_disease_edge("rep");
    CHECK(e.members.size() == 2);
}

TEST_CASE("disease edge tie-break prefers the smaller node id") {
    std::vector<ClinicalNode> nodes;
    nodes.push_back(make_node("rep", {1, 0}, "s0", Modality::Report));
    nodes.push_back(make_node("kb", {0, 1}, "kb1", Modality::Knowledge));
    nodes.push_back(make_node("ka", {0, 1}, "kb2", Modality::Knowledge));
    HypergraphStore store;
    store.load_nodes(nodes);
    auto e = store.induce_disease_edge("rep");
    CHECK(std::count(e.members.begin(), e.members.end(), "ka") == 1);
}

TEST_CASE("disease edge without knowledge nodes errors") {
    std::vector<ClinicalNode> nodes;
    nodes.push_back(make_node("rep", {1, 0}, "s0", Modality::Report));
    HypergraphStore store;
    store.load_nodes(nodes);
    CHECK_THROWS_AS(store.induce_disease_edge("rep"), DomainError);
}

TEST_CASE("expand_neighborhood BFS over the bipartite graph") {
    // Chain: {a, b, c} share study sX; {c, d, e} share study sY.
    std::vector<ClinicalNode> nodes;
    nodes.push_back(make_node("a", {1, 0, 0}, "sX", Modality::Ehr));
    nodes.push_back(make_node("b", {0, 1, 0}, "sX", Modality::Image));
    nodes.push_back(make_node("c", {0, 0, 1}, "sX", Modality::Report));
    nodes.push_back(make_node("d", {1, 1, 0}, "sY", Modality::Ehr));
    nodes.push_back(make_node("e", {1, 0, 1}, "sY", Modality::Image));
    nodes.push_back(make_node("iso", {1, 1, 1}, "sZ", Modality::Ehr));
    HypergraphStore store;
    store.load_nodes(nodes);
    store.induce_id_edges();

    // No edge shared: isolated node expands to nothing.
    CHECK(store.expand_neighborhood("iso", 2).empty());

    auto ring1 = store.expand_neighborhood("a", 1);
    std::set<std::string> r1;
    for (const auto& [id, d] : ring1) {
        CHECK(d == 1);
        r1.insert(id);
    }
    CHECK(r1 == std::set<std::string>{"b", "c"});

    CHECK_THROWS_AS(store.expand_neighborhood("a", 0), ContractViolation);
    CHECK_THROWS_AS(store.expand_neighborhood("ghost", 1), NotFoundError);
}

TEST_CASE("two-edge chain reaches far side at depth 2") {
    // Bridge node shared across two studies is impossible (one study per node),
    // so chain via similarity: x0 -- x1 (same study), x1 -- x2 (similar).
    Rng rng(29);
    Vec v1 = random_unit(16, rng);
    std::vector<ClinicalNode> nodes;
    nodes.push_back(make_node("x0", random_unit(16, rng), "sA", Modality::Image));
    nodes.push_back(make_node("x1", v1, "sA", Modality::Ehr));
    nodes.push_back(make_node("x2", at_similarity(v1, 0.9, rng), "sB", Modality::Ehr));
    HypergraphStore store;
    store.load_nodes(nodes);
    store.induce_id_edges();
    store.induce_similarity_edge("x1");

    auto reached = store.expand_neighborhood("x0", 2);
    std::set<std::pair<std::string, int>> got(reached.begin(), reached.end());
    CHECK(got.count({"x1", 1}) == 1);
    CHECK(got.count({"x2", 2}) == 1);

    // Brute-force BFS oracle agrees on minimal depths.
    auto d1 = store.expand_neighborhood("x0", 1);
    CHECK(d1.size() == 1);
    store.audit_incidence();
}

TEST_CASE("threshold soundness and completeness vs O(n^2) scan") {
    Rng rng(31);
    const size_t n = 120;
    std::vector<ClinicalNode> nodes;
    // Clustered data so some pairs clear tau_sim = 0.8.
    std::vector<Vec> centers;
    for (int c = 0; c < 4; ++c) centers.push_back(random_unit(24, rng));
    for (size_t i = 0; i < n; ++i) {
        const Vec& c = centers[i % centers.size()];
        Vec v(24);
        for (size_t d = 0; d < 24; ++d)
            v[d] = c[d] + 0.25f * static_cast<float>(gaussian(rng));
        Modality m = i % 3 == 0 ? Modality::Ehr : (i % 3 == 1 ? Modality::Image : Modality::Report);
        nodes.push_back(make_node("n" + std::to_string(100 + i), l2_normalize(v),
                                  "st" + std::to_string(i), m));
    }
    HypergraphStore store;
    store.load_nodes(nodes);

    for (const auto& [id, node] : store.nodes()) {
        const bool is_report = node.modality == Modality::Report;
        std::optional<Hyperedge> e = is_report ? store.induce_report_edge(id)
                                               : store.induce_similarity_edge(id);
        // Brute-force membership per the threshold rule.
        std::set<std::string> expect;
        for (const auto& [jd, other] : store.nodes()) {
            if (jd == id) continue;
            const bool modality_ok =
                is_report ? other.modality == Modality::Report
                          : (other.modality == Modality::Ehr || other.modality == Modality::Image);
            if (!modality_ok) continue;
            if (cosine_similarity(node.embedding, other.embedding) > 0.8) expect.insert(jd);
        }
        if (expect.empty()) {
            CHECK_FALSE(e.has_value());
        } else {
            REQUIRE(e.has_value());
            std::set<std::string> got(e->members.begin(), e->members.end());
            got.erase(id);
            CHECK(got == expect);
            for (const auto& m : got)
                CHECK(cosine_similarity(node.embedding, store.node(m).embedding) > 0.8);
        }
    }
    store.audit_incidence();
}
