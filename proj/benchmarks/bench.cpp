#include <benchmark/benchmark.h>

#include "hyperwalker/hnsw.hpp"
#include "hyperwalker/navigator.hpp"
#include "hyperwalker/synthetic.hpp"
#include "hyperwalker/trainer.hpp"

using namespace hyperwalker;

namespace {

Vec random_unit(size_t d, Rng& rng) {
    Vec v(d);
    for (auto& x : v) x = static_cast<float>(gaussian(rng));
    return l2_normalize(v);
}

void BM_HnswInsert(benchmark::State& state) {
    Rng rng(1);
    std::vector<Vec> vecs;
    for (int i = 0; i < 2048; ++i) vecs.push_back(random_unit(64, rng));
    for (auto _ : state) {
        HnswIndex index;
        for (size_t i = 0; i < vecs.size(); ++i) index.insert(std::to_string(i), vecs[i]);
        benchmark::DoNotOptimize(index.size());
    }
    state.SetItemsProcessed(state.iterations() * 2048);
}
BENCHMARK(BM_HnswInsert)->Unit(benchmark::kMillisecond);

void BM_HnswSearch(benchmark::State& state) {
    Rng rng(2);
    HnswIndex index;
    for (int i = 0; i < 10000; ++i) index.insert(std::to_string(i), random_unit(64, rng));
    Vec q = random_unit(64, rng);
    for (auto _ : state) {
        auto hits = index.search(q, 10);
        benchmark::DoNotOptimize(hits);
    }
}
BENCHMARK(BM_HnswSearch);

void BM_RewardTotal(benchmark::State& state) {
    Rng rng(3);
    Vec q = random_unit(64, rng);
    std::vector<Vec> selected;
    for (int i = 0; i < 5; ++i) selected.push_back(random_unit(64, rng));
    RewardWeights w;
    for (auto _ : state) {
        double r = total_reward(q, selected, 2, 4, w);
        benchmark::DoNotOptimize(r);
    }
}
BENCHMARK(BM_RewardTotal);

void BM_Episode(benchmark::State& state) {
    SyntheticSpec spec;
    spec.dims = 32;
    spec.n_subjects = 50;
    spec.seed = 4;
    SyntheticDataset data = generate_manifold(spec);
    HypergraphStore store;
    store.load_nodes(to_clinical_nodes(data.records));
    store.induce_all_edges();
    FusionParameters fusion = FusionParameters::identity_init(32, 16, 4);
    PolicyParameters policy = PolicyParameters::random_init(32, 32, 4);
    NavigationConfig cfg;
    uint64_t seed = 0;
    for (auto _ : state) {
        EpisodeTrace t =
            run_episode(data.cases[seed % data.cases.size()], store, policy, fusion, cfg, seed++);
        benchmark::DoNotOptimize(t);
    }
}
BENCHMARK(BM_Episode)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
