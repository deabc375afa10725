#pragma once

#include <map>
#include <string>
#include <vector>

#include "hyperwalker/navigator.hpp"
#include "hyperwalker/synthetic.hpp"

namespace hyperwalker {

struct MethodResult {
    std::string name;
    double mean_total = 0;
    double mean_r_acc = 0;
    double mean_r_div = 0;
    double mean_hops = 0;
    double mean_depth = 0;
    double hit_rate = 0;       // fraction of cases where S meets ground truth
    double ms_per_episode = 0;
    size_t cases_evaluated = 0;
    size_t degenerate = 0;     // episodes with empty selection
};

// Flat top-n nearest neighbors of the fused query, no navigation.
EpisodeTrace flat_knn_episode(const DiagnosticCase& c, const HypergraphStore& store,
                              const FusionParameters& fusion, const NavigationConfig& cfg,
                              int n_select);

MethodResult evaluate_method(const std::string& name, const std::vector<EpisodeTrace>& traces,
                             const std::map<std::string, std::vector<std::string>>& ground_truth,
                             double total_ms);

struct EvaluationOptions {
    NavigationConfig nav;
    int baseline_selections = 3;  // budget for random / greedy-cosine / flat-knn
    uint64_t seed = 0;
    bool include_walker = true;
    bool include_random = true;
    bool include_greedy_cosine = true;
    bool include_flat_knn = true;
};

std::vector<MethodResult> evaluate(const HypergraphStore& store, const PolicyParameters& policy,
                                   const FusionParameters& fusion,
                                   const std::vector<DiagnosticCase>& cases,
                                   const std::map<std::string, std::vector<std::string>>& ground_truth,
                                   const EvaluationOptions& opts);

std::string format_table(const std::vector<MethodResult>& results);
std::string results_to_json(const std::vector<MethodResult>& results);

}  // namespace hyperwalker
