#include "hyperwalker/evaluate.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

namespace hyperwalker {

using nlohmann::json;

EpisodeTrace flat_knn_episode(const DiagnosticCase& c, const HypergraphStore& store,
                              const FusionParameters& fusion, const NavigationConfig& cfg,
                              int n_select) {
    if (store.index().size() == 0) throw DomainError("flat_knn_episode: empty store");
    Vec z_fused = film_forward(c.z_img, c.z_ehr, fusion).first;

    EpisodeTrace trace;
    trace.case_id = c.case_id;
    const auto hits = store.index().search(z_fused, static_cast<size_t>(n_select));
    std::vector<Vec> selected;
    int hop = 1;
    for (const auto& h : hits) {
        HopRecord rec;
        rec.hop_index = hop++;
        rec.query = z_fused;
        rec.candidate_ids = {h.id};
        rec.candidate_sources = {CandidateSource::Index};
        rec.chosen = h.id;
        trace.hops.push_back(std::move(rec));
        trace.selected.push_back(h.id);
        selected.push_back(store.node(h.id).embedding);
    }
    if (!trace.selected.empty()) {
        const RewardWeights& w = cfg.reward_weights;
        EpisodeRewards r;
        r.r_acc = reward_accuracy(z_fused, selected);
        r.r_div = reward_diversity(selected);
        const int h = std::min(static_cast<int>(trace.hops.size()), w.h_max);
        std::tie(r.r_dp, r.r_hp) = reward_budget(0, h, w);
        r.total = w.lambda_a * r.r_acc + w.lambda_d * r.r_div - w.lambda_p * (r.r_dp + r.r_hp);
        trace.rewards = r;
    }
    return trace;
}

MethodResult evaluate_method(const std::string& name, const std::vector<EpisodeTrace>& traces,
                             const std::map<std::string, std::vector<std::string>>& ground_truth,
                             double total_ms) {
    MethodResult res;
    res.name = name;
    res.cases_evaluated = traces.size();
    size_t scored = 0, hits = 0;
    for (const auto& t : traces) {
        if (!t.rewards) {
            ++res.degenerate;
            continue;
        }
        ++scored;
        res.mean_total += t.rewards->total;
        res.mean_r_acc += t.rewards->r_acc;
        res.mean_r_div += t.rewards->r_div;
        res.mean_hops += static_cast<double>(t.hops.size());
        res.mean_depth += t.depth;
        auto gt = ground_truth.find(t.case_id);
        if (gt != ground_truth.end()) {
            std::set<std::string> evidence(gt->second.begin(), gt->second.end());
            for (const auto& id : t.selected)
                if (evidence.count(id)) {
                    ++hits;
                    break;
                }
        }
    }
    if (scored > 0) {
        res.mean_total /= scored;
        res.mean_r_acc /= scored;
        res.mean_r_div /= scored;
        res.mean_hops /= scored;
        res.mean_depth /= scored;
        res.hit_rate = static_cast<double>(hits) / static_cast<double>(traces.size());
    }
    if (!traces.empty()) res.ms_per_episode = total_ms / static_cast<double>(traces.size());
    return res;
}

namespace {

template <typename F>
MethodResult timed_method(const std::string& name, const std::vector<DiagnosticCase>& cases,
                          const std::map<std::string, std::vector<std::string>>& ground_truth,
                          F&& roll) {
    std::vector<EpisodeTrace> traces;
    traces.reserve(cases.size());
    const auto t0 = std::chrono::steady_clock::now();
    for (size_t i = 0; i < cases.size(); ++i) traces.push_back(roll(cases[i], i));
    const auto t1 = std::chrono::steady_clock::now();
    const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    return evaluate_method(name, traces, ground_truth, ms);
}

}  // namespace

std::vector<MethodResult> evaluate(const HypergraphStore& store, const PolicyParameters& policy,
                                   const FusionParameters& fusion,
                                   const std::vector<DiagnosticCase>& cases,
                                   const std::map<std::string, std::vector<std::string>>& ground_truth,
                                   const EvaluationOptions& opts) {
    if (cases.empty()) throw ContractViolation("evaluate: empty case set");
    std::vector<MethodResult> out;
    const NavigationConfig& nav = opts.nav;

    if (opts.include_walker) {
        out.push_back(timed_method("walker", cases, ground_truth, [&](const auto& c, size_t i) {
            return run_episode(c, store, policy, fusion, nav, opts.seed + i);
        }));
    }
    if (opts.include_random) {
        out.push_back(timed_method("random", cases, ground_truth, [&](const auto& c, size_t i) {
            return run_episode_with_rule(c, store, policy, fusion, nav, opts.seed + i,
                                         ActionRule::UniformRandom, opts.baseline_selections);
        }));
    }
    if (opts.include_greedy_cosine) {
        out.push_back(
            timed_method("greedy-cosine", cases, ground_truth, [&](const auto& c, size_t i) {
                return run_episode_with_rule(c, store, policy, fusion, nav, opts.seed + i,
                                             ActionRule::CosineGreedy, opts.baseline_selections);
            }));
    }
    if (opts.include_flat_knn) {
        out.push_back(timed_method("flat-knn", cases, ground_truth, [&](const auto& c, size_t) {
            return flat_knn_episode(c, store, fusion, nav, opts.baseline_selections);
        }));
    }
    return out;
}

std::string format_table(const std::vector<MethodResult>& results) {
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-14s %8s %8s %8s %6s %6s %8s %10s\n", "method", "reward",
                  "r_acc", "r_div", "hops", "depth", "hit", "ms/ep");
    os << buf;
    for (const auto& r : results) {
        std::snprintf(buf, sizeof(buf), "%-14s %8.4f %8.4f %8.4f %6.2f %6.2f %8.3f %10.3f\n",
                      r.name.c_str(), r.mean_total, r.mean_r_acc, r.mean_r_div, r.mean_hops,
                      r.mean_depth, r.hit_rate, r.ms_per_episode);
        os << buf;
    }
    return os.str();
}

std::string results_to_json(const std::vector<MethodResult>& results) {
    json arr = json::array();
    for (const auto& r : results) {
        arr.push_back({{"method", r.name},
                       {"mean_total_reward", r.mean_total},
                       {"mean_r_acc", r.mean_r_acc},
                       {"mean_r_div", r.mean_r_div},
                       {"mean_hops", r.mean_hops},
                       {"mean_depth", r.mean_depth},
                       {"evidence_hit_rate", r.hit_rate},
                       {"ms_per_episode", r.ms_per_episode},
                       {"cases", r.cases_evaluated},
                       {"degenerate", r.degenerate}});
    }
    return arr.dump(2);
}

}  // namespace hyperwalker
