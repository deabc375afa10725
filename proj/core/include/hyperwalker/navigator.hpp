#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hyperwalker/fusion.hpp"
#include "hyperwalker/hypergraph.hpp"
#include "hyperwalker/walker.hpp"

namespace hyperwalker {

enum class CandidateSource { Index, Expansion };

struct HopRecord {
    int hop_index = 0;
    Vec query;
    std::vector<std::string> candidate_ids;
    std::vector<CandidateSource> candidate_sources;
    std::string chosen;  // empty means STOP
    int depth_consumed = 0;
    bool linger_fallback = false;
};

struct EpisodeRewards {
    double r_acc = 0, r_div = 0, r_dp = 0, r_hp = 0, total = 0;
};

struct EpisodeTrace {
    std::string case_id;
    std::vector<HopRecord> hops;
    std::vector<std::string> selected;  // ordered, no duplicates
    std::optional<EpisodeRewards> rewards;  // absent when degenerate (empty selection)
    int depth = 0;  // max depth_consumed
    uint64_t seed = 0;
    bool ttt_applied = false;
    double ttt_loss_before = 0, ttt_loss_after = 0;
};

struct TttConfig {
    bool enabled = false;
    double lr = 1e-5;
    double weight_decay = 0.01;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int steps = 1;
    size_t max_triplets = 8;
};

struct NavigationConfig {
    size_t k_candidates = 32;
    int expansion_depth = 1;
    RewardWeights reward_weights;
    TttConfig ttt;
    double linger_epsilon = 1e-6;
    bool greedy = false;
    bool linger_enabled = true;
    bool stop_enabled = true;
};

struct DiagnosticCase {
    std::string case_id;
    std::string subject_id;
    std::string study_id;
    Vec z_img;
    Vec z_ehr;
};

// Image+EHR+report embeddings of one historical study, used by TTT.
struct TttTriplet {
    std::string study_id;
    Vec z_img, z_ehr, z_report;
};

// Removes the projection of z_q onto the mean of the selected embeddings.
// Falls back to z_q when the mean is (near) zero or z_q is (near) parallel.
Vec linger_orthogonalize(const Vec& z_q, const std::vector<Vec>& selected, double eps = 1e-6,
                         bool* fallback = nullptr);

// One alignment-surrogate AdamW step on the fusion adapters (fresh moments).
// Returns loss before and after. Empty triplets: no-op, both losses zero.
std::pair<double, double> ttt_step(FusionParameters& params,
                                   const std::vector<TttTriplet>& triplets, const TttConfig& cfg);

// Flags triplets that share the case's study_id.
std::vector<std::string> check_leakage(const DiagnosticCase& c,
                                       const std::vector<TttTriplet>& triplets);

// Pulls image/ehr/report triplets out of the store, excluding the case's study.
std::vector<TttTriplet> collect_triplets(const HypergraphStore& store, const DiagnosticCase& c,
                                         size_t max_triplets);

// How actions are chosen during a roll-out.
enum class ActionRule { Policy, UniformRandom, CosineGreedy };

EpisodeTrace run_episode(const DiagnosticCase& c, const HypergraphStore& store,
                         const PolicyParameters& policy, const FusionParameters& fusion,
                         const NavigationConfig& cfg, uint64_t rng_seed);

// General engine behind run_episode: pluggable action rule and an optional
// fixed selection budget (select exactly n nodes, then stop; 0 = policy decides).
EpisodeTrace run_episode_with_rule(const DiagnosticCase& c, const HypergraphStore& store,
                                   const PolicyParameters& policy,
                                   const FusionParameters& fusion, const NavigationConfig& cfg,
                                   uint64_t rng_seed, ActionRule rule, int fixed_selections = 0);

// Recomputes rewards from a stored trace against the store (replay check).
EpisodeRewards replay_rewards(const EpisodeTrace& trace, const HypergraphStore& store,
                              const RewardWeights& w);

// Trace serialization (JSON object per episode).
std::string trace_to_json(const EpisodeTrace& t);
EpisodeTrace trace_from_json(const std::string& json_text);

}  // namespace hyperwalker
