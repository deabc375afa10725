#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hyperwalker/common.hpp"

namespace hyperwalker {

struct RewardWeights {
    double lambda_a = 1.0;
    double lambda_d = 0.5;
    double lambda_p = 0.3;
    int d_max = 5;
    int h_max = 5;
    double temperature = 0.01;
};

// Scoring MLP over the concatenated [query; candidate] pair, plus a
// learnable scalar for the virtual STOP action.
struct PolicyParameters {
    size_t dim = 0;     // D; input is 2D
    size_t hidden = 0;  // H_p
    std::vector<float> Wp1;  // 2D x hidden, row-major [i*hidden + j]
    std::vector<float> bp1;  // hidden
    std::vector<float> wp2;  // hidden
    float bp2 = 0.0f;
    float stop_score = 0.0f;

    static PolicyParameters random_init(size_t dim, size_t hidden, uint64_t seed);
    static PolicyParameters zero_init(size_t dim, size_t hidden);
};

struct PolicyGradients {
    std::vector<double> Wp1, bp1, wp2;
    double bp2 = 0, stop_score = 0;

    static PolicyGradients zeros_like(const PolicyParameters& p);
    void accumulate(const PolicyGradients& other, double scale = 1.0);
};

double score_candidate(const Vec& z_q, const Vec& z_i, const PolicyParameters& p);

// Softmax over candidate scores / T plus the STOP action (last entry).
// include_stop=false drops the STOP entry (fixed-budget ablations).
std::vector<double> selection_distribution(const Vec& z_q, const std::vector<Vec>& candidates,
                                           const PolicyParameters& p, double temperature,
                                           bool include_stop = true);

double reward_accuracy(const Vec& z_q, const std::vector<Vec>& selected);
double reward_diversity(const std::vector<Vec>& selected);
std::pair<double, double> reward_budget(int d, int h, const RewardWeights& w);
double total_reward(const Vec& z_q, const std::vector<Vec>& selected, int d, int h,
                    const RewardWeights& w);

// One decision point in an episode, as the trainer needs it: the query, the
// candidate pool, and which action was taken (candidates.size() == STOP).
struct DecisionStep {
    Vec query;
    std::vector<Vec> candidates;
    size_t chosen = 0;
    double temperature = 0.01;
    bool include_stop = true;
};

struct TrainingEpisode {
    std::vector<DecisionStep> steps;
    double total_reward = 0;
};

// Gradient of sum over steps of log pi(a) at the given parameters, in double.
PolicyGradients log_prob_gradient(const PolicyParameters& p, const TrainingEpisode& episode);

// Adam moments for the policy trainer.
struct PolicyTrainer {
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double baseline = 0.0;
    double baseline_decay = 0.95;
    bool baseline_initialized = false;
    long step_count = 0;
    PolicyGradients m, v;

    // REINFORCE with EMA baseline; ascends sum log pi * (R - baseline).
    void update(PolicyParameters& p, const std::vector<TrainingEpisode>& episodes);
};

// Checkpoint: magic "HWPL", version, shapes, float32 values, crc32.
std::vector<uint8_t> save_policy(const PolicyParameters& p);
PolicyParameters load_policy(const std::vector<uint8_t>& bytes);

}  // namespace hyperwalker
