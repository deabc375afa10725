#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hyperwalker/navigator.hpp"

namespace hyperwalker {

struct TrainOptions {
    size_t episodes = 2000;
    double lr = 1e-3;
    uint64_t seed = 0;
    NavigationConfig nav;
    // Exploration temperature decays t_start -> t_end over the first
    // schedule_fraction of episodes, then stays at t_end.
    double t_start = 1.0;
    double t_end = 0.01;
    double schedule_fraction = 0.5;
    size_t policy_hidden = 256;
    size_t batch_size = 8;  // rollouts aggregated per gradient update
};

struct TrainLogEntry {
    size_t episode = 0;
    double reward = 0;
    double r_acc = 0, r_div = 0, r_dp = 0, r_hp = 0;
    double baseline = 0;
};

struct TrainResult {
    PolicyParameters policy;
    std::vector<TrainLogEntry> log;
};

// REINFORCE over sampled episodes, cycling through the case list.
TrainResult train_policy(const HypergraphStore& store, const std::vector<DiagnosticCase>& cases,
                         const FusionParameters& fusion, const TrainOptions& opts);

// Rebuilds the trainer-facing decision steps from a rollout trace.
TrainingEpisode trace_to_training_episode(const EpisodeTrace& trace, const HypergraphStore& store,
                                          double temperature, bool include_stop);

}  // namespace hyperwalker
