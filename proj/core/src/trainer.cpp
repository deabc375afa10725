#include "hyperwalker/trainer.hpp"

#include <algorithm>

namespace hyperwalker {

TrainingEpisode trace_to_training_episode(const EpisodeTrace& trace, const HypergraphStore& store,
                                          double temperature, bool include_stop) {
    TrainingEpisode ep;
    for (const auto& hop : trace.hops) {
        DecisionStep step;
        step.query = hop.query;
        for (const auto& id : hop.candidate_ids)
            step.candidates.push_back(store.node(id).embedding);
        step.temperature = temperature;
        step.include_stop = include_stop && hop.hop_index >= 2;  // STOP opens after a selection
        if (hop.chosen.empty()) {
            step.chosen = hop.candidate_ids.size();  // STOP
        } else {
            auto it = std::find(hop.candidate_ids.begin(), hop.candidate_ids.end(), hop.chosen);
            step.chosen = static_cast<size_t>(it - hop.candidate_ids.begin());
        }
        ep.steps.push_back(std::move(step));
    }
    if (trace.rewards) ep.total_reward = trace.rewards->total;
    return ep;
}

TrainResult train_policy(const HypergraphStore& store, const std::vector<DiagnosticCase>& cases,
                         const FusionParameters& fusion, const TrainOptions& opts) {
    if (cases.empty()) throw ContractViolation("train_policy: empty case set");

    TrainResult result;
    result.policy = PolicyParameters::random_init(fusion.dim, opts.policy_hidden, opts.seed);
    PolicyTrainer trainer;
    trainer.lr = opts.lr;

    const size_t ramp = std::max<size_t>(
        1, static_cast<size_t>(opts.schedule_fraction * static_cast<double>(opts.episodes)));

    const size_t batch = std::max<size_t>(1, opts.batch_size);
    std::vector<TrainingEpisode> pending;
    for (size_t ep = 0; ep < opts.episodes; ++ep) {
        const double frac = std::min(1.0, static_cast<double>(ep) / static_cast<double>(ramp));
        const double temp = opts.t_start + (opts.t_end - opts.t_start) * frac;

        NavigationConfig nav = opts.nav;
        nav.greedy = false;
        nav.reward_weights.temperature = temp;

        const DiagnosticCase& c = cases[ep % cases.size()];
        EpisodeTrace trace =
            run_episode(c, store, result.policy, fusion, nav, opts.seed * 1000003 + ep);
        if (trace.hops.empty()) continue;  // no decision was ever offered

        // A zero-selection episode still trains: its reward stays 0, which
        // the advantage term turns into a push away from stopping immediately.
        pending.push_back(trace_to_training_episode(trace, store, temp, nav.stop_enabled));
        if (pending.size() >= batch || ep + 1 == opts.episodes) {
            trainer.update(result.policy, pending);
            pending.clear();
        }

        TrainLogEntry log;
        log.episode = ep;
        if (trace.rewards) {
            log.reward = trace.rewards->total;
            log.r_acc = trace.rewards->r_acc;
            log.r_div = trace.rewards->r_div;
            log.r_dp = trace.rewards->r_dp;
            log.r_hp = trace.rewards->r_hp;
        }
        log.baseline = trainer.baseline;
        result.log.push_back(log);
    }
    return result;
}

}  // namespace hyperwalker
