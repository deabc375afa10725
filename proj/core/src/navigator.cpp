#include "hyperwalker/navigator.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

namespace hyperwalker {

using nlohmann::json;

Vec linger_orthogonalize(const Vec& z_q, const std::vector<Vec>& selected, double eps,
                         bool* fallback) {
    if (selected.empty()) throw ContractViolation("linger_orthogonalize: empty selection");
    if (fallback) *fallback = false;

    const size_t D = z_q.size();
    std::vector<double> mean(D, 0.0);
    for (const auto& v : selected) {
        if (v.size() != D) throw ContractViolation("linger_orthogonalize: dimension mismatch");
        for (size_t i = 0; i < D; ++i) mean[i] += v[i];
    }
    for (auto& m : mean) m /= static_cast<double>(selected.size());

    double msq = 0;
    for (double m : mean) msq += m * m;
    if (std::sqrt(msq) < eps) {
        if (fallback) *fallback = true;
        return z_q;
    }

    double qm = 0;
    for (size_t i = 0; i < D; ++i) qm += static_cast<double>(z_q[i]) * mean[i];
    const double coef = qm / msq;

    Vec orth(D);
    double osq = 0;
    for (size_t i = 0; i < D; ++i) {
        const double o = z_q[i] - coef * mean[i];
        orth[i] = static_cast<float>(o);
        osq += o * o;
    }
    if (std::sqrt(osq) < eps) {  // query parallel to the selection mean
        if (fallback) *fallback = true;
        return z_q;
    }
    return l2_normalize(orth);
}

std::vector<std::string> check_leakage(const DiagnosticCase& c,
                                       const std::vector<TttTriplet>& triplets) {
    std::vector<std::string> violations;
    for (const auto& t : triplets)
        if (t.study_id == c.study_id) violations.push_back(t.study_id);
    return violations;
}

std::vector<TttTriplet> collect_triplets(const HypergraphStore& store, const DiagnosticCase& c,
                                         size_t max_triplets) {
    std::map<std::string, TttTriplet> by_study;
    std::map<std::string, int> have;  // bit 1 img, 2 ehr, 4 report
    for (const auto& [id, n] : store.nodes()) {
        if (n.study_id == c.study_id) continue;  // current test study is withheld
        auto& t = by_study[n.study_id];
        t.study_id = n.study_id;
        auto& mask = have[n.study_id];
        if (n.modality == Modality::Image && !(mask & 1)) {
            t.z_img = n.embedding;
            mask |= 1;
        } else if (n.modality == Modality::Ehr && !(mask & 2)) {
            t.z_ehr = n.embedding;
            mask |= 2;
        } else if (n.modality == Modality::Report && !(mask & 4)) {
            t.z_report = n.embedding;
            mask |= 4;
        }
    }
    std::vector<TttTriplet> out;
    for (auto& [study, t] : by_study) {
        if (have[study] == 7) out.push_back(std::move(t));
        if (out.size() >= max_triplets) break;
    }
    return out;
}

std::pair<double, double> ttt_step(FusionParameters& params,
                                   const std::vector<TttTriplet>& triplets, const TttConfig& cfg) {
    if (triplets.empty()) return {0.0, 0.0};

    auto loss_and_grad = [&](const FusionParameters& p, FusionGradients* grad_out) {
        double loss = 0;
        const double invn = 1.0 / static_cast<double>(triplets.size());
        for (const auto& t : triplets) {
            auto [out, cache] = film_forward(t.z_img, t.z_ehr, p);
            const Vec rep = l2_normalize(t.z_report);
            double cos = 0;
            for (size_t i = 0; i < rep.size(); ++i) cos += cache.out[i] * rep[i];
            loss += (1.0 - cos) * invn;
            if (grad_out) {
                // d(1-cos)/d out = -rep; the radial part dies in the
                // normalization backward.
                Vec upstream(rep.size());
                for (size_t i = 0; i < rep.size(); ++i)
                    upstream[i] = static_cast<float>(-rep[i] * invn);
                grad_out->accumulate(film_backward(cache, upstream, p));
            }
        }
        return loss;
    };

    FusionGradients grad = FusionGradients::zeros_like(params);
    const double loss_before = loss_and_grad(params, &grad);

    // Fresh AdamW moments per case; adapter-only update.
    FusionGradients m = FusionGradients::zeros_like(params);
    FusionGradients v = FusionGradients::zeros_like(params);
    for (int step = 1; step <= cfg.steps; ++step) {
        if (step > 1) {
            grad = FusionGradients::zeros_like(params);
            loss_and_grad(params, &grad);
        }
        const double bc1 = 1.0 - std::pow(cfg.beta1, step);
        const double bc2 = 1.0 - std::pow(cfg.beta2, step);
        auto adamw = [&](std::vector<float>& p, std::vector<float>& mm, std::vector<float>& vv,
                         const std::vector<float>& g) {
            for (size_t i = 0; i < p.size(); ++i) {
                const double md = cfg.beta1 * mm[i] + (1 - cfg.beta1) * g[i];
                const double vd = cfg.beta2 * vv[i] + (1 - cfg.beta2) * double(g[i]) * g[i];
                mm[i] = static_cast<float>(md);
                vv[i] = static_cast<float>(vd);
                p[i] -= static_cast<float>(cfg.lr * ((md / bc1) / (std::sqrt(vd / bc2) + cfg.eps) +
                                                     cfg.weight_decay * p[i]));
            }
        };
        adamw(params.W1, m.W1, v.W1, grad.W1);
        adamw(params.b1, m.b1, v.b1, grad.b1);
        adamw(params.W_gamma, m.W_gamma, v.W_gamma, grad.W_gamma);
        adamw(params.b_gamma, m.b_gamma, v.b_gamma, grad.b_gamma);
        adamw(params.W_beta, m.W_beta, v.W_beta, grad.W_beta);
        adamw(params.b_beta, m.b_beta, v.b_beta, grad.b_beta);
    }

    const double loss_after = loss_and_grad(params, nullptr);
    return {loss_before, loss_after};
}

namespace {

size_t sample_index(const std::vector<double>& probs, Rng& rng) {
    const double u = uniform01(rng);
    double acc = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u <= acc) return i;
    }
    return probs.size() - 1;
}

size_t argmax_index(const std::vector<double>& probs) {
    return static_cast<size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

}  // namespace

EpisodeTrace run_episode(const DiagnosticCase& c, const HypergraphStore& store,
                         const PolicyParameters& policy, const FusionParameters& fusion,
                         const NavigationConfig& cfg, uint64_t rng_seed) {
    return run_episode_with_rule(c, store, policy, fusion, cfg, rng_seed, ActionRule::Policy, 0);
}

EpisodeTrace run_episode_with_rule(const DiagnosticCase& c, const HypergraphStore& store,
                                   const PolicyParameters& policy,
                                   const FusionParameters& fusion, const NavigationConfig& cfg,
                                   uint64_t rng_seed, ActionRule rule, int fixed_selections) {
    if (store.index().size() == 0) throw DomainError("run_episode: empty store");

    EpisodeTrace trace;
    trace.case_id = c.case_id;
    trace.seed = rng_seed;
    Rng rng(rng_seed);

    // With TTT the shared checkpoint is never mutated; work on a private copy.
    FusionParameters local_fusion = fusion;
    Vec z_fused = film_forward(c.z_img, c.z_ehr, local_fusion).first;
    Vec query = z_fused;

    const RewardWeights& w = cfg.reward_weights;
    const int expansion_depth = std::min(cfg.expansion_depth, w.d_max);
    std::set<std::string> selected_set;
    std::vector<Vec> selected_embeddings;
    bool fallback_flag = false;

    for (int hop = 1; hop <= w.h_max; ++hop) {
        HopRecord rec;
        rec.hop_index = hop;
        rec.query = query;
        rec.linger_fallback = fallback_flag;

        std::vector<std::string> cand_ids;
        std::vector<CandidateSource> cand_sources;
        std::vector<int> cand_depths;
        std::set<std::string> in_pool;
        for (const auto& hit : store.index().search(query, cfg.k_candidates)) {
            if (selected_set.count(hit.id)) continue;
            cand_ids.push_back(hit.id);
            cand_sources.push_back(CandidateSource::Index);
            cand_depths.push_back(0);
            in_pool.insert(hit.id);
        }
        if (!trace.selected.empty() && expansion_depth >= 1) {
            for (const auto& [id, ring] : store.expand_neighborhood(trace.selected.back(),
                                                                    expansion_depth)) {
                if (selected_set.count(id) || in_pool.count(id)) continue;
                cand_ids.push_back(id);
                cand_sources.push_back(CandidateSource::Expansion);
                cand_depths.push_back(ring);
                in_pool.insert(id);
            }
        }
        if (cand_ids.empty()) break;

        std::vector<Vec> cand_embeddings;
        cand_embeddings.reserve(cand_ids.size());
        for (const auto& id : cand_ids) cand_embeddings.push_back(store.node(id).embedding);

        // STOP is only offered once the evidence set is nonempty; an episode
        // that selects nothing has no reward signal at all.
        const bool stop_allowed =
            cfg.stop_enabled && fixed_selections == 0 && !trace.selected.empty();
        size_t action = 0;
        switch (rule) {
            case ActionRule::Policy: {
                auto probs = selection_distribution(query, cand_embeddings, policy,
                                                    w.temperature, stop_allowed);
                action = cfg.greedy ? argmax_index(probs) : sample_index(probs, rng);
                break;
            }
            case ActionRule::UniformRandom: {
                const size_t n = cand_ids.size() + (stop_allowed ? 1 : 0);
                action = static_cast<size_t>(uniform01(rng) * n) % n;
                break;
            }
            case ActionRule::CosineGreedy: {
                double best = -2.0;
                for (size_t i = 0; i < cand_embeddings.size(); ++i) {
                    const double s = cosine_similarity(query, cand_embeddings[i]);
                    if (s > best) {
                        best = s;
                        action = i;
                    }
                }
                break;
            }
        }

        rec.candidate_ids = cand_ids;
        rec.candidate_sources = cand_sources;
        if (stop_allowed && action == cand_ids.size()) {
            trace.hops.push_back(std::move(rec));  // STOP
            break;
        }

        rec.chosen = cand_ids[action];
        rec.depth_consumed = cand_depths[action];
        trace.depth = std::max(trace.depth, rec.depth_consumed);
        trace.selected.push_back(rec.chosen);
        selected_set.insert(rec.chosen);
        selected_embeddings.push_back(cand_embeddings[action]);
        trace.hops.push_back(std::move(rec));

        if (fixed_selections > 0 &&
            static_cast<int>(trace.selected.size()) >= fixed_selections)
            break;

        // Single-step TTT after hop 1, then re-fuse the query.
        if (hop == 1 && cfg.ttt.enabled) {
            auto triplets = collect_triplets(store, c, cfg.ttt.max_triplets);
            if (!check_leakage(c, triplets).empty())
                throw ContractViolation("run_episode: TTT triplet leaks the test study");
            if (!triplets.empty()) {
                auto [before, after] = ttt_step(local_fusion, triplets, cfg.ttt);
                trace.ttt_applied = true;
                trace.ttt_loss_before = before;
                trace.ttt_loss_after = after;
                z_fused = film_forward(c.z_img, c.z_ehr, local_fusion).first;
            }
        }

        if (cfg.linger_enabled) {
            query = linger_orthogonalize(z_fused, selected_embeddings, cfg.linger_epsilon,
                                         &fallback_flag);
        } else {
            query = z_fused;
            fallback_flag = false;
        }
    }

    if (!trace.selected.empty() && !trace.hops.empty()) {
        const Vec& z_q = trace.hops.front().query;
        EpisodeRewards r;
        r.r_acc = reward_accuracy(z_q, selected_embeddings);
        r.r_div = reward_diversity(selected_embeddings);
        std::tie(r.r_dp, r.r_hp) =
            reward_budget(trace.depth, static_cast<int>(trace.hops.size()), w);
        r.total = w.lambda_a * r.r_acc + w.lambda_d * r.r_div - w.lambda_p * (r.r_dp + r.r_hp);
        trace.rewards = r;
    }
    return trace;
}

EpisodeRewards replay_rewards(const EpisodeTrace& trace, const HypergraphStore& store,
                              const RewardWeights& w) {
    if (trace.selected.empty() || trace.hops.empty())
        throw ContractViolation("replay_rewards: degenerate trace");
    std::vector<Vec> selected;
    for (const auto& id : trace.selected) selected.push_back(store.node(id).embedding);
    const Vec& z_q = trace.hops.front().query;
    EpisodeRewards r;
    r.r_acc = reward_accuracy(z_q, selected);
    r.r_div = reward_diversity(selected);
    std::tie(r.r_dp, r.r_hp) = reward_budget(trace.depth, static_cast<int>(trace.hops.size()), w);
    r.total = w.lambda_a * r.r_acc + w.lambda_d * r.r_div - w.lambda_p * (r.r_dp + r.r_hp);
    return r;
}

std::string trace_to_json(const EpisodeTrace& t) {
    json j;
    j["case_id"] = t.case_id;
    j["seed"] = t.seed;
    j["depth"] = t.depth;
    j["selected"] = t.selected;
    j["ttt_applied"] = t.ttt_applied;
    if (t.ttt_applied) {
        j["ttt_loss_before"] = t.ttt_loss_before;
        j["ttt_loss_after"] = t.ttt_loss_after;
    }
    json hops = json::array();
    for (const auto& h : t.hops) {
        json hj;
        hj["hop_index"] = h.hop_index;
        hj["query"] = h.query;
        hj["candidate_ids"] = h.candidate_ids;
        json sources = json::array();
        for (auto s : h.candidate_sources)
            sources.push_back(s == CandidateSource::Index ? "index" : "expansion");
        hj["candidate_sources"] = sources;
        hj["chosen"] = h.chosen.empty() ? json(nullptr) : json(h.chosen);
        hj["depth_consumed"] = h.depth_consumed;
        hj["linger_fallback"] = h.linger_fallback;
        hops.push_back(std::move(hj));
    }
    j["hops"] = std::move(hops);
    if (t.rewards) {
        j["rewards"] = {{"r_acc", t.rewards->r_acc},
                        {"r_div", t.rewards->r_div},
                        {"r_dp", t.rewards->r_dp},
                        {"r_hp", t.rewards->r_hp},
                        {"total", t.rewards->total}};
    }
    return j.dump();
}

EpisodeTrace trace_from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    EpisodeTrace t;
    t.case_id = j.at("case_id").get<std::string>();
    t.seed = j.at("seed").get<uint64_t>();
    t.depth = j.at("depth").get<int>();
    t.selected = j.at("selected").get<std::vector<std::string>>();
    t.ttt_applied = j.value("ttt_applied", false);
    t.ttt_loss_before = j.value("ttt_loss_before", 0.0);
    t.ttt_loss_after = j.value("ttt_loss_after", 0.0);
    for (const auto& hj : j.at("hops")) {
        HopRecord h;
        h.hop_index = hj.at("hop_index").get<int>();
        h.query = hj.at("query").get<Vec>();
        h.candidate_ids = hj.at("candidate_ids").get<std::vector<std::string>>();
        for (const auto& s : hj.at("candidate_sources"))
            h.candidate_sources.push_back(s.get<std::string>() == "index"
                                              ? CandidateSource::Index
                                              : CandidateSource::Expansion);
        if (!hj.at("chosen").is_null()) h.chosen = hj.at("chosen").get<std::string>();
        h.depth_consumed = hj.at("depth_consumed").get<int>();
        h.linger_fallback = hj.value("linger_fallback", false);
        t.hops.push_back(std::move(h));
    }
    if (j.contains("rewards")) {
        EpisodeRewards r;
        const auto& rj = j.at("rewards");
        r.r_acc = rj.at("r_acc").get<double>();
        r.r_div = rj.at("r_div").get<double>();
        r.r_dp = rj.at("r_dp").get<double>();
        r.r_hp = rj.at("r_hp").get<double>();
        r.total = rj.at("total").get<double>();
        t.rewards = r;
    }
    return t;
}

}  // namespace hyperwalker
