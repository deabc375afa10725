#include "hyperwalker/walker.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "hyperwalker/io.hpp"
#include "hyperwalker/manifold.hpp"

namespace hyperwalker {

namespace {
constexpr char kMagic[4] = {'H', 'W', 'P', 'L'};
constexpr uint32_t kVersion = 1;
}  // namespace

PolicyParameters PolicyParameters::random_init(size_t dim, size_t hidden, uint64_t seed) {
    PolicyParameters p = zero_init(dim, hidden);
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(2.0 * static_cast<double>(dim));
    for (auto& w : p.Wp1) w = static_cast<float>((uniform01(rng) * 2.0 - 1.0) * bound);
    // Random hidden biases break the odd symmetry of tanh; without them the
    // initial score is an odd function of the input and the query-candidate
    // interaction (an even term) starts with no gradient support.
    for (auto& w : p.bp1) w = static_cast<float>((uniform01(rng) * 2.0 - 1.0) * 0.5);
    const double bound2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (auto& w : p.wp2) w = static_cast<float>((uniform01(rng) * 2.0 - 1.0) * bound2);
    return p;
}

PolicyParameters PolicyParameters::zero_init(size_t dim, size_t hidden) {
    PolicyParameters p;
    p.dim = dim;
    p.hidden = hidden;
    p.Wp1.assign(2 * dim * hidden, 0.0f);
    p.bp1.assign(hidden, 0.0f);
    p.wp2.assign(hidden, 0.0f);
    return p;
}

PolicyGradients PolicyGradients::zeros_like(const PolicyParameters& p) {
    PolicyGradients g;
    g.Wp1.assign(p.Wp1.size(), 0.0);
    g.bp1.assign(p.bp1.size(), 0.0);
    g.wp2.assign(p.wp2.size(), 0.0);
    return g;
}

void PolicyGradients::accumulate(const PolicyGradients& other, double scale) {
    for (size_t i = 0; i < Wp1.size(); ++i) Wp1[i] += scale * other.Wp1[i];
    for (size_t i = 0; i < bp1.size(); ++i) bp1[i] += scale * other.bp1[i];
    for (size_t i = 0; i < wp2.size(); ++i) wp2[i] += scale * other.wp2[i];
    bp2 += scale * other.bp2;
    stop_score += scale * other.stop_score;
}

namespace {

// Forward pass with hidden activations kept for backprop.
double score_forward(const Vec& z_q, const Vec& z_i, const PolicyParameters& p,
                     std::vector<double>* hidden_out) {
    const size_t D = p.dim, H = p.hidden;
    if (z_q.size() != D || z_i.size() != D)
        throw ContractViolation("score_candidate: dimension mismatch");
    std::vector<double> h(H);
    for (size_t j = 0; j < H; ++j) {
        double acc = p.bp1[j];
        for (size_t i = 0; i < D; ++i) {
            acc += static_cast<double>(p.Wp1[i * H + j]) * z_q[i];
            acc += static_cast<double>(p.Wp1[(D + i) * H + j]) * z_i[i];
        }
        h[j] = std::tanh(acc);
    }
    double s = p.bp2;
    for (size_t j = 0; j < H; ++j) s += static_cast<double>(p.wp2[j]) * h[j];
    if (hidden_out) *hidden_out = std::move(h);
    return s;
}

// Adds dscore * (gradient of score wrt params) into g.
void score_backward(const Vec& z_q, const Vec& z_i, const PolicyParameters& p,
                    const std::vector<double>& hidden, double dscore, PolicyGradients& g) {
    const size_t D = p.dim, H = p.hidden;
    for (size_t j = 0; j < H; ++j) {
        g.wp2[j] += dscore * hidden[j];
        const double dpre = dscore * p.wp2[j] * (1.0 - hidden[j] * hidden[j]);
        g.bp1[j] += dpre;
        for (size_t i = 0; i < D; ++i) {
            g.Wp1[i * H + j] += dpre * z_q[i];
            g.Wp1[(D + i) * H + j] += dpre * z_i[i];
        }
    }
    g.bp2 += dscore;
}

std::vector<double> softmax_over_scores(const std::vector<double>& scores, double temperature) {
    std::vector<double> logits(scores.size());
    for (size_t i = 0; i < scores.size(); ++i) logits[i] = scores[i] / temperature;
    const double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0;
    std::vector<double> out(logits.size());
    for (size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (auto& x : out) x /= sum;
    return out;
}

}  // namespace

double score_candidate(const Vec& z_q, const Vec& z_i, const PolicyParameters& p) {
    return score_forward(z_q, z_i, p, nullptr);
}

std::vector<double> selection_distribution(const Vec& z_q, const std::vector<Vec>& candidates,
                                           const PolicyParameters& p, double temperature,
                                           bool include_stop) {
    if (candidates.empty()) throw ContractViolation("selection_distribution: empty candidate list");
    if (temperature <= 0) throw ContractViolation("selection_distribution: temperature must be > 0");
    std::vector<double> scores;
    scores.reserve(candidates.size() + 1);
    for (const auto& c : candidates) scores.push_back(score_candidate(z_q, c, p));
    if (include_stop) scores.push_back(p.stop_score);
    return softmax_over_scores(scores, temperature);
}

double reward_accuracy(const Vec& z_q, const std::vector<Vec>& selected) {
    if (selected.empty()) throw ContractViolation("reward_accuracy: empty selection");
    double acc = 0;
    for (const auto& z : selected) acc += cosine_similarity(z_q, z);
    return acc / static_cast<double>(selected.size());
}

double reward_diversity(const std::vector<Vec>& selected) {
    const size_t n = selected.size();
    if (n <= 1) return 1.0;  // a single selection carries no redundancy
    double sum = 0;
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            if (i != j) sum += cosine_similarity(selected[i], selected[j]);
    return 1.0 - sum / static_cast<double>(n * (n - 1));
}

std::pair<double, double> reward_budget(int d, int h, const RewardWeights& w) {
    if (d < 0 || d > w.d_max) throw ContractViolation("reward_budget: depth out of budget");
    if (h < 0 || h > w.h_max) throw ContractViolation("reward_budget: hops out of budget");
    return {static_cast<double>(d) / w.d_max, static_cast<double>(h) / w.h_max};
}

double total_reward(const Vec& z_q, const std::vector<Vec>& selected, int d, int h,
                    const RewardWeights& w) {
    auto [r_dp, r_hp] = reward_budget(d, h, w);
    return w.lambda_a * reward_accuracy(z_q, selected) +
           w.lambda_d * reward_diversity(selected) - w.lambda_p * (r_dp + r_hp);
}

PolicyGradients log_prob_gradient(const PolicyParameters& p, const TrainingEpisode& episode) {
    PolicyGradients g = PolicyGradients::zeros_like(p);
    for (const auto& step : episode.steps) {
        std::vector<std::vector<double>> hiddens(step.candidates.size());
        std::vector<double> scores;
        scores.reserve(step.candidates.size() + 1);
        for (size_t i = 0; i < step.candidates.size(); ++i)
            scores.push_back(score_forward(step.query, step.candidates[i], p, &hiddens[i]));
        if (step.include_stop) scores.push_back(p.stop_score);
        auto probs = softmax_over_scores(scores, step.temperature);
        if (step.chosen >= probs.size())
            throw ContractViolation("log_prob_gradient: chosen action out of range");
        // d log p_a / d s_k = (1{k==a} - p_k) / T
        for (size_t k = 0; k < step.candidates.size(); ++k) {
            const double ds = ((k == step.chosen ? 1.0 : 0.0) - probs[k]) / step.temperature;
            score_backward(step.query, step.candidates[k], p, hiddens[k], ds, g);
        }
        if (step.include_stop) {
            const size_t stop_idx = step.candidates.size();
            g.stop_score += ((step.chosen == stop_idx ? 1.0 : 0.0) - probs[stop_idx]) /
                            step.temperature;
        }
    }
    return g;
}

void PolicyTrainer::update(PolicyParameters& p, const std::vector<TrainingEpisode>& episodes) {
    if (episodes.empty()) return;

    PolicyGradients total = PolicyGradients::zeros_like(p);
    double batch_mean_reward = 0;
    for (const auto& ep : episodes) {
        const double advantage = ep.total_reward - baseline;
        PolicyGradients g = log_prob_gradient(p, ep);
        total.accumulate(g, advantage / static_cast<double>(episodes.size()));
        batch_mean_reward += ep.total_reward / static_cast<double>(episodes.size());
    }

    if (!baseline_initialized) {
        baseline = batch_mean_reward;
        baseline_initialized = true;
    } else {
        baseline = baseline_decay * baseline + (1.0 - baseline_decay) * batch_mean_reward;
    }

    if (step_count == 0) {
        m = PolicyGradients::zeros_like(p);
        v = PolicyGradients::zeros_like(p);
    }
    ++step_count;
    const double bc1 = 1.0 - std::pow(beta1, step_count);
    const double bc2 = 1.0 - std::pow(beta2, step_count);
    auto adam_ascend = [&](float& param, double& mm, double& vv, double grad) {
        mm = beta1 * mm + (1 - beta1) * grad;
        vv = beta2 * vv + (1 - beta2) * grad * grad;
        param += static_cast<float>(lr * (mm / bc1) / (std::sqrt(vv / bc2) + eps));
    };
    for (size_t i = 0; i < p.Wp1.size(); ++i) adam_ascend(p.Wp1[i], m.Wp1[i], v.Wp1[i], total.Wp1[i]);
    for (size_t i = 0; i < p.bp1.size(); ++i) adam_ascend(p.bp1[i], m.bp1[i], v.bp1[i], total.bp1[i]);
    for (size_t i = 0; i < p.wp2.size(); ++i) adam_ascend(p.wp2[i], m.wp2[i], v.wp2[i], total.wp2[i]);
    adam_ascend(p.bp2, m.bp2, v.bp2, total.bp2);
    adam_ascend(p.stop_score, m.stop_score, v.stop_score, total.stop_score);
}

std::vector<uint8_t> save_policy(const PolicyParameters& p) {
    ByteWriter w;
    w.pod(kMagic);
    w.pod(kVersion);
    w.pod(static_cast<uint32_t>(p.dim));
    w.pod(static_cast<uint32_t>(p.hidden));
    w.floats(p.Wp1);
    w.floats(p.bp1);
    w.floats(p.wp2);
    w.pod(p.bp2);
    w.pod(p.stop_score);
    return w.finish();
}

PolicyParameters load_policy(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    char magic[4];
    for (auto& ch : magic) ch = r.pod<char>();
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad policy checkpoint magic");
    if (r.pod<uint32_t>() != kVersion) throw FormatError("unsupported policy checkpoint version");
    PolicyParameters p;
    p.dim = r.pod<uint32_t>();
    p.hidden = r.pod<uint32_t>();
    p.Wp1 = r.floats();
    p.bp1 = r.floats();
    p.wp2 = r.floats();
    p.bp2 = r.pod<float>();
    p.stop_score = r.pod<float>();
    if (p.Wp1.size() != 2 * p.dim * p.hidden || p.bp1.size() != p.hidden ||
        p.wp2.size() != p.hidden)
        throw FormatError("policy checkpoint shape mismatch");
    if (!r.done()) throw CorruptionError("trailing bytes in policy checkpoint");
    return p;
}

}  // namespace hyperwalker
