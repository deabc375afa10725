#include "hyperwalker/fusion.hpp"

#include <cmath>
#include <cstring>

#include "hyperwalker/io.hpp"
#include "hyperwalker/manifold.hpp"

namespace hyperwalker {

namespace {
constexpr char kMagic[4] = {'H', 'W', 'F', 'P'};
constexpr uint32_t kVersion = 1;
constexpr double kLnEps = 1e-5;
}  // namespace

FusionParameters FusionParameters::identity_init(size_t dim, size_t hidden, uint64_t seed) {
    FusionParameters p;
    p.dim = dim;
    p.hidden = hidden;
    p.W1.resize(dim * hidden);
    p.b1.assign(hidden, 0.0f);
    p.W_gamma.assign(hidden * dim, 0.0f);
    p.b_gamma.assign(dim, 0.0f);
    p.W_beta.assign(hidden * dim, 0.0f);
    p.b_beta.assign(dim, 0.0f);
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
    for (auto& w : p.W1) w = static_cast<float>((uniform01(rng) * 2.0 - 1.0) * bound);
    return p;
}

size_t FusionParameters::parameter_count() const {
    return W1.size() + b1.size() + W_gamma.size() + b_gamma.size() + W_beta.size() + b_beta.size();
}

FusionGradients FusionGradients::zeros_like(const FusionParameters& p) {
    FusionGradients g;
    g.W1.assign(p.W1.size(), 0.0f);
    g.b1.assign(p.b1.size(), 0.0f);
    g.W_gamma.assign(p.W_gamma.size(), 0.0f);
    g.b_gamma.assign(p.b_gamma.size(), 0.0f);
    g.W_beta.assign(p.W_beta.size(), 0.0f);
    g.b_beta.assign(p.b_beta.size(), 0.0f);
    g.z_img.assign(p.dim, 0.0f);
    g.z_ehr.assign(p.dim, 0.0f);
    return g;
}

void FusionGradients::accumulate(const FusionGradients& other) {
    auto add = [](std::vector<float>& a, const std::vector<float>& b) {
        for (size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    };
    add(W1, other.W1);
    add(b1, other.b1);
    add(W_gamma, other.W_gamma);
    add(b_gamma, other.b_gamma);
    add(W_beta, other.W_beta);
    add(b_beta, other.b_beta);
    add(z_img, other.z_img);
    add(z_ehr, other.z_ehr);
}

void FusionGradients::scale(double s) {
    auto mul = [s](std::vector<float>& a) {
        for (auto& x : a) x = static_cast<float>(x * s);
    };
    mul(W1);
    mul(b1);
    mul(W_gamma);
    mul(b_gamma);
    mul(W_beta);
    mul(b_beta);
    mul(z_img);
    mul(z_ehr);
}

std::pair<Vec, FusionCache> film_forward(const Vec& z_img, const Vec& z_ehr,
                                         const FusionParameters& p) {
    const size_t D = p.dim, H = p.hidden;
    if (z_img.size() != D || z_ehr.size() != D)
        throw ContractViolation("film_forward: input dimension mismatch");

    FusionCache c;
    c.z_img = z_img;
    c.z_ehr = z_ehr;

    c.hidden.resize(H);
    for (size_t j = 0; j < H; ++j) {
        double acc = p.b1[j];
        for (size_t i = 0; i < D; ++i) acc += static_cast<double>(p.W1[i * H + j]) * z_ehr[i];
        c.hidden[j] = std::tanh(acc);
    }

    c.gamma.resize(D);
    c.beta.resize(D);
    for (size_t i = 0; i < D; ++i) {
        double g = p.b_gamma[i], b = p.b_beta[i];
        for (size_t j = 0; j < H; ++j) {
            g += static_cast<double>(p.W_gamma[j * D + i]) * c.hidden[j];
            b += static_cast<double>(p.W_beta[j * D + i]) * c.hidden[j];
        }
        c.gamma[i] = g;
        c.beta[i] = b;
    }

    c.x.resize(D);
    double mean = 0;
    for (size_t i = 0; i < D; ++i) {
        c.x[i] = static_cast<double>(z_img[i]) + c.gamma[i] * z_img[i] + c.beta[i];
        mean += c.x[i];
    }
    mean /= static_cast<double>(D);
    double var = 0;
    for (size_t i = 0; i < D; ++i) {
        double d = c.x[i] - mean;
        var += d * d;
    }
    var /= static_cast<double>(D);
    const double inv_std = 1.0 / std::sqrt(var + kLnEps);
    c.ln_mean = mean;
    c.ln_inv_std = inv_std;

    c.ln_out.resize(D);
    double ysq = 0;
    for (size_t i = 0; i < D; ++i) {
        c.ln_out[i] = (c.x[i] - mean) * inv_std;
        ysq += c.ln_out[i] * c.ln_out[i];
    }
    c.y_norm = std::sqrt(ysq);
    if (c.y_norm < 1e-6) throw DegenerateVectorError("film_forward: zero post-LN norm");

    c.out.resize(D);
    Vec out32(D);
    for (size_t i = 0; i < D; ++i) {
        c.out[i] = c.ln_out[i] / c.y_norm;
        out32[i] = static_cast<float>(c.out[i]);
    }
    c.valid = true;
    return {std::move(out32), c};
}

FusionGradients film_backward(const FusionCache& c, const Vec& upstream,
                              const FusionParameters& p) {
    if (!c.valid) throw ContractViolation("film_backward: stale or invalid cache");
    const size_t D = p.dim, H = p.hidden;
    if (upstream.size() != D) throw ContractViolation("film_backward: upstream dimension mismatch");
    if (c.z_img.size() != D || c.hidden.size() != H)
        throw ContractViolation("film_backward: cache does not match parameters");

    FusionGradients g = FusionGradients::zeros_like(p);

    // Through out = y / |y|:  dy = (g - out (out.g)) / |y|
    double out_dot_g = 0;
    for (size_t i = 0; i < D; ++i) out_dot_g += static_cast<double>(c.out[i]) * upstream[i];
    std::vector<double> dy(D);
    for (size_t i = 0; i < D; ++i)
        dy[i] = (static_cast<double>(upstream[i]) - c.out[i] * out_dot_g) / c.y_norm;

    // Through LN: dx_i = s (dy_i - mean(dy) - yhat_i mean(dy .* yhat))
    double mean_dy = 0, mean_dy_y = 0;
    for (size_t i = 0; i < D; ++i) {
        mean_dy += dy[i];
        mean_dy_y += dy[i] * c.ln_out[i];
    }
    mean_dy /= static_cast<double>(D);
    mean_dy_y /= static_cast<double>(D);
    std::vector<double> dx(D);
    for (size_t i = 0; i < D; ++i)
        dx[i] = c.ln_inv_std * (dy[i] - mean_dy - c.ln_out[i] * mean_dy_y);

    // x = z_img + gamma .* z_img + beta
    std::vector<double> dgamma(D), dbeta(D);
    for (size_t i = 0; i < D; ++i) {
        dgamma[i] = dx[i] * c.z_img[i];
        dbeta[i] = dx[i];
        g.z_img[i] = static_cast<float>(dx[i] * (1.0 + c.gamma[i]));
        g.b_gamma[i] = static_cast<float>(dgamma[i]);
        g.b_beta[i] = static_cast<float>(dbeta[i]);
    }

    std::vector<double> dh(H, 0.0);
    for (size_t j = 0; j < H; ++j) {
        for (size_t i = 0; i < D; ++i) {
            g.W_gamma[j * D + i] = static_cast<float>(c.hidden[j] * dgamma[i]);
            g.W_beta[j * D + i] = static_cast<float>(c.hidden[j] * dbeta[i]);
            dh[j] += static_cast<double>(p.W_gamma[j * D + i]) * dgamma[i] +
                     static_cast<double>(p.W_beta[j * D + i]) * dbeta[i];
        }
    }

    for (size_t j = 0; j < H; ++j) {
        const double dpre = dh[j] * (1.0 - static_cast<double>(c.hidden[j]) * c.hidden[j]);
        g.b1[j] = static_cast<float>(dpre);
        for (size_t i = 0; i < D; ++i) {
            g.W1[i * H + j] = static_cast<float>(c.z_ehr[i] * dpre);
            g.z_ehr[i] += static_cast<float>(static_cast<double>(p.W1[i * H + j]) * dpre);
        }
    }
    return g;
}

std::vector<uint8_t> save_fusion(const FusionParameters& p) {
    ByteWriter w;
    w.pod(kMagic);
    w.pod(kVersion);
    w.pod(static_cast<uint32_t>(p.dim));
    w.pod(static_cast<uint32_t>(p.hidden));
    w.floats(p.W1);
    w.floats(p.b1);
    w.floats(p.W_gamma);
    w.floats(p.b_gamma);
    w.floats(p.W_beta);
    w.floats(p.b_beta);
    return w.finish();
}

FusionParameters load_fusion(const std::vector<uint8_t>& bytes) {
    ByteReader r(bytes);
    char magic[4];
    for (auto& ch : magic) ch = r.pod<char>();
    if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad fusion checkpoint magic");
    if (r.pod<uint32_t>() != kVersion) throw FormatError("unsupported fusion checkpoint version");
    FusionParameters p;
    p.dim = r.pod<uint32_t>();
    p.hidden = r.pod<uint32_t>();
    p.W1 = r.floats();
    p.b1 = r.floats();
    p.W_gamma = r.floats();
    p.b_gamma = r.floats();
    p.W_beta = r.floats();
    p.b_beta = r.floats();
    if (p.W1.size() != p.dim * p.hidden || p.b1.size() != p.hidden ||
        p.W_gamma.size() != p.hidden * p.dim || p.b_gamma.size() != p.dim ||
        p.W_beta.size() != p.hidden * p.dim || p.b_beta.size() != p.dim)
        throw FormatError("fusion checkpoint shape mismatch");
    if (!r.done()) throw CorruptionError("trailing bytes in fusion checkpoint");
    return p;
}

}  // namespace hyperwalker
