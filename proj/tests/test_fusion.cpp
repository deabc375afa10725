#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <hyperwalker/fusion.hpp>
#include <hyperwalker/manifold.hpp>

using namespace hyperwalker;

namespace {

Vec random_vec(size_t dims, Rng& rng, double scale = 1.0) {
    Vec v(dims);
    for (auto& x : v) x = static_cast<float>(scale * gaussian(rng));
    return v;
}

FusionParameters random_params(size_t dims, size_t hidden, Rng& rng) {
    FusionParameters p = FusionParameters::identity_init(dims, hidden, rng());
    auto fill = [&](std::vector<float>& w) {
        for (auto& x : w) x = static_cast<float>(0.3 * gaussian(rng));
    };
    fill(p.W_gamma);
    fill(p.b_gamma);
    fill(p.W_beta);
    fill(p.b_beta);
    return p;
}

// Straight-line scalar re-implementation of the fused query, kept independent
// of the production path.
std::vector<double> reference_forward(const Vec& z_img, const Vec& z_ehr,
                                      const FusionParameters& p) {
    const size_t D = p.dim, H = p.hidden;
    std::vector<double> h(H), gamma(D), beta(D), x(D);
    for (size_t j = 0; j < H; ++j) {
        double a = p.b1[j];
        for (size_t i = 0; i < D; ++i) a += double(p.W1[i * H + j]) * z_ehr[i];
        h[j] = std::tanh(a);
    }
    for (size_t i = 0; i < D; ++i) {
        gamma[i] = p.b_gamma[i];
        beta[i] = p.b_beta[i];
        for (size_t j = 0; j < H; ++j) {
            gamma[i] += double(p.W_gamma[j * D + i]) * h[j];
            beta[i] += double(p.W_beta[j * D + i]) * h[j];
        }
        x[i] = z_img[i] + gamma[i] * z_img[i] + beta[i];
    }
    double mu = 0;
    for (double v : x) mu += v;
    mu /= D;
    double var = 0;
    for (double v : x) var += (v - mu) * (v - mu);
    var /= D;
    std::vector<double> y(D);
    double ysq = 0;
    for (size_t i = 0; i < D; ++i) {
        y[i] = (x[i] - mu) / std::sqrt(var + 1e-5);
        ysq += y[i] * y[i];
    }
    for (auto& v : y) v /= std::sqrt(ysq);
    return y;
}

double loss_of(const FusionParameters& p, const Vec& z_img, const Vec& z_ehr, const Vec& target) {
    auto [out, cache] = film_forward(z_img, z_ehr, p);
    double l = 0;
    for (size_t i = 0; i < target.size(); ++i) l += cache.out[i] * target[i];
    return l;  // linear probe loss: target . out
}

}  // namespace

TEST_CASE("identity init reduces to normalized LN of the image embedding") {
    FusionParameters p = FusionParameters::identity_init(4, 3, 1);
    Vec z_img = {1, 2, 3, 4};
    Rng rng(2);
    auto [out, cache] = film_forward(z_img, random_vec(4, rng), p);

    // Expected: l2_normalize(LN(z_img)) computed by hand.
    double mu = 2.5;
    double var = (2.25 + 0.25 + 0.25 + 2.25) / 4.0;
    Vec expect(4);
    for (size_t i = 0; i < 4; ++i)
        expect[i] = static_cast<float>((z_img[i] - mu) / std::sqrt(var + 1e-5));
    expect = l2_normalize(expect);
    for (size_t i = 0; i < 4; ++i) CHECK(out[i] == doctest::Approx(expect[i]).epsilon(1e-5));
}

TEST_CASE("identity init makes output independent of EHR context") {
    FusionParameters p = FusionParameters::identity_init(8, 4, 3);
    Rng rng(4);
    Vec z_img = random_vec(8, rng);
    auto base = film_forward(z_img, random_vec(8, rng), p).first;
    for (int t = 0; t < 100; ++t) {
        auto out = film_forward(z_img, random_vec(8, rng), p).first;
        for (size_t i = 0; i < 8; ++i) CHECK(std::abs(out[i] - base[i]) <= 1e-6);
    }
}

TEST_CASE("forward matches the scalar reference implementation") {
    Rng rng(5);
    for (int t = 0; t < 50; ++t) {
        FusionParameters p = random_params(8, 4, rng);
        Vec z_img = random_vec(8, rng);
        Vec z_ehr = random_vec(8, rng);
        auto [out, cache] = film_forward(z_img, z_ehr, p);
        auto ref = reference_forward(z_img, z_ehr, p);
        for (size_t i = 0; i < 8; ++i) CHECK(double(out[i]) == doctest::Approx(ref[i]).epsilon(1e-5));
        CHECK(is_unit(out, 1e-6));
    }
}

TEST_CASE("LN intermediate has mean 0 and variance about 1") {
    Rng rng(6);
    for (int t = 0; t < 20; ++t) {
        FusionParameters p = random_params(16, 4, rng);
        auto [out, cache] = film_forward(random_vec(16, rng), random_vec(16, rng), p);
        double mu = 0;
        for (double y : cache.ln_out) mu += y;
        mu /= 16;
        CHECK(std::abs(mu) <= 1e-6);
        double var = 0;
        for (double y : cache.ln_out) var += (y - mu) * (y - mu);
        var /= 16;
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }
}

TEST_CASE("constant pre-LN input is well-defined via epsilon") {
    FusionParameters p = FusionParameters::identity_init(4, 2, 7);
    // gamma=0, beta=0, so x = z_img; a constant z_img drives var to 0.
    CHECK_THROWS_AS(film_forward({1, 1, 1, 1}, {0, 0, 0, 0}, p), DegenerateVectorError);
}

TEST_CASE("zero upstream gradient yields zero parameter gradients") {
    Rng rng(8);
    FusionParameters p = random_params(6, 3, rng);
    auto [out, cache] = film_forward(random_vec(6, rng), random_vec(6, rng), p);
    auto g = film_backward(cache, Vec(6, 0.0f), p);
    for (float x : g.W1) CHECK(x == 0.0f);
    for (float x : g.W_gamma) CHECK(x == 0.0f);
    for (float x : g.b_beta) CHECK(x == 0.0f);
}

TEST_CASE("at identity init the hidden layer has no gradient path") {
    FusionParameters p = FusionParameters::identity_init(6, 3, 9);
    Rng rng(10);
    auto [out, cache] = film_forward(random_vec(6, rng), random_vec(6, rng), p);
    auto g = film_backward(cache, random_vec(6, rng), p);
    for (float x : g.W1) CHECK(x == 0.0f);
    for (float x : g.b1) CHECK(x == 0.0f);
}

TEST_CASE("stale cache is rejected") {
    FusionParameters p = FusionParameters::identity_init(4, 2, 1);
    FusionCache cache;  // never produced by a forward call
    CHECK_THROWS_AS(film_backward(cache, Vec(4, 0.0f), p), ContractViolation);
}

TEST_CASE("backward matches central finite differences over 100 draws") {
    Rng rng(11);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        FusionParameters p = random_params(8, 4, rng);
        Vec z_img = random_vec(8, rng);
        Vec z_ehr = random_vec(8, rng);
        Vec target = l2_normalize(random_vec(8, rng));

        auto [out, cache] = film_forward(z_img, z_ehr, p);
        auto g = film_backward(cache, target, p);

        auto check_param = [&](std::vector<float>& w, const std::vector<float>& gw, size_t i) {
            const float orig = w[i];
            const float hi = orig + 1e-4f;
            const float lo = orig - 1e-4f;
            w[i] = hi;
            const double fp = loss_of(p, z_img, z_ehr, target);
            w[i] = lo;
            const double fm = loss_of(p, z_img, z_ehr, target);
            w[i] = orig;
            const double fd = (fp - fm) / (double(hi) - double(lo));
            if (std::abs(fd) > 1e-6)
                CHECK(std::abs(gw[i] - fd) / std::max(std::abs(fd), 1e-8) <= 1e-4);
        };
        // Spot-check a few coordinates per tensor each trial.
        check_param(p.W1, g.W1, trial % p.W1.size());
        check_param(p.b1, g.b1, trial % p.b1.size());
        check_param(p.W_gamma, g.W_gamma, trial % p.W_gamma.size());
        check_param(p.b_gamma, g.b_gamma, trial % p.b_gamma.size());
        check_param(p.W_beta, g.W_beta, trial % p.W_beta.size());
        check_param(p.b_beta, g.b_beta, trial % p.b_beta.size());
        ++checked;
    }
    CHECK(checked == 100);
}

TEST_CASE("checkpoint round-trip and corruption handling") {
    Rng rng(13);
    FusionParameters p = random_params(8, 4, rng);
    auto bytes = save_fusion(p);
    FusionParameters q = load_fusion(bytes);
    CHECK(q.W1 == p.W1);
    CHECK(q.W_gamma == p.W_gamma);
    CHECK(q.b_beta == p.b_beta);

    auto bad = bytes;
    bad[10] ^= 0x1;
    CHECK_THROWS_AS(load_fusion(bad), CorruptionError);
}
