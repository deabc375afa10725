#pragma once

#include <cstdint>
#include <vector>

#include "hyperwalker/common.hpp"

namespace hyperwalker {

// FiLM modulation of the image embedding by EHR context:
//   h     = tanh(W1^T z_ehr + b1)
//   gamma = Wg^T h + bg,  beta = Wb^T h + bb
//   out   = l2_normalize(LN(z_img + gamma .* z_img + beta))
// LN has no learned affine; epsilon 1e-5.
struct FusionParameters {
    size_t dim = 0;     // D
    size_t hidden = 0;  // H_f
    std::vector<float> W1;       // dim x hidden, row-major [i*hidden + j]
    std::vector<float> b1;       // hidden
    std::vector<float> W_gamma;  // hidden x dim, row-major [j*dim + i]
    std::vector<float> b_gamma;  // dim
    std::vector<float> W_beta;   // hidden x dim
    std::vector<float> b_beta;   // dim

    // Zero gamma/beta heads so the modulation branch starts inert;
    // W1/b1 get uniform(-1/sqrt(D), 1/sqrt(D)) so the hidden layer stays trainable.
    static FusionParameters identity_init(size_t dim, size_t hidden, uint64_t seed);

    size_t parameter_count() const;
};

struct FusionGradients {
    std::vector<float> W1, b1, W_gamma, b_gamma, W_beta, b_beta;
    Vec z_img, z_ehr;

    static FusionGradients zeros_like(const FusionParameters& p);
    void accumulate(const FusionGradients& other);
    void scale(double s);
};

// Intermediates are kept at 64-bit so gradients survive finite-difference
// validation; parameters themselves stay float32.
struct FusionCache {
    Vec z_img, z_ehr;
    std::vector<double> hidden;  // tanh activations
    std::vector<double> gamma, beta;
    std::vector<double> x;       // pre-LN sum
    std::vector<double> ln_out;  // y
    double ln_mean = 0, ln_inv_std = 0;
    double y_norm = 0;
    std::vector<double> out;  // unit output at full precision
    bool valid = false;
};

std::pair<Vec, FusionCache> film_forward(const Vec& z_img, const Vec& z_ehr,
                                         const FusionParameters& p);

FusionGradients film_backward(const FusionCache& cache, const Vec& upstream,
                              const FusionParameters& p);

// Checkpoint format: magic "HWFP", version, shapes, float32 values, crc32.
std::vector<uint8_t> save_fusion(const FusionParameters& p);
FusionParameters load_fusion(const std::vector<uint8_t>& bytes);

}  // namespace hyperwalker
