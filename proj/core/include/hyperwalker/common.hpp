#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyperwalker {

// Embeddings are stored at 32-bit precision; reductions accumulate in double.
using Vec = std::vector<float>;

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Zero or near-zero vector where a direction was required.
struct DegenerateVectorError : DomainError {
    using DomainError::DomainError;
};

// Caller broke a documented precondition.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

struct NotFoundError : DomainError {
    using DomainError::DomainError;
};

// Bad magic/version in a persisted artifact.
struct FormatError : DomainError {
    using DomainError::DomainError;
};

// Truncated stream or checksum mismatch.
struct CorruptionError : DomainError {
    using DomainError::DomainError;
};

using Rng = std::mt19937_64;

inline double uniform01(Rng& rng) {
    // (0, 1): never returns 0 so -log(u) is finite.
    return (static_cast<double>(rng() >> 11) + 1.0) / 9007199254740993.0;
}

inline double gaussian(Rng& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    return n(rng);
}

}  // namespace hyperwalker
