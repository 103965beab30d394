#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace coca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Contract violation on a public operation (bad argument, bad state).
inline void require(bool cond, const std::string& msg) {
    if (!cond) throw std::invalid_argument(msg);
}

// Data-dependent failure (parse error, divergence, IO).
inline void ensure(bool cond, const std::string& msg) {
    if (!cond) throw std::runtime_error(msg);
}

// Deterministic RNG used across the library. All stochastic operations take
// one of these by reference so a fixed seed reproduces every draw in order.
using Rng = std::mt19937_64;

// FNV-1a over raw bytes; used for center snapshot hashes in training history.
inline std::uint64_t fnv1a(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t hash_matrix(const Matrix& m) {
    return fnv1a(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
}

inline std::uint64_t hash_vector(const Vector& v) {
    return fnv1a(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
}

}  // namespace coca
