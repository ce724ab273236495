#pragma once

// Shared numeric types, error types and seed utilities for the rmm library.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace rmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;
using Rng = std::mt19937_64;

/// Base class of every error raised by the library.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class invalid_argument : public error {
public:
    using error::error;
};

class unsupported_reservoir : public error {
public:
    using error::error;
};

class singular_system : public error {
public:
    using error::error;
};

class solver_failure : public error {
public:
    using error::error;
};

class invalid_address : public error {
public:
    using error::error;
};

class metric_undetermined : public error {
public:
    using error::error;
};

class configuration_error : public error {
public:
    using error::error;
};

class io_error : public error {
public:
    using error::error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
    if (!condition) throw invalid_argument(message);
}

inline void require_finite(double value, const char* name) {
    if (!std::isfinite(value)) throw invalid_argument(std::string(name) + " must be finite");
}

} // namespace detail

/// SplitMix64 finalizer, used to derive independent seed streams.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a child seed from a parent seed and a path of stream indices.
template <typename... Ts>
std::uint64_t derive_seed(std::uint64_t seed, Ts... path) {
    std::uint64_t s = mix_seed(seed);
    ((s = mix_seed(s ^ mix_seed(static_cast<std::uint64_t>(path) + 0x632be59bd9b4e019ULL))), ...);
    return s;
}

/// Uniform integer in [lo, hi] (inclusive).
inline int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Row `t` of a T x d sequence matrix as a column vector.
inline Vector row_vector(const Matrix& sequence, Index t) {
    return sequence.row(t).transpose();
}

} // namespace rmm
