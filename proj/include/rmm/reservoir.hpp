#pragma once

// Fixed recurrent reservoirs: Gaussian random, cycle reservoirs with jumps
// (CRJ) and Legendre delay networks (LDN), plus the delay reconstruction
// operators of the LDN.

#include "rmm/common.hpp"

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <optional>
#include <span>
#include <utility>

namespace rmm {

enum class Activation { tanh, identity, heaviside };
enum class ReservoirKind { random, crj, ldn };

inline const char* to_string(Activation a) {
    switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
    case Activation::heaviside: return "heaviside";
    }
    return "?";
}

inline const char* to_string(ReservoirKind k) {
    switch (k) {
    case ReservoirKind::random: return "random";
    case ReservoirKind::crj: return "crj";
    case ReservoirKind::ldn: return "ldn";
    }
    return "?";
}

inline Activation parse_activation(const std::string& s) {
    if (s == "tanh") return Activation::tanh;
    if (s == "identity") return Activation::identity;
    if (s == "heaviside") return Activation::heaviside;
    throw invalid_argument("unknown activation '" + s + "'");
}

inline ReservoirKind parse_reservoir_kind(const std::string& s) {
    if (s == "random" || s == "rand") return ReservoirKind::random;
    if (s == "crj") return ReservoirKind::crj;
    if (s == "ldn") return ReservoirKind::ldn;
    throw invalid_argument("unknown reservoir kind '" + s + "'");
}

struct LdnMeta {
    int order = 1;
    double window = 1.0; // time steps
    double dt = 1.0;     // time steps
};

/// A fixed recurrent system h' = act(U x + W h + b) started from h0.
struct Reservoir {
    Matrix input_weights;     // n x m
    Matrix recurrent_weights; // n x n
    Vector bias;              // n
    Activation activation = Activation::tanh;
    Vector initial_state;     // n
    ReservoirKind kind = ReservoirKind::random;
    std::optional<LdnMeta> ldn;

    Index size() const { return recurrent_weights.rows(); }
    Index input_dim() const { return input_weights.cols(); }
};

/// Largest eigenvalue magnitude of a square matrix.
inline double spectral_radius(const Matrix& w) {
    if (w.size() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> solver(w, /*computeEigenvectors=*/false);
    if (solver.info() != Eigen::Success) throw solver_failure("eigenvalue computation did not converge");
    return solver.eigenvalues().cwiseAbs().maxCoeff();
}

inline Reservoir make_random_reservoir(int n, int m, double spectral_radius_target, double input_scale,
                                       std::uint64_t seed) {
    detail::require(n >= 1 && m >= 1, "reservoir dimensions must be positive");
    detail::require_finite(spectral_radius_target, "spectral_radius");
    detail::require_finite(input_scale, "input_scale");
    detail::require(spectral_radius_target > 0.0 && spectral_radius_target < 1.0,
                    "spectral_radius must lie in (0, 1)");
    detail::require(input_scale > 0.0, "input_scale must be positive");

    Rng rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Reservoir res;
    res.recurrent_weights.resize(n, n);
    for (Index j = 0; j < n; ++j)
        for (Index i = 0; i < n; ++i) res.recurrent_weights(i, j) = gauss(rng);
    res.input_weights.resize(n, m);
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < n; ++i) res.input_weights(i, j) = input_scale * gauss(rng);

    const double radius = spectral_radius(res.recurrent_weights);
    if (radius > 0.0) res.recurrent_weights *= spectral_radius_target / radius;

    res.bias = Vector::Zero(n);
    res.initial_state = Vector::Zero(n);
    res.activation = Activation::tanh;
    res.kind = ReservoirKind::random;
    return res;
}

/// Directed jump links of a CRJ reservoir, with multiplicity. Jump nodes are
/// 0, l, 2l, ...; consecutive jump nodes are linked in both directions and
/// the chain closes back to node 0 when l divides n.
inline std::vector<std::pair<int, int>> crj_jump_links(int n, int jump_length) {
    std::vector<std::pair<int, int>> links;
    for (int a = 0; a < n; a += jump_length) {
        int b = a + jump_length;
        if (b > n) break;
        if (b == n) b = 0;
        if (a == b) break;
        links.emplace_back(a, b);
        links.emplace_back(b, a);
    }
    return links;
}

inline Reservoir make_crj_reservoir(int n, int m, double r_cycle, double r_jump, int jump_length,
                                    double input_scale, std::uint64_t seed) {
    detail::require(n >= 1 && m >= 1, "reservoir dimensions must be positive");
    detail::require_finite(r_cycle, "r_cycle");
    detail::require_finite(r_jump, "r_jump");
    detail::require_finite(input_scale, "input_scale");
    detail::require(jump_length >= 2, "jump_length must be at least 2");
    detail::require(jump_length < n, "jump_length must be smaller than n");
    // a jump of length n-1 lands on a ring edge
    detail::require(jump_length != n - 1, "jump_length n-1 coincides with the ring");
    detail::require(r_cycle >= 0.0 && r_cycle < 1.0 && r_jump >= 0.0 && r_jump < 1.0,
                    "CRJ weights must lie in [0, 1)");
    detail::require(input_scale > 0.0, "input_scale must be positive");

    Reservoir res;
    res.recurrent_weights = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) res.recurrent_weights((i + 1) % n, i) = r_cycle;
    for (const auto& [from, to] : crj_jump_links(n, jump_length)) res.recurrent_weights(to, from) = r_jump;

    Rng rng(seed);
    std::bernoulli_distribution coin(0.5);
    res.input_weights.resize(n, m);
    for (Index j = 0; j < m; ++j)
        for (Index i = 0; i < n; ++i) res.input_weights(i, j) = coin(rng) ? input_scale : -input_scale;

    res.bias = Vector::Zero(n);
    res.initial_state = Vector::Zero(n);
    res.activation = Activation::tanh;
    res.kind = ReservoirKind::crj;
    return res;
}

/// Continuous-time Legendre delay system (A, B) for one channel, before
/// division by the window length.
inline std::pair<Matrix, Vector> ldn_continuous_system(int order) {
    Matrix a(order, order);
    Vector b(order);
    for (int i = 0; i < order; ++i) {
        b(i) = (2.0 * i + 1.0) * (i % 2 == 0 ? 1.0 : -1.0);
        for (int j = 0; j < order; ++j) {
            const double sign = i < j ? -1.0 : ((i - j + 1) % 2 == 0 ? 1.0 : -1.0);
            a(i, j) = (2.0 * i + 1.0) * sign;
        }
    }
    return {a, b};
}

/// Zero-order-hold discretization of (A / window, B / window) with step dt.
inline std::pair<Matrix, Vector> ldn_discrete_system(int order, double window, double dt) {
    auto [a, b] = ldn_continuous_system(order);
    Matrix augmented = Matrix::Zero(order + 1, order + 1);
    augmented.topLeftCorner(order, order) = a * (dt / window);
    augmented.topRightCorner(order, 1) = b * (dt / window);
    const Matrix e = augmented.exp();
    return {e.topLeftCorner(order, order), e.topRightCorner(order, 1)};
}

inline Reservoir make_ldn_reservoir(int order, int m, double window, double dt, std::uint64_t /*seed*/) {
    detail::require(order >= 1 && m >= 1, "LDN order and input dimension must be positive");
    detail::require_finite(window, "window");
    detail::require_finite(dt, "dt");
    detail::require(dt > 0.0, "dt must be positive");
    detail::require(window >= dt, "window must be at least dt");

    const auto [ad, bd] = ldn_discrete_system(order, window, dt);
    const Index n = Index(order) * m;
    Reservoir res;
    res.recurrent_weights = Matrix::Zero(n, n);
    res.input_weights = Matrix::Zero(n, m);
    for (int c = 0; c < m; ++c) {
        res.recurrent_weights.block(Index(c) * order, Index(c) * order, order, order) = ad;
        res.input_weights.block(Index(c) * order, c, order, 1) = bd;
    }
    res.bias = Vector::Zero(n);
    res.initial_state = Vector::Zero(n);
    res.activation = Activation::identity;
    res.kind = ReservoirKind::ldn;
    res.ldn = LdnMeta{order, window, dt};
    return res;
}

namespace detail {

inline void apply_activation(Activation activation, Vector& v) {
    switch (activation) {
    case Activation::tanh: v = v.array().tanh().matrix(); break;
    case Activation::identity: break;
    case Activation::heaviside:
        for (Index i = 0; i < v.size(); ++i) v(i) = v(i) > 0.0 ? 1.0 : 0.0;
        break;
    }
}

} // namespace detail

/// One application of the recurrence act(U x + W h + b).
inline Vector reservoir_step(const Reservoir& res, const Vector& x, const Vector& h) {
    if (x.size() != res.input_dim() || h.size() != res.size())
        throw invalid_argument("reservoir_step: dimension mismatch");
    Vector pre = res.input_weights * x;
    pre.noalias() += res.recurrent_weights * h;
    pre += res.bias;
    detail::apply_activation(res.activation, pre);
    return pre;
}

/// Runs the plain recurrence from `start` over a T x m input sequence and
/// returns the T x n state sequence.
inline Matrix run_reservoir_from(const Reservoir& res, const Matrix& inputs, const Vector& start) {
    if (inputs.rows() < 1) throw invalid_argument("run_reservoir: empty input sequence");
    if (inputs.cols() != res.input_dim()) throw invalid_argument("run_reservoir: input dimension mismatch");
    Matrix states(inputs.rows(), res.size());
    Vector h = start;
    for (Index t = 0; t < inputs.rows(); ++t) {
        h = reservoir_step(res, row_vector(inputs, t), h);
        states.row(t) = h.transpose();
    }
    return states;
}

inline Matrix run_reservoir(const Reservoir& res, const Matrix& inputs) {
    return run_reservoir_from(res, inputs, res.initial_state);
}

/// Shifted Legendre polynomials P_i(2r - 1), i = 0 .. order-1.
inline Vector shifted_legendre(int order, double r) {
    Vector p(order);
    const double x = 2.0 * r - 1.0;
    if (order > 0) p(0) = 1.0;
    if (order > 1) p(1) = x;
    for (int k = 1; k + 1 < order; ++k) p(k + 1) = ((2.0 * k + 1.0) * x * p(k) - k * p(k - 1)) / (k + 1.0);
    return p;
}

/// Linear maps from the LDN state to the input `delay` steps in the past.
struct DelayOperatorBank {
    std::vector<int> delays;
    std::vector<Matrix> operators; // each m x n
    double window = 0.0;

    std::size_t size() const { return delays.size(); }
};

inline Matrix delay_operator(const Reservoir& res, int delay) {
    if (res.kind != ReservoirKind::ldn || !res.ldn)
        throw unsupported_reservoir("delay operators require a Legendre delay network");
    const LdnMeta& meta = *res.ldn;
    detail::require(delay >= 0, "delays must be non-negative");
    const double lag = delay * meta.dt;
    if (lag > meta.window * (1.0 + 1e-12)) throw invalid_argument("delay exceeds the LDN window");
    // u[t - delay] is held over lags [delay, delay + 1) * dt; decode at the midpoint
    const double r = std::min(1.0, (lag + 0.5 * meta.dt) / meta.window);
    const Vector weights = shifted_legendre(meta.order, r);
    const Index m = res.input_dim();
    Matrix phi = Matrix::Zero(m, res.size());
    for (Index c = 0; c < m; ++c) phi.block(c, c * meta.order, 1, meta.order) = weights.transpose();
    return phi;
}

inline DelayOperatorBank delay_operators(const Reservoir& res, std::span<const int> delays) {
    if (res.kind != ReservoirKind::ldn || !res.ldn)
        throw unsupported_reservoir("delay operators require a Legendre delay network");
    DelayOperatorBank bank;
    bank.window = res.ldn->window;
    for (int d : delays) {
        bank.delays.push_back(d);
        bank.operators.push_back(delay_operator(res, d));
    }
    return bank;
}

inline DelayOperatorBank delay_operators(const Reservoir& res, std::initializer_list<int> delays) {
    const std::vector<int> v(delays);
    return delay_operators(res, std::span<const int>(v));
}

} // namespace rmm
