#pragma once

// Convex learners: ridge readout, one-vs-rest linear SVM, write-label
// derivation and the linear program fitting the association metric.

#include "rmm/common.hpp"
#include "rmm/lp.hpp"
#include "rmm/reservoir.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cstring>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>

namespace rmm {

// ---------------------------------------------------------------- ridge

struct RidgeReadout {
    Matrix weights;   // K x n
    Vector intercept; // K

    Vector predict(const Vector& h) const { return weights * h + intercept; }
    Matrix predict_rows(const Matrix& states) const {
        Matrix out = states * weights.transpose();
        out.rowwise() += intercept.transpose();
        return out;
    }
};

/// Minimizes sum_t |V h_t + c - y_t|^2 + lambda |V|_F^2 with an unregularized intercept c.
inline RidgeReadout fit_ridge(const Matrix& states, const Matrix& targets, double lambda) {
    detail::require(states.rows() >= 1, "fit_ridge: need at least one sample");
    detail::require(states.rows() == targets.rows(), "fit_ridge: states and targets differ in length");
    detail::require_finite(lambda, "lambda");
    detail::require(lambda >= 0.0, "fit_ridge: lambda must be nonnegative");

    const Vector state_mean = states.colwise().mean().transpose();
    const Vector target_mean = targets.colwise().mean().transpose();
    const Matrix centered = states.rowwise() - state_mean.transpose();
    const Matrix centered_targets = targets.rowwise() - target_mean.transpose();

    Matrix gram = Matrix::Zero(states.cols(), states.cols());
    gram.selfadjointView<Eigen::Lower>().rankUpdate(centered.transpose());
    gram = gram.selfadjointView<Eigen::Lower>();
    gram.diagonal().array() += lambda;
    const Matrix rhs = centered.transpose() * centered_targets; // n x K

    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
        const double trace = gram.trace();
        if (!(trace > 0.0)) throw singular_system("fit_ridge: state Gram matrix is zero");
        gram.diagonal().array() += 1e-10 * trace;
        llt.compute(gram);
        if (llt.info() != Eigen::Success) throw singular_system("fit_ridge: Gram matrix factorization failed");
    } else if (!(gram.trace() > 0.0)) {
        throw singular_system("fit_ridge: state Gram matrix is zero");
    }

    RidgeReadout readout;
    readout.weights = llt.solve(rhs).transpose();
    readout.intercept = target_mean - readout.weights * state_mean;
    return readout;
}

// ---------------------------------------------------------------- classifier

/// Random Fourier features approximating a Gaussian kernel exp(-gamma |h - h'|^2).
/// The lifted vector keeps the raw state in front: (h, cos(omega h + phase)).
struct RandomFeatures {
    Matrix omega; // D x n
    Vector phase; // D

    Index lifted_size() const { return omega.cols() + omega.rows(); }

    Vector lift(const Vector& h) const {
        Vector z(lifted_size());
        z.head(h.size()) = h;
        z.tail(omega.rows()) = (omega * h + phase).array().cos().matrix();
        return z;
    }

    Matrix lift_rows(const Matrix& x) const {
        Matrix z(x.rows(), lifted_size());
        z.leftCols(x.cols()) = x;
        Matrix proj = x * omega.transpose();
        proj.rowwise() += phase.transpose();
        z.rightCols(omega.rows()) = proj.array().cos().matrix();
        return z;
    }

    friend bool operator==(const RandomFeatures&, const RandomFeatures&) = default;
};

struct LinearClassifier {
    Matrix weights;           // classes x (n, or lifted size when features are set)
    Vector biases;            // classes
    std::vector<int> classes; // ascending
    std::optional<RandomFeatures> features;
    double training_accuracy = 1.0;

    Vector scores(const Vector& h) const {
        if (features) return weights * features->lift(h) + biases;
        return weights * h + biases;
    }

    int predict(const Vector& h) const {
        if (classes.size() == 1) return classes.front();
        const Vector s = scores(h);
        Index best = 0;
        for (Index k = 1; k < s.size(); ++k)
            if (s(k) > s(best)) best = k; // strict: ties keep the lowest label
        return classes[std::size_t(best)];
    }

    static LinearClassifier constant(int label, Index n) {
        LinearClassifier c;
        c.weights = Matrix::Zero(1, n);
        c.biases = Vector::Zero(1);
        c.classes = {label};
        return c;
    }
};

struct SvmOptions {
    double tolerance = 1e-5;
    int max_epochs = 10'000;
    int random_features = 0;  // 0: plain linear classifier on the state
    double gamma_scale = 1.0; // kernel width relative to 1 / (n * variance of the training states)
    std::uint64_t feature_seed = 0;
};

/// Draws the random feature map for states like `x` (rows are samples).
inline RandomFeatures make_random_features(const Matrix& x, int count, double gamma_scale, std::uint64_t seed) {
    detail::require(count > 0, "random features: count must be positive");
    detail::require(gamma_scale > 0.0 && std::isfinite(gamma_scale), "random features: gamma_scale must be positive");
    const double mean = x.mean();
    const double variance = (x.array() - mean).square().mean();
    const double gamma = gamma_scale / (double(x.cols()) * (variance > 0.0 ? variance : 1.0));
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 * gamma));
    RandomFeatures f;
    f.omega.resize(count, x.cols());
    for (Index c = 0; c < f.omega.cols(); ++c)
        for (Index r = 0; r < f.omega.rows(); ++r) f.omega(r, c) = normal(rng);
    f.phase.resize(count);
    for (Index r = 0; r < count; ++r) f.phase(r) = uniform_real(rng, 0.0, 2.0 * 3.141592653589793);
    return f;
}

namespace detail {

struct BinarySvm {
    Vector w; // n
    double bias = 0.0;
};

/// Dual coordinate descent for the L1-loss linear SVM with a bias feature of
/// value 1. Rows of `x` are distinct samples; `upper` holds C times the
/// multiplicity of each row.
inline BinarySvm train_binary_svm(const Matrix& x, const Vector& y, const Vector& upper, const SvmOptions& opt) {
    const Index count = x.rows();
    const Index n = x.cols();
    const Matrix samples = x.transpose(); // one contiguous column per sample
    Vector w = Vector::Zero(n);
    double wb = 0.0;
    Vector alpha = Vector::Zero(count);
    Vector qd = x.rowwise().squaredNorm().array() + 1.0;

    std::vector<Index> index(static_cast<std::size_t>(count));
    std::iota(index.begin(), index.end(), Index(0));
    Rng rng(0x5eed5eedULL);
    Index active = count;
    double pg_max_old = std::numeric_limits<double>::infinity();
    double pg_min_old = -std::numeric_limits<double>::infinity();

    for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
        double pg_max_new = -std::numeric_limits<double>::infinity();
        double pg_min_new = std::numeric_limits<double>::infinity();
        for (Index s = 0; s < active; ++s) {
            const Index j = s + Index(rng() % std::uint64_t(active - s));
            std::swap(index[std::size_t(s)], index[std::size_t(j)]);
        }
        for (Index s = 0; s < active; ++s) {
            const Index i = index[std::size_t(s)];
            const double yi = y(i);
            const double g = yi * (samples.col(i).dot(w) + wb) - 1.0;
            double pg = 0.0;
            if (alpha(i) == 0.0) {
                if (g > pg_max_old) {
                    --active;
                    std::swap(index[std::size_t(s)], index[std::size_t(active)]);
                    --s;
                    continue;
                }
                if (g < 0.0) pg = g;
            } else if (alpha(i) == upper(i)) {
                if (g < pg_min_old) {
                    --active;
                    std::swap(index[std::size_t(s)], index[std::size_t(active)]);
                    --s;
                    continue;
                }
                if (g > 0.0) pg = g;
            } else {
                pg = g;
            }
            pg_max_new = std::max(pg_max_new, pg);
            pg_min_new = std::min(pg_min_new, pg);
            if (std::abs(pg) > 1e-12) {
                const double old = alpha(i);
                alpha(i) = std::min(std::max(old - g / qd(i), 0.0), upper(i));
                const double delta = (alpha(i) - old) * yi;
                w.noalias() += delta * samples.col(i);
                wb += delta;
            }
        }
        if (pg_max_new - pg_min_new <= opt.tolerance) {
            if (active == count) break;
            // re-check the full set before declaring convergence
            active = count;
            pg_max_old = std::numeric_limits<double>::infinity();
            pg_min_old = -std::numeric_limits<double>::infinity();
            continue;
        }
        pg_max_old = pg_max_new > 0.0 ? pg_max_new : std::numeric_limits<double>::infinity();
        pg_min_old = pg_min_new < 0.0 ? pg_min_new : -std::numeric_limits<double>::infinity();
    }
    return {w, wb};
}

} // namespace detail

/// One-vs-rest linear SVM (hinge loss, squared L2 regularizer, bias feature).
inline LinearClassifier fit_classifier(const Matrix& states, std::span<const int> labels, double C,
                                       const SvmOptions& options = {}) {
    detail::require(states.rows() >= 1, "fit_classifier: need at least one sample");
    detail::require(Index(labels.size()) == states.rows(), "fit_classifier: labels and states differ in length");
    detail::require_finite(C, "C");
    detail::require(C > 0.0, "fit_classifier: C must be positive");

    std::vector<int> classes(labels.begin(), labels.end());
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    if (classes.size() == 1) return LinearClassifier::constant(classes.front(), states.cols());

    // Merge identical (state, label) samples; the merged box bound is C * multiplicity.
    const Index n = states.cols();
    std::unordered_map<std::string, Index> seen;
    std::vector<Index> unique_rows;
    std::vector<int> unique_labels;
    std::vector<double> multiplicity;
    std::string key(std::size_t(n) * sizeof(double) + sizeof(int), '\0');
    for (Index t = 0; t < states.rows(); ++t) {
        for (Index k = 0; k < n; ++k) {
            const double v = states(t, k);
            std::memcpy(key.data() + std::size_t(k) * sizeof(double), &v, sizeof(double));
        }
        std::memcpy(key.data() + std::size_t(n) * sizeof(double), &labels[std::size_t(t)], sizeof(int));
        auto [it, inserted] = seen.emplace(key, Index(unique_rows.size()));
        if (inserted) {
            unique_rows.push_back(t);
            unique_labels.push_back(labels[std::size_t(t)]);
            multiplicity.push_back(1.0);
        } else {
            multiplicity[std::size_t(it->second)] += 1.0;
        }
    }
    const Index count = Index(unique_rows.size());
    Matrix x(count, n);
    Vector upper(count);
    for (Index i = 0; i < count; ++i) {
        x.row(i) = states.row(unique_rows[std::size_t(i)]);
        upper(i) = C * multiplicity[std::size_t(i)];
    }

    LinearClassifier model;
    model.classes = classes;
    if (options.random_features > 0) {
        model.features = make_random_features(x, options.random_features, options.gamma_scale, options.feature_seed);
        x = model.features->lift_rows(x);
    }
    model.weights.resize(Index(classes.size()), x.cols());
    model.biases.resize(Index(classes.size()));
    const std::size_t trained = classes.size() == 2 ? 1 : classes.size();
    for (std::size_t k = 0; k < trained; ++k) {
        Vector y(count);
        for (Index i = 0; i < count; ++i) y(i) = unique_labels[std::size_t(i)] == classes[k] ? 1.0 : -1.0;
        const detail::BinarySvm svm = detail::train_binary_svm(x, y, upper, options);
        model.weights.row(Index(k)) = svm.w.transpose();
        model.biases(Index(k)) = svm.bias;
    }
    if (classes.size() == 2) {
        // the rest-vs-one problem of the second class is the exact negation
        model.weights.row(1) = -model.weights.row(0);
        model.biases(1) = -model.biases(0);
    }

    Index correct = 0;
    for (Index t = 0; t < states.rows(); ++t)
        if (model.predict(row_vector(states, t)) == labels[std::size_t(t)]) ++correct;
    model.training_accuracy = double(correct) / double(states.rows());
    return model;
}

// ---------------------------------------------------------------- write labels

/// 1 exactly at the first occurrence of every nonzero address.
inline std::vector<int> derive_write_labels(std::span<const int> addresses) {
    std::vector<int> labels(addresses.size(), 0);
    std::vector<int> seen;
    for (std::size_t t = 0; t < addresses.size(); ++t) {
        const int a = addresses[t];
        if (a > 0 && std::find(seen.begin(), seen.end(), a) == seen.end()) {
            labels[t] = 1;
            seen.push_back(a);
        }
    }
    return labels;
}

// ---------------------------------------------------------------- association metric

struct AssociationMetric {
    Matrix alpha; // tau x tau, >= 0
    double theta = 0.0;
    DelayOperatorBank bank;

    // solver diagnostics, not part of the model
    double objective = 0.0;
    double duality_gap = 0.0;
    long iterations = 0;

    /// Rows Phi_t h, stacked tau x m.
    Matrix project(const Vector& h) const {
        Matrix p(Index(bank.size()), bank.operators.empty() ? 0 : bank.operators.front().rows());
        for (std::size_t t = 0; t < bank.size(); ++t) p.row(Index(t)) = (bank.operators[t] * h).transpose();
        return p;
    }

    double distance_projected(const Matrix& ph, const Matrix& pm) const {
        double d = 0.0;
        for (Index t = 0; t < alpha.rows(); ++t)
            for (Index u = 0; u < alpha.cols(); ++u)
                if (alpha(t, u) != 0.0) d += alpha(t, u) * (ph.row(t) - pm.row(u)).squaredNorm();
        return d;
    }

    double squared_distance(const Vector& h, const Vector& m) const {
        return distance_projected(project(h), project(m));
    }
};

struct AssociationTriple {
    Vector h;
    Vector m;
    int z = 1; // +1: should be read, -1: should not
};

/// c_{t,t'} = |Phi_t h - Phi_t' m|^2, flattened row-major into tau^2 entries.
inline Vector association_costs(const Matrix& ph, const Matrix& pm) {
    const Index tau = ph.rows();
    Vector c(tau * tau);
    for (Index t = 0; t < tau; ++t)
        for (Index u = 0; u < tau; ++u) c(t * tau + u) = (ph.row(t) - pm.row(u)).squaredNorm();
    return c;
}

struct AssociationLpSolution {
    Vector alpha; // tau^2, row-major
    double theta = 0.0;
    Vector slack; // per triple
    double primal_objective = 0.0;
    double dual_objective = 0.0;
    long iterations = 0;
};

/// Solves  min sum_i s_i + l1 * sum_k alpha_k
///         s.t. s_i >= z_i (c_i' alpha - theta) + 1,  s, alpha, theta >= 0
/// through its dual  max sum_i mu_i  s.t.  -sum_i z_i c_ik mu_i <= l1 (all k),
/// sum_i z_i mu_i <= 0,  0 <= mu <= 1.  Primal values are the dual's multipliers.
inline AssociationLpSolution solve_association_lp(const Matrix& costs, std::span<const int> z, double l1_weight) {
    const Index count = costs.rows();
    const Index k_count = costs.cols();
    detail::require(count >= 1, "association LP: need at least one triple");
    detail::require(Index(z.size()) == count, "association LP: label count mismatch");
    detail::require(l1_weight >= 0.0 && std::isfinite(l1_weight), "association LP: l1_weight must be >= 0");

    Matrix A(k_count + 1, count);
    for (Index i = 0; i < count; ++i) {
        const double zi = z[std::size_t(i)];
        detail::require(zi == 1.0 || zi == -1.0, "association LP: labels must be +1 or -1");
        A.col(i).head(k_count) = -zi * costs.row(i).transpose();
        A(k_count, i) = zi;
    }
    Vector b = Vector::Constant(k_count + 1, l1_weight);
    b(k_count) = 0.0;
    const BoundedLpResult dual =
        solve_bounded_lp(A, b, Vector::Ones(count), Vector::Ones(count));

    AssociationLpSolution sol;
    sol.alpha = dual.duals.head(k_count).cwiseMax(0.0);
    sol.theta = std::max(0.0, dual.duals(k_count));
    sol.slack.resize(count);
    for (Index i = 0; i < count; ++i) {
        const double d2 = costs.row(i).dot(sol.alpha);
        sol.slack(i) = std::max(0.0, 1.0 + z[std::size_t(i)] * (d2 - sol.theta));
    }
    sol.primal_objective = sol.slack.sum() + l1_weight * sol.alpha.sum();
    sol.dual_objective = dual.objective;
    sol.iterations = dual.iterations;
    return sol;
}

inline constexpr double association_gap_tolerance = 1e-6;

inline AssociationMetric fit_association_metric_costs(const Matrix& costs, std::span<const int> z,
                                                      const DelayOperatorBank& bank, double l1_weight) {
    const Index tau = Index(bank.size());
    detail::require(costs.cols() == tau * tau, "fit_association_metric: cost width must be tau^2");
    const AssociationLpSolution sol = solve_association_lp(costs, z, l1_weight);

    AssociationMetric metric;
    metric.bank = bank;
    metric.alpha = Matrix(tau, tau);
    for (Index t = 0; t < tau; ++t)
        for (Index u = 0; u < tau; ++u) metric.alpha(t, u) = sol.alpha(t * tau + u);
    metric.theta = sol.theta;
    metric.objective = sol.primal_objective;
    metric.duality_gap = std::abs(sol.primal_objective - sol.dual_objective);
    metric.iterations = sol.iterations;
    if (metric.duality_gap > association_gap_tolerance * (1.0 + std::abs(sol.primal_objective))) {
        std::ostringstream msg;
        msg << "fit_association_metric: duality gap " << metric.duality_gap << " after " << sol.iterations
            << " simplex iterations (primal " << sol.primal_objective << ", dual " << sol.dual_objective << ")";
        throw solver_failure(msg.str());
    }
    return metric;
}

inline AssociationMetric fit_association_metric(std::span<const AssociationTriple> triples,
                                                const DelayOperatorBank& bank, double l1_weight) {
    detail::require(!triples.empty(), "fit_association_metric: need at least one triple");
    const Index tau = Index(bank.size());
    AssociationMetric projector;
    projector.bank = bank;
    Matrix costs(Index(triples.size()), tau * tau);
    std::vector<int> z;
    z.reserve(triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i) {
        costs.row(Index(i)) =
            association_costs(projector.project(triples[i].h), projector.project(triples[i].m)).transpose();
        z.push_back(triples[i].z);
    }
    return fit_association_metric_costs(costs, z, bank, l1_weight);
}

} // namespace rmm
