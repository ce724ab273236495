#pragma once

// Dense bounded-variable revised simplex for
//
//     maximize c'x  subject to  A x <= b,  0 <= x <= u,   with b >= 0.
//
// The slack basis is feasible because b >= 0, so no phase one is needed.
// Pivoting follows Bland's rule (lowest eligible index enters, lowest index
// leaves among ratio ties), which rules out cycling on degenerate problems.

#include "rmm/common.hpp"

#include <Eigen/LU>

#include <limits>
#include <sstream>

namespace rmm {

struct BoundedLpResult {
    Vector x;         // primal solution (structural variables)
    Vector duals;     // simplex multipliers y, one per row, y >= 0 at optimality
    double objective = 0.0;
    long iterations = 0;
};

struct BoundedLpOptions {
    double tolerance = 1e-9;
    long max_iterations = 2'000'000;
    int refactor_interval = 64;
};

inline BoundedLpResult solve_bounded_lp(const Matrix& A, const Vector& b, const Vector& c, const Vector& upper,
                                        const BoundedLpOptions& options = {}) {
    const Index rows = A.rows();
    const Index cols = A.cols();
    detail::require(b.size() == rows && c.size() == cols && upper.size() == cols, "solve_bounded_lp: size mismatch");
    detail::require((b.array() >= 0.0).all(), "solve_bounded_lp: right-hand side must be nonnegative");
    detail::require((upper.array() >= 0.0).all(), "solve_bounded_lp: upper bounds must be nonnegative");

    // Variables 0..cols-1 are structural, cols..cols+rows-1 are slacks (unbounded above).
    const Index total = cols + rows;
    const double inf = std::numeric_limits<double>::infinity();
    const double tol = options.tolerance;
    auto column = [&](Index j) -> Vector {
        if (j < cols) return A.col(j);
        Vector e = Vector::Zero(rows);
        e(j - cols) = 1.0;
        return e;
    };
    auto cost = [&](Index j) { return j < cols ? c(j) : 0.0; };
    auto bound = [&](Index j) { return j < cols ? upper(j) : inf; };

    std::vector<Index> basis(static_cast<std::size_t>(rows));
    std::vector<Index> position(std::size_t(total), -1); // row of a basic variable, -1 if nonbasic
    std::vector<char> at_upper(std::size_t(total), 0);
    for (Index r = 0; r < rows; ++r) {
        basis[std::size_t(r)] = cols + r;
        position[std::size_t(cols + r)] = r;
    }
    Matrix basis_inverse = Matrix::Identity(rows, rows);
    Vector xb = b;

    auto refactor = [&] {
        Matrix B(rows, rows);
        for (Index r = 0; r < rows; ++r) B.col(r) = column(basis[std::size_t(r)]);
        Eigen::PartialPivLU<Matrix> lu(B);
        basis_inverse = lu.inverse();
        Vector rhs = b;
        for (Index j = 0; j < cols; ++j)
            if (at_upper[std::size_t(j)]) rhs -= A.col(j) * upper(j);
        xb = basis_inverse * rhs;
    };

    long iterations = 0;
    while (true) {
        if (iterations >= options.max_iterations) {
            std::ostringstream msg;
            msg << "simplex: iteration limit " << options.max_iterations << " reached";
            throw solver_failure(msg.str());
        }
        Vector cb(rows);
        for (Index r = 0; r < rows; ++r) cb(r) = cost(basis[std::size_t(r)]);
        const Vector y = basis_inverse.transpose() * cb;

        // Bland pricing: first improvable nonbasic variable.
        Index entering = -1;
        double direction = 0.0; // +1 increase from lower bound, -1 decrease from upper bound
        for (Index j = 0; j < total && entering < 0; ++j) {
            if (position[std::size_t(j)] >= 0) continue;
            const double reduced = j < cols ? c(j) - y.dot(A.col(j)) : -y(j - cols);
            if (!at_upper[std::size_t(j)] && reduced > tol && bound(j) > 0.0) {
                entering = j;
                direction = 1.0;
            } else if (at_upper[std::size_t(j)] && reduced < -tol) {
                entering = j;
                direction = -1.0;
            }
        }
        if (entering < 0) {
            BoundedLpResult result;
            result.x = Vector::Zero(cols);
            for (Index j = 0; j < cols; ++j)
                if (at_upper[std::size_t(j)]) result.x(j) = upper(j);
            for (Index r = 0; r < rows; ++r)
                if (basis[std::size_t(r)] < cols) result.x(basis[std::size_t(r)]) = xb(r);
            result.duals = y;
            result.objective = c.dot(result.x);
            result.iterations = iterations;
            return result;
        }

        // x_B(t) = x_B - direction * t * d
        const Vector d = basis_inverse * column(entering);
        double step = bound(entering);
        Index leaving_row = -1;
        bool leaving_to_upper = false;
        for (Index r = 0; r < rows; ++r) {
            const double rate = direction * d(r);
            const Index var = basis[std::size_t(r)];
            double limit;
            bool to_upper;
            if (rate > tol) {
                limit = std::max(0.0, xb(r)) / rate;
                to_upper = false;
            } else if (rate < -tol && std::isfinite(bound(var))) {
                limit = std::max(0.0, bound(var) - xb(r)) / -rate;
                to_upper = true;
            } else {
                continue;
            }
            const bool tie_wins =
                limit <= step + 1e-12 && leaving_row >= 0 && var < basis[std::size_t(leaving_row)];
            if (limit < step - 1e-12 || tie_wins) {
                step = limit;
                leaving_row = r;
                leaving_to_upper = to_upper;
            }
        }
        if (!std::isfinite(step)) throw solver_failure("simplex: problem is unbounded");
        ++iterations;

        xb -= direction * step * d;
        if (leaving_row < 0) {
            // bound flip, basis unchanged
            at_upper[std::size_t(entering)] = direction > 0.0;
            continue;
        }

        const Index leaving = basis[std::size_t(leaving_row)];
        const double entering_value = direction > 0.0 ? step : bound(entering) - step;
        basis[std::size_t(leaving_row)] = entering;
        position[std::size_t(entering)] = leaving_row;
        position[std::size_t(leaving)] = -1;
        at_upper[std::size_t(leaving)] = leaving_to_upper;
        at_upper[std::size_t(entering)] = 0;
        xb(leaving_row) = entering_value;

        // Product-form update of the basis inverse.
        const double pivot = d(leaving_row);
        const Vector pivot_row = basis_inverse.row(leaving_row) / pivot;
        for (Index r = 0; r < rows; ++r)
            if (r != leaving_row) basis_inverse.row(r) -= d(r) * pivot_row.transpose();
        basis_inverse.row(leaving_row) = pivot_row.transpose();

        if (iterations % options.refactor_interval == 0) refactor();
    }
}

} // namespace rmm
