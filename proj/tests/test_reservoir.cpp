#include <rmm/reservoir.hpp>

#include <gtest/gtest.h>

#include <numbers>

using namespace rmm;

namespace {

Matrix constant_input(Index length, Index m, double value) { return Matrix::Constant(length, m, value); }

// Straightforward simulation of x' = A x + B u kept apart from the reservoir code.
Matrix simulate_linear(const Matrix& a, const Vector& b, const Vector& u) {
    Matrix states(u.size(), a.rows());
    Vector x = Vector::Zero(a.rows());
    for (Index t = 0; t < u.size(); ++t) {
        x = a * x + b * u(t);
        states.row(t) = x.transpose();
    }
    return states;
}

} // namespace

TEST(RandomReservoir, SpectralRadiusIsNormalized) {
    const Reservoir res = make_random_reservoir(64, 1, 0.9, 1.0, 0);
    EXPECT_NEAR(spectral_radius(res.recurrent_weights), 0.9, 1e-9);
    EXPECT_EQ(res.activation, Activation::tanh);
    EXPECT_EQ(res.kind, ReservoirKind::random);
}

TEST(RandomReservoir, SameSeedSameMatrices) {
    const Reservoir a = make_random_reservoir(32, 3, 0.7, 0.5, 42);
    const Reservoir b = make_random_reservoir(32, 3, 0.7, 0.5, 42);
    const Reservoir c = make_random_reservoir(32, 3, 0.7, 0.5, 43);
    EXPECT_EQ(a.recurrent_weights, b.recurrent_weights);
    EXPECT_EQ(a.input_weights, b.input_weights);
    EXPECT_NE(a.recurrent_weights, c.recurrent_weights);
}

TEST(RandomReservoir, Shapes) {
    const Reservoir res = make_random_reservoir(4, 2, 0.5, 1.0, 1);
    EXPECT_EQ(res.input_weights.rows(), 4);
    EXPECT_EQ(res.input_weights.cols(), 2);
    EXPECT_EQ(res.recurrent_weights.rows(), 4);
    EXPECT_EQ(res.recurrent_weights.cols(), 4);
    EXPECT_EQ(res.initial_state, Vector::Zero(4));
}

TEST(RandomReservoir, RejectsInvalidArguments) {
    EXPECT_THROW(make_random_reservoir(0, 1, 0.9, 1.0, 0), invalid_argument);
    EXPECT_THROW(make_random_reservoir(8, 1, 1.0, 1.0, 0), invalid_argument);
    EXPECT_THROW(make_random_reservoir(8, 1, 0.9, 0.0, 0), invalid_argument);
    EXPECT_THROW(make_random_reservoir(8, 1, std::nan(""), 1.0, 0), invalid_argument);
}

TEST(CrjReservoir, RingAndJumpPattern) {
    const Reservoir res = make_crj_reservoir(6, 1, 0.7, 0.3, 3, 1.0, 5);
    const Matrix& w = res.recurrent_weights;
    int ring = 0, jumps = 0;
    for (Index i = 0; i < 6; ++i)
        for (Index j = 0; j < 6; ++j) {
            if (w(i, j) == 0.7) ++ring;
            if (w(i, j) == 0.3) ++jumps;
        }
    for (Index i = 0; i < 6; ++i) EXPECT_EQ(w((i + 1) % 6, i), 0.7);
    EXPECT_EQ(ring, 6);
    // 0 <-> 3 and 3 <-> 0 (closing), counted with multiplicity
    EXPECT_EQ(crj_jump_links(6, 3).size(), 4u);
    EXPECT_EQ(w(3, 0), 0.3);
    EXPECT_EQ(w(0, 3), 0.3);
    EXPECT_EQ(jumps, 2);
}

TEST(CrjReservoir, ZeroWeightsGiveZeroMatrix) {
    const Reservoir res = make_crj_reservoir(10, 2, 0.0, 0.0, 3, 1.0, 0);
    EXPECT_EQ(res.recurrent_weights, Matrix::Zero(10, 10));
}

TEST(CrjReservoir, InputSignsAreDeterministic) {
    const Reservoir a = make_crj_reservoir(16, 2, 0.5, 0.5, 4, 0.25, 9);
    const Reservoir b = make_crj_reservoir(16, 2, 0.5, 0.5, 4, 0.25, 9);
    EXPECT_EQ(a.input_weights, b.input_weights);
    EXPECT_TRUE((a.input_weights.array().abs() == 0.25).all());
}

TEST(CrjReservoir, RejectsBadJumpLength) {
    EXPECT_THROW(make_crj_reservoir(6, 1, 0.5, 0.5, 1, 1.0, 0), invalid_argument);
    EXPECT_THROW(make_crj_reservoir(6, 1, 0.5, 0.5, 6, 1.0, 0), invalid_argument);
    EXPECT_THROW(make_crj_reservoir(6, 1, 0.5, 0.5, 5, 1.0, 0), invalid_argument);
}

TEST(LdnReservoir, OrderOneContinuousSystem) {
    const auto [a, b] = ldn_continuous_system(1);
    EXPECT_EQ(a(0, 0), -1.0);
    EXPECT_EQ(b(0), 1.0);
    const Reservoir res = make_ldn_reservoir(1, 1, 4.0, 1.0, 0);
    EXPECT_NEAR(res.recurrent_weights(0, 0), std::exp(-0.25), 1e-14);
    EXPECT_NEAR(res.input_weights(0, 0), 1.0 - std::exp(-0.25), 1e-14);
}

TEST(LdnReservoir, ContinuousSystemMatchesIndexRule) {
    const auto [a, b] = ldn_continuous_system(4);
    for (int i = 0; i < 4; ++i) {
        EXPECT_EQ(b(i), (2 * i + 1) * std::pow(-1.0, i));
        for (int j = 0; j < 4; ++j) {
            const double expected = (2 * i + 1) * (i < j ? -1.0 : std::pow(-1.0, i - j + 1));
            EXPECT_EQ(a(i, j), expected) << i << "," << j;
        }
    }
}

TEST(LdnReservoir, BlockDiagonalPerChannel) {
    const Reservoir res = make_ldn_reservoir(8, 2, 20.0, 1.0, 0);
    ASSERT_EQ(res.size(), 16);
    EXPECT_EQ(res.recurrent_weights.block(0, 0, 8, 8), res.recurrent_weights.block(8, 8, 8, 8));
    EXPECT_EQ(res.recurrent_weights.block(0, 8, 8, 8), Matrix::Zero(8, 8));
    EXPECT_EQ(res.recurrent_weights.block(8, 0, 8, 8), Matrix::Zero(8, 8));
    EXPECT_EQ(res.input_weights.block(0, 1, 8, 1), Matrix::Zero(8, 1));
    EXPECT_EQ(res.input_weights.block(8, 0, 8, 1), Matrix::Zero(8, 1));
    EXPECT_EQ(res.activation, Activation::identity);
}

TEST(LdnReservoir, ConstantInputSteadyState) {
    const double window = 30.0;
    const Reservoir res = make_ldn_reservoir(10, 2, window, 1.0, 0);
    const Matrix states = run_reservoir(res, constant_input(Index(3 * window), 2, 1.0));
    const Vector h = states.bottomRows(1).transpose();
    for (int d = 0; d <= int(window); d += 3) {
        const Vector recon = delay_operator(res, d) * h;
        EXPECT_NEAR(recon(0), 1.0, 0.02) << "delay " << d;
        EXPECT_NEAR(recon(1), 1.0, 0.02) << "delay " << d;
    }
}

TEST(LdnReservoir, MatchesDirectLinearSimulation) {
    const Reservoir res = make_ldn_reservoir(6, 1, 12.0, 1.0, 0);
    Rng rng(3);
    Vector u(50);
    for (Index t = 0; t < u.size(); ++t) u(t) = uniform_real(rng, -1.0, 1.0);
    const Matrix expected = simulate_linear(res.recurrent_weights, res.input_weights.col(0), u);
    const Matrix states = run_reservoir(res, Matrix(u));
    EXPECT_LE((states - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReservoirStep, IdentityActivation) {
    Reservoir res;
    res.input_weights = Matrix::Identity(2, 2);
    res.recurrent_weights = Matrix::Zero(2, 2);
    res.bias = Vector::Zero(2);
    res.initial_state = Vector::Zero(2);
    res.activation = Activation::identity;
    EXPECT_EQ(reservoir_step(res, Vector::LinSpaced(2, 1.0, 2.0), Vector::Zero(2)), Vector::LinSpaced(2, 1.0, 2.0));
}

TEST(ReservoirStep, TanhOfZeroIsZero) {
    const Reservoir res = make_random_reservoir(5, 3, 0.8, 1.0, 0);
    EXPECT_EQ(reservoir_step(res, Vector::Zero(3), Vector::Zero(5)), Vector::Zero(5));
}

TEST(ReservoirStep, Heaviside) {
    Reservoir res;
    res.input_weights = Matrix::Zero(2, 1);
    res.recurrent_weights = Matrix::Zero(2, 2);
    res.bias = (Vector(2) << -0.5, 0.5).finished();
    res.activation = Activation::heaviside;
    EXPECT_EQ(reservoir_step(res, Vector::Zero(1), Vector::Zero(2)), (Vector(2) << 0.0, 1.0).finished());
}

TEST(ReservoirStep, DimensionMismatchThrows) {
    const Reservoir res = make_random_reservoir(5, 3, 0.8, 1.0, 0);
    EXPECT_THROW(reservoir_step(res, Vector::Zero(2), Vector::Zero(5)), invalid_argument);
    EXPECT_THROW(reservoir_step(res, Vector::Zero(3), Vector::Zero(4)), invalid_argument);
}

TEST(RunReservoir, SingleStepMatchesStep) {
    const Reservoir res = make_random_reservoir(7, 2, 0.8, 1.0, 11);
    const Matrix x = Matrix::Constant(1, 2, 0.3);
    EXPECT_EQ(run_reservoir(res, x).row(0).transpose(), reservoir_step(res, x.row(0).transpose(), res.initial_state));
}

TEST(RunReservoir, ConcatenationProperty) {
    Rng rng(17);
    for (ReservoirKind kind : {ReservoirKind::random, ReservoirKind::crj, ReservoirKind::ldn}) {
        const Reservoir res = kind == ReservoirKind::random ? make_random_reservoir(12, 2, 0.9, 1.0, 1)
                              : kind == ReservoirKind::crj  ? make_crj_reservoir(12, 2, 0.6, 0.4, 3, 1.0, 1)
                                                            : make_ldn_reservoir(6, 2, 10.0, 1.0, 1);
        Matrix xs(9, 2), ys(7, 2);
        for (Index i = 0; i < xs.size(); ++i) xs(i) = uniform_real(rng, -1.0, 1.0);
        for (Index i = 0; i < ys.size(); ++i) ys(i) = uniform_real(rng, -1.0, 1.0);
        Matrix both(16, 2);
        both << xs, ys;
        const Matrix whole = run_reservoir(res, both);
        const Matrix first = run_reservoir(res, xs);
        const Matrix second = run_reservoir_from(res, ys, first.bottomRows(1).transpose());
        EXPECT_EQ(whole.topRows(9), first);
        EXPECT_EQ(whole.bottomRows(7), second);
    }
}

TEST(RunReservoir, EmptyInputThrows) {
    const Reservoir res = make_random_reservoir(4, 1, 0.5, 1.0, 0);
    EXPECT_THROW(run_reservoir(res, Matrix(0, 1)), invalid_argument);
}

TEST(RunReservoir, EchoStatePropertyWashesOutInitialState) {
    Reservoir res = make_random_reservoir(64, 1, 0.9, 1.0, 4);
    Rng rng(8);
    Matrix x(400, 1);
    for (Index t = 0; t < x.rows(); ++t) x(t, 0) = uniform_real(rng, -1.0, 1.0);
    const Matrix a = run_reservoir(res, x);
    Vector start(64);
    for (Index i = 0; i < 64; ++i) start(i) = uniform_real(rng, -1.0, 1.0);
    const Matrix b = run_reservoir_from(res, x, start);
    EXPECT_LE((a.bottomRows(1) - b.bottomRows(1)).norm(), 1e-3);
}

// A one-step box cannot be resolved by 12 modes over a 40-step window, so
// the check is on where the bump sits and on its mass, not its height.
TEST(DelayOperators, ImpulseResponsePeaksAtTheDelay) {
    const Reservoir res = make_ldn_reservoir(12, 1, 40.0, 1.0, 0);
    Matrix x = Matrix::Zero(60, 1);
    x(0, 0) = 1.0;
    const Matrix states = run_reservoir(res, x);
    for (int d : {4, 8, 16, 24, 32}) {
        const Matrix phi = delay_operator(res, d);
        Vector recon(40);
        for (Index t = 0; t < 40; ++t) recon(t) = (phi * states.row(t).transpose())(0);
        Index peak = 0;
        recon.maxCoeff(&peak);
        EXPECT_LE(std::abs(peak - d), 1) << "delay " << d;
        EXPECT_NEAR(recon.sum(), 1.0, 0.1) << "delay " << d;
        for (Index t = 0; t < 40; ++t)
            if (std::abs(t - d) > 12) EXPECT_LE(std::abs(recon(t)), 0.1) << "delay " << d << " t " << t;
    }
}

TEST(DelayOperators, SinusoidReconstruction) {
    const Reservoir res = make_ldn_reservoir(16, 1, 48.0, 1.0, 0);
    const Index length = 600;
    Matrix x(length, 1);
    for (Index t = 0; t < length; ++t) x(t, 0) = std::sin(2.0 * std::numbers::pi * double(t) / 64.0);
    const Matrix states = run_reservoir(res, x);
    const Matrix phi = delay_operator(res, 24);
    double err = 0.0, power = 0.0;
    for (Index t = 200; t < length; ++t) {
        const double recon = (phi * states.row(t).transpose())(0);
        err += std::pow(recon - x(t - 24, 0), 2);
        power += std::pow(x(t - 24, 0), 2);
    }
    EXPECT_LE(std::sqrt(err / power), 0.05);
}

TEST(DelayOperators, ShapesAndErrors) {
    const Reservoir res = make_ldn_reservoir(5, 3, 10.0, 1.0, 0);
    const DelayOperatorBank bank = delay_operators(res, {0, 1, 5, 10});
    ASSERT_EQ(bank.size(), 4u);
    for (const Matrix& op : bank.operators) {
        EXPECT_EQ(op.rows(), 3);
        EXPECT_EQ(op.cols(), 15);
    }
    EXPECT_THROW(delay_operator(res, 11), invalid_argument);
    EXPECT_THROW(delay_operator(res, -1), invalid_argument);
    const Reservoir esn = make_random_reservoir(8, 1, 0.5, 1.0, 0);
    EXPECT_THROW(delay_operators(esn, {1}), unsupported_reservoir);
}

TEST(DelayOperators, SteadyStateAtDelayZero) {
    const Reservoir res = make_ldn_reservoir(12, 1, 25.0, 1.0, 0);
    const Matrix states = run_reservoir(res, constant_input(100, 1, 1.0));
    EXPECT_NEAR((delay_operator(res, 0) * states.bottomRows(1).transpose())(0), 1.0, 0.02);
}
