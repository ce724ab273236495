#pragma once

// Moore machines: simulation, random generation, enumeration of the
// one-cycle training sequences, memory-cycle reduction and the constructive
// compilation of a Moore machine into a Heaviside recurrent network.
//
// States, input symbols and output symbols are 1-based throughout, matching
// the machine description file format.

#include "rmm/common.hpp"
#include "rmm/reservoir.hpp"

#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <unordered_map>

namespace rmm {

struct MooreMachine {
    int num_states = 1;   // L
    int input_arity = 1;  // m
    int output_arity = 1; // K
    std::vector<int> delta; // m x L, row-major by symbol: delta[(x-1)*L + (q-1)]
    std::vector<int> rho;   // L
    int q0 = 1;

    int next(int symbol, int state) const {
        return delta[std::size_t(symbol - 1) * num_states + std::size_t(state - 1)];
    }
    int output(int state) const { return rho[std::size_t(state - 1)]; }

    void validate() const {
        detail::require(num_states >= 1 && input_arity >= 1 && output_arity >= 1,
                        "machine arities must be positive");
        detail::require(delta.size() == std::size_t(num_states) * input_arity, "delta table has the wrong size");
        detail::require(rho.size() == std::size_t(num_states), "rho table has the wrong size");
        for (int q : delta) detail::require(q >= 1 && q <= num_states, "delta entry out of range");
        for (int y : rho) detail::require(y >= 1 && y <= output_arity, "rho entry out of range");
        detail::require(q0 >= 1 && q0 <= num_states, "start state out of range");
    }

    friend bool operator==(const MooreMachine&, const MooreMachine&) = default;
};

struct MooreTrace {
    std::vector<int> states;
    std::vector<int> outputs;
};

inline MooreTrace moore_run(const MooreMachine& machine, std::span<const int> inputs) {
    MooreTrace trace;
    trace.states.reserve(inputs.size());
    trace.outputs.reserve(inputs.size());
    int q = machine.q0;
    for (int x : inputs) {
        if (x < 1 || x > machine.input_arity) throw invalid_argument("moore_run: input symbol out of range");
        q = machine.next(x, q);
        trace.states.push_back(q);
        trace.outputs.push_back(machine.output(q));
    }
    return trace;
}

inline MooreMachine random_moore(int num_states, int input_arity, int output_arity, std::uint64_t seed) {
    detail::require(num_states >= 1 && input_arity >= 1 && output_arity >= 1, "machine arities must be positive");
    Rng rng(seed);
    MooreMachine machine;
    machine.num_states = num_states;
    machine.input_arity = input_arity;
    machine.output_arity = output_arity;
    machine.delta.resize(std::size_t(num_states) * input_arity);
    for (int& q : machine.delta) q = uniform_int(rng, 1, num_states);
    machine.rho.resize(std::size_t(num_states));
    for (int& y : machine.rho) y = uniform_int(rng, 1, output_arity);
    machine.q0 = uniform_int(rng, 1, num_states);
    return machine;
}

/// Largest machine for which the one-cycle enumeration is attempted.
inline constexpr int max_enumeration_states = 12;

/// All input sequences whose state path q_0, q_1, ... has no repeated state
/// before the last step and at most one repeat at the last step. The start
/// state q_0 takes part in the repeat check. Output is in lexicographic
/// order, shorter prefixes first.
inline std::vector<std::vector<int>> one_cycle_training_sequences(const MooreMachine& machine) {
    machine.validate();
    if (machine.num_states > max_enumeration_states)
        throw invalid_argument("one_cycle_training_sequences: machines with more than 12 states are not enumerated");

    std::vector<std::vector<int>> result;
    std::vector<char> visited(std::size_t(machine.num_states) + 1, 0);
    std::vector<int> prefix;

    auto descend = [&](auto&& self, int state) -> void {
        for (int x = 1; x <= machine.input_arity; ++x) {
            const int q = machine.next(x, state);
            prefix.push_back(x);
            result.push_back(prefix);
            if (!visited[std::size_t(q)]) {
                visited[std::size_t(q)] = 1;
                self(self, q);
                visited[std::size_t(q)] = 0;
            }
            prefix.pop_back();
        }
    };
    visited[std::size_t(machine.q0)] = 1;
    descend(descend, machine.q0);
    return result;
}

/// Time indices (0-based) kept by the memory-cycle reduction of a run with
/// addresses a_1..a_T and initial address a_0. The last-ending cycle is
/// removed first, starting from its earliest matching position.
inline std::vector<Index> cycle_reduce_indices(std::span<const int> addresses, int a0) {
    // positions[0] is the initial state, positions[k] the k-th kept step (1-based time)
    std::vector<Index> positions(addresses.size() + 1);
    for (std::size_t k = 0; k < positions.size(); ++k) positions[k] = Index(k);
    auto address_at = [&](Index time) { return time == 0 ? a0 : addresses[std::size_t(time - 1)]; };

    while (true) {
        std::unordered_map<int, std::size_t> first_seen;
        std::size_t cycle_start = 0, cycle_end = 0;
        bool found = false;
        for (std::size_t k = 0; k < positions.size(); ++k) {
            const int a = address_at(positions[k]);
            if (a <= 0) continue;
            auto [it, inserted] = first_seen.emplace(a, k);
            if (!inserted) {
                cycle_start = it->second;
                cycle_end = k;
                found = true;
            }
        }
        if (!found) break;
        positions.erase(positions.begin() + std::ptrdiff_t(cycle_start) + 1,
                        positions.begin() + std::ptrdiff_t(cycle_end) + 1);
    }

    std::vector<Index> kept;
    kept.reserve(positions.size() - 1);
    for (std::size_t k = 1; k < positions.size(); ++k) kept.push_back(positions[k] - 1);
    return kept;
}

/// Cycle-reduced version of a T x m input sequence.
inline Matrix cycle_reduce(const Matrix& inputs, std::span<const int> addresses, int a0) {
    if (Index(addresses.size()) != inputs.rows()) throw invalid_argument("cycle_reduce: length mismatch");
    const auto kept = cycle_reduce_indices(addresses, a0);
    Matrix reduced(Index(kept.size()), inputs.cols());
    for (std::size_t k = 0; k < kept.size(); ++k) reduced.row(Index(k)) = inputs.row(kept[k]);
    return reduced;
}

template <typename T>
std::vector<T> cycle_reduce(std::span<const T> inputs, std::span<const int> addresses, int a0) {
    if (addresses.size() != inputs.size()) throw invalid_argument("cycle_reduce: length mismatch");
    std::vector<T> reduced;
    for (Index k : cycle_reduce_indices(addresses, a0)) reduced.push_back(inputs[std::size_t(k)]);
    return reduced;
}

/// T x m one-hot encoding of 1-based symbols.
inline Matrix one_hot_sequence(std::span<const int> symbols, int arity) {
    Matrix out = Matrix::Zero(Index(symbols.size()), arity);
    for (std::size_t t = 0; t < symbols.size(); ++t) {
        const int s = symbols[t];
        if (s < 1 || s > arity) throw invalid_argument("one_hot_sequence: symbol out of range");
        out(Index(t), s - 1) = 1.0;
    }
    return out;
}

/// x_1, 0, x_2, 0, ..., x_T, 0: every input row followed by a zero row.
inline Matrix interleave_with_zeros(const Matrix& inputs) {
    Matrix out = Matrix::Zero(2 * inputs.rows(), inputs.cols());
    for (Index t = 0; t < inputs.rows(); ++t) out.row(2 * t) = inputs.row(t);
    return out;
}

/// Heaviside network simulating a Moore machine with one neuron per state
/// plus one neuron per (symbol, state) pair.
struct CompiledRnn {
    Reservoir network; // U, W, b, heaviside, h0 = e_{q0}
    Matrix readout;    // K x n

    Index size() const { return network.size(); }
};

inline CompiledRnn compile_fsm_to_rnn(const MooreMachine& machine) {
    machine.validate();
    const int L = machine.num_states;
    const int m = machine.input_arity;
    const int K = machine.output_arity;
    const Index n = Index(L) * (m + 1);

    CompiledRnn rnn;
    Reservoir& net = rnn.network;
    net.recurrent_weights = Matrix::Zero(n, n);
    net.input_weights = Matrix::Zero(n, m);
    net.bias.resize(n);
    net.initial_state = Vector::Zero(n);
    net.activation = Activation::heaviside;
    net.kind = ReservoirKind::random; // no dedicated construction tag

    // Neurons are 1-based below; neuron L*i + j encodes (symbol i, previous state j).
    for (int k = 1; k <= n; ++k) {
        net.bias(k - 1) = k <= L ? -0.5 : -1.5;
        if (k > L) {
            const int i = (k - 1) / L;
            const int j = (k - 1) % L + 1;
            net.input_weights(k - 1, i - 1) = 1.0;
            net.recurrent_weights(k - 1, j - 1) = 1.0;
            net.recurrent_weights(machine.next(i, j) - 1, k - 1) = 1.0;
        }
    }
    net.initial_state(machine.q0 - 1) = 1.0;

    rnn.readout = Matrix::Zero(K, n);
    for (int q = 1; q <= L; ++q) rnn.readout(machine.output(q) - 1, q - 1) = 1.0;
    return rnn;
}

struct CompiledTrace {
    Matrix states;  // (T+1) x n, row 0 is h0
    Matrix outputs; // T x K, row t-1 is V h_t
};

inline CompiledTrace run_compiled(const CompiledRnn& rnn, const Matrix& inputs) {
    CompiledTrace trace;
    trace.states.resize(inputs.rows() + 1, rnn.size());
    trace.states.row(0) = rnn.network.initial_state.transpose();
    trace.outputs.resize(inputs.rows(), rnn.readout.rows());
    Vector h = rnn.network.initial_state;
    for (Index t = 0; t < inputs.rows(); ++t) {
        h = reservoir_step(rnn.network, row_vector(inputs, t), h);
        trace.states.row(t + 1) = h.transpose();
        trace.outputs.row(t) = (rnn.readout * h).transpose();
    }
    return trace;
}

/// Checks h_{2t} = e_{q_t} and V h_{2t} = e_{y_t} for every step of `symbols`.
inline bool compiled_matches_machine(const MooreMachine& machine, const CompiledRnn& rnn,
                                     std::span<const int> symbols) {
    const Matrix inputs = interleave_with_zeros(one_hot_sequence(symbols, machine.input_arity));
    const CompiledTrace trace = run_compiled(rnn, inputs);
    const MooreTrace expected = moore_run(machine, symbols);
    for (std::size_t t = 1; t <= symbols.size(); ++t) {
        Vector state = Vector::Zero(rnn.size());
        state(expected.states[t - 1] - 1) = 1.0;
        Vector out = Vector::Zero(machine.output_arity);
        out(expected.outputs[t - 1] - 1) = 1.0;
        if (trace.states.row(Index(2 * t)).transpose() != state) return false;
        if (trace.outputs.row(Index(2 * t - 1)).transpose() != out) return false;
    }
    return true;
}

// Machine description file: "L m K q0", then m*L delta entries (row-major by
// symbol), then L rho entries, all whitespace separated.

inline MooreMachine parse_machine(std::istream& in) {
    MooreMachine machine;
    if (!(in >> machine.num_states >> machine.input_arity >> machine.output_arity >> machine.q0))
        throw io_error("machine file: malformed header");
    detail::require(machine.num_states >= 1 && machine.input_arity >= 1 && machine.output_arity >= 1,
                    "machine file: arities must be positive");
    machine.delta.resize(std::size_t(machine.num_states) * machine.input_arity);
    for (int& q : machine.delta)
        if (!(in >> q)) throw io_error("machine file: truncated delta table");
    machine.rho.resize(std::size_t(machine.num_states));
    for (int& y : machine.rho)
        if (!(in >> y)) throw io_error("machine file: truncated rho table");
    std::string trailing;
    if (in >> trailing) throw io_error("machine file: unexpected trailing token '" + trailing + "'");
    machine.validate();
    return machine;
}

inline MooreMachine parse_machine(const std::string& text) {
    std::istringstream in(text);
    return parse_machine(in);
}

inline void write_machine(std::ostream& out, const MooreMachine& machine) {
    out << machine.num_states << ' ' << machine.input_arity << ' ' << machine.output_arity << ' ' << machine.q0
        << '\n';
    for (int x = 1; x <= machine.input_arity; ++x) {
        for (int q = 1; q <= machine.num_states; ++q) out << (q > 1 ? " " : "") << machine.next(x, q);
        out << '\n';
    }
    for (int q = 1; q <= machine.num_states; ++q) out << (q > 1 ? " " : "") << machine.output(q);
    out << '\n';
}

} // namespace rmm
