#pragma once

// Seeded generators for the six benchmark tasks. Each generator is a pure
// function of its seed and emits an Episode with teacher addresses.

#include "rmm/common.hpp"
#include "rmm/machines.hpp"
#include "rmm/memory_machine.hpp"

#include <array>
#include <numbers>
#include <optional>
#include <string>

namespace rmm {

enum class TaskName { latch, copy, repeat_copy, assoc_recall, signal_copy, fsm };

inline constexpr std::array<TaskName, 6> all_tasks = {TaskName::latch,        TaskName::copy,
                                                      TaskName::repeat_copy,  TaskName::assoc_recall,
                                                      TaskName::signal_copy,  TaskName::fsm};

inline const char* to_string(TaskName t) {
    switch (t) {
    case TaskName::latch: return "latch";
    case TaskName::copy: return "copy";
    case TaskName::repeat_copy: return "repeat_copy";
    case TaskName::assoc_recall: return "assoc_recall";
    case TaskName::signal_copy: return "signal_copy";
    case TaskName::fsm: return "fsm";
    }
    return "?";
}

inline TaskName parse_task(std::string s) {
    for (char& c : s)
        if (c == '-') c = '_';
    for (TaskName t : all_tasks)
        if (s == to_string(t)) return t;
    if (s == "associative_recall") return TaskName::assoc_recall;
    throw invalid_argument("unknown task '" + s + "'");
}

struct TaskSpec {
    TaskName name = TaskName::latch;
    int input_dim = 1;
    int output_dim = 1;
    int address_count = 1;
    int horizon = 1;   // longest lag the memory must bridge, in steps; scales the LDN window range
    int neurons = 64;  // reservoir size used by the benchmark
};

inline TaskSpec task_spec(TaskName name) {
    switch (name) {
    case TaskName::latch: return {name, 1, 1, 2, 200, 64};
    case TaskName::copy: return {name, 9, 8, 20, 22, 256};
    case TaskName::repeat_copy: return {name, 9, 8, 10, 11, 256};
    case TaskName::assoc_recall: return {name, 7, 6, 5, 25, 256};
    case TaskName::signal_copy: return {name, 2, 1, 2, 256, 64};
    case TaskName::fsm: return {name, 2, 2, 4, 5, 64};
    }
    throw invalid_argument("unknown task");
}

namespace detail {

inline Matrix random_bits(Rng& rng, Index rows, Index cols) {
    Matrix bits(rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) bits(r, c) = double(rng() >> 63);
    return bits;
}

inline Episode empty_episode(Index length, Index m, Index k) {
    Episode ep;
    ep.inputs = Matrix::Zero(length, m);
    ep.outputs = Matrix::Zero(length, k);
    ep.addresses.assign(std::size_t(length), 0);
    return ep;
}

} // namespace detail

// ---------------------------------------------------------------- latch

/// Three spikes at distinct positions; the output toggles at each spike.
inline Episode latch_episode(int length, std::span<const int> spikes) {
    Episode ep = detail::empty_episode(length, 1, 1);
    for (int s : spikes) {
        detail::require(s >= 0 && s < length, "latch: spike outside the sequence");
        ep.inputs(s, 0) = 1.0;
    }
    double level = 0.0;
    for (Index t = 0; t < length; ++t) {
        if (ep.inputs(t, 0) > 0.0) level = 1.0 - level;
        ep.outputs(t, 0) = level;
        ep.addresses[std::size_t(t)] = int(level) + 1;
    }
    return ep;
}

inline Episode gen_latch(std::uint64_t seed) {
    Rng rng(seed);
    const int length = uniform_int(rng, 9, 200);
    std::vector<int> spikes;
    while (spikes.size() < 3) {
        const int s = uniform_int(rng, 0, length - 1);
        if (std::find(spikes.begin(), spikes.end(), s) == spikes.end()) spikes.push_back(s);
    }
    return latch_episode(length, spikes);
}

// ---------------------------------------------------------------- copy

/// Layout: marker, T payload steps, marker, T response steps. The output
/// repeats the payload while it is presented and again in the response.
inline Episode copy_episode(const Matrix& payload) {
    const Index T = payload.rows();
    Episode ep = detail::empty_episode(2 * T + 2, 9, 8);
    ep.inputs(0, 8) = 1.0;
    ep.inputs(T + 1, 8) = 1.0;
    for (Index k = 0; k < T; ++k) {
        ep.inputs.row(1 + k).head(8) = payload.row(k);
        ep.outputs.row(1 + k) = payload.row(k);
        ep.outputs.row(T + 2 + k) = payload.row(k);
        ep.addresses[std::size_t(1 + k)] = int(k) + 1;
        ep.addresses[std::size_t(T + 2 + k)] = int(k) + 1;
    }
    return ep;
}

inline Episode gen_copy(std::uint64_t seed) {
    Rng rng(seed);
    const int T = uniform_int(rng, 1, 20);
    return copy_episode(detail::random_bits(rng, T, 8));
}

// ---------------------------------------------------------------- repeat copy

/// Layout: (R + 1) blocks of a marker followed by T steps; the payload is
/// presented in block 0 and reproduced in every block.
inline Episode repeat_copy_episode(const Matrix& payload, int repeats) {
    const Index T = payload.rows();
    Episode ep = detail::empty_episode((repeats + 1) * (T + 1), 9, 8);
    for (int b = 0; b <= repeats; ++b) {
        const Index start = b * (T + 1);
        ep.inputs(start, 8) = 1.0;
        for (Index k = 0; k < T; ++k) {
            if (b == 0) ep.inputs.row(start + 1 + k).head(8) = payload.row(k);
            ep.outputs.row(start + 1 + k) = payload.row(k);
            ep.addresses[std::size_t(start + 1 + k)] = int(k) + 1;
        }
    }
    return ep;
}

inline Episode gen_repeat_copy(std::uint64_t seed) {
    Rng rng(seed);
    const int T = uniform_int(rng, 1, 10);
    const int repeats = uniform_int(rng, 1, 10);
    return repeat_copy_episode(detail::random_bits(rng, T, 8), repeats);
}

// ---------------------------------------------------------------- associative recall

/// Layout: B blocks of 3 steps, a marker on channel 7, the queried block j
/// (1-based), then block j+1 as the output. Block i >= 2 is stored under
/// address i-1 at its last step; the last query step reads address j.
inline Episode assoc_recall_episode(const std::vector<Matrix>& blocks, int query) {
    const int B = int(blocks.size());
    detail::require(B >= 2 && query >= 1 && query < B, "assoc_recall: query must name a block with a successor");
    Episode ep = detail::empty_episode(3 * B + 7, 7, 6);
    for (int i = 0; i < B; ++i) {
        ep.inputs.block(3 * i, 0, 3, 6) = blocks[std::size_t(i)];
        if (i >= 1) ep.addresses[std::size_t(3 * i + 2)] = i;
    }
    ep.inputs(3 * B, 6) = 1.0;
    ep.inputs.block(3 * B + 1, 0, 3, 6) = blocks[std::size_t(query - 1)];
    ep.addresses[std::size_t(3 * B + 3)] = query;
    ep.outputs.block(3 * B + 4, 0, 3, 6) = blocks[std::size_t(query)];
    return ep;
}

inline Episode gen_assoc_recall(std::uint64_t seed) {
    Rng rng(seed);
    const int B = uniform_int(rng, 2, 6);
    std::vector<Matrix> blocks;
    for (int i = 0; i < B; ++i) blocks.push_back(detail::random_bits(rng, 3, 6));
    const int query = uniform_int(rng, 1, B - 1);
    return assoc_recall_episode(blocks, query);
}

// ---------------------------------------------------------------- signal copy

inline constexpr int signal_block = 256;
inline constexpr int signal_marker_length = 32;

/// Sum of three sinusoids with periods in [32, 128], scaled to peak 1 and
/// tapered by a Tukey window (taper fraction 0.5).
inline Vector random_wavelet(Rng& rng) {
    Vector w = Vector::Zero(signal_block);
    for (int s = 0; s < 3; ++s) {
        const double period = uniform_real(rng, 32.0, 128.0);
        const double phase = uniform_real(rng, 0.0, 2.0 * std::numbers::pi);
        for (int t = 0; t < signal_block; ++t) w(t) += std::sin(2.0 * std::numbers::pi * t / period + phase);
    }
    w /= w.cwiseAbs().maxCoeff();
    const double taper = 0.5 * (signal_block - 1);
    for (int t = 0; t < signal_block; ++t) {
        const double edge = std::min<double>(t, signal_block - 1 - t);
        if (edge < taper / 2.0) w(t) *= 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * edge / taper));
    }
    return w;
}

/// Marker 1 is one period of a sine, marker 2 one period of a raised cosine.
inline Vector marker_wavelet(int marker) {
    Vector w(signal_marker_length);
    for (int k = 0; k < signal_marker_length; ++k) {
        const double phase = 2.0 * std::numbers::pi * k / signal_marker_length;
        w(k) = marker == 1 ? std::sin(phase) : 0.5 * (1.0 - std::cos(phase));
    }
    return w;
}

/// markers[i] ends block i+1 (blocks are 1-based); markers[0] = 1, markers[1] = 2.
inline Episode signal_copy_episode(const Vector& wavelet_a, const Vector& wavelet_b, const std::vector<int>& markers) {
    const int B = int(markers.size()) + 1;
    detail::require(B >= 3 && markers[0] == 1 && markers[1] == 2, "signal_copy: invalid marker sequence");
    Episode ep = detail::empty_episode(Index(B) * signal_block, 2, 1);
    ep.inputs.col(0).segment(0, signal_block) = wavelet_a;
    ep.inputs.col(0).segment(signal_block, signal_block) = wavelet_b;
    for (int i = 1; i < B; ++i) {
        const int marker = markers[std::size_t(i - 1)];
        const Index end = Index(i) * signal_block;
        ep.inputs.col(1).segment(end - signal_marker_length, signal_marker_length) = marker_wavelet(marker);
        ep.addresses[std::size_t(end - 1)] = marker;
        if (i >= 2) ep.outputs.col(0).segment(end, signal_block) = marker == 1 ? wavelet_a : wavelet_b;
    }
    return ep;
}

inline Episode gen_signal_copy(std::uint64_t seed) {
    Rng rng(seed);
    const int B = 2 + uniform_int(rng, 1, 10);
    const Vector a = random_wavelet(rng);
    const Vector b = random_wavelet(rng);
    std::vector<int> markers = {1, 2};
    for (int i = 3; i < B; ++i) markers.push_back(uniform_int(rng, 1, 2));
    return signal_copy_episode(a, b, markers);
}

// ---------------------------------------------------------------- FSM

inline Episode fsm_episode(const MooreMachine& machine, std::span<const int> symbols) {
    const MooreTrace trace = moore_run(machine, symbols);
    Episode ep;
    ep.inputs = one_hot_sequence(symbols, machine.input_arity);
    ep.outputs = one_hot_sequence(trace.outputs, machine.output_arity);
    ep.addresses = trace.states;
    ep.initial_address = machine.q0;
    return ep;
}

inline constexpr int fsm_test_length = 256;

inline Episode gen_fsm_test_episode(const MooreMachine& machine, std::uint64_t seed, int length = fsm_test_length) {
    Rng rng(seed);
    std::vector<int> symbols(static_cast<std::size_t>(length));
    for (int& s : symbols) s = uniform_int(rng, 1, machine.input_arity);
    return fsm_episode(machine, symbols);
}

struct FsmTask {
    MooreMachine machine;
    std::vector<Episode> train;
    std::vector<Episode> test;
};

/// Training episodes enumerate every one-cycle sequence of a random machine;
/// test episodes are random sequences of length 256.
inline FsmTask gen_fsm_task(int L, std::uint64_t seed, int n_test = 10) {
    FsmTask task;
    task.machine = random_moore(L, 2, 2, derive_seed(seed, 0));
    for (const auto& symbols : one_cycle_training_sequences(task.machine))
        task.train.push_back(fsm_episode(task.machine, symbols));
    for (int i = 0; i < n_test; ++i)
        task.test.push_back(gen_fsm_test_episode(task.machine, derive_seed(seed, 1, i)));
    return task;
}

// ---------------------------------------------------------------- datasets

inline Episode gen_episode(TaskName task, std::uint64_t seed) {
    switch (task) {
    case TaskName::latch: return gen_latch(seed);
    case TaskName::copy: return gen_copy(seed);
    case TaskName::repeat_copy: return gen_repeat_copy(seed);
    case TaskName::assoc_recall: return gen_assoc_recall(seed);
    case TaskName::signal_copy: return gen_signal_copy(seed);
    case TaskName::fsm: break;
    }
    throw invalid_argument("gen_episode: FSM episodes need a machine, use gen_fsm_task");
}

struct Dataset {
    std::vector<Episode> train;
    std::vector<Episode> test;
    std::optional<MooreMachine> machine;
};

inline constexpr int default_train_size = 90;
inline constexpr int default_test_size = 10;

/// Train and test episodes come from disjoint seed streams. For FSM the
/// training set is the full one-cycle enumeration and n_train is ignored.
inline Dataset gen_dataset(TaskName task, int n_train, int n_test, std::uint64_t seed) {
    detail::require(n_train >= 0 && n_test >= 0, "gen_dataset: sizes must be nonnegative");
    Dataset data;
    if (task == TaskName::fsm) {
        FsmTask fsm = gen_fsm_task(task_spec(task).address_count, seed, n_test);
        data.train = std::move(fsm.train);
        data.test = std::move(fsm.test);
        data.machine = fsm.machine;
        return data;
    }
    for (int i = 0; i < n_train; ++i) data.train.push_back(gen_episode(task, derive_seed(seed, 0, i)));
    for (int i = 0; i < n_test; ++i) data.test.push_back(gen_episode(task, derive_seed(seed, 1, i)));
    return data;
}

} // namespace rmm
