#pragma once

// Reservoir memory machines. The standard machine (Rmm) addresses a fixed
// set of L slots with a multiclass classifier; the first access to a slot
// writes the current state, every later access replaces the state with the
// stored one. The associative machine (Armm) writes on a binary classifier
// decision and reads whenever the current state is within theta of a stored
// state under a learned delay-space metric.

#include "rmm/common.hpp"
#include "rmm/reservoir.hpp"
#include "rmm/training.hpp"

#include <optional>
#include <span>
#include <variant>

namespace rmm {

/// One task instance. `initial_address` is the address of h0 under teacher
/// forcing; 0 means h0 is not stored.
struct Episode {
    Matrix inputs;              // T x m
    std::vector<int> addresses; // T
    Matrix outputs;             // T x K
    int initial_address = 0;

    Index length() const { return inputs.rows(); }

    void validate() const {
        detail::require(inputs.rows() == Index(addresses.size()) && outputs.rows() == inputs.rows(),
                        "episode: inputs, addresses and outputs must share one length");
        for (int a : addresses) detail::require(a >= 0, "episode: addresses must be nonnegative");
        detail::require(initial_address >= 0, "episode: initial address must be nonnegative");
    }

    friend bool operator==(const Episode& a, const Episode& b) {
        return a.inputs == b.inputs && a.addresses == b.addresses && a.outputs == b.outputs &&
               a.initial_address == b.initial_address;
    }
};

struct Memory {
    std::vector<Vector> slots;   // 1-based slot l lives at index l-1
    std::vector<char> written;
    int count = 0;               // associative write cursor
    std::vector<Matrix> projections; // associative only: delay projections of written slots

    Memory() = default;
    Memory(int L, Index n) : slots(std::size_t(L), Vector::Zero(n)), written(std::size_t(L), 0) {}

    int capacity() const { return int(slots.size()); }
};

struct Rmm {
    Reservoir reservoir;
    RidgeReadout readout;
    LinearClassifier address_classifier; // classes within {0..L}
    int L = 0;
};

struct Armm {
    Reservoir reservoir;
    RidgeReadout readout;
    LinearClassifier write_classifier; // classes within {0, 1}
    AssociationMetric metric;
    int L = 0;
};

struct EsnBaseline {
    Reservoir reservoir;
    RidgeReadout readout;
};

// ---------------------------------------------------------------- standard dynamics

namespace detail {

/// Applies address `a` to the pre-recall state and returns the post-recall state.
inline Vector apply_address(Memory& mem, int a, Vector h_tilde) {
    if (a < 0 || a > mem.capacity()) throw invalid_address("address " + std::to_string(a) + " outside 0.." +
                                                           std::to_string(mem.capacity()));
    if (a == 0) return h_tilde;
    const std::size_t slot = std::size_t(a - 1);
    if (mem.written[slot]) return mem.slots[slot];
    mem.slots[slot] = h_tilde;
    mem.written[slot] = 1;
    return h_tilde;
}

} // namespace detail

struct RmmStep {
    Vector h;
    Vector h_tilde;
    int address = 0;
};

inline RmmStep rmm_step(const Rmm& rmm, const Vector& x, const Vector& h, Memory& mem,
                        std::optional<int> forced_address = std::nullopt) {
    RmmStep step;
    step.h_tilde = reservoir_step(rmm.reservoir, x, h);
    step.address = forced_address ? *forced_address : rmm.address_classifier.predict(step.h_tilde);
    step.h = detail::apply_address(mem, step.address, step.h_tilde);
    return step;
}

struct RmmTrace {
    Matrix pre_states;          // T x n, h~_t
    Matrix states;              // T x n, h_t after recall
    std::vector<int> addresses; // T
    Matrix outputs;             // T x K (empty when no readout was applied)
    int initial_address = 0;
    Memory memory;              // final memory
};

/// Runs the memory dynamics with addresses chosen by `choose(t, h_tilde)`.
template <typename AddressFn>
RmmTrace run_memory_dynamics(const Reservoir& res, int L, const Matrix& inputs, int initial_address,
                             AddressFn&& choose) {
    detail::require(inputs.rows() >= 1, "memory run: empty input sequence");
    detail::require(inputs.cols() == res.input_dim(), "memory run: input dimension mismatch");
    RmmTrace trace;
    trace.memory = Memory(L, res.size());
    trace.initial_address = initial_address;
    Vector h = detail::apply_address(trace.memory, initial_address, res.initial_state);
    trace.pre_states.resize(inputs.rows(), res.size());
    trace.states.resize(inputs.rows(), res.size());
    trace.addresses.resize(std::size_t(inputs.rows()));
    for (Index t = 0; t < inputs.rows(); ++t) {
        const Vector h_tilde = reservoir_step(res, row_vector(inputs, t), h);
        const int a = choose(t, h_tilde);
        h = detail::apply_address(trace.memory, a, h_tilde);
        trace.pre_states.row(t) = h_tilde.transpose();
        trace.states.row(t) = h.transpose();
        trace.addresses[std::size_t(t)] = a;
    }
    return trace;
}

/// Teacher-forced run: addresses come from the episode.
inline RmmTrace teacher_forced_run(const Reservoir& res, int L, const Matrix& inputs, std::span<const int> addresses,
                                   int initial_address = 0) {
    detail::require(Index(addresses.size()) == inputs.rows(), "teacher forcing: address sequence length mismatch");
    return run_memory_dynamics(res, L, inputs, initial_address,
                               [&](Index t, const Vector&) { return addresses[std::size_t(t)]; });
}

/// Free run, or teacher-forced run when `forced` is given (then h0 is stored
/// under `forced_initial_address`).
inline RmmTrace rmm_run(const Rmm& rmm, const Matrix& inputs, std::optional<std::span<const int>> forced = std::nullopt,
                        int forced_initial_address = 0) {
    RmmTrace trace;
    if (forced) {
        trace = teacher_forced_run(rmm.reservoir, rmm.L, inputs, *forced, forced_initial_address);
    } else {
        const int a0 = rmm.address_classifier.predict(rmm.reservoir.initial_state);
        trace = run_memory_dynamics(rmm.reservoir, rmm.L, inputs, a0, [&](Index, const Vector& h_tilde) {
            return rmm.address_classifier.predict(h_tilde);
        });
    }
    trace.outputs = rmm.readout.predict_rows(trace.states);
    return trace;
}

// ---------------------------------------------------------------- associative dynamics

struct ArmmForcing {
    bool write = false;
    std::optional<int> read_slot; // 1-based
};

struct ArmmStep {
    Vector h;
    Vector h_tilde;
    bool wrote = false;
    std::optional<int> read_slot;
};

namespace detail {

inline void armm_write(const Armm& armm, Memory& mem, const Vector& h_tilde) {
    if (mem.count >= mem.capacity()) return; // additional writes are ignored
    mem.slots[std::size_t(mem.count)] = h_tilde;
    mem.written[std::size_t(mem.count)] = 1;
    mem.projections.push_back(armm.metric.project(h_tilde));
    ++mem.count;
}

} // namespace detail

inline ArmmStep armm_step(const Armm& armm, const Vector& x, const Vector& h, Memory& mem,
                          std::optional<ArmmForcing> forced = std::nullopt) {
    ArmmStep step;
    step.h_tilde = reservoir_step(armm.reservoir, x, h);
    step.h = step.h_tilde;
    const bool write = forced ? forced->write : armm.write_classifier.predict(step.h_tilde) > 0;
    if (write) {
        step.wrote = mem.count < mem.capacity();
        detail::armm_write(armm, mem, step.h_tilde);
        return step;
    }
    if (forced) {
        if (forced->read_slot) {
            const int l = *forced->read_slot;
            if (l < 1 || l > mem.count) throw invalid_address("forced read of unwritten slot " + std::to_string(l));
            step.h = mem.slots[std::size_t(l - 1)];
            step.read_slot = l;
        }
        return step;
    }
    if (mem.count == 0) return step;
    const Matrix projected = armm.metric.project(step.h_tilde);
    int best = 0;
    double best_distance = 0.0;
    for (int l = 1; l <= mem.count; ++l) {
        const double d = armm.metric.distance_projected(projected, mem.projections[std::size_t(l - 1)]);
        if (best == 0 || d < best_distance) { // strict: ties keep the lowest slot
            best = l;
            best_distance = d;
        }
    }
    if (best_distance <= armm.metric.theta) {
        step.h = mem.slots[std::size_t(best - 1)];
        step.read_slot = best;
    }
    return step;
}

struct ArmmTrace {
    Matrix pre_states;
    Matrix states;
    std::vector<char> writes;
    std::vector<int> reads; // 0 when no read happened
    Matrix outputs;
    Memory memory;
};

/// Converts teacher addresses into write/read decisions: the first occurrence
/// of an address writes the next slot, later occurrences read that slot.
inline std::vector<ArmmForcing> armm_forcing_from_addresses(std::span<const int> addresses) {
    std::vector<ArmmForcing> forcing(addresses.size());
    std::vector<int> slot_of; // slot_of[l-1] = address stored in slot l
    for (std::size_t t = 0; t < addresses.size(); ++t) {
        const int a = addresses[t];
        if (a == 0) continue;
        const auto it = std::find(slot_of.begin(), slot_of.end(), a);
        if (it == slot_of.end()) {
            forcing[t].write = true;
            slot_of.push_back(a);
        } else {
            forcing[t].read_slot = int(it - slot_of.begin()) + 1;
        }
    }
    return forcing;
}

inline ArmmTrace armm_run(const Armm& armm, const Matrix& inputs,
                          std::optional<std::span<const ArmmForcing>> forced = std::nullopt) {
    detail::require(inputs.rows() >= 1, "armm_run: empty input sequence");
    if (forced) detail::require(Index(forced->size()) == inputs.rows(), "armm_run: forcing length mismatch");
    ArmmTrace trace;
    trace.memory = Memory(armm.L, armm.reservoir.size());
    trace.pre_states.resize(inputs.rows(), armm.reservoir.size());
    trace.states.resize(inputs.rows(), armm.reservoir.size());
    trace.writes.assign(std::size_t(inputs.rows()), 0);
    trace.reads.assign(std::size_t(inputs.rows()), 0);
    Vector h = armm.reservoir.initial_state;
    for (Index t = 0; t < inputs.rows(); ++t) {
        std::optional<ArmmForcing> f;
        if (forced) f = (*forced)[std::size_t(t)];
        ArmmStep step = armm_step(armm, row_vector(inputs, t), h, trace.memory, f);
        trace.pre_states.row(t) = step.h_tilde.transpose();
        trace.states.row(t) = step.h.transpose();
        trace.writes[std::size_t(t)] = step.wrote;
        trace.reads[std::size_t(t)] = step.read_slot.value_or(0);
        h = std::move(step.h);
    }
    trace.outputs = armm.readout.predict_rows(trace.states);
    return trace;
}

// ---------------------------------------------------------------- training

namespace detail {

inline void check_episodes(const Reservoir& res, std::span<const Episode> episodes) {
    if (episodes.empty()) throw invalid_argument("training needs at least one episode");
    const Index k = episodes.front().outputs.cols();
    for (const Episode& ep : episodes) {
        ep.validate();
        require(ep.length() >= 1, "training episodes must be nonempty");
        require(ep.inputs.cols() == res.input_dim(), "episode input dimension does not match the reservoir");
        require(ep.outputs.cols() == k, "episodes disagree on the output dimension");
    }
}

inline Index total_length(std::span<const Episode> episodes) {
    Index total = 0;
    for (const Episode& ep : episodes) total += ep.length();
    return total;
}

inline Matrix stack_outputs(std::span<const Episode> episodes) {
    Matrix y(total_length(episodes), episodes.front().outputs.cols());
    Index row = 0;
    for (const Episode& ep : episodes) {
        y.middleRows(row, ep.length()) = ep.outputs;
        row += ep.length();
    }
    return y;
}

} // namespace detail

inline EsnBaseline train_esn(const Reservoir& res, std::span<const Episode> episodes, double lambda) {
    detail::check_episodes(res, episodes);
    Matrix states(detail::total_length(episodes), res.size());
    Index row = 0;
    for (const Episode& ep : episodes) {
        states.middleRows(row, ep.length()) = run_reservoir(res, ep.inputs);
        row += ep.length();
    }
    return {res, fit_ridge(states, detail::stack_outputs(episodes), lambda)};
}

/// Teacher-forced training: ridge readout on post-recall states, address
/// classifier on pre-recall states (plus h0 labelled with the initial address).
inline Rmm train_rmm(const Reservoir& res, std::span<const Episode> episodes, double lambda, double C,
                     const SvmOptions& svm = {}) {
    detail::check_episodes(res, episodes);
    int L = 0;
    for (const Episode& ep : episodes) {
        L = std::max(L, ep.initial_address);
        for (int a : ep.addresses) L = std::max(L, a);
    }

    const Index total = detail::total_length(episodes);
    Matrix post(total, res.size());
    Matrix pre(total + Index(episodes.size()), res.size());
    std::vector<int> labels;
    labels.reserve(std::size_t(pre.rows()));
    Index row = 0, pre_row = 0;
    for (const Episode& ep : episodes) {
        const RmmTrace trace = teacher_forced_run(res, L, ep.inputs, ep.addresses, ep.initial_address);
        post.middleRows(row, ep.length()) = trace.states;
        row += ep.length();
        pre.row(pre_row++) = res.initial_state.transpose();
        labels.push_back(ep.initial_address);
        pre.middleRows(pre_row, ep.length()) = trace.pre_states;
        pre_row += ep.length();
        labels.insert(labels.end(), ep.addresses.begin(), ep.addresses.end());
    }

    Rmm rmm;
    rmm.reservoir = res;
    rmm.L = L;
    rmm.readout = fit_ridge(post, detail::stack_outputs(episodes), lambda);
    rmm.address_classifier = fit_classifier(pre, labels, C, svm);
    return rmm;
}

/// Builds the association triples of one teacher-forced episode: at a read
/// step one positive pair against the addressed slot and negatives against
/// every other written slot; at steps without memory access negatives
/// against all written slots.
inline void collect_association_costs(const AssociationMetric& projector, const RmmTrace& trace,
                                      std::span<const int> addresses, std::vector<Vector>& costs,
                                      std::vector<int>& z, bool& any_read) {
    const std::vector<ArmmForcing> forcing = armm_forcing_from_addresses(addresses);
    std::vector<Matrix> slots;
    for (std::size_t t = 0; t < addresses.size(); ++t) {
        const Vector h_tilde = trace.pre_states.row(Index(t)).transpose();
        if (forcing[t].write) {
            slots.push_back(projector.project(h_tilde));
            continue;
        }
        if (slots.empty()) continue;
        const Matrix ph = projector.project(h_tilde);
        const int target = forcing[t].read_slot.value_or(0);
        if (target > 0) any_read = true;
        for (std::size_t l = 0; l < slots.size(); ++l) {
            costs.push_back(association_costs(ph, slots[l]));
            z.push_back(int(l) + 1 == target ? 1 : -1);
        }
    }
}

inline Armm train_armm(const Reservoir& res, std::span<const Episode> episodes, double lambda, double C,
                       double l1_weight, std::span<const int> delays, const SvmOptions& svm = {}) {
    if (res.kind != ReservoirKind::ldn) throw unsupported_reservoir("train_armm requires a Legendre delay network");
    detail::check_episodes(res, episodes);
    detail::require(!delays.empty(), "train_armm: need at least one delay");

    Armm armm;
    armm.reservoir = res;
    armm.metric.bank = delay_operators(res, delays);
    int L = 0;
    for (const Episode& ep : episodes) {
        detail::require(ep.initial_address == 0, "train_armm: associative memory starts empty");
        int distinct = 0;
        for (int label : derive_write_labels(ep.addresses)) distinct += label;
        L = std::max(L, distinct);
    }
    armm.L = L;

    const Index total = detail::total_length(episodes);
    Matrix pre(total, res.size());
    Matrix post(total, res.size());
    std::vector<int> write_labels;
    write_labels.reserve(std::size_t(total));
    std::vector<Vector> costs;
    std::vector<int> z;
    bool any_read = false;
    Index row = 0;
    for (const Episode& ep : episodes) {
        // slot numbers follow first-occurrence order, which keeps addresses within 1..L
        std::vector<int> slots;
        std::vector<int> renumbered(ep.addresses.size(), 0);
        for (std::size_t t = 0; t < ep.addresses.size(); ++t) {
            const int a = ep.addresses[t];
            if (a == 0) continue;
            auto it = std::find(slots.begin(), slots.end(), a);
            if (it == slots.end()) {
                slots.push_back(a);
                it = slots.end() - 1;
            }
            renumbered[t] = int(it - slots.begin()) + 1;
        }
        const RmmTrace trace = teacher_forced_run(res, L, ep.inputs, renumbered);
        pre.middleRows(row, ep.length()) = trace.pre_states;
        post.middleRows(row, ep.length()) = trace.states;
        row += ep.length();
        const std::vector<int> labels = derive_write_labels(ep.addresses);
        write_labels.insert(write_labels.end(), labels.begin(), labels.end());
        collect_association_costs(armm.metric, trace, renumbered, costs, z, any_read);
    }
    if (!any_read) throw metric_undetermined("train_armm: no read events in the training episodes");

    Matrix cost_matrix(Index(costs.size()), costs.front().size());
    for (std::size_t i = 0; i < costs.size(); ++i) cost_matrix.row(Index(i)) = costs[i].transpose();

    armm.write_classifier = fit_classifier(pre, write_labels, C, svm);
    armm.metric = fit_association_metric_costs(cost_matrix, z, armm.metric.bank, l1_weight);
    armm.readout = fit_ridge(post, detail::stack_outputs(episodes), lambda);
    return armm;
}

// ---------------------------------------------------------------- evaluation

using Model = std::variant<EsnBaseline, Rmm, Armm>;

inline Matrix predict(const EsnBaseline& esn, const Matrix& inputs) {
    return esn.readout.predict_rows(run_reservoir(esn.reservoir, inputs));
}
inline Matrix predict(const Rmm& rmm, const Matrix& inputs) { return rmm_run(rmm, inputs).outputs; }
inline Matrix predict(const Armm& armm, const Matrix& inputs) { return armm_run(armm, inputs).outputs; }
inline Matrix predict(const Model& model, const Matrix& inputs) {
    return std::visit([&](const auto& m) { return predict(m, inputs); }, model);
}

inline double rmse(const Matrix& predicted, const Matrix& target) {
    detail::require(predicted.rows() == target.rows() && predicted.cols() == target.cols(), "rmse: shape mismatch");
    if (target.size() == 0) return 0.0;
    return std::sqrt((predicted - target).squaredNorm() / double(target.size()));
}

struct RmseReport {
    std::vector<double> per_episode;
    double mean = 0.0;
};

template <typename M>
RmseReport evaluate_rmse(const M& model, std::span<const Episode> episodes) {
    RmseReport report;
    for (const Episode& ep : episodes) report.per_episode.push_back(rmse(predict(model, ep.inputs), ep.outputs));
    if (!report.per_episode.empty())
        report.mean = std::accumulate(report.per_episode.begin(), report.per_episode.end(), 0.0) /
                      double(report.per_episode.size());
    return report;
}

} // namespace rmm
