#pragma once

// Benchmark harness: random hyperparameter search, repeated train/evaluate
// runs with wall-clock timing, and report emission (CSV, markdown, JSON).

#include "rmm/serialization.hpp"
#include "rmm/tasks.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

namespace rmm {

enum class ModelKind { esn, rmm, armm };

inline const char* to_string(ModelKind m) {
    switch (m) {
    case ModelKind::esn: return "esn";
    case ModelKind::rmm: return "rmm";
    case ModelKind::armm: return "armm";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "esn") return ModelKind::esn;
    if (s == "rmm") return ModelKind::rmm;
    if (s == "armm") return ModelKind::armm;
    throw invalid_argument("unknown model '" + s + "'");
}

using Hyperparameters = std::map<std::string, double>;

struct ParamRange {
    enum class Kind { uniform, log_uniform, integer, choice };
    std::string name;
    Kind kind = Kind::uniform;
    double lo = 0.0; // log_uniform: exponent bounds (base 10)
    double hi = 0.0;
    std::vector<double> choices;
};

using SearchSpace = std::vector<ParamRange>;

inline Hyperparameters sample_hyperparameters(const SearchSpace& space, Rng& rng) {
    Hyperparameters hp;
    for (const ParamRange& p : space) {
        switch (p.kind) {
        case ParamRange::Kind::uniform: hp[p.name] = uniform_real(rng, p.lo, p.hi); break;
        case ParamRange::Kind::log_uniform: hp[p.name] = std::pow(10.0, uniform_real(rng, p.lo, p.hi)); break;
        case ParamRange::Kind::integer: hp[p.name] = uniform_int(rng, int(p.lo), int(p.hi)); break;
        case ParamRange::Kind::choice:
            detail::require(!p.choices.empty(), "search space: empty choice list for " + p.name);
            hp[p.name] = p.choices[std::size_t(uniform_int(rng, 0, int(p.choices.size()) - 1))];
            break;
        }
    }
    return hp;
}

inline void check_compatible(ModelKind model, ReservoirKind reservoir) {
    if (model == ModelKind::armm && reservoir != ReservoirKind::ldn)
        throw configuration_error("the associative machine needs delay operators, which only an LDN reservoir has");
}

/// Default search space for a task, model and reservoir.
inline SearchSpace default_search_space(TaskName task, ModelKind model, ReservoirKind reservoir) {
    check_compatible(model, reservoir);
    const TaskSpec spec = task_spec(task);
    SearchSpace space;
    using K = ParamRange::Kind;
    switch (reservoir) {
    case ReservoirKind::random:
        space.push_back({"spectral_radius", K::uniform, 0.5, 0.99, {}});
        space.push_back({"input_scale", K::uniform, 0.1, 2.0, {}});
        break;
    case ReservoirKind::crj:
        space.push_back({"r_cycle", K::uniform, 0.1, 0.95, {}});
        space.push_back({"r_jump", K::uniform, 0.1, 0.95, {}});
        space.push_back({"jump_length", K::integer, 2.0, double(spec.neurons / 2), {}});
        space.push_back({"input_scale", K::uniform, 0.1, 2.0, {}});
        break;
    case ReservoirKind::ldn:
        space.push_back({"window", K::uniform, 0.5 * spec.horizon, 2.0 * spec.horizon, {}});
        break;
    }
    space.push_back({"lambda", K::log_uniform, -8.0, 0.0, {}});
    if (model != ModelKind::esn) {
        space.push_back({"C", K::log_uniform, -2.0, 3.0, {}});
        space.push_back({"features", K::choice, 0.0, 0.0, {0.0, 256.0}});
        space.push_back({"gamma_scale", K::log_uniform, -1.0, 1.0, {}});
    }
    if (model == ModelKind::armm) space.push_back({"l1_weight", K::log_uniform, -5.0, -1.0, {}});
    return space;
}

namespace detail {

inline double hp_value(const Hyperparameters& hp, const std::string& name) {
    const auto it = hp.find(name);
    if (it == hp.end()) throw configuration_error("missing hyperparameter '" + name + "'");
    return it->second;
}

inline double hp_value(const Hyperparameters& hp, const std::string& name, double fallback) {
    const auto it = hp.find(name);
    return it == hp.end() ? fallback : it->second;
}

} // namespace detail

inline Reservoir build_reservoir(TaskName task, ReservoirKind kind, const Hyperparameters& hp, std::uint64_t seed) {
    const TaskSpec spec = task_spec(task);
    const int n = int(detail::hp_value(hp, "neurons", spec.neurons));
    const int m = spec.input_dim;
    switch (kind) {
    case ReservoirKind::random:
        return make_random_reservoir(n, m, detail::hp_value(hp, "spectral_radius"), detail::hp_value(hp, "input_scale"),
                                     seed);
    case ReservoirKind::crj:
        return make_crj_reservoir(n, m, detail::hp_value(hp, "r_cycle"), detail::hp_value(hp, "r_jump"),
                                  int(detail::hp_value(hp, "jump_length")), detail::hp_value(hp, "input_scale"), seed);
    case ReservoirKind::ldn:
        return make_ldn_reservoir(std::max(1, n / m), m, detail::hp_value(hp, "window"), 1.0, seed);
    }
    throw configuration_error("unknown reservoir kind");
}

/// Delays compared by the associative metric: the current step and the five before it.
inline std::vector<int> association_delays(const Reservoir& res) {
    std::vector<int> delays;
    const double window = res.ldn ? res.ldn->window : 0.0;
    for (int d = 0; d <= 5 && d + 0.5 <= window; ++d) delays.push_back(d);
    if (delays.empty()) delays.push_back(0);
    return delays;
}

/// Classifier options from the optional "features" and "gamma_scale" entries.
inline SvmOptions classifier_options(const Hyperparameters& hp) {
    SvmOptions svm;
    svm.random_features = int(detail::hp_value(hp, "features", 0.0));
    svm.gamma_scale = detail::hp_value(hp, "gamma_scale", 1.0);
    svm.feature_seed = derive_seed(0x5eed5eedULL, std::uint64_t(svm.random_features));
    return svm;
}

inline Model train_model(ModelKind kind, const Reservoir& res, std::span<const Episode> train,
                         const Hyperparameters& hp) {
    const double lambda = detail::hp_value(hp, "lambda");
    switch (kind) {
    case ModelKind::esn: return train_esn(res, train, lambda);
    case ModelKind::rmm: return train_rmm(res, train, lambda, detail::hp_value(hp, "C"), classifier_options(hp));
    case ModelKind::armm: {
        const std::vector<int> delays = association_delays(res);
        return train_armm(res, train, lambda, detail::hp_value(hp, "C"), detail::hp_value(hp, "l1_weight"), delays,
                          classifier_options(hp));
    }
    }
    throw configuration_error("unknown model kind");
}

// ---------------------------------------------------------------- worker pool

inline int worker_count() {
    if (const char* env = std::getenv("RMM_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(0..count-1) on up to `threads` workers; the first exception is rethrown.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::size_t(std::max(1, threads)), count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    }
    for (std::thread& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------- single runs

struct RunResult {
    double rmse = 0.0;
    double seconds = 0.0;
    std::vector<double> per_episode;
};

/// Trains on `train`, predicts `test`; the clock covers training and prediction only.
inline RunResult train_and_evaluate(ModelKind kind, const Reservoir& res, std::span<const Episode> train,
                                    std::span<const Episode> test, const Hyperparameters& hp) {
    const auto start = std::chrono::steady_clock::now();
    const Model model = train_model(kind, res, train, hp);
    std::vector<Matrix> predictions;
    predictions.reserve(test.size());
    for (const Episode& ep : test) predictions.push_back(predict(model, ep.inputs));
    const auto stop = std::chrono::steady_clock::now();

    RunResult result;
    result.seconds = std::chrono::duration<double>(stop - start).count();
    for (std::size_t i = 0; i < test.size(); ++i) result.per_episode.push_back(rmse(predictions[i], test[i].outputs));
    double sum = 0.0;
    for (double r : result.per_episode) sum += r;
    result.rmse = result.per_episode.empty() ? 0.0 : sum / double(result.per_episode.size());
    return result;
}

// ---------------------------------------------------------------- search

struct SearchOptions {
    int trials = 10;
    int repeats_per_trial = 3;
    int n_train = default_train_size; // split into n_train - n_validation / n_validation
    int n_validation = 10;
    int threads = 1;
};

struct TrialRecord {
    Hyperparameters hyperparameters;
    double validation_rmse = std::numeric_limits<double>::infinity();
    std::string failure;
};

struct SearchResult {
    Hyperparameters best;
    double best_validation_rmse = std::numeric_limits<double>::infinity();
    std::vector<TrialRecord> trials;
};

/// Train/validation data for search repeat `r`. The test split of a
/// benchmark dataset is never used here.
inline Dataset validation_split(TaskName task, const SearchOptions& opt, std::uint64_t seed) {
    if (task == TaskName::fsm) return gen_dataset(task, 0, opt.n_validation, seed);
    Dataset data = gen_dataset(task, opt.n_train, 0, seed);
    const std::size_t keep = std::size_t(std::max(1, opt.n_train - opt.n_validation));
    data.test.assign(data.train.begin() + std::ptrdiff_t(std::min(keep, data.train.size())), data.train.end());
    data.train.resize(std::min(keep, data.train.size()));
    return data;
}

inline SearchResult random_search(TaskName task, ModelKind model, ReservoirKind reservoir, const SearchSpace& space,
                                  const SearchOptions& opt, std::uint64_t seed) {
    check_compatible(model, reservoir);
    detail::require(!space.empty(), "random_search: empty search space");
    detail::require(opt.trials >= 1 && opt.repeats_per_trial >= 1, "random_search: need at least one trial");

    SearchResult result;
    Rng rng(derive_seed(seed, 1));
    for (int i = 0; i < opt.trials; ++i) result.trials.push_back({sample_hyperparameters(space, rng), 0.0, {}});

    std::vector<Dataset> splits(std::size_t(opt.repeats_per_trial));
    parallel_for(splits.size(), opt.threads,
                 [&](std::size_t r) { splits[r] = validation_split(task, opt, derive_seed(seed, 2, r)); });

    const std::size_t jobs = std::size_t(opt.trials) * splits.size();
    std::vector<double> scores(jobs, 0.0);
    std::vector<std::string> failures(jobs);
    parallel_for(jobs, opt.threads, [&](std::size_t job) {
        const std::size_t trial = job / splits.size();
        const std::size_t r = job % splits.size();
        const Hyperparameters& hp = result.trials[trial].hyperparameters;
        try {
            const Reservoir res = build_reservoir(task, reservoir, hp, derive_seed(seed, 3, trial, r));
            scores[job] = train_and_evaluate(model, res, splits[r].train, splits[r].test, hp).rmse;
            if (!std::isfinite(scores[job])) failures[job] = "non-finite validation error";
        } catch (const error& e) {
            failures[job] = e.what();
        }
    });

    for (std::size_t trial = 0; trial < result.trials.size(); ++trial) {
        TrialRecord& record = result.trials[trial];
        double sum = 0.0;
        for (std::size_t r = 0; r < splits.size(); ++r) {
            const std::size_t job = trial * splits.size() + r;
            if (!failures[job].empty() && record.failure.empty()) record.failure = failures[job];
            sum += scores[job];
        }
        record.validation_rmse =
            record.failure.empty() ? sum / double(splits.size()) : std::numeric_limits<double>::infinity();
        if (record.validation_rmse < result.best_validation_rmse) { // strict: earliest trial wins ties
            result.best_validation_rmse = record.validation_rmse;
            result.best = record.hyperparameters;
        }
    }
    if (!std::isfinite(result.best_validation_rmse)) {
        std::string reason = result.trials.front().failure;
        throw solver_failure("random_search: every trial failed (first failure: " + reason + ")");
    }
    return result;
}

// ---------------------------------------------------------------- benchmark

struct BenchRow {
    std::string task;
    std::string model;
    std::string reservoir;
    double rmse_mean = 0.0;
    double rmse_std = 0.0;
    double runtime_mean = 0.0;
    double runtime_std = 0.0;
    int repeats = 0;
    Hyperparameters best_hyperparameters;
    std::vector<double> rmse_values;
    std::vector<double> runtime_values;

    friend bool operator==(const BenchRow&, const BenchRow&) = default;
};

struct BenchReport {
    std::vector<BenchRow> rows;

    friend bool operator==(const BenchReport&, const BenchReport&) = default;
};

struct Combination {
    ModelKind model = ModelKind::rmm;
    ReservoirKind reservoir = ReservoirKind::ldn;
};

struct BenchOptions {
    int repeats = 20;
    int n_train = default_train_size;
    int n_test = default_test_size;
    SearchOptions search;
    int threads = 1;
};

inline std::pair<double, double> mean_and_std(std::span<const double> values) {
    if (values.empty()) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= double(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return {mean, std::sqrt(var / double(values.size()))};
}

/// Search, then `repeats` independent runs on fresh datasets for one combination.
inline BenchRow run_combination(TaskName task, const Combination& combo, const BenchOptions& opt, std::uint64_t seed) {
    check_compatible(combo.model, combo.reservoir);
    BenchRow row;
    row.task = to_string(task);
    row.model = to_string(combo.model);
    row.reservoir = to_string(combo.reservoir);
    row.repeats = opt.repeats;

    const std::uint64_t combo_seed =
        derive_seed(seed, std::uint64_t(task), std::uint64_t(combo.model), std::uint64_t(combo.reservoir));
    SearchOptions search = opt.search;
    search.threads = opt.threads;
    search.n_train = opt.n_train;
    row.best_hyperparameters =
        random_search(task, combo.model, combo.reservoir, default_search_space(task, combo.model, combo.reservoir),
                      search, derive_seed(combo_seed, 1))
            .best;

    row.rmse_values.assign(std::size_t(opt.repeats), 0.0);
    row.runtime_values.assign(std::size_t(opt.repeats), 0.0);
    parallel_for(std::size_t(opt.repeats), opt.threads, [&](std::size_t r) {
        // datasets depend only on the master seed, so every combination sees the same data
        const Dataset data = gen_dataset(task, opt.n_train, opt.n_test, derive_seed(seed, 17, std::uint64_t(task), r));
        const Reservoir res =
            build_reservoir(task, combo.reservoir, row.best_hyperparameters, derive_seed(combo_seed, 2, r));
        const RunResult run = train_and_evaluate(combo.model, res, data.train, data.test, row.best_hyperparameters);
        row.rmse_values[r] = run.rmse;
        row.runtime_values[r] = run.seconds;
    });
    std::tie(row.rmse_mean, row.rmse_std) = mean_and_std(row.rmse_values);
    std::tie(row.runtime_mean, row.runtime_std) = mean_and_std(row.runtime_values);
    return row;
}

inline BenchReport run_benchmark(TaskName task, std::span<const Combination> combos, const BenchOptions& opt,
                                 std::uint64_t seed) {
    for (const Combination& c : combos) check_compatible(c.model, c.reservoir);
    BenchReport report;
    for (const Combination& c : combos) report.rows.push_back(run_combination(task, c, opt, seed));
    return report;
}

// ---------------------------------------------------------------- reports

enum class ReportFormat { csv, markdown, json };

inline ReportFormat parse_report_format(const std::string& s) {
    if (s == "csv") return ReportFormat::csv;
    if (s == "markdown" || s == "md") return ReportFormat::markdown;
    if (s == "json") return ReportFormat::json;
    throw invalid_argument("unknown report format '" + s + "'");
}

inline json to_json(const BenchRow& row) {
    return {{"task", row.task},
            {"model", row.model},
            {"reservoir", row.reservoir},
            {"rmse_mean", row.rmse_mean},
            {"rmse_std", row.rmse_std},
            {"runtime_mean", row.runtime_mean},
            {"runtime_std", row.runtime_std},
            {"repeats", row.repeats},
            {"best_hyperparameters", row.best_hyperparameters},
            {"rmse_values", row.rmse_values},
            {"runtime_values", row.runtime_values}};
}

inline BenchRow bench_row_from_json(const json& j) {
    BenchRow row;
    row.task = j.at("task").get<std::string>();
    row.model = j.at("model").get<std::string>();
    row.reservoir = j.at("reservoir").get<std::string>();
    row.rmse_mean = j.at("rmse_mean").get<double>();
    row.rmse_std = j.at("rmse_std").get<double>();
    row.runtime_mean = j.at("runtime_mean").get<double>();
    row.runtime_std = j.at("runtime_std").get<double>();
    row.repeats = j.at("repeats").get<int>();
    row.best_hyperparameters = j.value("best_hyperparameters", Hyperparameters{});
    row.rmse_values = j.value("rmse_values", std::vector<double>{});
    row.runtime_values = j.value("runtime_values", std::vector<double>{});
    return row;
}

inline json to_json(const BenchReport& report) {
    json rows = json::array();
    for (const BenchRow& row : report.rows) rows.push_back(to_json(row));
    return {{"rows", std::move(rows)}};
}

inline BenchReport bench_report_from_json(const json& j) {
    BenchReport report;
    for (const json& row : j.at("rows")) report.rows.push_back(bench_row_from_json(row));
    return report;
}

inline void write_report(std::ostream& out, const BenchReport& report, ReportFormat format) {
    switch (format) {
    case ReportFormat::csv: {
        out << "task,model,reservoir,rmse_mean,rmse_std,runtime_mean,runtime_std,repeats\n";
        out << std::setprecision(17);
        for (const BenchRow& r : report.rows)
            out << r.task << ',' << r.model << ',' << r.reservoir << ',' << r.rmse_mean << ',' << r.rmse_std << ','
                << r.runtime_mean << ',' << r.runtime_std << ',' << r.repeats << '\n';
        break;
    }
    case ReportFormat::markdown: {
        out << "| task | model | RMSE | runtime [s] | repeats |\n";
        out << "|---|---|---|---|---|\n";
        out << std::fixed;
        for (const BenchRow& r : report.rows)
            out << "| " << r.task << " | " << r.reservoir << "-" << r.model << " | "
                << std::setprecision(2) << r.rmse_mean << " ± " << r.rmse_std << " | " << std::setprecision(3)
                << r.runtime_mean << " ± " << r.runtime_std << " | " << r.repeats << " |\n";
        out.unsetf(std::ios::floatfield);
        break;
    }
    case ReportFormat::json: out << to_json(report).dump(2) << '\n'; break;
    }
}

inline void emit_report(const BenchReport& report, ReportFormat format, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw io_error("cannot write report file " + path);
    write_report(out, report, format);
    if (!out) throw io_error("failed writing report file " + path);
}

inline BenchReport load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw io_error("cannot read report file " + path);
    try {
        return bench_report_from_json(json::parse(in));
    } catch (const json::exception& e) {
        throw io_error("report file " + path + ": " + e.what());
    }
}

} // namespace rmm
