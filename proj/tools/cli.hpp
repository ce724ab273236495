#pragma once

// Command-line front end. run_cli is separate from main so tests can drive it
// in-process with captured streams.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include "rmm/bench.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace rmm::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_usage = 1;
inline constexpr int exit_runtime = 2;

/// Raised for bad option values that CLI11 cannot validate by itself.
class usage_error : public error {
public:
    using error::error;
};

/// Hyperparameters used by `train` when no --hp override is given.
inline Hyperparameters default_hyperparameters(TaskName task, ModelKind model, ReservoirKind reservoir) {
    const TaskSpec spec = task_spec(task);
    Hyperparameters hp;
    switch (reservoir) {
    case ReservoirKind::random:
        hp["spectral_radius"] = 0.9;
        hp["input_scale"] = 1.0;
        break;
    case ReservoirKind::crj:
        hp["r_cycle"] = 0.9;
        hp["r_jump"] = 0.5;
        hp["jump_length"] = std::max(2, spec.neurons / 8);
        hp["input_scale"] = 1.0;
        break;
    case ReservoirKind::ldn: hp["window"] = spec.horizon; break;
    }
    hp["lambda"] = 1e-6;
    if (model != ModelKind::esn) hp["C"] = 10.0;
    if (model == ModelKind::armm) hp["l1_weight"] = 1e-3;
    return hp;
}

inline Hyperparameters parse_overrides(Hyperparameters hp, const std::vector<std::string>& items) {
    for (const std::string& item : items) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0) throw usage_error("--hp expects key=value, got '" + item + "'");
        const std::string key = item.substr(0, eq);
        const std::string text = item.substr(eq + 1);
        std::size_t used = 0;
        double value = 0.0;
        try {
            value = std::stod(text, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != text.size() || text.empty()) throw usage_error("--hp value for '" + key + "' is not a number");
        hp[key] = value;
    }
    return hp;
}

inline std::vector<int> parse_symbols(const std::string& text) {
    std::vector<int> symbols;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            symbols.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw usage_error("--input expects comma-separated symbols, got '" + text + "'");
        }
    }
    return symbols;
}

/// Expands --models / --reservoirs into combinations. A model token may name
/// its reservoir ("ldn-rmm"); plain tokens combine with every listed reservoir
/// the model supports.
inline std::vector<Combination> expand_combinations(const std::vector<std::string>& models,
                                                    const std::vector<std::string>& reservoirs) {
    std::vector<ReservoirKind> kinds;
    for (const std::string& r : reservoirs) kinds.push_back(parse_reservoir_kind(r));
    std::vector<Combination> combos;
    for (const std::string& token : models) {
        const auto dash = token.find('-');
        if (dash != std::string::npos) {
            Combination c{parse_model_kind(token.substr(dash + 1)), parse_reservoir_kind(token.substr(0, dash))};
            check_compatible(c.model, c.reservoir);
            combos.push_back(c);
            continue;
        }
        const ModelKind model = parse_model_kind(token);
        for (ReservoirKind kind : kinds) {
            if (model == ModelKind::armm && kind != ReservoirKind::ldn) continue;
            combos.push_back({model, kind});
        }
    }
    if (combos.empty()) throw usage_error("no valid model/reservoir combination selected");
    return combos;
}

inline std::string format_vector(const Vector& v) {
    std::ostringstream out;
    out << '(';
    for (Index i = 0; i < v.size(); ++i) out << (i ? "," : "") << v(i);
    out << ')';
    return out.str();
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reservoir memory machines: dataset generation, training, evaluation and benchmarks", "rmm"};
    app.require_subcommand(1);
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "Master seed for every random draw")->capture_default_str();

    std::string task_name, model_name, reservoir_name = "ldn", out_path, data_path, model_path, in_path;
    std::string format_name, split = "train", machine_path, machine_out, input_text = "1,2,2,1";
    int count = 10;
    std::vector<std::string> hp_items, task_names, model_tokens, reservoir_names = {"random", "crj", "ldn"};
    int repeats = 20, trials = 10, search_repeats = 3, threads = 0;
    bool check = false;

    CLI::App* gen = app.add_subcommand("gen", "Generate a dataset as one JSON record per line");
    gen->add_option("--task", task_name, "latch, copy, repeat_copy, assoc_recall, signal_copy or fsm")->required();
    gen->add_option("--n", count, "Number of episodes (FSM test split only)")->capture_default_str();
    gen->add_option("--seed", seed, "Master seed");
    gen->add_option("--out", out_path, "Output file, '-' for stdout")->required();
    gen->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}))->capture_default_str();
    gen->add_option("--machine-out", machine_out, "FSM only: write the sampled machine here");

    CLI::App* train = app.add_subcommand("train", "Train a model on a dataset file");
    train->add_option("--task", task_name)->required();
    train->add_option("--model", model_name, "esn, rmm or armm")->required();
    train->add_option("--reservoir", reservoir_name, "random, crj or ldn")->capture_default_str();
    train->add_option("--data", data_path)->required()->check(CLI::ExistingFile);
    train->add_option("--out", out_path)->required();
    train->add_option("--hp", hp_items, "Hyperparameter override key=value (repeatable)");
    train->add_option("--seed", seed, "Master seed");

    CLI::App* eval = app.add_subcommand("eval", "Print per-episode and mean RMSE of a model on a dataset");
    eval->add_option("--model-file", model_path)->required()->check(CLI::ExistingFile);
    eval->add_option("--data", data_path)->required()->check(CLI::ExistingFile);

    CLI::App* bench = app.add_subcommand("bench", "Random search plus repeated train/test runs");
    bench->add_option("--task", task_names, "Task names or 'all'")->required()->delimiter(',');
    bench->add_option("--models", model_tokens, "Model names or reservoir-model tokens such as ldn-rmm")
        ->required()
        ->delimiter(',');
    bench->add_option("--reservoirs", reservoir_names)->delimiter(',')->capture_default_str();
    bench->add_option("--repeats", repeats)->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--trials", trials)->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--search-repeats", search_repeats)->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--threads", threads, "Worker threads, 0 = RMM_THREADS or all cores")->capture_default_str();
    bench->add_option("--seed", seed, "Master seed");
    bench->add_option("--out", out_path, "Report file (format from --format or the extension)");
    bench->add_option("--format", format_name, "csv, markdown or json");

    CLI::App* compile = app.add_subcommand("compile-fsm", "Compile a Moore machine into a Heaviside RNN");
    compile->add_option("--machine", machine_path)->required()->check(CLI::ExistingFile);
    compile->add_flag("--check", check, "Verify the network against direct simulation");
    compile->add_option("--input", input_text, "Comma-separated input symbols")->capture_default_str();

    CLI::App* report = app.add_subcommand("report", "Convert a JSON report to another format");
    report->add_option("--in", in_path)->required()->check(CLI::ExistingFile);
    report->add_option("--format", format_name, "csv, markdown or json")->required();
    report->add_option("--out", out_path, "Output file, stdout when omitted");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return exit_usage;
    }

    // Name and value validation happens before any work so that bad input is a usage error.
    std::optional<TaskName> task;
    std::optional<ModelKind> model;
    std::optional<ReservoirKind> reservoir;
    std::optional<ReportFormat> format;
    try {
        if (!task_name.empty()) task = parse_task(task_name);
        if (!model_name.empty()) model = parse_model_kind(model_name);
        if (*train) reservoir = parse_reservoir_kind(reservoir_name);
        if (!format_name.empty()) format = parse_report_format(format_name);
        if (*gen && count < 0) throw usage_error("--n must be nonnegative");
        if (model && reservoir) check_compatible(*model, *reservoir);
    } catch (const error& e) {
        err << "error: " << e.what() << '\n' << app.help();
        return exit_usage;
    }

    try {
        if (*gen) {
            Dataset data = *task == TaskName::fsm ? gen_dataset(*task, 0, count, seed)
                                                  : gen_dataset(*task, count, 0, seed);
            const std::vector<Episode>& episodes = (*task == TaskName::fsm && split == "test") ? data.test : data.train;
            if (out_path == "-") {
                write_episodes(out, episodes);
            } else {
                save_episodes(episodes, out_path);
            }
            if (!machine_out.empty()) {
                if (!data.machine) throw usage_error("--machine-out is only meaningful for the fsm task");
                std::ofstream m(machine_out);
                if (!m) throw io_error("cannot write machine file " + machine_out);
                write_machine(m, *data.machine);
            }
            if (out_path != "-") err << "wrote " << episodes.size() << " episodes to " << out_path << '\n';
            return exit_ok;
        }
        if (*train) {
            const std::vector<Episode> episodes = load_episodes(data_path);
            const Hyperparameters hp =
                parse_overrides(default_hyperparameters(*task, *model, *reservoir), hp_items);
            const Reservoir res = build_reservoir(*task, *reservoir, hp, derive_seed(seed, 3));
            const Model trained = train_model(*model, res, episodes, hp);
            save_model(trained, out_path);
            out << "trained " << to_string(*reservoir) << '-' << to_string(*model) << " on " << episodes.size()
                << " episodes -> " << out_path << '\n';
            return exit_ok;
        }
        if (*eval) {
            const Model loaded = load_model(model_path);
            const std::vector<Episode> episodes = load_episodes(data_path);
            const RmseReport r = evaluate_rmse(loaded, episodes);
            out << std::setprecision(17);
            for (std::size_t i = 0; i < r.per_episode.size(); ++i)
                out << "episode " << i << " rmse " << r.per_episode[i] << '\n';
            out << "mean rmse " << r.mean << '\n';
            return exit_ok;
        }
        if (*bench) {
            std::vector<TaskName> tasks;
            for (const std::string& name : task_names) {
                if (name == "all") {
                    tasks.assign(all_tasks.begin(), all_tasks.end());
                } else {
                    tasks.push_back(parse_task(name));
                }
            }
            const std::vector<Combination> combos = expand_combinations(model_tokens, reservoir_names);
            BenchOptions opt;
            opt.repeats = repeats;
            opt.search.trials = trials;
            opt.search.repeats_per_trial = search_repeats;
            opt.threads = threads > 0 ? threads : worker_count();
            BenchReport all;
            for (TaskName t : tasks) {
                const BenchReport part = run_benchmark(t, combos, opt, seed);
                all.rows.insert(all.rows.end(), part.rows.begin(), part.rows.end());
            }
            if (!out_path.empty()) {
                ReportFormat f = format.value_or(ReportFormat::json);
                if (!format) {
                    if (out_path.ends_with(".csv")) f = ReportFormat::csv;
                    if (out_path.ends_with(".md")) f = ReportFormat::markdown;
                }
                emit_report(all, f, out_path);
            }
            write_report(out, all, format.value_or(ReportFormat::markdown));
            return exit_ok;
        }
        if (*compile) {
            std::ifstream in(machine_path);
            const MooreMachine machine = parse_machine(in);
            const std::vector<int> symbols = parse_symbols(input_text);
            for (int s : symbols)
                if (s < 1 || s > machine.input_arity) throw usage_error("--input symbol out of range");
            const CompiledRnn rnn = compile_fsm_to_rnn(machine);
            const Matrix inputs = interleave_with_zeros(one_hot_sequence(symbols, machine.input_arity));
            const CompiledTrace trace = run_compiled(rnn, inputs);
            out << "t=0 x=- h=" << format_vector(trace.states.row(0).transpose()) << " y=-\n";
            for (Index t = 1; t <= inputs.rows(); ++t)
                out << "t=" << t << " x=" << format_vector(row_vector(inputs, t - 1))
                    << " h=" << format_vector(row_vector(trace.states, t))
                    << " y=" << format_vector(row_vector(trace.outputs, t - 1)) << '\n';
            if (check) {
                const bool ok = compiled_matches_machine(machine, rnn, symbols);
                out << "check: " << (ok ? "compiled network matches the machine" : "MISMATCH") << '\n';
                return ok ? exit_ok : exit_runtime;
            }
            return exit_ok;
        }
        if (*report) {
            const BenchReport loaded = load_report(in_path);
            if (out_path.empty()) {
                write_report(out, loaded, *format);
            } else {
                emit_report(loaded, *format, out_path);
            }
            return exit_ok;
        }
    } catch (const usage_error& e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_usage;
}

} // namespace rmm::cli
