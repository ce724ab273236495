#include <rmm/bench.hpp>

#include "cli.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace rmm;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "rmm");
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run_cli(int(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path);
    return {std::istreambuf_iterator<char>(in), {}};
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() /
                ("rmm_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
    static inline int counter_ = 0;
};

const std::string machine_file = "tests/data/two_state.machine";

fs::path source_path(const std::string& relative) {
    return fs::path(__FILE__).parent_path().parent_path() / relative;
}

BenchRow fake_row(const std::string& task, double rmse) {
    BenchRow row;
    row.task = task;
    row.model = "rmm";
    row.reservoir = "ldn";
    row.rmse_mean = rmse;
    row.rmse_std = 0.25;
    row.runtime_mean = 0.125;
    row.runtime_std = 0.0;
    row.repeats = 2;
    row.best_hyperparameters = {{"lambda", 1e-6}, {"window", 12.5}};
    row.rmse_values = {rmse - 0.25, rmse + 0.25};
    row.runtime_values = {0.125, 0.125};
    return row;
}

} // namespace

TEST(Reports, CsvHeaderAndRows) {
    std::ostringstream empty;
    write_report(empty, BenchReport{}, ReportFormat::csv);
    EXPECT_EQ(empty.str(), "task,model,reservoir,rmse_mean,rmse_std,runtime_mean,runtime_std,repeats\n");

    BenchReport report;
    report.rows = {fake_row("latch", 0.5), fake_row("copy", 0.75)};
    std::ostringstream csv;
    write_report(csv, report, ReportFormat::csv);
    const std::string text = csv.str();
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    EXPECT_NE(text.find("latch,rmm,ldn,0.5,0.25,0.125,0,2\n"), std::string::npos);
}

TEST(Reports, MarkdownHasOneLinePerRowPlusHeader) {
    BenchReport report;
    report.rows = {fake_row("latch", 0.5), fake_row("copy", 0.75), fake_row("fsm", 0.0)};
    std::ostringstream md;
    write_report(md, report, ReportFormat::markdown);
    const std::string text = md.str();
    // header line and separator line
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3 + 2);
    EXPECT_NE(text.find("| copy | ldn-rmm | 0.75 ± 0.25 |"), std::string::npos);
}

TEST(Reports, JsonRoundTripIsExact) {
    BenchReport report;
    report.rows = {fake_row("latch", 0.1), fake_row("copy", 1.0 / 3.0)};
    TempDir dir;
    emit_report(report, ReportFormat::json, (dir / "r.json").string());
    EXPECT_EQ(load_report((dir / "r.json").string()), report);
    EXPECT_THROW(emit_report(report, ReportFormat::json, (dir / "missing/r.json").string()), io_error);
}

TEST(Reports, FormatNames) {
    EXPECT_EQ(parse_report_format("csv"), ReportFormat::csv);
    EXPECT_EQ(parse_report_format("md"), ReportFormat::markdown);
    EXPECT_EQ(parse_report_format("json"), ReportFormat::json);
    EXPECT_THROW(parse_report_format("xml"), invalid_argument);
}

TEST(RandomSearch, SingleTrialReturnsItsSample) {
    const SearchSpace space = default_search_space(TaskName::latch, ModelKind::esn, ReservoirKind::ldn);
    SearchOptions opt;
    opt.trials = 1;
    opt.repeats_per_trial = 1;
    opt.n_train = 12;
    opt.n_validation = 4;
    const SearchResult result = random_search(TaskName::latch, ModelKind::esn, ReservoirKind::ldn, space, opt, 5);
    ASSERT_EQ(result.trials.size(), 1u);
    EXPECT_EQ(result.best, result.trials.front().hyperparameters);
    Rng rng(derive_seed(5, 1));
    EXPECT_EQ(result.best, sample_hyperparameters(space, rng));
}

TEST(RandomSearch, PicksTheDominantConfiguration) {
    using K = ParamRange::Kind;
    const SearchSpace space = {{"r_cycle", K::choice, 0, 0, {0.9}},
                               {"r_jump", K::choice, 0, 0, {0.5}},
                               {"jump_length", K::choice, 0, 0, {8}},
                               {"input_scale", K::choice, 0, 0, {1.0}},
                               {"C", K::choice, 0, 0, {10.0}},
                               {"features", K::choice, 0, 0, {0.0}},
                               {"gamma_scale", K::choice, 0, 0, {1.0}},
                               {"lambda", K::choice, 0, 0, {1e12, 1e12, 1e12, 1e-6}}};
    SearchOptions opt;
    opt.trials = 8;
    opt.repeats_per_trial = 2;
    opt.n_train = 20;
    opt.n_validation = 5;
    const SearchResult result = random_search(TaskName::latch, ModelKind::rmm, ReservoirKind::crj, space, opt, 12);
    bool sampled = false;
    for (const TrialRecord& t : result.trials) sampled = sampled || t.hyperparameters.at("lambda") == 1e-6;
    ASSERT_TRUE(sampled);
    EXPECT_EQ(result.best.at("lambda"), 1e-6);
    const SearchResult again = random_search(TaskName::latch, ModelKind::rmm, ReservoirKind::crj, space, opt, 12);
    EXPECT_EQ(again.best, result.best);
    EXPECT_EQ(again.best_validation_rmse, result.best_validation_rmse);
}

TEST(RunBenchmark, RowPerCombinationAndDeterministicRmse) {
    BenchOptions opt;
    opt.repeats = 2;
    opt.n_train = 12;
    opt.n_test = 3;
    opt.search.trials = 2;
    opt.search.repeats_per_trial = 1;
    opt.search.n_validation = 4;
    const std::vector<Combination> combos = {{ModelKind::esn, ReservoirKind::ldn}, {ModelKind::rmm, ReservoirKind::crj}};
    const BenchReport a = run_benchmark(TaskName::latch, combos, opt, 8);
    const BenchReport b = run_benchmark(TaskName::latch, combos, opt, 8);
    ASSERT_EQ(a.rows.size(), 2u);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_EQ(a.rows[i].rmse_values, b.rows[i].rmse_values);
        EXPECT_EQ(a.rows[i].best_hyperparameters, b.rows[i].best_hyperparameters);
        EXPECT_GE(a.rows[i].rmse_std, 0.0);
        EXPECT_GE(a.rows[i].runtime_std, 0.0);
        EXPECT_EQ(a.rows[i].repeats, 2);
    }
    const std::vector<Combination> bad = {{ModelKind::armm, ReservoirKind::random}};
    EXPECT_THROW(run_benchmark(TaskName::latch, bad, opt, 8), configuration_error);
}

TEST(Cli, GenIsReproducible) {
    TempDir dir;
    ASSERT_EQ(run({"gen", "--task", "latch", "--n", "3", "--seed", "1", "--out", (dir / "a.jsonl").string()}).code, 0);
    ASSERT_EQ(run({"gen", "--task", "latch", "--n", "3", "--seed", "1", "--out", (dir / "b.jsonl").string()}).code, 0);
    ASSERT_EQ(run({"--seed", "2", "gen", "--task", "latch", "--n", "3", "--out", (dir / "c.jsonl").string()}).code, 0);
    const std::string a = read_file(dir / "a.jsonl");
    EXPECT_EQ(a, read_file(dir / "b.jsonl"));
    EXPECT_NE(a, read_file(dir / "c.jsonl"));
    EXPECT_EQ(load_episodes((dir / "a.jsonl").string()).size(), 3u);
}

TEST(Cli, GenFsmWritesTheMachine) {
    TempDir dir;
    const CliResult r = run({"gen", "--task", "fsm", "--seed", "4", "--out", (dir / "train.jsonl").string(),
                             "--machine-out", (dir / "m.machine").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const MooreMachine machine = parse_machine(read_file(dir / "m.machine"));
    const int L = task_spec(TaskName::fsm).address_count;
    EXPECT_EQ(machine.num_states, L);
    const std::vector<Episode> train = load_episodes((dir / "train.jsonl").string());
    EXPECT_EQ(train.size(), one_cycle_training_sequences(machine).size());
    for (const Episode& ep : train) EXPECT_LE(ep.length(), L + 1);
}

TEST(Cli, EvalOfAPerfectModelPrintsZero) {
    TempDir dir;
    Reservoir res;
    res.input_weights = Matrix::Identity(2, 2);
    res.recurrent_weights = Matrix::Zero(2, 2);
    res.bias = Vector::Zero(2);
    res.initial_state = Vector::Zero(2);
    res.activation = Activation::identity;
    const EsnBaseline esn{res, RidgeReadout{Matrix::Identity(2, 2), Vector::Zero(2)}};
    save_model(Model(esn), (dir / "m.json").string());
    std::vector<Episode> episodes(2);
    for (Episode& ep : episodes) {
        ep.inputs = Matrix::Random(5, 2);
        ep.outputs = ep.inputs;
        ep.addresses.assign(5, 0);
    }
    save_episodes(episodes, (dir / "d.jsonl").string());
    const CliResult r = run({"eval", "--model-file", (dir / "m.json").string(), "--data", (dir / "d.jsonl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("episode 0 rmse 0\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("mean rmse 0\n"), std::string::npos) << r.out;
}

TEST(Cli, TrainThenEvalRoundTrip) {
    TempDir dir;
    const std::string train = (dir / "train.jsonl").string();
    const std::string test = (dir / "test.jsonl").string();
    const std::string model = (dir / "model.json").string();
    ASSERT_EQ(run({"gen", "--task", "latch", "--n", "20", "--seed", "3", "--out", train}).code, 0);
    ASSERT_EQ(run({"gen", "--task", "latch", "--n", "5", "--seed", "3", "--split", "test", "--out", test}).code, 0);
    const CliResult t = run({"train", "--task", "latch", "--model", "rmm", "--reservoir", "crj", "--data", train,
                             "--out", model, "--hp", "C=10"});
    ASSERT_EQ(t.code, 0) << t.err;
    const Model loaded = load_model(model);
    ASSERT_TRUE(std::holds_alternative<Rmm>(loaded));
    const CliResult e = run({"eval", "--model-file", model, "--data", test});
    ASSERT_EQ(e.code, 0) << e.err;
    const auto pos = e.out.find("mean rmse ");
    ASSERT_NE(pos, std::string::npos);
    EXPECT_LE(std::stod(e.out.substr(pos + 10)), 0.05);
}

TEST(Cli, CompileFsmPrintsTheTrace) {
    const CliResult r = run({"compile-fsm", "--machine", source_path(machine_file).string(), "--check"});
    ASSERT_EQ(r.code, 0) << r.err;
    const std::string expected = "t=0 x=- h=(1,0,0,0,0,0) y=-\n"
                                 "t=1 x=(1,0) h=(0,0,1,0,0,0) y=(0,0)\n"
                                 "t=2 x=(0,0) h=(0,1,0,0,0,0) y=(0,1)\n"
                                 "t=3 x=(0,1) h=(0,0,0,0,0,1) y=(0,0)\n"
                                 "t=4 x=(0,0) h=(0,1,0,0,0,0) y=(0,1)\n"
                                 "t=5 x=(0,1) h=(0,0,0,0,0,1) y=(0,0)\n"
                                 "t=6 x=(0,0) h=(0,1,0,0,0,0) y=(0,1)\n"
                                 "t=7 x=(1,0) h=(0,0,0,1,0,0) y=(0,0)\n"
                                 "t=8 x=(0,0) h=(1,0,0,0,0,0) y=(1,0)\n";
    EXPECT_EQ(r.out.substr(0, expected.size()), expected);
    EXPECT_NE(r.out.find("check: compiled network matches the machine"), std::string::npos);
}

TEST(Cli, ReportConvertsJson) {
    TempDir dir;
    BenchReport report;
    report.rows = {fake_row("latch", 0.5)};
    emit_report(report, ReportFormat::json, (dir / "r.json").string());
    const CliResult r = run({"report", "--in", (dir / "r.json").string(), "--format", "csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    std::ostringstream expected;
    write_report(expected, report, ReportFormat::csv);
    EXPECT_EQ(r.out, expected.str());
}

TEST(Cli, SmallBenchIsDeterministic) {
    TempDir dir;
    const std::vector<std::string> args = {"bench", "--task", "latch", "--models", "ldn-esn,crj-rmm", "--repeats", "2",
                                           "--trials", "2", "--search-repeats", "1", "--seed", "9", "--out"};
    auto a_args = args, b_args = args;
    a_args.push_back((dir / "a.json").string());
    b_args.push_back((dir / "b.json").string());
    ASSERT_EQ(run(a_args).code, 0);
    ASSERT_EQ(run(b_args).code, 0);
    const BenchReport a = load_report((dir / "a.json").string());
    const BenchReport b = load_report((dir / "b.json").string());
    ASSERT_EQ(a.rows.size(), 2u);
    for (std::size_t i = 0; i < a.rows.size(); ++i) EXPECT_EQ(a.rows[i].rmse_values, b.rows[i].rmse_values);
}

TEST(Cli, UsageErrorsExitWithOne) {
    EXPECT_EQ(run({}).code, cli::exit_usage);
    EXPECT_EQ(run({"frobnicate"}).code, cli::exit_usage);
    EXPECT_EQ(run({"gen", "--task", "latch"}).code, cli::exit_usage);
    EXPECT_EQ(run({"gen", "--task", "nonsense", "--out", "-"}).code, cli::exit_usage);
    EXPECT_EQ(run({"bench", "--task", "latch", "--repeats", "0"}).code, cli::exit_usage);
    const CliResult r = run({"gen", "--bogus-flag"});
    EXPECT_EQ(r.code, cli::exit_usage);
    EXPECT_FALSE(r.err.empty());
}

TEST(Cli, RuntimeErrorsExitWithTwo) {
    TempDir dir;
    {
        std::ofstream(dir / "bad.jsonl") << "{not json\n";
        std::ofstream(dir / "bad.json") << "[]";
    }
    EXPECT_EQ(run({"eval", "--model-file", (dir / "bad.json").string(), "--data", (dir / "bad.jsonl").string()}).code,
              cli::exit_runtime);
    EXPECT_EQ(run({"train", "--task", "latch", "--model", "armm", "--reservoir", "crj", "--data",
                   (dir / "bad.jsonl").string(), "--out", (dir / "m.json").string()})
                  .code,
              cli::exit_usage);
}

TEST(CliBinary, ExitCodesFromTheExecutable) {
    TempDir dir;
    const std::string binary = RMM_CLI_PATH;
    auto status = [&](const std::string& args) {
        const std::string cmd = "'" + binary + "' " + args + " > '" + (dir / "out.txt").string() + "' 2>&1";
        const int raw = std::system(cmd.c_str());
        return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    };
    EXPECT_EQ(status("compile-fsm --check --machine '" + source_path(machine_file).string() + "'"), 0);
    EXPECT_NE(read_file(dir / "out.txt").find("t=8 x=(0,0) h=(1,0,0,0,0,0) y=(1,0)"), std::string::npos);
    EXPECT_EQ(status("no-such-command"), 1);
    std::ofstream(dir / "broken.machine") << "2 2 2 1 9 9 9 9 1 1\n";
    EXPECT_EQ(status("compile-fsm --machine '" + (dir / "broken.machine").string() + "'"), 2);
    EXPECT_EQ(status("gen --task copy --n 2 --seed 7 --out '" + (dir / "x.jsonl").string() + "'"), 0);
    EXPECT_EQ(load_episodes((dir / "x.jsonl").string()).size(), 2u);
}
