// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "cloudmd/pipeline.hpp"

using namespace cloudmd;
using namespace cloudmd::pipeline;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("cloudmd_pipe_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Small but complete hyperparameters so every family trains in seconds.
TrainOptions quick_train(std::vector<ModelKind> kinds) {
    TrainOptions o;
    o.models = std::move(kinds);
    o.hyperparams[ModelKind::Cnn] = {{"initial_channels", 2}, {"layers_per_block", 1}, {"growth", 2},
                                     {"epochs", 2},           {"batch_size", 16}};
    o.hyperparams[ModelKind::RandomForest] = {{"n_trees", 10}};
    o.hyperparams[ModelKind::GradientBoosting] = {{"n_stages", 10}};
    o.hyperparams[ModelKind::Svc] = {{"epochs", 3}};
    return o;
}

std::size_t count_files(const fs::path& dir, const std::string& ext) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.path().extension() == ext;
    return n;
}

int run_cli(const std::string& args, const fs::path& out_file = {}) {
    std::string cmd = std::string(CLOUDMD_CLI_PATH) + " " + args;
    cmd += out_file.empty() ? " > /dev/null 2>&1" : " > '" + out_file.string() + "' 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct Fixture {
    fs::path dir;
    fs::path dataset;
    Fixture() {
        dir = scratch("fixture");
        SimulateOptions o;
        o.experiments = 4;
        o.seed = 3;
        dataset = cmd_simulate(o, dir).dataset;
    }
    ~Fixture() { fs::remove_all(dir); }
};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("record counts") {
    SimulateOptions o;
    o.experiments = 1;
    CHECK(simulate(o).first.snapshots.size() == 360);
    o.experiments = 3;
    const auto [d, m] = simulate(o);
    CHECK(d.snapshots.size() == 1080);
    CHECK(m.experiments.size() == 3);
    CHECK_NOTHROW(datastore::reconcile(m, d));
}

TEST_CASE("experiment seeds are distinct") {
    std::set<std::uint64_t> seen;
    for (std::uint32_t i = 0; i < 1000; ++i) seen.insert(experiment_seed(1, i));
    CHECK(seen.size() == 1000);
}

TEST_CASE("simulate twice gives identical files") {
    const auto a = scratch("sim_a"), b = scratch("sim_b");
    SimulateOptions o;
    o.experiments = 2;
    for (auto fmt : {datastore::Format::Binary, datastore::Format::Text}) {
        const auto ra = cmd_simulate(o, a, fmt);
        const auto rb = cmd_simulate(o, b, fmt);
        CHECK(ra.records == 720);
        CHECK(datastore::read_file(ra.dataset) == datastore::read_file(rb.dataset));
        CHECK(datastore::read_file(ra.manifest) == datastore::read_file(rb.manifest));
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("train, evaluate and report") {
    Fixture fx;
    const auto one = fx.dir / "one";
    const auto out_one = cmd_train(fx.dataset, quick_train({ModelKind::Knn}), one);
    CHECK(out_one.models.size() == 1);
    CHECK(count_files(one, ".cmdm") == 1);

    const auto all = fx.dir / "all";
    const std::vector<ModelKind> six(std::begin(models::report_kinds), std::end(models::report_kinds));
    cmd_train(fx.dataset, quick_train(six), all);
    CHECK(count_files(all, ".cmdm") == 6);

    // same seeds, same bytes
    const auto again = fx.dir / "again";
    cmd_train(fx.dataset, quick_train(six), again);
    for (auto k : six)
        CHECK(datastore::read_file(model_path(all, k)) == datastore::read_file(model_path(again, k)));

    EvaluateOptions eo;
    eo.timing.repeats = 3;
    eo.timing.min_detect_samples = 50;
    eo.timing.warmup_samples = 5;
    const auto report = fx.dir / "report";
    const auto rows = cmd_evaluate(fx.dataset, all, eo, report);
    CHECK(rows.size() == 6);
    CHECK(count_files(report, ".csv") == 3 + 6);

    // only test-split experiments were scored
    const auto split = datastore::read_split(all / "split.json").split;
    const auto d = datastore::read_dataset(fx.dataset);
    const auto test = build_set(d, split.test, datastore::load_model(model_path(all, ModelKind::Knn)).scaler, {});
    for (auto e : test.experiment) CHECK(std::count(split.test.begin(), split.test.end(), e) == 1);
    for (const auto& r : rows) CHECK(r.cm.total() == test.size());

    std::ostringstream printed;
    cmd_report(report, printed);
    for (const char* name : {"CNN", "SVC", "RFC", "KNN", "GBC", "GNB"})
        CHECK(printed.str().find(name) != std::string::npos);
    const auto back = evaluations_from_json(to_json(rows));
    REQUIRE(back.size() == 6);
    CHECK(back[0].cm == rows[0].cm);
    CHECK(back[0].metrics.f1 == rows[0].metrics.f1);
}

TEST_CASE("detect on streams") {
    Fixture fx;
    const auto models_dir = fx.dir / "m";
    cmd_train(fx.dataset, quick_train({ModelKind::RandomForest}), models_dir);
    const auto tm = datastore::load_model(model_path(models_dir, ModelKind::RandomForest));
    const auto schema = FeatureSchema::defaults();

    SUBCASE("empty stream") {
        std::istringstream in("");
        std::ostringstream out, err;
        const auto s = cmd_detect(tm, schema, in, out, err);
        CHECK(s.snapshots == 0);
        CHECK(out.str().empty());
    }

    SUBCASE("benign stream from a held-out experiment") {
        const auto split = datastore::read_split(models_dir / "split.json").split;
        const auto d = datastore::read_dataset(fx.dataset);
        std::ostringstream lines;
        std::size_t n = 0;
        for (const auto& snap : d.snapshots)
            if (snap.experiment_id == split.test.front() && snap.label == Label::Benign) {
                lines << datastore::format_snapshot_line(snap) << '\n';
                ++n;
            }
        std::istringstream in(lines.str());
        std::ostringstream out, err;
        const auto s = cmd_detect(tm, schema, in, out, err);
        CHECK(s.snapshots == n);
        CHECK(s.infected == 0);
    }

    SUBCASE("malformed line aborts or is skipped") {
        const auto d = datastore::read_dataset(fx.dataset);
        const std::string text = datastore::format_snapshot_line(d.snapshots[0]) + "\nnot a snapshot\n" +
                                 datastore::format_snapshot_line(d.snapshots[1]) + "\n";
        std::istringstream in(text);
        std::ostringstream out, err;
        CHECK_THROWS_AS(cmd_detect(tm, schema, in, out, err), StoreError);
        CHECK(err.str().find("line 2") != std::string::npos);

        std::istringstream in2(text);
        std::ostringstream out2, err2;
        DetectOptions keep_going;
        keep_going.continue_on_error = true;
        const auto s = cmd_detect(tm, schema, in2, out2, err2, keep_going);
        CHECK(s.snapshots == 2);
        CHECK(s.errors == 1);
    }

    SUBCASE("foreign feature header") {
        std::istringstream in("#features\ta\tb\n");
        std::ostringstream out, err;
        CHECK_THROWS_AS(cmd_detect(tm, schema, in, out, err), SchemaError);
    }
}

TEST_CASE("command line") {
    const auto dir = scratch("cli");
    const auto log = dir / "log.txt";
    CHECK(run_cli("--help", log) == 0);
    const auto help = datastore::read_file(log);
    for (const char* sub : {"simulate", "train", "evaluate", "detect", "report"}) CHECK(help.find(sub) != std::string::npos);
    CHECK(run_cli("simulate --help", log) == 0);
    for (const char* flag : {"--experiments", "--seed", "--intensity", "--category", "--row-cap", "--format", "--out",
                             "--config"})
        CHECK(datastore::read_file(log).find(flag) != std::string::npos);
    CHECK(run_cli("simulate --no-such-flag") != 0);
    CHECK(run_cli("") != 0);

    const auto d = dir.string();
    REQUIRE(run_cli("simulate -n 3 --seed 2 -o " + d) == 0);
    CHECK(datastore::read_dataset(dir / "dataset.cmds").snapshots.size() == 1080);

    // config keys win over flags
    {
        std::ofstream cfg(dir / "sim.cfg");
        cfg << "experiments = 1\n";
    }
    const auto d2 = (dir / "cfg").string();
    REQUIRE(run_cli("simulate -n 3 --config " + (dir / "sim.cfg").string() + " -o " + d2) == 0);
    CHECK(datastore::read_dataset(dir / "cfg" / "dataset.cmds").snapshots.size() == 360);

    REQUIRE(run_cli("train -o " + d + " -m knn,gnb") == 0);
    CHECK(count_files(dir, ".cmdm") == 2);
    CHECK(run_cli("train -o " + d + " -m knn --hp knn.bogus=1") == 2);

    const auto model = (dir / "model_gnb.cmdm").string();
    CHECK(run_cli("detect --model " + model + " -i /dev/null") == 0);
    CHECK(run_cli("evaluate -o " + d + " --no-timing") == 0);
    CHECK(fs::exists(dir / "report" / "metrics.csv"));
    CHECK(run_cli("report --dir " + (dir / "report").string(), log) == 0);
    CHECK(datastore::read_file(log).find("GNB") != std::string::npos);

    // default output directory from the environment
    const auto env_dir = dir / "env";
    CHECK(std::system(("CLOUDMD_OUT_DIR='" + env_dir.string() + "' " + std::string(CLOUDMD_CLI_PATH) +
                       " simulate -n 1 > /dev/null 2>&1")
                          .c_str()) == 0);
    CHECK(fs::exists(env_dir / "dataset.cmds"));
    fs::remove_all(dir);
}

}  // TEST_SUITE
