// SPDX-License-Identifier: Apache-2.0
//
// cloudmd: simulate, train, evaluate, detect, report.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cloudmd/config.hpp"
#include "cloudmd/pipeline.hpp"

namespace {

using namespace cloudmd;
namespace fs = std::filesystem;
using models::ModelKind;
using json = nlohmann::json;

fs::path default_out_dir() {
    const char* env = std::getenv("CLOUDMD_OUT_DIR");
    return env && *env ? fs::path(env) : fs::path("out");
}

std::vector<ModelKind> parse_models(const std::string& text) {
    std::vector<ModelKind> out;
    if (text == "all") return {std::begin(models::report_kinds), std::end(models::report_kinds)};
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(models::kind_from_string(item));
    if (out.empty()) throw DomainError("empty model list");
    return out;
}

// "model.key=value"; the value is read as JSON when it parses, else as a string
void add_hyperparam(std::map<ModelKind, json>& hp, const std::string& model, const std::string& key,
                    const std::string& value) {
    json v;
    try {
        v = json::parse(value);
    } catch (const json::exception&) {
        v = value;
    }
    auto& slot = hp[models::kind_from_string(model)];
    if (slot.is_null()) slot = json::object();
    slot[key] = v;
}

void add_hyperparam_flag(std::map<ModelKind, json>& hp, const std::string& text) {
    const auto dot = text.find('.');
    const auto eq = text.find('=');
    if (dot == std::string::npos || eq == std::string::npos || eq < dot)
        throw DomainError("hyperparameter '" + text + "' must look like model.key=value");
    add_hyperparam(hp, text.substr(0, dot), text.substr(dot + 1, eq - dot - 1), text.substr(eq + 1));
}

std::optional<KeyValueConfig> load_config(const std::string& path) {
    if (path.empty()) return std::nullopt;
    return KeyValueConfig::load(path);
}

struct SimulateArgs {
    std::string config;
    std::size_t experiments = 10;
    std::uint64_t seed = 1;
    double intensity = 1.0;
    std::string category;
    std::uint32_t row_cap = 128;
    std::string format = "binary";
    std::string out;
};

int run_simulate(const SimulateArgs& a) {
    pipeline::SimulateOptions o;
    o.experiments = a.experiments;
    o.seed = a.seed;
    o.intensity = a.intensity;
    o.row_cap = a.row_cap;
    std::string format = a.format;
    fs::path out = a.out.empty() ? default_out_dir() : fs::path(a.out);
    if (!a.category.empty()) {
        o.cycle_categories = false;
        o.base.malware = sim::MalwareProfile::for_category(sim::category_from_string(a.category), a.intensity);
    }
    if (auto kv = load_config(a.config)) {
        o.experiments = kv->get_uint("experiments", o.experiments);
        o.seed = kv->get_uint("seed", o.seed);
        o.row_cap = static_cast<std::uint32_t>(kv->get_uint("row_cap", o.row_cap));
        format = kv->get_string("format", format);
        out = kv->get_string("out", out.string());
        if (kv->has("malware.category")) o.cycle_categories = false;
        o.base = apply_simulation_keys(*kv, o.base);
        o.intensity = kv->get_double("malware.intensity", o.intensity);
        kv->reject_unread();
    }
    if (format != "binary" && format != "text") throw ConfigError("format must be binary or text");
    const auto res = pipeline::cmd_simulate(o, out, format == "binary" ? datastore::Format::Binary : datastore::Format::Text);
    std::cout << res.records << " records from " << o.experiments << " experiments\n"
              << "dataset  " << res.dataset.string() << "\nmanifest " << res.manifest.string() << '\n';
    return 0;
}

struct TrainArgs {
    std::string config;
    std::string dataset;
    std::string out;
    std::uint64_t split_seed = 7;
    std::string models = "all";
    std::vector<std::string> hp;
    std::size_t row_cap = 128;
    bool fold_window = false;
    std::size_t repeats = 1;
};

int run_train(const TrainArgs& a) {
    pipeline::TrainOptions o;
    o.split_seed = a.split_seed;
    std::string model_list = a.models;
    for (const auto& h : a.hp) add_hyperparam_flag(o.hyperparams, h);
    o.pipeline.row_cap = a.row_cap;
    o.pipeline.fold_window = a.fold_window;
    o.train_repeats = a.repeats;
    fs::path out = a.out.empty() ? default_out_dir() : fs::path(a.out);
    std::string dataset = a.dataset;
    if (auto kv = load_config(a.config)) {
        o.split_seed = kv->get_uint("split_seed", o.split_seed);
        model_list = kv->get_string("models", model_list);
        o.pipeline.row_cap = kv->get_uint("row_cap", o.pipeline.row_cap);
        o.pipeline.fold_window = kv->get_bool("fold_window", o.pipeline.fold_window);
        o.train_repeats = kv->get_uint("train_repeats", o.train_repeats);
        out = kv->get_string("out", out.string());
        dataset = kv->get_string("dataset", dataset);
        for (const auto& [key, value] : kv->values()) {
            if (key.rfind("hp.", 0) != 0) continue;
            const auto rest = key.substr(3);
            const auto dot = rest.find('.');
            if (dot == std::string::npos) throw ConfigError("config key '" + key + "' must be hp.<model>.<name>");
            kv->get(key);
            add_hyperparam(o.hyperparams, rest.substr(0, dot), rest.substr(dot + 1), value);
        }
        kv->reject_unread();
    }
    o.models = parse_models(model_list);
    if (dataset.empty()) dataset = (out / "dataset.cmds").string();
    const auto res = pipeline::cmd_train(dataset, o, out, &std::cout);
    std::cout << "split    " << res.split.string() << '\n';
    for (const auto& m : res.models) std::cout << "model    " << m.string() << '\n';
    return 0;
}

struct EvaluateArgs {
    std::string config;
    std::string dataset;
    std::string model_dir;
    std::string out;
    std::string models;
    std::size_t detect_samples = 1000;
    std::size_t repeats = 3;
    bool no_timing = false;
};

int run_evaluate(const EvaluateArgs& a) {
    pipeline::EvaluateOptions o;
    std::string model_list = a.models;
    o.timing.min_detect_samples = a.detect_samples;
    o.timing.repeats = a.repeats;
    o.measure_detection = !a.no_timing;
    fs::path out = a.out.empty() ? default_out_dir() : fs::path(a.out);
    std::string dataset = a.dataset, model_dir = a.model_dir;
    if (auto kv = load_config(a.config)) {
        model_list = kv->get_string("models", model_list);
        o.timing.min_detect_samples = kv->get_uint("detect_samples", o.timing.min_detect_samples);
        o.timing.repeats = kv->get_uint("timing_repeats", o.timing.repeats);
        o.measure_detection = kv->get_bool("timing", o.measure_detection);
        out = kv->get_string("out", out.string());
        dataset = kv->get_string("dataset", dataset);
        model_dir = kv->get_string("model_dir", model_dir);
        kv->reject_unread();
    }
    if (!model_list.empty()) o.models = parse_models(model_list);
    if (dataset.empty()) dataset = (out / "dataset.cmds").string();
    if (model_dir.empty()) model_dir = out.string();
    const auto rows = pipeline::cmd_evaluate(dataset, model_dir, o, out / "report", &std::cout);
    std::cout << '\n' << eval::metrics_table(rows) << '\n' << eval::timing_table(rows);
    return 0;
}

struct DetectArgs {
    std::string config;
    std::string model;
    std::string input = "-";
    double threshold = 0.5;
    bool continue_on_error = false;
};

int run_detect(const DetectArgs& a) {
    pipeline::DetectOptions o;
    o.threshold = a.threshold;
    o.continue_on_error = a.continue_on_error;
    std::string model = a.model, input = a.input;
    if (auto kv = load_config(a.config)) {
        o.threshold = kv->get_double("threshold", o.threshold);
        o.continue_on_error = kv->get_bool("continue_on_error", o.continue_on_error);
        model = kv->get_string("model", model);
        input = kv->get_string("input", input);
        kv->reject_unread();
    }
    if (model.empty()) throw ConfigError("--model is required");
    const auto tm = datastore::load_model(model);
    pipeline::DetectSummary s;
    if (input == "-") {
        s = pipeline::cmd_detect(tm, FeatureSchema::defaults(), std::cin, std::cout, std::cerr, o);
    } else {
        std::ifstream in(input);
        if (!in) throw StoreError("cannot open " + input);
        s = pipeline::cmd_detect(tm, FeatureSchema::defaults(), in, std::cout, std::cerr, o);
    }
    std::cerr << s.snapshots << " snapshots, " << s.infected << " infected verdicts, " << s.errors << " bad lines\n";
    return s.infected > 0 ? 1 : 0;
}

struct ReportArgs {
    std::string dir;
    std::string out;
};

int run_report(const ReportArgs& a) {
    const fs::path dir = a.dir.empty() ? default_out_dir() / "report" : fs::path(a.dir);
    pipeline::cmd_report(dir, std::cout, a.out);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Process-level malware detection on simulated cloud VMs"};
    app.require_subcommand(1);
    app.footer("Output directory defaults to $CLOUDMD_OUT_DIR, else ./out. Values in --config files override flags.");

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "Run experiments and write dataset + manifest");
    sim->add_option("--config", sa.config, "key = value file (overrides flags)")->check(CLI::ExistingFile);
    sim->add_option("-n,--experiments", sa.experiments, "number of experiments")->capture_default_str();
    sim->add_option("--seed", sa.seed, "run seed")->capture_default_str();
    sim->add_option("--intensity", sa.intensity, "malware footprint scale, 0 disables it")->capture_default_str();
    sim->add_option("--category", sa.category,
                    "use one malware category for every experiment instead of cycling all seven");
    sim->add_option("--row-cap", sa.row_cap, "unique-process rows per matrix")->capture_default_str();
    sim->add_option("--format", sa.format, "binary or text")->capture_default_str();
    sim->add_option("-o,--out", sa.out, "output directory");

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Fit models on the train split and save them");
    train->add_option("--config", ta.config, "key = value file (overrides flags)")->check(CLI::ExistingFile);
    train->add_option("-d,--dataset", ta.dataset, "dataset file (default <out>/dataset.cmds)");
    train->add_option("-o,--out", ta.out, "output directory");
    train->add_option("--split-seed", ta.split_seed, "experiment shuffle seed")->capture_default_str();
    train->add_option("-m,--models", ta.models, "all or a comma list of knn,gnb,rf,gbt,svc,cnn,tree")
        ->capture_default_str();
    train->add_option("--hp", ta.hp, "hyperparameter override model.key=value (repeatable)");
    train->add_option("--row-cap", ta.row_cap, "unique-process rows per matrix")->capture_default_str();
    train->add_flag("--fold-window", ta.fold_window, "label injection-window snapshots infected instead of dropping them");
    train->add_option("--repeats", ta.repeats, "fits per model for the training-time record")->capture_default_str();

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Score the test split and write the report");
    evaluate->add_option("--config", ea.config, "key = value file (overrides flags)")->check(CLI::ExistingFile);
    evaluate->add_option("-d,--dataset", ea.dataset, "dataset file (default <out>/dataset.cmds)");
    evaluate->add_option("--models-dir", ea.model_dir, "directory holding split.json and model files (default <out>)");
    evaluate->add_option("-o,--out", ea.out, "output directory; the report goes to <out>/report");
    evaluate->add_option("-m,--models", ea.models, "comma list (default: every model file present)");
    evaluate->add_option("--detect-samples", ea.detect_samples, "score calls per detection timing run")
        ->capture_default_str();
    evaluate->add_option("--repeats", ea.repeats, "detection timing runs")->capture_default_str();
    evaluate->add_flag("--no-timing", ea.no_timing, "skip detection timing");

    DetectArgs da;
    auto* detect = app.add_subcommand(
        "detect", "Score a snapshot stream; prints t, score, verdict, latency_ms per line. Exit 1 if any verdict is infected");
    detect->add_option("--config", da.config, "key = value file (overrides flags)")->check(CLI::ExistingFile);
    detect->add_option("--model", da.model, "model file");
    detect->add_option("-i,--input", da.input, "snapshot lines, '-' for standard input")->capture_default_str();
    detect->add_option("--threshold", da.threshold, "infected when score >= threshold")->capture_default_str();
    detect->add_flag("--continue-on-error", da.continue_on_error, "report malformed lines and keep going");

    ReportArgs ra;
    auto* report = app.add_subcommand("report", "Print the comparison tables from an evaluation");
    report->add_option("--dir", ra.dir, "report directory holding evaluation.json (default <out>/report)");
    report->add_option("-o,--out", ra.out, "also rewrite the report files here");

    CLI11_PARSE(app, argc, argv);
    try {
        if (sim->parsed()) return run_simulate(sa);
        if (train->parsed()) return run_train(ta);
        if (evaluate->parsed()) return run_evaluate(ea);
        if (detect->parsed()) return run_detect(da);
        if (report->parsed()) return run_report(ra);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
