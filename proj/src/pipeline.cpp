// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <set>

namespace cloudmd::pipeline {

using features::LabeledSet;
using models::json;

std::uint64_t experiment_seed(std::uint64_t base_seed, std::uint32_t index) {
    std::uint64_t z = base_seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::pair<Dataset, Manifest> simulate(const SimulateOptions& options) {
    if (options.experiments == 0) throw DomainError("need at least one experiment");
    if (options.row_cap == 0) throw DomainError("row cap must be positive");
    options.base.validate();
    Dataset d;
    d.timeline = options.base.timeline;
    d.row_cap = options.row_cap;
    d.experiment_count = static_cast<std::uint32_t>(options.experiments);
    Manifest m;
    m.base_seed = options.seed;
    m.schema_hash = d.schema.hash();
    d.snapshots.reserve(options.experiments * d.timeline.tick_count());
    for (std::uint32_t i = 0; i < options.experiments; ++i) {
        sim::SimulationConfig config = options.base;
        if (options.cycle_categories)
            config.malware = sim::MalwareProfile::for_category(sim::all_categories[i % sim::all_categories.size()],
                                                               options.intensity);
        else
            config.malware.intensity = options.intensity;
        const std::uint64_t seed = experiment_seed(options.seed, i);
        auto result = sim::run_experiment(config, seed, i);
        m.experiments.push_back({i, seed, sim::to_string(config.malware.category), config.malware.intensity,
                                 result.malware_key.name, result.injection_t_s, result.snapshots.size()});
        std::move(result.snapshots.begin(), result.snapshots.end(), std::back_inserter(d.snapshots));
    }
    return {std::move(d), std::move(m)};
}

SimulateOutput cmd_simulate(const SimulateOptions& options, const fs::path& out_dir, datastore::Format format) {
    auto [d, m] = simulate(options);
    SimulateOutput out;
    out.dataset = out_dir / (format == datastore::Format::Binary ? "dataset.cmds" : "dataset.tsv");
    out.manifest = out_dir / "manifest.json";
    out.records = d.snapshots.size();
    datastore::write_dataset(d, out.dataset, format);
    datastore::write_manifest(m, out.manifest);
    return out;
}

namespace {

std::map<std::uint32_t, std::vector<const VmSnapshot*>> by_experiment(const Dataset& d) {
    std::map<std::uint32_t, std::vector<const VmSnapshot*>> out;
    for (const auto& s : d.snapshots) out[s.experiment_id].push_back(&s);
    return out;
}

void require_known(const std::map<std::uint32_t, std::vector<const VmSnapshot*>>& groups,
                   std::span<const std::uint32_t> ids) {
    for (auto id : ids)
        if (!groups.contains(id)) throw DomainError("split names experiment " + std::to_string(id) + " not in dataset");
}

LabeledSet flatten(const std::map<std::uint32_t, std::vector<const VmSnapshot*>>& groups,
                   std::span<const std::uint32_t> ids, std::size_t feature_count, const features::Scaler* scaler,
                   const features::PipelineOptions& options, features::BuildStats* stats,
                   std::vector<features::SampleMatrix>* raw) {
    LabeledSet set;
    set.rows = options.row_cap;
    set.cols = feature_count;
    for (auto id : ids) {
        for (const VmSnapshot* s : groups.at(id)) {
            auto m = features::snapshot_matrix(*s, feature_count, options, stats);
            if (!m) continue;
            if (raw) {
                raw->push_back(std::move(*m));
                set.experiment.push_back(id);
                set.t.push_back(s->t);
            } else {
                set.push(features::apply_scaler(*scaler, *m), id, s->t);
            }
        }
    }
    return set;
}

}  // namespace

LabeledSet build_set(const Dataset& d, std::span<const std::uint32_t> experiments, const features::Scaler& scaler,
                     const features::PipelineOptions& options) {
    const auto groups = by_experiment(d);
    require_known(groups, experiments);
    return flatten(groups, experiments, d.schema.size(), &scaler, options, nullptr, nullptr);
}

PreparedData prepare(const Dataset& d, const features::DatasetSplit& split, const features::PipelineOptions& options) {
    const auto groups = by_experiment(d);
    require_known(groups, split.train);
    require_known(groups, split.val);
    require_known(groups, split.test);
    const std::size_t F = d.schema.size();
    PreparedData p;
    std::vector<features::SampleMatrix> raw;
    const LabeledSet meta = flatten(groups, split.train, F, nullptr, options, &p.stats, &raw);
    if (raw.empty()) throw DomainError("training split has no usable snapshots");
    p.scaler = features::fit_scaler(raw);
    p.train.rows = options.row_cap;
    p.train.cols = F;
    for (std::size_t i = 0; i < raw.size(); ++i)
        p.train.push(features::apply_scaler(p.scaler, raw[i]), meta.experiment[i], meta.t[i]);
    p.val = flatten(groups, split.val, F, &p.scaler, options, &p.stats, nullptr);
    p.test = flatten(groups, split.test, F, &p.scaler, options, &p.stats, nullptr);
    return p;
}

std::vector<double> detection_input(const datastore::TrainedModel& m, const VmSnapshot& s) {
    const std::size_t F = m.scaler.min.size();
    for (const auto& p : s.processes)
        if (p.values.size() != F) throw SchemaError("snapshot has a process with the wrong value count");
    const auto rows = features::aggregate_unique(s.processes);
    const auto matrix = features::apply_scaler(m.scaler, features::build_matrix(rows, m.row_cap, F));
    return matrix.data;
}

fs::path model_path(const fs::path& dir, ModelKind kind) { return dir / ("model_" + models::to_string(kind) + ".cmdm"); }

TrainOutput cmd_train(const fs::path& dataset, const TrainOptions& options, const fs::path& out_dir, std::ostream* log) {
    if (options.models.empty()) throw DomainError("no models selected");
    if (options.train_repeats == 0) throw DomainError("train repeats must be at least 1");
    const Dataset d = datastore::read_dataset(dataset);
    std::vector<std::uint32_t> ids;
    for (const auto& s : d.snapshots)
        if (ids.empty() || ids.back() != s.experiment_id) ids.push_back(s.experiment_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    datastore::SplitFile split{options.split_seed, features::split_dataset(ids, {}, options.split_seed)};

    features::PipelineOptions po = options.pipeline;
    const PreparedData data = prepare(d, split.split, po);
    if (log)
        *log << "train " << data.train.size() << " / val " << data.val.size() << " / test " << data.test.size()
             << " samples, " << data.stats.truncations << " truncated matrices\n";

    TrainOutput out;
    out.split = out_dir / "split.json";
    datastore::write_split(split, out.split);
    json timing = json::object();
    for (ModelKind kind : options.models) {
        const auto hp_it = options.hyperparams.find(kind);
        const json hp = hp_it == options.hyperparams.end() ? json::object() : hp_it->second;
        std::vector<double> runs;
        std::unique_ptr<models::Classifier> model;
        for (std::size_t r = 0; r < options.train_repeats; ++r) {
            model = models::make_classifier(kind, hp);
            const auto t0 = std::chrono::steady_clock::now();
            model->fit(data.train, data.val);
            runs.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        }
        datastore::TrainedModel tm{std::move(model), data.scaler, static_cast<std::uint32_t>(po.row_cap),
                                   d.schema.hash()};
        out.models.push_back(model_path(out_dir, kind));
        datastore::save_model(tm, out.models.back());
        timing[models::to_string(kind)] = runs;
        if (log) *log << models::display_name(kind) << " trained in " << runs.back() << " s\n";
    }
    out.timing = out_dir / "train_timing.json";
    datastore::write_file_atomic(out.timing, timing.dump(2) + "\n");
    return out;
}

std::vector<eval::ModelEvaluation> cmd_evaluate(const fs::path& dataset, const fs::path& model_dir,
                                                const EvaluateOptions& options, const fs::path& out_dir,
                                                std::ostream* log) {
    const Dataset d = datastore::read_dataset(dataset);
    const auto split = datastore::read_split(model_dir / "split.json");
    {
        std::set<std::uint32_t> seen(split.split.train.begin(), split.split.train.end());
        seen.insert(split.split.val.begin(), split.split.val.end());
        for (auto id : split.split.test)
            if (seen.contains(id)) throw StoreError("test experiment " + std::to_string(id) + " is also in train/val");
    }
    std::vector<ModelKind> kinds = options.models;
    if (kinds.empty())
        for (ModelKind k : models::report_kinds)
            if (fs::exists(model_path(model_dir, k))) kinds.push_back(k);
    if (kinds.empty()) throw StoreError("no model files in " + model_dir.string());

    json train_timing = json::object();
    if (fs::exists(model_dir / "train_timing.json")) train_timing = json::parse(datastore::read_file(model_dir / "train_timing.json"));

    std::vector<eval::ModelEvaluation> rows;
    for (ModelKind kind : kinds) {
        auto tm = datastore::load_model(model_path(model_dir, kind), kind, d.schema.hash());
        features::PipelineOptions po;
        po.row_cap = tm.row_cap;
        const LabeledSet test = build_set(d, split.split.test, tm.scaler, po);
        if (test.size() == 0) throw DomainError("test split has no usable snapshots");
        for (auto e : test.experiment)
            if (std::find(split.split.test.begin(), split.split.test.end(), e) == split.split.test.end())
                throw std::logic_error("evaluation touched a non-test experiment");
        auto row = eval::evaluate(models::display_name(kind), *tm.model, test);
        if (options.measure_detection) {
            eval::TimingReport t;
            t.model = row.model;
            const auto key = models::to_string(kind);
            if (train_timing.contains(key)) t.train_s = eval::summarize(train_timing[key].get<std::vector<double>>());
            t.detect_ms = eval::time_detection(*tm.model, test, options.timing, &t.detect_samples);
            row.timing = t;
        }
        if (log) *log << row.model << " evaluated on " << test.size() << " test samples\n";
        rows.push_back(std::move(row));
    }
    eval::write_report(rows, out_dir);
    datastore::write_file_atomic(out_dir / "evaluation.json", to_json(rows).dump(2) + "\n");
    return rows;
}

namespace {

json stats_json(const eval::TimingStats& s) { return {{"runs", s.runs}, {"mean", s.mean}, {"std", s.stddev}}; }

eval::TimingStats stats_from(const json& j) {
    eval::TimingStats s;
    s.runs = j.at("runs").get<std::vector<double>>();
    s.mean = j.at("mean").get<double>();
    s.stddev = j.at("std").get<double>();
    return s;
}

}  // namespace

json to_json(const std::vector<eval::ModelEvaluation>& rows) {
    json out = json::array();
    for (const auto& r : rows) {
        json j{{"model", r.model},
               {"confusion", {{"tp", r.cm.tp}, {"tn", r.cm.tn}, {"fp", r.cm.fp}, {"fn", r.cm.fn}}},
               {"note", r.note}};
        if (r.roc) {
            json pts = json::array();
            for (const auto& p : r.roc->points)
                pts.push_back({p.fpr, p.tpr, std::isinf(p.threshold) ? json("inf") : json(p.threshold)});
            j["roc"] = {{"auc", r.roc->auc}, {"points", pts}};
        }
        if (r.timing)
            j["timing"] = {{"train_s", stats_json(r.timing->train_s)},
                           {"detect_ms", stats_json(r.timing->detect_ms)},
                           {"detect_samples", r.timing->detect_samples}};
        out.push_back(std::move(j));
    }
    return out;
}

std::vector<eval::ModelEvaluation> evaluations_from_json(const json& j) {
    std::vector<eval::ModelEvaluation> rows;
    try {
        for (const auto& e : j) {
            eval::ModelEvaluation r;
            r.model = e.at("model").get<std::string>();
            const auto& c = e.at("confusion");
            r.cm = {c.at("tp").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>(), c.at("fp").get<std::uint64_t>(),
                    c.at("fn").get<std::uint64_t>()};
            r.metrics = eval::metrics(r.cm);
            r.note = e.value("note", "");
            if (e.contains("roc")) {
                eval::RocCurve curve;
                curve.auc = e["roc"].at("auc").get<double>();
                for (const auto& p : e["roc"].at("points")) {
                    const double th = p[2].is_string() ? std::numeric_limits<double>::infinity() : p[2].get<double>();
                    curve.points.push_back({p[0].get<double>(), p[1].get<double>(), th});
                }
                r.roc = std::move(curve);
            }
            if (e.contains("timing")) {
                eval::TimingReport t;
                t.model = r.model;
                t.train_s = stats_from(e["timing"].at("train_s"));
                t.detect_ms = stats_from(e["timing"].at("detect_ms"));
                t.detect_samples = e["timing"].at("detect_samples").get<std::size_t>();
                r.timing = t;
            }
            rows.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad evaluation file: ") + e.what());
    }
    return rows;
}

void cmd_report(const fs::path& dir, std::ostream& out, const fs::path& out_dir) {
    json j;
    try {
        j = json::parse(datastore::read_file(dir / "evaluation.json"));
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad evaluation file: ") + e.what());
    }
    const auto rows = evaluations_from_json(j);
    if (!out_dir.empty()) eval::write_report(rows, out_dir);
    out << "Detection performance (test split)\n\n" << eval::metrics_table(rows) << "\nTime cost\n\n"
        << eval::timing_table(rows);
}

DetectSummary cmd_detect(const datastore::TrainedModel& model, const FeatureSchema& schema, std::istream& in,
                         std::ostream& out, std::ostream& err, const DetectOptions& options) {
    if (model.schema_hash != schema.hash()) throw SchemaError("model was trained on a different feature schema");
    if (model.scaler.min.size() != schema.size()) throw SchemaError("model scaler width differs from the schema");
    DetectSummary summary;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (line[0] == '#') {
            if (line.rfind("#features\t", 0) == 0) {
                std::vector<std::string> names;
                std::size_t start = 10;
                while (true) {
                    auto pos = line.find('\t', start);
                    names.push_back(line.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
                    if (pos == std::string::npos) break;
                    start = pos + 1;
                }
                if (!(FeatureSchema(names) == schema)) throw SchemaError("stream feature header differs from the model");
            }
            continue;
        }
        VmSnapshot s;
        std::vector<double> x;
        try {
            s = datastore::parse_snapshot_line(line, schema.size());
            x = detection_input(model, s);
        } catch (const StoreError& e) {
            ++summary.errors;
            err << "line " << line_no << ": " << e.what() << '\n';
            if (!options.continue_on_error) throw;
            continue;
        }
        const auto t0 = std::chrono::steady_clock::now();
        const double score = model.model->score(x);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        const bool infected = score >= options.threshold;
        ++summary.snapshots;
        summary.infected += infected ? 1 : 0;
        out << s.t << '\t' << score << '\t' << (infected ? "infected" : "benign") << '\t' << ms << '\n';
    }
    return summary;
}

}  // namespace cloudmd::pipeline
