// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <vector>

#include "cloudmd/datastore.hpp"
#include "cloudmd/eval.hpp"
#include "cloudmd/simulator.hpp"

namespace cloudmd::pipeline {

namespace fs = std::filesystem;
using datastore::Dataset;
using datastore::Manifest;
using models::ModelKind;

/// Seed of experiment `index` derived from the run seed (splitmix64).
std::uint64_t experiment_seed(std::uint64_t base_seed, std::uint32_t index);

struct SimulateOptions {
    std::size_t experiments = 10;
    std::uint64_t seed = 1;
    double intensity = 1.0;
    /// true: experiment i uses category i mod 7 with its default process;
    /// false: every experiment uses base.malware.
    bool cycle_categories = true;
    sim::SimulationConfig base;
    std::uint32_t row_cap = 128;
};

/// Runs the experiments in memory. Pure function of the options.
std::pair<Dataset, Manifest> simulate(const SimulateOptions& options);

struct SimulateOutput {
    fs::path dataset;
    fs::path manifest;
    std::size_t records = 0;
};
/// Writes <out_dir>/dataset.cmds (or dataset.tsv for text) and manifest.json.
SimulateOutput cmd_simulate(const SimulateOptions& options, const fs::path& out_dir,
                            datastore::Format format = datastore::Format::Binary);

/// Scaled learning sets for one split.
struct PreparedData {
    features::LabeledSet train;
    features::LabeledSet val;
    features::LabeledSet test;
    features::Scaler scaler;
    features::BuildStats stats;
};

/// Builds matrices per experiment, fits the scaler on the training matrices and
/// flattens every split. Snapshots whose label is excluded are skipped.
PreparedData prepare(const Dataset& d, const features::DatasetSplit& split,
                     const features::PipelineOptions& options);
/// Flattens the snapshots of `experiments` with an already fitted scaler.
features::LabeledSet build_set(const Dataset& d, std::span<const std::uint32_t> experiments,
                               const features::Scaler& scaler, const features::PipelineOptions& options);
/// Model input for one snapshot regardless of its label.
std::vector<double> detection_input(const datastore::TrainedModel& m, const VmSnapshot& s);

struct TrainOptions {
    std::uint64_t split_seed = 7;
    std::vector<ModelKind> models{std::begin(models::report_kinds), std::end(models::report_kinds)};
    std::map<ModelKind, models::json> hyperparams;
    features::PipelineOptions pipeline;
    std::size_t train_repeats = 1;  ///< extra fits only feed the timing record
};

struct TrainOutput {
    fs::path split;
    std::vector<fs::path> models;
    fs::path timing;
};

fs::path model_path(const fs::path& dir, ModelKind kind);

/// Writes split.json, model_<kind>.cmdm per model and train_timing.json into `out_dir`.
TrainOutput cmd_train(const fs::path& dataset, const TrainOptions& options, const fs::path& out_dir,
                      std::ostream* log = nullptr);

struct EvaluateOptions {
    std::vector<ModelKind> models;  ///< empty: every model file found in the model directory
    eval::TimingOptions timing;
    bool measure_detection = true;
};

/// Test-split-only evaluation; writes the report files and evaluation.json into `out_dir`.
std::vector<eval::ModelEvaluation> cmd_evaluate(const fs::path& dataset, const fs::path& model_dir,
                                                const EvaluateOptions& options, const fs::path& out_dir,
                                                std::ostream* log = nullptr);

/// Evaluations as JSON and back, for `report`.
models::json to_json(const std::vector<eval::ModelEvaluation>& rows);
std::vector<eval::ModelEvaluation> evaluations_from_json(const models::json& j);

/// Re-renders the report files from <dir>/evaluation.json and prints both tables.
void cmd_report(const fs::path& dir, std::ostream& out, const fs::path& out_dir = {});

struct DetectOptions {
    double threshold = 0.5;
    bool continue_on_error = false;  ///< false: abort at the first malformed line
};

struct DetectSummary {
    std::size_t snapshots = 0;
    std::size_t infected = 0;
    std::size_t errors = 0;
};

/// Reads snapshot lines (blank and '#' lines skipped, a '#features' header is
/// checked against the model) and writes "t<TAB>score<TAB>verdict<TAB>latency_ms"
/// per snapshot. Latency covers the score call only.
DetectSummary cmd_detect(const datastore::TrainedModel& model, const FeatureSchema& schema, std::istream& in,
                         std::ostream& out, std::ostream& err, const DetectOptions& options = {});

}  // namespace cloudmd::pipeline
