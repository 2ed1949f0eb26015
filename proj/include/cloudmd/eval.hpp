// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cloudmd/models/classifier.hpp"

namespace cloudmd::eval {

struct ConfusionMatrix {
    std::uint64_t tp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
    void add(int predicted, int actual);
    bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> actual);
/// Predicted label is score >= threshold.
ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const int> actual, double threshold = 0.5);

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    // set when the value was forced to 0 by a zero denominator
    bool precision_undefined = false;
    bool recall_undefined = false;
    bool f1_undefined = false;
};

/// Throws DomainError on an empty matrix.
Metrics metrics(const ConfusionMatrix& cm);
/// Harmonic mean; 0 when precision + recall is 0.
double f1_score(double precision, double recall);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;  ///< scores >= threshold are called infected
};

struct RocCurve {
    std::vector<RocPoint> points;  ///< from (0, 0) at +inf to (1, 1)
    double auc = 0.0;
};

/// Sweeps every distinct score, highest first. Tied scores enter together, so
/// the trapezoid counts a tie as half. Throws DomainError unless both classes occur.
RocCurve roc(std::span<const double> scores, std::span<const int> labels);

struct TimingStats {
    std::vector<double> runs;
    double mean = 0.0;
    double stddev = 0.0;  ///< sample standard deviation; 0 for a single run
};
TimingStats summarize(std::vector<double> runs);

struct TimingReport {
    std::string model;
    TimingStats train_s;
    TimingStats detect_ms;  ///< per single-sample score call
    std::size_t detect_samples = 0;  ///< score calls per detection run
};

struct TimingOptions {
    std::size_t repeats = 3;
    std::size_t min_detect_samples = 1000;
    std::size_t warmup_samples = 100;
};

/// Per-sample scoring latency: after a warm-up pass, scores the test samples one
/// at a time (cycling) until at least `min_detect_samples` calls, `repeats` times.
TimingStats time_detection(const models::Classifier& model, const features::LabeledSet& test,
                           const TimingOptions& options, std::size_t* samples_per_run = nullptr);

/// Trains a fresh model `repeats` times and measures detection on the last one,
/// which is returned through `trained` when non-null.
TimingReport time_model(const std::string& name, const std::function<std::unique_ptr<models::Classifier>()>& make,
                        const features::LabeledSet& train, const features::LabeledSet& val,
                        const features::LabeledSet& test, const TimingOptions& options = {},
                        std::unique_ptr<models::Classifier>* trained = nullptr);

/// Everything the report needs about one model.
struct ModelEvaluation {
    std::string model;  ///< display name, also used for roc_<model>.csv
    ConfusionMatrix cm;
    Metrics metrics;
    std::optional<RocCurve> roc;  ///< empty when the test set lacks a class
    std::optional<TimingReport> timing;
    std::string note;
};

/// Scores `test` and fills confusion matrix, metrics and ROC.
ModelEvaluation evaluate(const std::string& name, const models::Classifier& model, const features::LabeledSet& test);

struct ReportFiles {
    std::filesystem::path metrics_txt;
    std::filesystem::path metrics_csv;
    std::filesystem::path auc_csv;
    std::filesystem::path timing_txt;
    std::filesystem::path timing_csv;
    std::vector<std::filesystem::path> roc_csv;
};

std::string metrics_table(std::span<const ModelEvaluation> rows);
std::string timing_table(std::span<const ModelEvaluation> rows);

/// Writes metrics.txt / metrics.csv (Model, Accuracy, Precision, Recall, F1),
/// auc.csv, timing.txt / timing.csv and one roc_<model>.csv per model with a curve.
/// Models without a curve get a flagged auc row and no ROC file.
ReportFiles write_report(std::span<const ModelEvaluation> rows, const std::filesystem::path& dir);

}  // namespace cloudmd::eval
