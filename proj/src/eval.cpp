// SPDX-License-Identifier: Apache-2.0

#include "cloudmd/eval.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "cloudmd/datastore.hpp"

namespace cloudmd::eval {

void ConfusionMatrix::add(int predicted, int actual) {
    if (actual == 1)
        ++(predicted == 1 ? tp : fn);
    else
        ++(predicted == 1 ? fp : tn);
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> actual) {
    if (predicted.size() != actual.size()) throw DomainError("prediction and label counts differ");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < actual.size(); ++i) cm.add(predicted[i], actual[i]);
    return cm;
}

ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const int> actual, double threshold) {
    if (scores.size() != actual.size()) throw DomainError("score and label counts differ");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < actual.size(); ++i) cm.add(scores[i] >= threshold ? 1 : 0, actual[i]);
    return cm;
}

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

Metrics metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw DomainError("metrics of an empty confusion matrix");
    Metrics m;
    m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    if (cm.tp + cm.fp == 0)
        m.precision_undefined = true;
    else
        m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
    if (cm.tp + cm.fn == 0)
        m.recall_undefined = true;
    else
        m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
    if (m.precision + m.recall == 0.0) m.f1_undefined = true;
    m.f1 = f1_score(m.precision, m.recall);
    return m;
}

RocCurve roc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DomainError("score and label counts differ");
    std::uint64_t pos = 0;
    for (int y : labels) pos += y == 1 ? 1 : 0;
    const std::uint64_t neg = labels.size() - pos;
    if (pos == 0 || neg == 0) throw DomainError("roc needs both classes");
    for (double s : scores)
        if (std::isnan(s)) throw DomainError("roc score is NaN");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve curve;
    curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::uint64_t tp = 0, fp = 0;
    double area2 = 0.0;  // twice the area, in units of pos * neg
    for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        const std::uint64_t tp0 = tp, fp0 = fp;
        for (; k < order.size() && scores[order[k]] == s; ++k) ++(labels[order[k]] == 1 ? tp : fp);
        area2 += static_cast<double>(fp - fp0) * static_cast<double>(tp + tp0);
        curve.points.push_back(
            {static_cast<double>(fp) / static_cast<double>(neg), static_cast<double>(tp) / static_cast<double>(pos), s});
    }
    curve.auc = area2 / (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
    return curve;
}

TimingStats summarize(std::vector<double> runs) {
    TimingStats t;
    t.runs = std::move(runs);
    if (t.runs.empty()) return t;
    const double n = static_cast<double>(t.runs.size());
    t.mean = std::accumulate(t.runs.begin(), t.runs.end(), 0.0) / n;
    if (t.runs.size() > 1) {
        double ss = 0.0;
        for (double v : t.runs) ss += (v - t.mean) * (v - t.mean);
        t.stddev = std::sqrt(ss / (n - 1.0));
    }
    return t;
}

namespace {
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }
}  // namespace

TimingStats time_detection(const models::Classifier& model, const features::LabeledSet& test,
                           const TimingOptions& options, std::size_t* samples_per_run) {
    if (test.size() == 0) throw DomainError("detection timing needs test samples");
    if (options.repeats == 0) throw DomainError("timing needs at least one repeat");
    volatile double sink = 0.0;
    for (std::size_t i = 0; i < std::min(options.warmup_samples, test.size()); ++i) sink = sink + model.score(test.sample(i));
    const std::size_t calls = std::max<std::size_t>(options.min_detect_samples, 1);
    std::vector<double> runs;
    for (std::size_t r = 0; r < options.repeats; ++r) {
        const auto t0 = Clock::now();
        for (std::size_t k = 0; k < calls; ++k) sink = sink + model.score(test.sample(k % test.size()));
        runs.push_back(1e3 * seconds_since(t0) / static_cast<double>(calls));
    }
    if (samples_per_run) *samples_per_run = calls;
    return summarize(std::move(runs));
}

TimingReport time_model(const std::string& name, const std::function<std::unique_ptr<models::Classifier>()>& make,
                        const features::LabeledSet& train, const features::LabeledSet& val,
                        const features::LabeledSet& test, const TimingOptions& options,
                        std::unique_ptr<models::Classifier>* trained) {
    if (options.repeats == 0) throw DomainError("timing needs at least one repeat");
    TimingReport report;
    report.model = name;
    std::vector<double> train_runs;
    std::unique_ptr<models::Classifier> model;
    for (std::size_t r = 0; r < options.repeats; ++r) {
        model = make();
        const auto t0 = Clock::now();
        model->fit(train, val);
        train_runs.push_back(seconds_since(t0));
    }
    report.train_s = summarize(std::move(train_runs));
    report.detect_ms = time_detection(*model, test, options, &report.detect_samples);
    if (trained) *trained = std::move(model);
    return report;
}

ModelEvaluation evaluate(const std::string& name, const models::Classifier& model, const features::LabeledSet& test) {
    ModelEvaluation e;
    e.model = name;
    const auto scores = model.score_all(test);
    e.cm = confusion_at(scores, test.y);
    e.metrics = metrics(e.cm);
    if (e.cm.tp + e.cm.fn > 0 && e.cm.tn + e.cm.fp > 0)
        e.roc = roc(scores, test.y);
    else
        e.note = "test set lacks a class; no ROC";
    return e;
}

namespace {

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string exact(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string pct(double v, bool undefined) { return fixed(100.0 * v, 2) + (undefined ? "%*" : "%"); }

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

std::string render(const std::vector<std::vector<std::string>>& cells) {
    std::vector<std::size_t> width;
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (width.size() <= c) width.push_back(0);
            width[c] = std::max(width[c], row[c].size());
        }
    std::ostringstream out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t c = 0; c < cells[r].size(); ++c)
            out << (c ? "  " : "") << (c + 1 < cells[r].size() ? pad(cells[r][c], width[c]) : cells[r][c]);
        out << '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w;
            out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
        }
    }
    return out.str();
}

}  // namespace

std::string metrics_table(std::span<const ModelEvaluation> rows) {
    std::vector<std::vector<std::string>> cells{{"Model", "Accuracy", "Precision", "Recall", "F1"}};
    bool any_undefined = false;
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        any_undefined = any_undefined || m.precision_undefined || m.recall_undefined || m.f1_undefined;
        cells.push_back({r.model, pct(m.accuracy, false), pct(m.precision, m.precision_undefined),
                         pct(m.recall, m.recall_undefined), pct(m.f1, m.f1_undefined)});
    }
    std::string out = render(cells);
    if (any_undefined) out += "* zero denominator, reported as 0\n";
    std::vector<std::vector<std::string>> auc{{"Model", "AUC", "Note"}};
    for (const auto& r : rows) auc.push_back({r.model, r.roc ? fixed(r.roc->auc, 4) : "n/a", r.note});
    return out + "\n" + render(auc);
}

std::string timing_table(std::span<const ModelEvaluation> rows) {
    std::vector<std::vector<std::string>> cells{
        {"Model", "Train (s)", "Train std", "Detect (ms)", "Detect std", "Runs"}};
    for (const auto& r : rows) {
        if (!r.timing) {
            cells.push_back({r.model, "n/a", "n/a", "n/a", "n/a", "0"});
            continue;
        }
        const auto& t = *r.timing;
        cells.push_back({r.model, fixed(t.train_s.mean, 3), fixed(t.train_s.stddev, 3), fixed(t.detect_ms.mean, 4),
                         fixed(t.detect_ms.stddev, 4),
                         std::to_string(t.train_s.runs.size()) + "/" + std::to_string(t.detect_ms.runs.size())});
    }
    return render(cells);
}

ReportFiles write_report(std::span<const ModelEvaluation> rows, const std::filesystem::path& dir) {
    if (rows.empty()) throw DomainError("report needs at least one evaluated model");
    std::filesystem::create_directories(dir);
    ReportFiles files;
    files.metrics_txt = dir / "metrics.txt";
    files.metrics_csv = dir / "metrics.csv";
    files.auc_csv = dir / "auc.csv";
    files.timing_txt = dir / "timing.txt";
    files.timing_csv = dir / "timing.csv";

    datastore::write_file_atomic(files.metrics_txt, metrics_table(rows));

    std::ostringstream csv;
    csv << "Model,Accuracy,Precision,Recall,F1\n";
    for (const auto& r : rows)
        csv << r.model << ',' << exact(r.metrics.accuracy) << ',' << exact(r.metrics.precision) << ','
            << exact(r.metrics.recall) << ',' << exact(r.metrics.f1) << '\n';
    datastore::write_file_atomic(files.metrics_csv, csv.str());

    std::ostringstream auc;
    auc << "Model,AUC,flag\n";
    for (const auto& r : rows) auc << r.model << ',' << (r.roc ? exact(r.roc->auc) : "") << ',' << (r.roc ? "" : "no_roc") << '\n';
    datastore::write_file_atomic(files.auc_csv, auc.str());

    datastore::write_file_atomic(files.timing_txt, timing_table(rows));
    std::ostringstream timing;
    timing << "Model,train_s_mean,train_s_std,train_runs,detect_ms_mean,detect_ms_std,detect_runs,detect_samples\n";
    for (const auto& r : rows) {
        if (!r.timing) {
            timing << r.model << ",,,0,,,0,0\n";
            continue;
        }
        const auto& t = *r.timing;
        timing << r.model << ',' << exact(t.train_s.mean) << ',' << exact(t.train_s.stddev) << ','
               << t.train_s.runs.size() << ',' << exact(t.detect_ms.mean) << ',' << exact(t.detect_ms.stddev) << ','
               << t.detect_ms.runs.size() << ',' << t.detect_samples << '\n';
    }
    datastore::write_file_atomic(files.timing_csv, timing.str());

    for (const auto& r : rows) {
        if (!r.roc) continue;
        std::ostringstream out;
        out << "fpr,tpr,threshold\n";
        for (const auto& p : r.roc->points) out << exact(p.fpr) << ',' << exact(p.tpr) << ',' << exact(p.threshold) << '\n';
        auto path = dir / ("roc_" + r.model + ".csv");
        datastore::write_file_atomic(path, out.str());
        files.roc_csv.push_back(std::move(path));
    }
    return files;
}

}  // namespace cloudmd::eval
