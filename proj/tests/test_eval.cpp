// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include <unistd.h>

#include "cloudmd/datastore.hpp"
#include "cloudmd/eval.hpp"
#include "cloudmd/models/naive_bayes.hpp"
#include "oracles.hpp"

using namespace cloudmd;
using namespace cloudmd::eval;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    auto p = fs::temp_directory_path() / ("cloudmd_eval_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(p);
    return p;
}

std::size_t line_count(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("f1 from published precision and recall") {
    CHECK(std::abs(100.0 * f1_score(0.862, 0.8091) - 83.47) <= 0.05);
    CHECK(std::abs(100.0 * f1_score(0.4806, 0.9857) - 64.61) <= 0.05);
    CHECK(f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("perfect classifier") {
    const auto m = metrics({5, 5, 0, 0});
    CHECK(m.accuracy == 1.0);
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == 1.0);
    CHECK_FALSE(m.precision_undefined);
}

TEST_CASE("degenerate confusion matrices") {
    const auto none = metrics({0, 4, 0, 2});
    CHECK(none.precision == 0.0);
    CHECK(none.precision_undefined);
    CHECK(none.recall == 0.0);
    CHECK_FALSE(none.recall_undefined);
    const auto no_pos = metrics({0, 4, 1, 0});
    CHECK(no_pos.recall_undefined);
    CHECK_THROWS_AS(metrics({}), DomainError);
}

TEST_CASE("confusion counting") {
    const int pred[] = {1, 1, 0, 0, 1};
    const int act[] = {1, 0, 0, 1, 1};
    const auto cm = confusion(pred, act);
    CHECK(cm == ConfusionMatrix{2, 1, 1, 1});
    const double scores[] = {0.5, 0.49, 0.1, 0.9};
    const int y[] = {0, 0, 1, 1};
    CHECK(confusion_at(scores, y) == ConfusionMatrix{1, 1, 1, 1});
}

TEST_CASE("roc basics") {
    const double s[] = {0.9, 0.1};
    const int y[] = {1, 0};
    CHECK(roc(s, y).auc == 1.0);
    const double flat[] = {0.3, 0.3, 0.3, 0.3};
    const int yf[] = {1, 0, 0, 1};
    const auto r = roc(flat, yf);
    CHECK(r.auc == 0.5);
    CHECK(r.points.size() == 2);
    CHECK(r.points.front().fpr == 0.0);
    CHECK(r.points.back().tpr == 1.0);
    const int one_class[] = {1, 1};
    CHECK_THROWS_AS(roc(s, one_class), DomainError);
}

TEST_CASE("roc auc matches the pair-count oracle") {
    std::mt19937_64 rng(1);
    for (std::size_t n : {50u, 400u, 2000u}) {
        std::uniform_int_distribution<int> coarse(0, 20);  // forces ties
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<int>(rng() % 2);
            s[i] = (coarse(rng) + 4 * y[i]) / 24.0;
        }
        CHECK(std::abs(roc(s, y).auc - oracle::mann_whitney_auc(s, y)) <= 1e-9);
    }
}

TEST_CASE("roc points are monotone") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u;
    std::vector<double> s(300);
    std::vector<int> y(300);
    for (std::size_t i = 0; i < s.size(); ++i) {
        y[i] = static_cast<int>(i % 3 == 0);
        s[i] = u(rng) + 0.3 * y[i];
    }
    const auto r = roc(s, y);
    for (std::size_t i = 1; i < r.points.size(); ++i) {
        CHECK(r.points[i].fpr >= r.points[i - 1].fpr);
        CHECK(r.points[i].tpr >= r.points[i - 1].tpr);
        CHECK(r.points[i].threshold < r.points[i - 1].threshold);
    }
}

TEST_CASE("timing summary") {
    const auto t = summarize({1.0, 2.0, 3.0});
    CHECK(t.mean == 2.0);
    CHECK(t.stddev == doctest::Approx(1.0));
    CHECK(summarize({4.0}).stddev == 0.0);
}

TEST_CASE("timing measures positive durations") {
    const auto train = oracle::blobs(100, 2.0, 3);
    TimingOptions opt;
    opt.min_detect_samples = 200;
    std::unique_ptr<models::Classifier> trained;
    const auto rep = time_model(
        "GNB", [] { return std::make_unique<models::GaussianNbClassifier>(); }, train, {}, train, opt, &trained);
    CHECK(rep.train_s.runs.size() == 3);
    CHECK(rep.detect_ms.runs.size() == 3);
    for (double v : rep.train_s.runs) CHECK(v > 0.0);
    for (double v : rep.detect_ms.runs) CHECK(v > 0.0);
    CHECK(rep.detect_samples >= 200);
    REQUIRE(trained);
    CHECK(trained->kind() == models::ModelKind::GaussianNb);
}

TEST_CASE("report files") {
    const auto test = oracle::blobs(60, 1.5, 4);
    models::GaussianNbClassifier m;
    m.fit(test, {});
    std::vector<ModelEvaluation> rows;
    for (const char* name : {"CNN", "SVC", "RFC", "KNN", "GBC", "GNB"}) rows.push_back(evaluate(name, m, test));
    // one model sees only one class and must be flagged, not fatal
    auto one_class = test;
    std::fill(one_class.y.begin(), one_class.y.end(), 0);
    rows[2] = evaluate("RFC", m, one_class);
    CHECK_FALSE(rows[2].roc.has_value());

    const auto dir = scratch("report");
    const auto files = write_report(rows, dir);
    CHECK(files.roc_csv.size() == 5);
    const auto csv = datastore::read_file(files.metrics_csv);
    CHECK(csv.rfind("Model,Accuracy,Precision,Recall,F1", 0) == 0);
    CHECK(line_count(csv) == 7);
    const auto txt = metrics_table(rows);
    for (const char* name : {"CNN", "SVC", "RFC", "KNN", "GBC", "GNB"}) CHECK(txt.find(name) != std::string::npos);
    const auto roc_text = datastore::read_file(dir / "roc_GNB.csv");
    CHECK(roc_text.rfind("fpr,tpr,threshold", 0) == 0);
    fs::remove_all(dir);
}

}  // TEST_SUITE
