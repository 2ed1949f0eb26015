// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "cloudmd/models/decision_tree.hpp"
#include "cloudmd/models/gradient_boosting.hpp"
#include "cloudmd/models/knn.hpp"
#include "cloudmd/models/naive_bayes.hpp"
#include "cloudmd/models/random_forest.hpp"
#include "cloudmd/models/svc.hpp"
#include "oracles.hpp"

using namespace cloudmd;
using namespace cloudmd::models;
using oracle::make_set;

namespace {

const LabeledSet kEmpty;

LabeledSet random_set(std::size_t n, std::size_t dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<std::vector<double>> xs;
    std::vector<int> ys;
    for (std::size_t i = 0; i < n; ++i) {
        const int y = static_cast<int>(rng() % 2);
        std::vector<double> x(dim);
        for (auto& v : x) v = nd(rng) + 0.7 * y;
        xs.push_back(x);
        ys.push_back(y);
    }
    return make_set(xs, ys);
}

LabeledSet scaled(LabeledSet s, double f) {
    for (auto& v : s.x) v *= f;
    return s;
}

}  // namespace

TEST_SUITE("models") {

TEST_CASE("model names") {
    for (auto k : {ModelKind::Knn, ModelKind::GaussianNb, ModelKind::RandomForest, ModelKind::GradientBoosting,
                   ModelKind::Svc, ModelKind::Cnn, ModelKind::DecisionTree})
        CHECK(kind_from_string(to_string(k)) == k);
    CHECK(display_name(ModelKind::RandomForest) == "RFC");
    CHECK_THROWS(kind_from_string("lstm"));
}

TEST_CASE("factory rejects unknown hyperparameters") {
    CHECK_NOTHROW(make_classifier(ModelKind::Knn, {{"k", 3}}));
    CHECK_THROWS_AS(make_classifier(ModelKind::Knn, {{"kk", 3}}), DomainError);
    CHECK_THROWS_AS(make_classifier(ModelKind::Svc, {{"lambda", "x"}}), DomainError);
    CHECK(make_classifier(ModelKind::Cnn, {{"growth", 6}})->hyperparams().at("growth") == 6);
}

TEST_CASE("sigmoid is stable") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(800.0) == 1.0);
    CHECK(sigmoid(-800.0) == 0.0);
    CHECK(std::isfinite(sigmoid(-1e308)));
}

TEST_CASE("knn exact query and counting") {
    const auto train = make_set({{0, 0}, {1, 0}, {0, 1}, {5, 5}}, {1, 1, 0, 0});
    KnnClassifier one({1});
    one.fit(train, kEmpty);
    const double q0[] = {5, 5};
    CHECK(one.score(q0) == 0.0);
    const double q1[] = {1, 0};
    CHECK(one.score(q1) == 1.0);

    KnnClassifier three({3});
    three.fit(train, kEmpty);
    const double q[] = {0.1, 0.1};
    CHECK(three.score(q) == doctest::Approx(2.0 / 3.0));

    KnnClassifier too_many({5});
    CHECK_THROWS_AS(too_many.fit(train, kEmpty), DomainError);
}

TEST_CASE("knn matches the exhaustive oracle") {
    const auto train = random_set(200, 6, 1);
    const auto queries = random_set(200, 6, 2);
    for (std::size_t k : {1u, 4u, 7u}) {
        KnnClassifier m({k});
        m.fit(train, kEmpty);
        for (std::size_t i = 0; i < queries.size(); ++i)
            CHECK(m.score(queries.sample(i)) == oracle::knn_score(train, queries.sample(i), k));
    }
}

TEST_CASE("knn ties go to the lower index") {
    const auto train = make_set({{1}, {-1}, {1}}, {0, 1, 1});
    KnnClassifier m({1});
    m.fit(train, kEmpty);
    const double q[] = {0};
    CHECK(m.neighbors(q) == std::vector<std::size_t>{0});
}

TEST_CASE("gnb symmetric midpoint") {
    const auto train = make_set({{-2, 0}, {-1, 1}, {-3, -1}, {2, 0}, {1, -1}, {3, 1}}, {0, 0, 0, 1, 1, 1});
    GaussianNbClassifier m;
    m.fit(train, kEmpty);
    const double mid[] = {0, 0};
    CHECK(m.score(mid) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gnb at the infected mean") {
    const auto train = oracle::blobs(200, 3.0, 4);
    GaussianNbClassifier m;
    m.fit(train, kEmpty);
    const auto mu = m.mean(1);
    CHECK(m.score(mu) > 0.99);
}

TEST_CASE("gnb matches the direct Bayes oracle") {
    const auto train = random_set(300, 8, 5);
    const auto queries = random_set(100, 8, 6);
    for (double vs : {1e-9, 1e-2}) {
        GaussianNbClassifier m({vs});
        m.fit(train, kEmpty);
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const auto lj = m.log_joint(queries.sample(i));
            const auto [r0, r1] = oracle::gnb_log_joint(train, queries.sample(i), vs);
            CHECK(std::abs(lj[0] - r0) <= 1e-9 * std::max(1.0, std::abs(r0)));
            CHECK(std::abs(lj[1] - r1) <= 1e-9 * std::max(1.0, std::abs(r1)));
            CHECK(m.score(queries.sample(i)) == doctest::Approx(1.0 / (1.0 + std::exp(r0 - r1))).epsilon(1e-9));
        }
    }
}

TEST_CASE("gnb needs both classes") {
    GaussianNbClassifier m;
    CHECK_THROWS_AS(m.fit(make_set({{0}, {1}}, {1, 1}), kEmpty), DomainError);
}

TEST_CASE("tree learns xor") {
    const auto train = oracle::xor_set(200, 7);
    DecisionTreeClassifier m;
    m.fit(train, kEmpty);
    CHECK(oracle::accuracy(m.score_all(train), train.y) >= 0.95);
}

TEST_CASE("forest reduces to a single tree") {
    const auto train = random_set(300, 5, 8);
    const auto test = random_set(200, 5, 9);
    ForestParams fp;
    fp.n_trees = 1;
    fp.max_features = 5;
    fp.bootstrap = false;
    RandomForestClassifier rf(fp);
    rf.fit(train, kEmpty);
    DecisionTreeClassifier dt({fp.max_depth, fp.min_samples_leaf});
    dt.fit(train, kEmpty);
    for (std::size_t i = 0; i < test.size(); ++i) CHECK(rf.predict(test.sample(i)) == dt.predict(test.sample(i)));
}

TEST_CASE("forest on pure-class data") {
    const auto train = make_set({{0, 1}, {2, 3}, {4, 5}}, {1, 1, 1});
    RandomForestClassifier rf({10, 16, 1, 0, true, 3});
    rf.fit(train, kEmpty);
    for (const auto& t : rf.trees()) CHECK(t.nodes.size() == 1);
    const double q[] = {9, 9};
    CHECK(rf.score(q) == 1.0);
}

TEST_CASE("forest is seed-deterministic and learns xor") {
    const auto train = oracle::xor_set(300, 10);
    ForestParams fp;
    fp.n_trees = 25;
    fp.seed = 4;
    RandomForestClassifier a(fp), b(fp);
    a.fit(train, kEmpty);
    b.fit(train, kEmpty);
    CHECK(a.score_all(train) == b.score_all(train));
    CHECK(oracle::accuracy(a.score_all(train), train.y) >= 0.95);
}

TEST_CASE("boosting with no stages returns the prior") {
    const auto train = make_set({{0}, {1}, {2}, {3}}, {1, 0, 0, 0});
    GradientBoostingClassifier m({0, 0.1, 3, 1});
    m.fit(train, kEmpty);
    const double q[] = {0};
    CHECK(m.score(q) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(m.base_score() == doctest::Approx(std::log(0.25 / 0.75)));
}

TEST_CASE("boosting loss never increases") {
    const auto train = random_set(300, 4, 11);
    GradientBoostingClassifier m({60, 0.5, 3, 1});
    m.fit(train, kEmpty);
    const auto& curve = m.loss_curve();
    REQUIRE(curve.size() == 61);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1]);
    CHECK(curve.back() < curve.front());
}

TEST_CASE("boosting fits separable data") {
    const auto train = oracle::blobs(200, 2.5, 12);
    GradientBoostingClassifier m({50, 0.1, 3, 1});
    m.fit(train, kEmpty);
    CHECK(oracle::accuracy(m.score_all(train), train.y) == 1.0);
}

TEST_CASE("linear svc separates blobs") {
    const auto train = oracle::blobs(200, 2.5, 13);
    SvcClassifier m;
    m.fit(train, kEmpty);
    CHECK(oracle::accuracy(m.score_all(train), train.y) == 1.0);
}

TEST_CASE("circles need the kernel") {
    const auto train = oracle::circles(400, 14);
    SvcClassifier linear;
    linear.fit(train, kEmpty);
    const double lin_acc = oracle::accuracy(linear.score_all(train), train.y);
    // a half-plane can clip part of the outer ring, so allow some slack around 0.5
    CHECK(lin_acc > 0.3);
    CHECK(lin_acc < 0.7);

    SvcParams p;
    p.rff_dim = 200;
    p.seed = 1;
    SvcClassifier rff(p);
    rff.fit(train, kEmpty);
    CHECK(oracle::accuracy(rff.score_all(train), train.y) >= 0.9);
}

TEST_CASE("svc labels survive input scaling with matched lambda") {
    const auto train = random_set(300, 4, 15);
    const auto test = random_set(200, 4, 16);
    SvcParams p;
    p.lambda = 1e-2;
    p.seed = 3;
    SvcClassifier a(p);
    a.fit(train, kEmpty);
    // doubling x halves the optimal w when lambda is quadrupled
    SvcParams q = p;
    q.lambda = 4.0 * p.lambda;
    SvcClassifier b(q);
    b.fit(scaled(train, 2.0), kEmpty);
    const auto test2 = scaled(test, 2.0);
    for (std::size_t i = 0; i < test.size(); ++i) CHECK(a.predict(test.sample(i)) == b.predict(test2.sample(i)));
}

TEST_CASE("payload round trips") {
    const auto train = random_set(120, 5, 17);
    const auto test = random_set(50, 5, 18);
    for (auto kind : {ModelKind::Knn, ModelKind::GaussianNb, ModelKind::RandomForest, ModelKind::GradientBoosting,
                      ModelKind::Svc, ModelKind::DecisionTree}) {
        CAPTURE(to_string(kind));
        auto m = make_classifier(kind);
        m->fit(train, kEmpty);
        ByteWriter w;
        m->save_payload(w);
        auto back = make_classifier(kind);
        const auto bytes = w.bytes();
        ByteReader r(bytes);
        back->load_payload(r);
        CHECK(back->score_all(test) == m->score_all(test));
    }
}

TEST_CASE("unfitted and malformed inputs") {
    KnnClassifier knn;
    const double q[] = {1.0};
    CHECK_THROWS(knn.score(q));
    CHECK_THROWS_AS(knn.fit(kEmpty, kEmpty), DomainError);
    SvcClassifier svc({0.0});
    CHECK_THROWS_AS(svc.fit(oracle::blobs(10, 1, 1), kEmpty), DomainError);
}

}  // TEST_SUITE
