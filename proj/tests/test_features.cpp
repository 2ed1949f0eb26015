// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "cloudmd/features.hpp"
#include "oracles.hpp"

using namespace cloudmd;
using namespace cloudmd::features;

namespace {

ProcessRecord rec(std::string name, std::string cmd, double cpu, std::size_t f = 3) {
    std::vector<double> v(f, 1.0);
    v[0] = cpu;
    return {std::move(name), std::move(cmd), v};
}

SampleMatrix matrix_with(std::vector<std::vector<double>> rows, std::size_t cap) {
    std::vector<UniqueProcessRow> u;
    for (std::size_t i = 0; i < rows.size(); ++i) u.push_back({{"p" + std::to_string(i), ""}, rows[i], 1});
    return build_matrix(u, cap, rows.empty() ? 2 : rows[0].size());
}

}  // namespace

TEST_SUITE("features") {

TEST_CASE("duplicate keys are averaged") {
    const std::vector<ProcessRecord> in = {rec("nginx", "nginx -g", 0.10), rec("nginx", "nginx -g", 0.20)};
    const auto rows = aggregate_unique(in);
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].values[0] == doctest::Approx(0.15));
    CHECK(rows[0].multiplicity == 2);
}

TEST_CASE("distinct keys stay separate") {
    const std::vector<ProcessRecord> in = {rec("a", "x", 1), rec("a", "y", 2), rec("b", "x", 3)};
    const auto rows = aggregate_unique(in);
    REQUIRE(rows.size() == 3);
    for (const auto& r : rows) CHECK(r.multiplicity == 1);
    CHECK(std::is_sorted(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.key < b.key; }));
}

TEST_CASE("aggregation matches the group-by-mean oracle") {
    std::mt19937_64 rng(17);
    std::uniform_int_distribution<int> key(0, 6);
    std::lognormal_distribution<double> val(0.0, 2.0);
    std::vector<ProcessRecord> in;
    for (int i = 0; i < 1000; ++i) {
        const int k = key(rng);
        std::vector<double> v(10);
        for (auto& x : v) x = val(rng);
        in.push_back({"proc" + std::to_string(k), "--flag " + std::to_string(k % 3), v});
    }
    const auto rows = aggregate_unique(in);
    const auto ref = oracle::group_by_mean(in);
    REQUIRE(rows.size() == 7);
    REQUIRE(ref.size() == 7);
    for (const auto& r : rows) {
        const auto& g = ref.at(r.key);
        CHECK(r.multiplicity == g.count);
        for (std::size_t j = 0; j < 10; ++j) CHECK(std::abs(r.values[j] - g.sum[j]) <= 1e-12 * std::max(1.0, std::abs(g.sum[j])));
    }
}

TEST_CASE("aggregation ignores input order") {
    std::vector<ProcessRecord> in = {rec("a", "", 0.1), rec("a", "", 0.7), rec("a", "", 1e-17), rec("b", "", 2)};
    const auto a = aggregate_unique(in);
    std::reverse(in.begin(), in.end());
    CHECK(aggregate_unique(in) == a);
}

TEST_CASE("matrix padding") {
    const auto m = matrix_with({{1, 2}, {3, 4}, {5, 6}}, 128);
    CHECK(m.rows == 128);
    CHECK(m.populated() == 3);
    CHECK(m.at(2, 1) == 6);
    for (std::size_t r = 3; r < 128; ++r)
        for (std::size_t c = 0; c < 2; ++c) CHECK(m.at(r, c) == 0.0);

    const auto empty = matrix_with({}, 128);
    CHECK(empty.populated() == 0);
    CHECK(std::all_of(empty.data.begin(), empty.data.end(), [](double v) { return v == 0.0; }));
}

TEST_CASE("overflowing rows drop the lowest cpu") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<UniqueProcessRow> rows;
    for (int i = 0; i < 130; ++i) rows.push_back({{"p" + std::to_string(1000 + i), ""}, {u(rng), u(rng)}, 1});
    BuildStats stats;
    const auto m = build_matrix(rows, 128, 2, &stats);
    CHECK(m.populated() == 128);
    CHECK(stats.truncations == 1);
    CHECK(stats.dropped_rows == 2);

    // sort by cpu, keep the top 128, restore key order
    auto ref = rows;
    std::sort(ref.begin(), ref.end(), [](const auto& a, const auto& b) { return a.values[0] > b.values[0]; });
    ref.resize(128);
    std::sort(ref.begin(), ref.end(), [](const auto& a, const auto& b) { return a.key < b.key; });
    for (std::size_t r = 0; r < 128; ++r) {
        CHECK(m.row_keys[r] == ref[r].key);
        CHECK(m.at(r, 0) == ref[r].values[0]);
    }
}

TEST_CASE("scaler") {
    std::vector<SampleMatrix> train = {matrix_with({{0, 7}, {10, 7}}, 4)};
    const auto s = fit_scaler(train);
    CHECK(s.scale(0, 5) == 0.5);
    CHECK(s.scale(0, 20) == 1.0);
    CHECK(s.scale(0, -3) == 0.0);
    CHECK(s.scale(1, 7) == 0.0);
    CHECK(s.scale(1, 100) == 0.0);

    const auto m = apply_scaler(s, matrix_with({{5, 7}}, 4));
    CHECK(m.at(0, 0) == 0.5);
    for (std::size_t r = 1; r < 4; ++r) CHECK(m.at(r, 0) == 0.0);
    CHECK_THROWS_AS(fit_scaler(std::span<const SampleMatrix>{}), DomainError);
}

TEST_CASE("padding rows do not reach the scaler") {
    // all populated values are positive, so a zero padding row would pull min to 0
    std::vector<SampleMatrix> train = {matrix_with({{2, 3}}, 8), matrix_with({{4, 5}}, 8)};
    const auto s = fit_scaler(train);
    CHECK(s.min[0] == 2.0);
    CHECK(s.max[1] == 5.0);
}

TEST_CASE("split sizes") {
    std::vector<std::uint32_t> ids(113);
    std::iota(ids.begin(), ids.end(), 0u);
    const auto s = split_dataset(ids, {}, 7);
    CHECK(s.train.size() == 79);
    CHECK(s.val.size() == 17);
    CHECK(s.test.size() == 17);

    std::vector<std::uint32_t> all;
    for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(all.end(), part->begin(), part->end());
    std::sort(all.begin(), all.end());
    CHECK(all == ids);

    const auto three = split_dataset({4, 5, 6}, {}, 1);
    CHECK(three.train.size() == 1);
    CHECK(three.val.size() == 1);
    CHECK(three.test.size() == 1);

    const auto ten = split_dataset({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {}, 7);
    CHECK(ten.train.size() == 6);
    CHECK(ten.val.size() == 2);
    CHECK(ten.test.size() == 2);
}

TEST_CASE("split determinism and errors") {
    std::vector<std::uint32_t> ids(20);
    std::iota(ids.begin(), ids.end(), 0u);
    CHECK(split_dataset(ids, {}, 3) == split_dataset(ids, {}, 3));
    CHECK_FALSE(split_dataset(ids, {}, 3) == split_dataset(ids, {}, 4));
    CHECK_THROWS_AS(split_dataset({1, 2}, {}, 0), DomainError);
    CHECK_THROWS_AS(split_dataset({1, 2, 2}, {}, 0), DomainError);
    CHECK_THROWS_AS(split_dataset(ids, {0.5, 0.2, 0.2}, 0), DomainError);
}

TEST_CASE("training labels") {
    CHECK(training_label(Label::Benign, false) == Label::Benign);
    CHECK(training_label(Label::Infected, false) == Label::Infected);
    CHECK_FALSE(training_label(Label::InjectionWindow, false).has_value());
    CHECK(training_label(Label::InjectionWindow, true) == Label::Infected);

    VmSnapshot s;
    s.label = Label::InjectionWindow;
    s.processes.push_back(rec("a", "", 1.0, 2));
    CHECK_FALSE(snapshot_matrix(s, 2, {}).has_value());
    PipelineOptions fold;
    fold.fold_window = true;
    const auto m = snapshot_matrix(s, 2, fold);
    REQUIRE(m.has_value());
    CHECK(m->label == Label::Infected);
}

TEST_CASE("labeled set shape checks") {
    LabeledSet set;
    set.push(matrix_with({{1, 2}}, 4), 0, 0.0);
    CHECK(set.dim() == 8);
    CHECK_THROWS_AS(set.push(matrix_with({{1, 2}}, 5), 0, 0.0), DomainError);
    set.push(matrix_with({{3, 4}}, 4), 1, 10.0);
    const std::size_t pick[] = {1};
    const auto sub = set.select(pick);
    CHECK(sub.size() == 1);
    CHECK(sub.x[0] == 3);
    CHECK(sub.experiment[0] == 1);
}

}  // TEST_SUITE
