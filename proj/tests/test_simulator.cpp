// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <set>
#include <tuple>

#include "cloudmd/features.hpp"
#include "cloudmd/simulator.hpp"

using namespace cloudmd;
using namespace cloudmd::sim;

namespace {

SimulationConfig config_for(MalwareCategory c, double intensity) {
    SimulationConfig cfg;
    cfg.malware = MalwareProfile::for_category(c, intensity);
    return cfg;
}

std::set<ProcessKey> keys_of(const VmSnapshot& s) {
    std::set<ProcessKey> k;
    for (const auto& p : s.processes) k.insert(p.key());
    return k;
}

// union over the benign phase, so intermittent processes are all seen
std::set<ProcessKey> image_keys(const ExperimentResult& r) {
    std::set<ProcessKey> k;
    for (const auto& s : r.snapshots)
        if (s.label == Label::Benign) k.merge(keys_of(s));
    return k;
}

}  // namespace

TEST_SUITE("simulator") {

TEST_CASE("pareto inverse cdf") {
    CHECK(pareto_from_uniform(2.5, 15.0, 1.0) == 15.0);
    CHECK(pareto_from_uniform(2.0, 1.0, 0.25) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK_THROWS_AS(pareto_from_uniform(1.0, 1.0, 0.5), DomainError);
    CHECK_THROWS_AS(pareto_from_uniform(2.0, 0.0, 0.5), DomainError);
    CHECK_THROWS_AS(pareto_from_uniform(2.0, 1.0, 0.0), DomainError);
}

TEST_CASE("pareto empirical mean") {
    auto rng = make_stream(11, 0);
    const std::size_t n = 1'000'000;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += pareto_sample(3.0, 1.0, rng);
    // variance of Pareto(3, 1) is 3/4
    const double se = std::sqrt(0.75 / static_cast<double>(n));
    CHECK(std::abs(s / n - 1.5) < 3.0 * se);
    CHECK(std::abs(s / n - 1.5) < 0.01);
}

TEST_CASE("traffic off period yields nothing") {
    TrafficModel tm;
    TrafficState st{false, 100.0};
    auto rng = make_stream(1, 1);
    const auto tick = traffic_tick(tm, st, 10.0, rng);
    CHECK(tick.requests == 0);
    CHECK(tick.on_seconds == 0.0);
    CHECK(st.remaining_s == doctest::Approx(90.0));
}

TEST_CASE("traffic with zero rate") {
    TrafficModel tm;
    tm.lambda_on = 0.0;
    TrafficState st{true, 100.0};
    auto rng = make_stream(1, 2);
    const auto tick = traffic_tick(tm, st, 10.0, rng);
    CHECK(tick.requests == 0);
    CHECK(tick.on_seconds == doctest::Approx(10.0));
}

TEST_CASE("traffic long-run on fraction") {
    TrafficModel tm;
    tm.alpha_on = tm.alpha_off = 2.0;
    tm.xm_on = tm.xm_off = 1.0;
    auto rng = make_stream(5, 3);
    auto st = initial_traffic_state(tm, rng);
    double on = 0.0;
    const std::size_t ticks = 100'000;
    for (std::size_t i = 0; i < ticks; ++i) on += traffic_tick(tm, st, 10.0, rng).on_seconds;
    CHECK(on / (10.0 * ticks) == doctest::Approx(0.5).epsilon(0.04));
}

TEST_CASE("autoscale thresholds") {
    const AutoscalePolicy p;
    CHECK(autoscale_step({0.75, 2}, p) == ScaleAction::ScaleUp);
    CHECK(autoscale_step({0.30, 2}, p) == ScaleAction::Hold);
    CHECK(autoscale_step({0.55, 5}, p) == ScaleAction::Hold);
    CHECK(autoscale_step({0.30, 5}, p) == ScaleAction::ScaleDown);
    CHECK(autoscale_step({0.95, 10}, p) == ScaleAction::Hold);
    CHECK(autoscale_step({0.70, 4}, p) == ScaleAction::Hold);
    CHECK(autoscale_step({0.40, 4}, p) == ScaleAction::Hold);
    CHECK(autoscale_step({0.95, 4, 1}, p) == ScaleAction::Hold);
}

TEST_CASE("experiment produces one snapshot per tick") {
    const auto r = run_experiment({}, 42, 3);
    REQUIRE(r.snapshots.size() == 360);
    const ExperimentTimeline tl;
    const auto schema = FeatureSchema::defaults();
    for (std::size_t k = 0; k < r.snapshots.size(); ++k) {
        const auto& s = r.snapshots[k];
        CHECK(s.experiment_id == 3);
        CHECK(s.t == tl.tick_time(k));
        CHECK(validate_snapshot(s, schema, &tl).empty());
    }
    CHECK(r.injection_t_s >= tl.benign_end_s);
    CHECK(r.injection_t_s < tl.malicious_start_s);
}

TEST_CASE("tier sizes and scale actions obey the policy") {
    SimulationConfig cfg;
    cfg.traffic.lambda_on = 120.0;  // enough load to exercise scaling both ways
    std::size_t ups = 0, downs = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto r = run_experiment(cfg, seed);
        for (const auto& tr : r.trace) {
            for (auto [size, cpu, act] : {std::tuple{tr.web_size, tr.web_cpu, tr.web_action},
                                          std::tuple{tr.app_size, tr.app_cpu, tr.app_action}}) {
                CHECK(size >= 2);
                CHECK(size <= 10);
                if (act == ScaleAction::ScaleUp) {
                    CHECK(cpu > 0.70);
                    ++ups;
                }
                if (act == ScaleAction::ScaleDown) {
                    CHECK(cpu < 0.40);
                    ++downs;
                }
            }
        }
    }
    CHECK(ups > 0);
    CHECK(downs > 0);
}

TEST_CASE("fixed seed reruns are identical") {
    const auto a = run_experiment({}, 9, 1);
    const auto b = run_experiment({}, 9, 1);
    CHECK(a.snapshots == b.snapshots);
    CHECK(a.injection_t_s == b.injection_t_s);
    const auto c = run_experiment({}, 10, 1);
    CHECK(a.snapshots != c.snapshots);
}

TEST_CASE("cpu miner adds a saturating process") {
    const auto cfg = config_for(MalwareCategory::CpuMiner, 1.0);
    const auto r = run_experiment(cfg, 4);
    const auto& spawn = std::get<NewProcess>(cfg.malware.spawn);
    const ProcessKey key{spawn.name, spawn.cmdline};
    CHECK(r.malware_key == key);
    for (const auto& s : r.snapshots) {
        const auto rows = features::aggregate_unique(s.processes);
        const auto it = std::find_if(rows.begin(), rows.end(), [&](const auto& row) { return row.key == key; });
        if (s.t < r.injection_t_s) {
            CHECK(it == rows.end());
        } else if (s.label == Label::Infected) {
            REQUIRE(it != rows.end());
            CHECK(it->values[feature::cpu_user] > 0.85);
        }
    }
}

TEST_CASE("zero intensity leaves no trace") {
    // different categories at intensity 0 must give the same stream
    const auto a = run_experiment(config_for(MalwareCategory::CpuMiner, 0.0), 21);
    const auto b = run_experiment(config_for(MalwareCategory::RansomIo, 0.0), 21);
    REQUIRE(a.snapshots.size() == b.snapshots.size());
    for (std::size_t k = 0; k < a.snapshots.size(); ++k) CHECK(a.snapshots[k].processes == b.snapshots[k].processes);
    for (const auto& s : a.snapshots)
        for (const auto& p : s.processes) CHECK(p.name != "kdevtmpfsi");
}

TEST_CASE("process injector shifts an existing row") {
    const auto r = run_experiment(config_for(MalwareCategory::ProcessInjector, 1.0), 8);
    std::set<ProcessKey> benign_keys;
    double benign_cpu = 0.0, infected_cpu = 0.0;
    std::size_t nb = 0, ni = 0;
    for (const auto& s : r.snapshots) {
        const auto rows = features::aggregate_unique(s.processes);
        if (s.label == Label::Benign) {
            for (const auto& k : keys_of(s)) benign_keys.insert(k);
        } else if (s.label == Label::Infected) {
            for (const auto& k : keys_of(s)) CHECK(benign_keys.count(k) == 1);
        }
        for (const auto& row : rows) {
            if (row.key != r.malware_key) continue;
            if (s.label == Label::Benign) benign_cpu += row.values[feature::cpu_user], ++nb;
            if (s.label == Label::Infected) infected_cpu += row.values[feature::cpu_user], ++ni;
        }
    }
    CHECK(benign_keys.count(r.malware_key) == 1);
    REQUIRE(nb > 0);
    REQUIRE(ni > 0);
    CHECK(infected_cpu / ni > benign_cpu / nb + 0.1);
}

TEST_CASE("image seed fixes the population") {
    const auto a = run_experiment({}, 1);
    const auto b = run_experiment({}, 2);
    CHECK(image_keys(a) == image_keys(b));
    SimulationConfig other;
    other.image_seed = 99;
    const auto c = run_experiment(other, 1);
    CHECK(image_keys(a) != image_keys(c));
}

TEST_CASE("configuration validation") {
    TrafficModel tm;
    tm.alpha_on = 1.0;
    CHECK_THROWS(tm.validate());
    AutoscalePolicy p;
    p.cpu_low = 0.8;
    CHECK_THROWS(p.validate());
    SimulationConfig cfg;
    cfg.min_processes = 2;
    CHECK_THROWS(run_experiment(cfg, 1));
}

}  // TEST_SUITE
