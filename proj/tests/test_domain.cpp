// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <limits>

#include "cloudmd/config.hpp"
#include "cloudmd/domain.hpp"

using namespace cloudmd;

namespace {

VmSnapshot good_snapshot() {
    VmSnapshot s;
    s.t = 100.0;
    s.processes.push_back({"nginx", "nginx -g", std::vector<double>(FeatureSchema::defaults().size(), 0.5)});
    return s;
}

}  // namespace

TEST_SUITE("domain") {

TEST_CASE("label boundaries on the default timeline") {
    const ExperimentTimeline tl;
    CHECK(label_for_time(0.0, tl) == Label::Benign);
    CHECK(label_for_time(1790.0, tl) == Label::Benign);
    CHECK(label_for_time(1800.0, tl) == Label::InjectionWindow);
    CHECK(label_for_time(2390.0, tl) == Label::InjectionWindow);
    CHECK(label_for_time(2400.0, tl) == Label::Infected);
    CHECK(label_for_time(3600.0, tl) == Label::Infected);
    CHECK_THROWS_AS(label_for_time(-1.0, tl), DomainError);
    CHECK_THROWS_AS(label_for_time(3600.5, tl), DomainError);
}

TEST_CASE("tick count") {
    const ExperimentTimeline tl;
    CHECK(tl.tick_count() == 360);
    CHECK(tl.tick_time(359) == doctest::Approx(3590.0));
}

TEST_CASE("timeline validation") {
    ExperimentTimeline tl;
    tl.benign_end_s = 2500.0;
    CHECK_THROWS_AS(tl.validate(), ConfigError);
    tl = {};
    tl.sample_interval_s = 7.0;
    CHECK_THROWS_AS(tl.validate(), ConfigError);
    tl = {};
    tl.sample_interval_s = 0.0;
    CHECK_THROWS_AS(tl.validate(), ConfigError);
}

TEST_CASE("label strings round-trip") {
    for (auto l : {Label::Benign, Label::Infected, Label::InjectionWindow})
        CHECK(label_from_string(to_string(l)) == l);
    CHECK_THROWS_AS(label_from_string("bogus"), DomainError);
}

TEST_CASE("schema") {
    const auto s = FeatureSchema::defaults();
    CHECK(s.size() == feature::count);
    CHECK(s.index_of(s.names()[feature::threads]) == feature::threads);
    CHECK_THROWS_AS(s.index_of("nope"), DomainError);
    CHECK(s.hash() == FeatureSchema::defaults().hash());
    auto names = s.names();
    names.pop_back();
    CHECK(FeatureSchema(names).hash() != s.hash());
    CHECK_THROWS(FeatureSchema({"a", "a"}));
    CHECK_THROWS(FeatureSchema({}));
}

TEST_CASE("snapshot validation") {
    const auto schema = FeatureSchema::defaults();
    auto s = good_snapshot();
    CHECK(validate_snapshot(s, schema).empty());

    auto short_row = s;
    short_row.processes[0].values.pop_back();
    CHECK(validate_snapshot(short_row, schema).size() == 1);

    auto nan = s;
    nan.processes[0].values[3] = std::numeric_limits<double>::quiet_NaN();
    CHECK(validate_snapshot(nan, schema).size() == 1);

    const ExperimentTimeline tl;
    auto mislabeled = s;
    mislabeled.t = 2500.0;
    CHECK(validate_snapshot(mislabeled, schema, &tl).size() == 1);
    auto off_tick = s;
    off_tick.t = 105.0;
    CHECK(validate_snapshot(off_tick, schema, &tl).size() == 1);
}

TEST_CASE("key value config") {
    const auto kv = KeyValueConfig::parse("# comment\ntimeline.duration_s = 7200\nseed=3\nbogus.key = 1\n");
    CHECK(kv.get_uint("seed", 0) == 3);
    const auto cfg = apply_simulation_keys(kv, {});
    CHECK(cfg.timeline.duration_s == 7200.0);
    CHECK_THROWS_AS(kv.reject_unread(), ConfigError);
    CHECK_THROWS_AS(KeyValueConfig::parse("no equals sign\n"), ConfigError);
}

}  // TEST_SUITE
