#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coca/metrics.hpp"
#include "coca/synth.hpp"

using namespace coca;

TEST_CASE("single global point anomaly marks exactly one label") {
    SynthSpec spec;
    spec.length = 1000;
    spec.base = BaseSignal::Sine;
    spec.seed = 4;
    Injection p;
    p.kind = InjectionKind::GlobalPoint;
    p.start = 500;
    p.magnitude = 10.0;
    spec.injections = {p};
    const TimeSeriesObject ts = generate(spec);
    CHECK(std::count(ts.labels.begin(), ts.labels.end(), 1) == 1);
    CHECK(ts.labels[500] == 1);
    // The spike dwarfs the base signal's range.
    CHECK(ts.values(500, 0) > 5.0);
}

TEST_CASE("subsequence anomaly yields one maximal run of its length") {
    SynthSpec spec;
    spec.length = 1000;
    spec.seed = 4;
    Injection s;
    s.kind = InjectionKind::Subsequence;
    s.start = 300;
    s.length = 40;
    s.magnitude = 3.0;
    spec.injections = {s};
    const TimeSeriesObject ts = generate(spec);
    const auto segs = segments(ts.labels);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].start == 300);
    CHECK(segs[0].length() == 40);
}

TEST_CASE("same seed generates identical objects") {
    SynthSpec spec;
    spec.length = 500;
    spec.base = BaseSignal::Ar1;
    spec.seed = 77;
    const TimeSeriesObject a = generate(spec);
    const TimeSeriesObject b = generate(spec);
    CHECK(a.values == b.values);
    CHECK(a.labels == b.labels);
}

TEST_CASE("anomaly rate equals the injected fraction exactly") {
    SynthSpec spec;
    spec.length = 2000;
    spec.seed = 5;
    Injection s;
    s.kind = InjectionKind::Subsequence;
    s.start = 1200;
    s.length = 30;
    s.magnitude = 2.0;
    Injection p;
    p.kind = InjectionKind::GlobalPoint;
    p.start = 1500;
    spec.injections = {s, p};
    const TimeSeriesObject ts = generate(spec);
    CHECK(std::count(ts.labels.begin(), ts.labels.end(), 1) == 31);
}

TEST_CASE("overlapping injections are rejected") {
    SynthSpec spec;
    spec.length = 1000;
    Injection a;
    a.kind = InjectionKind::Subsequence;
    a.start = 100;
    a.length = 50;
    Injection b;
    b.kind = InjectionKind::GlobalPoint;
    b.start = 120;
    spec.injections = {a, b};
    CHECK_THROWS(generate(spec));
}

TEST_CASE("out-of-bounds injection is rejected") {
    SynthSpec spec;
    spec.length = 100;
    Injection a;
    a.kind = InjectionKind::Subsequence;
    a.start = 90;
    a.length = 20;
    spec.injections = {a};
    CHECK_THROWS(generate(spec));
}

TEST_CASE("standard suite has sine and ar1 objects with test-side anomalies") {
    const auto objects = standard_suite(16, 100, 0.02, 9);
    REQUIRE(objects.size() == 2);
    CHECK(objects[0].id == "sine");
    CHECK(objects[1].id == "ar1");
    for (const TimeSeriesObject& obj : objects) {
        CHECK(obj.train_end == 1600);
        CHECK(obj.length() == 3200);
        // All anomalies live in the test split.
        for (int t = 0; t < obj.train_end; ++t) REQUIRE(obj.labels[static_cast<std::size_t>(t)] == 0);
        const long positives =
            std::count(obj.labels.begin(), obj.labels.end(), static_cast<std::uint8_t>(1));
        CHECK(positives > 0);
        CHECK(positives < 0.05 * obj.length());
    }
}

TEST_CASE("local point anomaly stays near the local scale") {
    SynthSpec spec;
    spec.length = 800;
    spec.base = BaseSignal::Sine;
    spec.seed = 12;
    Injection p;
    p.kind = InjectionKind::LocalPoint;
    p.start = 400;
    p.magnitude = 4.0;
    spec.injections = {p};
    const TimeSeriesObject ts = generate(spec);
    CHECK(ts.labels[400] == 1);
    // Local spikes deviate from neighbors but stay within a few global ranges.
    CHECK(std::abs(ts.values(400, 0)) < 10.0);
    CHECK(std::abs(ts.values(400, 0)) > 1.0);
}
