#pragma once

#include "coca/series.hpp"

#include <vector>

namespace coca {

enum class BaseSignal { Sine, Ar1, Mixture };

enum class InjectionKind {
    GlobalPoint,   // spike far outside the global value range
    LocalPoint,    // spike outside the local neighborhood range
    Subsequence,   // contiguous regime change (level shift)
};

struct Injection {
    InjectionKind kind = InjectionKind::GlobalPoint;
    int start = 0;
    int length = 1;       // forced to 1 for point kinds
    double magnitude = 5.0;
};

// Deterministic synthetic series with typed anomaly injections.
// Injections must lie within [0, length) and be mutually disjoint.
struct SynthSpec {
    std::string id = "synth";
    int length = 4000;
    int channels = 1;
    BaseSignal base = BaseSignal::Sine;
    double period = 50.0;     // sine period in points
    double amplitude = 1.0;
    double noise_std = 0.05;  // observation noise on sine/mixture
    double ar_coeff = 0.9;    // AR(1) coefficient, unit innovations
    double train_fraction = 0.5;
    std::vector<Injection> injections;
    std::uint64_t seed = 1;
};

TimeSeriesObject generate(const SynthSpec& spec);

// One suite-style object: train_windows * window_length training points and
// an equally long test split carrying one subsequence anomaly plus global
// point anomalies at roughly anomaly_rate of the test points.
SynthSpec suite_object_spec(const std::string& id, BaseSignal base, int window_length,
                            int train_windows, double anomaly_rate, std::uint64_t seed);

// Two-object desk-scale suite: one sine and one AR(1) series.
std::vector<SynthSpec> standard_suite_specs(int window_length, int train_windows,
                                            double anomaly_rate, std::uint64_t seed);
std::vector<TimeSeriesObject> standard_suite(int window_length, int train_windows,
                                             double anomaly_rate, std::uint64_t seed);

}  // namespace coca
