#include "coca/synth.hpp"

#include <algorithm>
#include <cmath>

namespace coca {

namespace {

constexpr double kPi = 3.14159265358979323846;

double neighborhood_std(const Matrix& values, int channel, int t, int radius) {
    const int lo = std::max(0, t - radius);
    const int hi = std::min(static_cast<int>(values.rows()) - 1, t + radius);
    const auto window = values.col(channel).segment(lo, hi - lo + 1);
    const double mean = window.mean();
    return std::sqrt((window.array() - mean).square().mean());
}

}  // namespace

TimeSeriesObject generate(const SynthSpec& spec) {
    require(spec.length >= 4, "generate: length too small");
    require(spec.channels >= 1, "generate: channels must be >= 1");
    require(spec.train_fraction > 0.0 && spec.train_fraction < 1.0,
            "generate: train_fraction must be in (0,1)");

    std::vector<Injection> inj = spec.injections;
    for (Injection& x : inj) {
        if (x.kind != InjectionKind::Subsequence) x.length = 1;
        require(x.length >= 1, "generate: injection length must be >= 1");
        require(x.start >= 0 && x.start + x.length <= spec.length,
                "generate: injection out of bounds");
    }
    std::sort(inj.begin(), inj.end(), [](const Injection& a, const Injection& b) {
        return a.start < b.start;
    });
    for (std::size_t i = 1; i < inj.size(); ++i)
        require(inj[i - 1].start + inj[i - 1].length <= inj[i].start,
                "generate: overlapping injections");

    Rng rng(spec.seed);
    std::normal_distribution<double> unit(0.0, 1.0);

    TimeSeriesObject ts;
    ts.id = spec.id;
    ts.values.resize(spec.length, spec.channels);
    ts.labels.assign(static_cast<std::size_t>(spec.length), 0);
    ts.train_end = static_cast<int>(spec.train_fraction * spec.length);

    for (int j = 0; j < spec.channels; ++j) {
        const double phase = 2.0 * kPi * j / std::max(1, spec.channels);
        double ar_state = 0.0;
        for (int t = 0; t < spec.length; ++t) {
            double v = 0.0;
            switch (spec.base) {
                case BaseSignal::Sine:
                    v = spec.amplitude * std::sin(2.0 * kPi * t / spec.period + phase) +
                        spec.noise_std * unit(rng);
                    break;
                case BaseSignal::Ar1:
                    ar_state = spec.ar_coeff * ar_state + unit(rng);
                    v = spec.amplitude * ar_state;
                    break;
                case BaseSignal::Mixture:
                    ar_state = spec.ar_coeff * ar_state + unit(rng);
                    v = spec.amplitude * (std::sin(2.0 * kPi * t / spec.period + phase) +
                                          0.5 * ar_state) +
                        spec.noise_std * unit(rng);
                    break;
            }
            ts.values(t, j) = v;
        }
    }

    const double global_range =
        ts.values.maxCoeff() - ts.values.minCoeff() + 1e-12;
    for (const Injection& x : inj) {
        for (int t = x.start; t < x.start + x.length; ++t) {
            for (int j = 0; j < spec.channels; ++j) {
                switch (x.kind) {
                    case InjectionKind::GlobalPoint:
                        ts.values(t, j) += x.magnitude * global_range;
                        break;
                    case InjectionKind::LocalPoint:
                        ts.values(t, j) += x.magnitude * neighborhood_std(ts.values, j, t, 32);
                        break;
                    case InjectionKind::Subsequence:
                        // Regime change: a fast oscillation foreign to both
                        // the sine and AR(1) bases.
                        ts.values(t, j) +=
                            x.magnitude * spec.amplitude * std::sin(2.0 * kPi * t / 4.0);
                        break;
                }
            }
            ts.labels[static_cast<std::size_t>(t)] = 1;
        }
    }

    ts.validate();
    return ts;
}

SynthSpec suite_object_spec(const std::string& id, BaseSignal base, int window_length,
                            int train_windows, double anomaly_rate, std::uint64_t seed) {
    require(window_length >= 2 && train_windows >= 1, "suite_object_spec: bad sizing");
    require(anomaly_rate > 0.0 && anomaly_rate < 0.5, "suite_object_spec: bad anomaly rate");

    const int train_len = window_length * train_windows;
    const int test_len = train_len;
    const int length = train_len + test_len;
    const int budget = std::max(2, static_cast<int>(anomaly_rate * test_len));

    // One subsequence takes ~60% of the anomaly budget, the rest are global
    // point spikes spread across the test span.
    const int sub_len = std::max(2, static_cast<int>(0.6 * budget));
    const int n_points = std::max(1, budget - sub_len);

    SynthSpec spec;
    spec.id = id;
    spec.length = length;
    spec.base = base;
    spec.period = 50.0;
    spec.amplitude = 1.0;
    // Enough observation noise that normal windows stay genuinely diverse;
    // a near-noiseless base lets the encoder memorize its way to a trivial
    // center and blinds the score.
    spec.noise_std = 0.25;
    spec.train_fraction = static_cast<double>(train_len) / length;
    spec.seed = seed;

    Injection sub;
    sub.kind = InjectionKind::Subsequence;
    sub.start = train_len + test_len / 4;
    sub.length = sub_len;
    sub.magnitude = 4.0;
    spec.injections.push_back(sub);

    // Global spikes on a deterministic grid over the second half of the test
    // span, clear of the subsequence.
    const int first = train_len + test_len / 2;
    const int stride = std::max(window_length + 1, (test_len / 2 - 1) / n_points);
    for (int i = 0; i < n_points; ++i) {
        Injection p;
        p.kind = InjectionKind::GlobalPoint;
        p.start = first + i * stride;
        p.magnitude = 3.0;
        if (p.start >= length) break;
        spec.injections.push_back(p);
    }
    return spec;
}

std::vector<SynthSpec> standard_suite_specs(int window_length, int train_windows,
                                            double anomaly_rate, std::uint64_t seed) {
    std::vector<SynthSpec> specs;
    specs.push_back(suite_object_spec("sine", BaseSignal::Sine, window_length, train_windows,
                                      anomaly_rate, seed));
    specs.push_back(suite_object_spec("ar1", BaseSignal::Ar1, window_length, train_windows,
                                      anomaly_rate, seed + 1));
    return specs;
}

std::vector<TimeSeriesObject> standard_suite(int window_length, int train_windows,
                                             double anomaly_rate, std::uint64_t seed) {
    std::vector<TimeSeriesObject> objects;
    for (const SynthSpec& spec : standard_suite_specs(window_length, train_windows, anomaly_rate, seed))
        objects.push_back(generate(spec));
    return objects;
}

}  // namespace coca
