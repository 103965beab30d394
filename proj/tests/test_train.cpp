#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coca/detect.hpp"
#include "coca/synth.hpp"
#include "coca/train.hpp"
#include "helpers.hpp"

#include <algorithm>
#include <cmath>

using namespace coca;

namespace {

TimeSeriesObject sine_object(int length, int train_end, unsigned seed, double noise = 0.05) {
    SynthSpec spec;
    spec.id = "sine";
    spec.length = length;
    spec.base = BaseSignal::Sine;
    spec.noise_std = noise;
    spec.train_fraction = static_cast<double>(train_end) / length;
    spec.seed = seed;
    return generate(spec);
}

ModelConfig small_model() {
    ModelConfig cfg;
    cfg.window_length = 16;
    cfg.conv_channels = {8, 16, 16};
    cfg.kernel_size = 4;
    cfg.dropout = 0.45;
    cfg.hidden_size = 32;
    cfg.project_channels = 32;
    return cfg;
}

TrainConfig quick_train(int epochs, std::uint64_t seed = 42) {
    TrainConfig cfg;
    cfg.batch_size = 64;
    cfg.max_epochs = epochs;
    cfg.center_freeze_epoch = 4;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("single-epoch schedule freezes the center after epoch 0") {
    const TimeSeriesObject obj = sine_object(96, 64, 1);
    TrainConfig tc = quick_train(1);
    tc.center_freeze_epoch = 1;
    tc.batch_size = 4;
    const TrainedModel out = train({obj}, testing::toy_model_config(), ObjectiveConfig{}, tc,
                                   AugmentConfig{});
    CHECK(out.history.records.size() == 1);
    CHECK(out.center.frozen);
    CHECK(out.history.records.back().center_hash == out.center.hash());
}

TEST_CASE("fixed seed reproduces history and parameters exactly") {
    const TimeSeriesObject obj = sine_object(320, 256, 2);
    ModelConfig mc = small_model();
    TrainConfig tc = quick_train(3, 7);
    tc.batch_size = 16;

    const TrainedModel a = train({obj}, mc, ObjectiveConfig{}, tc, AugmentConfig{});
    const TrainedModel b = train({obj}, mc, ObjectiveConfig{}, tc, AugmentConfig{});
    REQUIRE(a.history.records.size() == b.history.records.size());
    for (std::size_t i = 0; i < a.history.records.size(); ++i) {
        REQUIRE(a.history.records[i].loss == b.history.records[i].loss);
        REQUIRE(a.history.records[i].center_hash == b.history.records[i].center_hash);
    }
    REQUIRE(a.params.scalar_count() == b.params.scalar_count());
    for (std::size_t i = 0; i < a.params.scalar_count(); ++i)
        REQUIRE(a.params.get_scalar(i) == b.params.get_scalar(i));
    CHECK(a.center.values == b.center.values);
}

TEST_CASE("center hash is constant from the freeze epoch on") {
    const TimeSeriesObject obj = sine_object(320, 256, 3);
    TrainConfig tc = quick_train(8, 5);
    tc.center_freeze_epoch = 3;
    tc.batch_size = 16;
    const TrainedModel out =
        train({obj}, small_model(), ObjectiveConfig{}, tc, AugmentConfig{});
    REQUIRE(out.history.records.size() >= 4);
    const std::uint64_t frozen = out.center.hash();
    for (std::size_t i = 0; i < out.history.records.size(); ++i) {
        if (static_cast<int>(i) >= tc.center_freeze_epoch - 1)
            REQUIRE(out.history.records[i].center_hash == frozen);
    }
    // Warmup snapshots move batch to batch, so the first epoch's differs.
    CHECK(out.history.records.front().center_hash != frozen);
}

TEST_CASE("best loss tracks the running minimum") {
    const TimeSeriesObject obj = sine_object(320, 256, 4);
    const TrainedModel out = train({obj}, small_model(), ObjectiveConfig{}, quick_train(6),
                                   AugmentConfig{});
    double min_loss = std::numeric_limits<double>::infinity();
    for (const EpochRecord& r : out.history.records) min_loss = std::min(min_loss, r.loss);
    CHECK(out.history.best_loss == doctest::Approx(min_loss).epsilon(1e-12));
    CHECK(out.history.best_epoch >= 0);
}

TEST_CASE("non-finite data aborts with the epoch and batch named") {
    TimeSeriesObject obj = sine_object(96, 64, 5);
    obj.values(10, 0) = std::numeric_limits<double>::infinity();
    TrainConfig tc = quick_train(2);
    tc.batch_size = 4;
    try {
        train({obj}, testing::toy_model_config(), ObjectiveConfig{}, tc, AugmentConfig{});
        FAIL("expected divergence error");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("diverged") != std::string::npos);
        CHECK(msg.find("epoch 0") != std::string::npos);
        CHECK(msg.find("batch") != std::string::npos);
    }
}

TEST_CASE("collapse probe needs two epochs and reads the final record") {
    TrainHistory h;
    h.records.push_back({0, 0.5, 0, 0, 0, 0, 0, 0, 0.2, 1});
    CHECK_FALSE(collapse_probe(h).enough_data);
    h.records.push_back({1, 5e-4, 0, 0, 0, 0, 0, 0, 0.005, 1});
    const CollapseReport r = collapse_probe(h);
    CHECK(r.enough_data);
    CHECK(r.collapsed);
    // Spread above the threshold or loss above the cutoff means no flag.
    h.records.back().proj_std = 0.05;
    CHECK_FALSE(collapse_probe(h).collapsed);
    h.records.back().proj_std = 0.005;
    h.records.back().loss = 0.01;
    CHECK_FALSE(collapse_probe(h).collapsed);
}

TEST_CASE("toy sine run converges and couples the similarities") {
    // 200 training windows of length 16, 30 epochs.
    const TimeSeriesObject obj = sine_object(16 * 200 + 64, 16 * 200, 6);
    ModelConfig mc = small_model();
    TrainConfig tc = quick_train(30, 11);
    tc.learning_rate = 5e-4;
    tc.batch_size = 32;
    tc.center_freeze_epoch = 5;
    const TrainedModel out = train({obj}, mc, ObjectiveConfig{}, tc, AugmentConfig{});

    const EpochRecord& first = out.history.records.front();
    const EpochRecord& last = out.history.records.back();
    CHECK(last.loss < first.loss);
    CHECK(last.sim_q_ce > 0.9);  // mean sim(q, Ce)

    // Driving invariance down drives the pair similarity up (coupling), and
    // the provable mean bound holds on the training trace.
    CHECK(last.sim_q_qp > 0.8);
    CHECK(1.0 - last.sim_q_qp <= 2.0 * last.invariance + 1e-6);

    // A window the model trained on scores near the batch minimum, far below
    // an out-of-distribution window appended to the batch.
    const TimeSeriesObject normed = normalize(obj, out.norm_stats.front().stats);
    WindowBatch batch = make_windows(normed, mc.window_length, Split::Train);
    const int keep = 50;
    batch.values = batch.values.leftCols(keep * mc.window_length).eval();
    batch.window_labels.resize(keep);
    batch.spans.resize(keep);
    // Synthetic outlier: a fast alternating pattern far outside anything the
    // augmentations could have produced.
    const Eigen::Index t = mc.window_length;
    for (Eigen::Index k = 0; k < t; ++k)
        batch.values(0, (keep - 1) * t + k) = (k % 2 == 0) ? 8.0 : -8.0;

    CocaNetwork net(mc, out.params, out.buffers);
    const Vector scores = score_dataset(net, out.center, batch);
    std::vector<double> sorted(scores.data(), scores.data() + scores.size());
    std::sort(sorted.begin(), sorted.end());
    // Training windows populate the low end of the score distribution; the
    // foreign pattern scores above the typical training window.
    CHECK(scores.head(keep - 1).minCoeff() == doctest::Approx(sorted.front()));
    CHECK(scores(0) <= sorted[static_cast<std::size_t>(keep / 2)]);
    CHECK(scores(keep - 1) > sorted[static_cast<std::size_t>(keep / 2)]);
}
