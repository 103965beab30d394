#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coca/checkpoint.hpp"
#include "coca/detect.hpp"
#include "coca/metrics.hpp"
#include "coca/synth.hpp"
#include "coca/train.hpp"
#include "helpers.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace coca;

namespace {

std::vector<Span> spans_for(int n, int t, int start = 0) {
    std::vector<Span> spans(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) spans[static_cast<std::size_t>(i)] = {start + i * t, start + (i + 1) * t};
    return spans;
}

Vector to_scores(std::initializer_list<double> v) {
    Vector s(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) s(i++) = x;
    return s;
}

}  // namespace

TEST_CASE("classify uses strict inequality and broadcasts to spans") {
    const Vector scores = to_scores({0.5, 0.8, 0.2});
    const auto spans = spans_for(3, 2);
    const Detection det = classify(scores, 0.5, spans);
    CHECK(det.point_predictions == Labels{0, 0, 1, 1, 0, 0});  // score == tau stays normal

    const Detection all = classify(scores, -1.0, spans);
    CHECK(all.point_predictions == Labels{1, 1, 1, 1, 1, 1});
    const Detection none = classify(scores, 5.0, spans);
    CHECK(none.point_predictions == Labels{0, 0, 0, 0, 0, 0});
}

TEST_CASE("classify is idempotent and pure") {
    const Vector scores = to_scores({0.1, 0.9});
    const auto spans = spans_for(2, 3, 10);
    const Detection a = classify(scores, 0.5, spans);
    const Detection b = classify(scores, 0.5, spans);
    CHECK(a.point_predictions == b.point_predictions);
    CHECK(a.covered_start == 10);
}

TEST_CASE("raising the threshold never adds predicted points") {
    Rng rng(3);
    std::uniform_real_distribution<double> unif(0.0, 4.0);
    Vector scores(40);
    for (Eigen::Index i = 0; i < scores.size(); ++i) scores(i) = unif(rng);
    const auto spans = spans_for(40, 4);
    long prev = std::numeric_limits<long>::max();
    for (double tau = 0.0; tau <= 4.0; tau += 0.25) {
        const Detection det = classify(scores, tau, spans);
        long count = 0;
        for (auto p : det.point_predictions) count += p;
        REQUIRE(count <= prev);
        prev = count;
    }
}

TEST_CASE("max-score threshold flags the argmax and ties") {
    CHECK(max_score_threshold(to_scores({0.1, 0.9, 0.3})) == doctest::Approx(0.3));
    const Detection det =
        classify(to_scores({0.1, 0.9, 0.3}), max_score_threshold(to_scores({0.1, 0.9, 0.3})),
                 spans_for(3, 2));
    CHECK(det.point_predictions == Labels{0, 0, 1, 1, 0, 0});

    // Tied maxima are all flagged.
    const Vector tied = to_scores({0.9, 0.2, 0.9});
    const Detection both = classify(tied, max_score_threshold(tied), spans_for(3, 2));
    CHECK(both.point_predictions == Labels{1, 1, 0, 0, 1, 1});

    // A single window is flagged.
    const Vector one = to_scores({0.4});
    CHECK(max_score_threshold(one) < 0.4);
}

TEST_CASE("select_threshold maximizes rpa f1 and is self-consistent") {
    // One clearly separated anomalous window.
    const int n = 20;
    Vector scores = Vector::Constant(n, 0.2);
    scores(7) = 3.5;
    const auto spans = spans_for(n, 4);
    Labels covered(static_cast<std::size_t>(n * 4), 0);
    for (int t = 7 * 4; t < 8 * 4; ++t) covered[static_cast<std::size_t>(t)] = 1;

    const auto grid = make_p_grid(0.01, 0.30, 0.01);
    const ThresholdChoice choice = select_threshold(scores, spans, covered, grid);
    CHECK(choice.best_f1 == doctest::Approx(1.0));

    // Internal consistency: recomputing at the returned tau reproduces f1.
    const Detection det = classify(scores, choice.tau, spans);
    CHECK(f1(rpa_counts(covered, det.point_predictions)) ==
          doctest::Approx(choice.best_f1).epsilon(1e-12));
}

TEST_CASE("select_threshold with vacuous labels returns the smallest p") {
    const Vector scores = to_scores({0.1, 0.5, 0.9, 0.7});
    const auto spans = spans_for(4, 2);
    const Labels covered(8, 0);
    const ThresholdChoice choice =
        select_threshold(scores, spans, covered, make_p_grid(0.05, 0.25, 0.05));
    CHECK(choice.best_f1 == 0.0);
    CHECK(choice.p == doctest::Approx(0.05));
    CHECK_THROWS(select_threshold(scores, spans, covered, {}));
}

TEST_CASE("single-value grid thresholds at exactly that quantile") {
    const Vector scores = to_scores({0.4, 0.1, 0.9, 0.2, 0.6});
    const auto spans = spans_for(5, 2);
    const Labels covered(10, 0);
    const ThresholdChoice choice = select_threshold(scores, spans, covered, {0.2});
    CHECK(choice.tau == doctest::Approx(nearest_rank_quantile(scores, 0.8)));
    CHECK(choice.p == doctest::Approx(0.2));
}

TEST_CASE("default p grid mirrors the 0.01%..0.30% protocol") {
    const auto grid = default_p_grid();
    REQUIRE(grid.size() == 30);
    CHECK(grid.front() == doctest::Approx(0.0001));
    CHECK(grid.back() == doctest::Approx(0.0030));
}

TEST_CASE("score_dataset needs a frozen center and is permutation-equivariant") {
    const ModelConfig mc = testing::toy_model_config();
    CocaNetwork net(mc, 3);
    WindowBatch batch;
    batch.object_id = "b";
    batch.window_length = mc.window_length;
    batch.values = testing::toy_batch(mc, 6, 4);
    batch.window_labels.assign(6, 0);
    batch.spans = spans_for(6, mc.window_length);

    Center thawed;
    thawed.values = testing::unit_center(mc.project_channels, 5);
    CHECK_THROWS(score_dataset(net, thawed, batch));

    Center ce = thawed;
    ce.frozen = true;
    const Vector scores = score_dataset(net, ce, batch);
    REQUIRE(scores.size() == 6);
    CHECK(scores.minCoeff() >= 0.0);
    CHECK(scores.maxCoeff() <= 4.0);

    // Reversed window order produces reversed scores.
    WindowBatch reversed = batch;
    for (int i = 0; i < 6; ++i)
        reversed.values.middleCols(i * mc.window_length, mc.window_length) =
            batch.values.middleCols((5 - i) * mc.window_length, mc.window_length);
    const Vector rev = score_dataset(net, ce, reversed);
    for (int i = 0; i < 6; ++i) REQUIRE(rev(i) == doctest::Approx(scores(5 - i)).epsilon(1e-12));
}

TEST_CASE("synthetic projections at the center score zero") {
    // Direct objective-level check that the score pipeline's zero case holds.
    Center ce;
    ce.values = testing::unit_center(8, 6);
    ce.frozen = true;
    const Matrix q = ce.values.replicate(1, 4);
    CHECK(anomaly_scores(q, q, ce).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("scores csv has the pinned column layout") {
    const Vector scores = to_scores({0.25, 0.75});
    const auto spans = spans_for(2, 3, 6);
    const Detection det = classify(scores, 0.5, spans);
    std::ostringstream os;
    write_scores_csv(os, scores, det, spans);
    CHECK(os.str() ==
          "window_index,start,end,score,predicted\n0,6,9,0.25,0\n1,9,12,0.75,1\n");
}

TEST_CASE("checkpoint round-trips bit-exactly") {
    const ModelConfig mc = testing::toy_model_config();
    CocaNetwork net(mc, 9);
    Checkpoint ckpt;
    ckpt.config = mc;
    ckpt.params = net.params();
    ckpt.buffers = net.buffers();
    ckpt.center.values = testing::unit_center(mc.project_channels, 10);
    ckpt.center.frozen = true;
    NamedNormStats ns;
    ns.object_id = "obj-1";
    ns.stats.mean = Vector::Constant(1, 0.25);
    ns.stats.std = Vector::Constant(1, 1.75);
    ckpt.norm_stats.push_back(ns);

    const std::string path =
        (std::filesystem::temp_directory_path() / "coca_ckpt_test.bin").string();
    save_checkpoint(path, ckpt);
    const Checkpoint back = load_checkpoint(path);

    CHECK(back.config.window_length == mc.window_length);
    CHECK(back.config.conv_channels == mc.conv_channels);
    REQUIRE(back.params.count() == ckpt.params.count());
    for (int i = 0; i < ckpt.params.count(); ++i) {
        REQUIRE(back.params.name(i) == ckpt.params.name(i));
        REQUIRE(back.params.value(i) == ckpt.params.value(i));  // bitwise
    }
    CHECK(back.center.frozen);
    CHECK(back.center.values == ckpt.center.values);
    REQUIRE(back.norm_stats.size() == 1);
    CHECK(back.norm_stats[0].object_id == "obj-1");
    CHECK(back.norm_stats[0].stats.std(0) == 1.75);

    // Saving the loaded checkpoint reproduces the file byte for byte.
    const std::string path2 =
        (std::filesystem::temp_directory_path() / "coca_ckpt_test2.bin").string();
    save_checkpoint(path2, back);
    std::ifstream a(path, std::ios::binary), b(path2, std::ios::binary);
    std::stringstream sa, sb;
    sa << a.rdbuf();
    sb << b.rdbuf();
    CHECK(sa.str() == sb.str());
    std::remove(path.c_str());
    std::remove(path2.c_str());
}
