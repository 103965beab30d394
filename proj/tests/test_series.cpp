#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "coca/series.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

using namespace coca;

namespace {

// Unique temp file that cleans up after itself.
struct TempCsv {
    std::string path;
    explicit TempCsv(const std::string& body) {
        static int counter = 0;
        path = (std::filesystem::temp_directory_path() /
                ("coca_series_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) +
                 ".csv"))
                   .string();
        std::ofstream out(path);
        out << body;
    }
    ~TempCsv() { std::remove(path.c_str()); }
};

TimeSeriesObject make_object(std::vector<double> vals, Labels labels, int train_end) {
    TimeSeriesObject ts;
    ts.id = "t";
    ts.values.resize(static_cast<Eigen::Index>(vals.size()), 1);
    for (std::size_t i = 0; i < vals.size(); ++i) ts.values(static_cast<Eigen::Index>(i), 0) = vals[i];
    ts.labels = std::move(labels);
    ts.train_end = train_end;
    return ts;
}

}  // namespace

TEST_CASE("load_csv echoes file contents") {
    TempCsv file("v,label\n1,0\n2,0\n9,1\n2,0\n");
    CsvSchema schema;
    schema.value_columns = {"v"};
    schema.train_end = 2;
    const TimeSeriesObject ts = load_csv(file.path, schema);
    CHECK(ts.length() == 4);
    CHECK(ts.channels() == 1);
    CHECK(ts.values(2, 0) == doctest::Approx(9.0));
    CHECK(ts.labels == Labels{0, 0, 1, 0});
    CHECK_FALSE(ts.labels_absent);
}

TEST_CASE("missing label column yields zero labels and the absent flag") {
    TempCsv file("v\n1\n2\n3\n4\n");
    CsvSchema schema;
    schema.value_columns = {"v"};
    schema.train_end = 2;
    const TimeSeriesObject ts = load_csv(file.path, schema);
    CHECK(ts.labels == Labels{0, 0, 0, 0});
    CHECK(ts.labels_absent);
}

TEST_CASE("non-numeric cell reports the file line") {
    TempCsv file("a,b,c,label\n1,2,3,0\n1,2,3,0\n1,2,3,0\n1,2,3,0\n1,2,3,0\n1,2,oops,0\n1,2,3,0\n");
    CsvSchema schema;
    schema.value_columns = {"a", "b", "c"};
    schema.train_end = 2;
    try {
        load_csv(file.path, schema);
        FAIL("expected parse error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 7") != std::string::npos);
    }
}

TEST_CASE("inconsistent column count is a schema error") {
    TempCsv file("v,label\n1,0\n2\n");
    CsvSchema schema;
    schema.value_columns = {"v"};
    CHECK_THROWS(load_csv(file.path, schema));
}

TEST_CASE("label cells must be exactly 0 or 1") {
    TempCsv file("v,label\n1,0\n2,2\n3,0\n");
    CsvSchema schema;
    schema.value_columns = {"v"};
    CHECK_THROWS(load_csv(file.path, schema));
}

TEST_CASE("save_csv round-trips through load_csv") {
    TimeSeriesObject ts = make_object({0.5, -1.25, 3.75, 2.0}, {0, 1, 0, 0}, 2);
    const std::string path =
        (std::filesystem::temp_directory_path() / "coca_series_roundtrip.csv").string();
    save_csv(path, ts);
    CsvSchema schema;
    schema.value_columns = {"v1"};
    schema.train_end = 2;
    const TimeSeriesObject back = load_csv(path, schema);
    CHECK(back.values.isApprox(ts.values));
    CHECK(back.labels == ts.labels);
    std::remove(path.c_str());
}

TEST_CASE("fit_normalizer uses population statistics") {
    const TimeSeriesObject ts = make_object({1, 2, 3, 100}, {0, 0, 0, 0}, 3);
    const NormStats stats = fit_normalizer(ts);
    CHECK(stats.mean(0) == doctest::Approx(2.0));
    // population std of {1,2,3} = sqrt(2/3)
    CHECK(stats.std(0) == doctest::Approx(0.816496580927726).epsilon(1e-12));
}

TEST_CASE("constant training channel trips the degenerate guard") {
    const TimeSeriesObject ts = make_object({5, 5, 5, 9}, {0, 0, 0, 0}, 3);
    const NormStats stats = fit_normalizer(ts);
    CHECK(stats.mean(0) == doctest::Approx(5.0));
    CHECK(stats.std(0) == doctest::Approx(1.0));
    const TimeSeriesObject normed = normalize(ts, stats);
    CHECK(normed.values(0, 0) == doctest::Approx(0.0));
    CHECK(normed.values(1, 0) == doctest::Approx(0.0));
}

TEST_CASE("multichannel stats are independent per channel") {
    TimeSeriesObject ts;
    ts.id = "mc";
    ts.values.resize(4, 2);
    ts.values << 1, 10, 2, 20, 3, 30, 99, 99;
    ts.labels = {0, 0, 0, 0};
    ts.train_end = 3;
    const NormStats stats = fit_normalizer(ts);
    CHECK(stats.mean(0) == doctest::Approx(2.0));
    CHECK(stats.mean(1) == doctest::Approx(20.0));
    CHECK(stats.std(1) == doctest::Approx(10.0 * 0.816496580927726).epsilon(1e-9));
}

TEST_CASE("normalize subtracts mean and divides std, preserving labels") {
    const TimeSeriesObject ts = make_object({1, 2, 3}, {0, 1, 0}, 2);
    NormStats stats;
    stats.mean = Vector::Constant(1, 2.0);
    stats.std = Vector::Constant(1, 1.0);
    const TimeSeriesObject out = normalize(ts, stats);
    CHECK(out.values(0, 0) == doctest::Approx(-1.0));
    CHECK(out.values(1, 0) == doctest::Approx(0.0));
    CHECK(out.values(2, 0) == doctest::Approx(1.0));
    CHECK(out.labels == ts.labels);
    CHECK(out.train_end == ts.train_end);

    NormStats bad;
    bad.mean = Vector::Zero(2);
    bad.std = Vector::Ones(2);
    CHECK_THROWS(normalize(ts, bad));
}

TEST_CASE("normalize(fit) is idempotent on the training split") {
    std::mt19937 rng(7);
    std::normal_distribution<double> dist(3.0, 2.5);
    TimeSeriesObject ts;
    ts.id = "r";
    ts.values.resize(200, 2);
    for (Eigen::Index i = 0; i < 200; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) ts.values(i, j) = dist(rng);
    ts.labels.assign(200, 0);
    ts.train_end = 150;

    const TimeSeriesObject normed = normalize(ts, fit_normalizer(ts));
    const NormStats again = fit_normalizer(normed);
    for (int j = 0; j < 2; ++j) {
        CHECK(std::abs(again.mean(j)) < 1e-9);
        CHECK(std::abs(again.std(j) - 1.0) < 1e-6);
    }
}

TEST_CASE("make_windows applies the stride rule and drops the remainder") {
    const TimeSeriesObject ts =
        make_object({0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, {0, 0, 0, 0, 1, 0, 0, 0, 0, 0}, 9);
    const WindowBatch batch = make_windows(ts, 3, Split::Train);
    CHECK(batch.count() == 3);
    CHECK(batch.window_labels == Labels{0, 1, 0});
    CHECK(batch.spans[0].start == 0);
    CHECK(batch.spans[2].end == 9);
    CHECK(batch.window(1)(0, 1) == doctest::Approx(4.0));
}

TEST_CASE("single window covering the whole split") {
    const TimeSeriesObject ts = make_object({1, 2, 3, 4, 5, 6, 7}, {0, 0, 0, 0, 0, 0, 0}, 6);
    const WindowBatch batch = make_windows(ts, 6, Split::Train);
    CHECK(batch.count() == 1);
    CHECK(batch.window_labels == Labels{0});
}

TEST_CASE("split shorter than the window errors") {
    const TimeSeriesObject ts = make_object({1, 2, 3, 4, 5}, {0, 0, 0, 0, 0}, 3);
    CHECK_THROWS(make_windows(ts, 4, Split::Train));
    CHECK_THROWS(make_windows(ts, 3, Split::Test));
}

TEST_CASE("window spans tile the covered prefix and labels OR point labels") {
    std::mt19937 rng(99);
    std::bernoulli_distribution bit(0.2);
    for (int trial = 0; trial < 50; ++trial) {
        const int len = 20 + static_cast<int>(rng() % 50);
        const int t = 2 + static_cast<int>(rng() % 6);
        TimeSeriesObject ts;
        ts.id = "p";
        ts.values = Matrix::Random(len, 1);
        ts.labels.resize(static_cast<std::size_t>(len));
        for (auto& l : ts.labels) l = bit(rng) ? 1 : 0;
        ts.train_end = len - 1;
        if (ts.train_end < t) continue;

        const WindowBatch batch = make_windows(ts, t, Split::Train);
        int expect_start = 0;
        for (int i = 0; i < batch.count(); ++i) {
            const Span span = batch.spans[static_cast<std::size_t>(i)];
            REQUIRE(span.start == expect_start);
            REQUIRE(span.end == span.start + t);
            expect_start = span.end;
            std::uint8_t any = 0;
            for (int k = span.start; k < span.end; ++k) any |= ts.labels[static_cast<std::size_t>(k)];
            REQUIRE(batch.window_labels[static_cast<std::size_t>(i)] == any);
        }
        REQUIRE(expect_start == (ts.train_end / t) * t);
    }
}

TEST_CASE("covered_labels slices the covered region") {
    const TimeSeriesObject ts =
        make_object({0, 1, 2, 3, 4, 5, 6, 7}, {0, 0, 0, 0, 1, 1, 0, 0}, 4);
    const WindowBatch batch = make_windows(ts, 2, Split::Test);
    const Labels covered = covered_labels(ts, batch);
    CHECK(covered == Labels{1, 1, 0, 0});
}
