#pragma once

#include "coca/common.hpp"
#include "coca/metrics.hpp"

#include <string>
#include <vector>

namespace coca {

// One labeled time series. values is length x d (row per time point);
// labels mark anomalous points; train_end splits train [0, train_end)
// from test [train_end, length).
struct TimeSeriesObject {
    std::string id;
    Matrix values;  // length x d
    Labels labels;  // length, each 0/1
    int train_end = 0;
    bool labels_absent = false;

    int length() const { return static_cast<int>(values.rows()); }
    int channels() const { return static_cast<int>(values.cols()); }
    void validate() const;
};

// Per-channel mean/std fitted on the training split only.
struct NormStats {
    Vector mean;
    Vector std;
};

// Half-open span of source point indices covered by one window.
struct Span {
    int start = 0;
    int end = 0;  // exclusive
};

// N non-overlapping windows of T points each, stored channel-major:
// values is d x (N*T) and window i occupies columns [i*T, (i+1)*T).
struct WindowBatch {
    Matrix values;
    int window_length = 0;
    Labels window_labels;
    std::vector<Span> spans;
    std::string object_id;

    int count() const { return static_cast<int>(window_labels.size()); }
    int channels() const { return static_cast<int>(values.rows()); }
    Eigen::Block<const Matrix> window(int i) const {
        return values.block(0, i * window_length, values.rows(), window_length);
    }
};

enum class Split { Train, Test };

// Column selection for load_csv. Label column values must be exactly "0" or
// "1"; a label column missing from the header means all-zero labels with the
// labels_absent flag set. The train boundary is train_end when >= 0, else
// floor(train_fraction * length).
struct CsvSchema {
    std::vector<std::string> value_columns;
    std::string label_column = "label";
    int train_end = -1;
    double train_fraction = 0.5;
};

TimeSeriesObject load_csv(const std::string& path, const CsvSchema& schema);

// Writes the format load_csv reads: header v1..vd[,label], one row per point.
void save_csv(const std::string& path, const TimeSeriesObject& ts);

// Population (divide-by-N) statistics over [0, train_end); channels with
// std < 1e-8 get std := 1.
NormStats fit_normalizer(const TimeSeriesObject& ts);

TimeSeriesObject normalize(const TimeSeriesObject& ts, const NormStats& stats);

// Cuts the chosen split into non-overlapping length-T windows (stride T,
// trailing remainder dropped). A window is labeled 1 iff any point in its
// span is labeled 1.
WindowBatch make_windows(const TimeSeriesObject& ts, int window_length, Split split);

// Point labels over the contiguous region covered by the batch's spans.
Labels covered_labels(const TimeSeriesObject& ts, const WindowBatch& batch);

}  // namespace coca
