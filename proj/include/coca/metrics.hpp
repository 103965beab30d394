#pragma once

#include "coca/common.hpp"

#include <cstdint>
#include <vector>

namespace coca {

// Maximal run of 1s in a label vector, inclusive point indices.
struct Segment {
    int start = 0;
    int end = 0;  // inclusive

    bool overlaps(const Segment& other) const {
        return start <= other.end && other.start <= end;
    }
    int length() const { return end - start + 1; }
    bool operator==(const Segment&) const = default;
};

enum class Protocol { PW, PA, RPA };

std::string protocol_name(Protocol p);
Protocol parse_protocol(const std::string& name);

// True/false positive/negative counts under one counting protocol.
// Counts from different objects aggregate by component-wise addition.
struct MetricCounts {
    long long tp = 0;
    long long fp = 0;
    long long fn = 0;
    Protocol protocol = Protocol::PW;
};

using Labels = std::vector<std::uint8_t>;

// Maximal runs of 1s.
std::vector<Segment> segments(const Labels& labels);

// Point-wise counting: element-wise tp/fp/fn.
MetricCounts pw_counts(const Labels& labels, const Labels& preds);

// Point-adjusted: any hit inside a true segment marks the whole segment
// predicted, then counts are point-wise. False positives are predicted
// points outside every true segment.
MetricCounts pa_counts(const Labels& labels, const Labels& preds);

// Revised point-adjusted: one tp per true segment overlapped by at least one
// predicted segment, one fn per true segment with no overlap, one fp per
// predicted segment overlapping no true segment.
MetricCounts rpa_counts(const Labels& labels, const Labels& preds);

// 2tp / (2tp + fp + fn), 0 when the denominator is 0.
double f1(const MetricCounts& counts);
double precision(const MetricCounts& counts);
double recall(const MetricCounts& counts);

// Component-wise sum. Throws on mixed protocols.
MetricCounts aggregate(const std::vector<MetricCounts>& counts);

}  // namespace coca
