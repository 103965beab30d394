#include "coca/metrics.hpp"

#include <algorithm>

namespace coca {

std::string protocol_name(Protocol p) {
    switch (p) {
        case Protocol::PW: return "pw";
        case Protocol::PA: return "pa";
        case Protocol::RPA: return "rpa";
    }
    return "?";
}

Protocol parse_protocol(const std::string& name) {
    std::string s = name;
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "pw") return Protocol::PW;
    if (s == "pa") return Protocol::PA;
    if (s == "rpa") return Protocol::RPA;
    throw std::invalid_argument("unknown protocol '" + name + "' (expected pw, pa, or rpa)");
}

std::vector<Segment> segments(const Labels& labels) {
    std::vector<Segment> out;
    const int n = static_cast<int>(labels.size());
    int i = 0;
    while (i < n) {
        if (labels[i]) {
            int j = i;
            while (j + 1 < n && labels[j + 1]) ++j;
            out.push_back({i, j});
            i = j + 1;
        } else {
            ++i;
        }
    }
    return out;
}

namespace {

void check_lengths(const Labels& labels, const Labels& preds) {
    require(labels.size() == preds.size(),
            "labels/preds length mismatch: " + std::to_string(labels.size()) + " vs " +
                std::to_string(preds.size()));
}

}  // namespace

MetricCounts pw_counts(const Labels& labels, const Labels& preds) {
    check_lengths(labels, preds);
    MetricCounts c;
    c.protocol = Protocol::PW;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (preds[i] && labels[i]) ++c.tp;
        else if (preds[i] && !labels[i]) ++c.fp;
        else if (!preds[i] && labels[i]) ++c.fn;
    }
    return c;
}

MetricCounts pa_counts(const Labels& labels, const Labels& preds) {
    check_lengths(labels, preds);
    Labels adjusted = preds;
    for (const Segment& seg : segments(labels)) {
        bool hit = false;
        for (int t = seg.start; t <= seg.end && !hit; ++t) hit = preds[static_cast<std::size_t>(t)] != 0;
        if (hit) {
            for (int t = seg.start; t <= seg.end; ++t) adjusted[static_cast<std::size_t>(t)] = 1;
        }
    }
    MetricCounts c = pw_counts(labels, adjusted);
    c.protocol = Protocol::PA;
    return c;
}

MetricCounts rpa_counts(const Labels& labels, const Labels& preds) {
    check_lengths(labels, preds);
    const std::vector<Segment> truth = segments(labels);
    const std::vector<Segment> predicted = segments(preds);

    MetricCounts c;
    c.protocol = Protocol::RPA;
    for (const Segment& t : truth) {
        const bool hit = std::any_of(predicted.begin(), predicted.end(),
                                     [&](const Segment& p) { return t.overlaps(p); });
        if (hit) ++c.tp;
        else ++c.fn;
    }
    for (const Segment& p : predicted) {
        const bool spurious = std::none_of(truth.begin(), truth.end(),
                                           [&](const Segment& t) { return p.overlaps(t); });
        if (spurious) ++c.fp;
    }
    return c;
}

double f1(const MetricCounts& c) {
    const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

double precision(const MetricCounts& c) {
    const double denom = static_cast<double>(c.tp + c.fp);
    return denom == 0.0 ? 0.0 : static_cast<double>(c.tp) / denom;
}

double recall(const MetricCounts& c) {
    const double denom = static_cast<double>(c.tp + c.fn);
    return denom == 0.0 ? 0.0 : static_cast<double>(c.tp) / denom;
}

MetricCounts aggregate(const std::vector<MetricCounts>& counts) {
    MetricCounts total;
    if (counts.empty()) return total;
    total.protocol = counts.front().protocol;
    for (const MetricCounts& c : counts) {
        require(c.protocol == total.protocol, "aggregate over mixed protocols");
        total.tp += c.tp;
        total.fp += c.fp;
        total.fn += c.fn;
    }
    return total;
}

}  // namespace coca
