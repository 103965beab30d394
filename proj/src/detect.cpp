#include "coca/detect.hpp"

#include "coca/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace coca {

namespace {

Vector scores_impl(CocaNetwork& net, const Center& center, const WindowBatch& windows,
                   bool view_path) {
    require(center.frozen, "score_dataset: center must be frozen before scoring");
    const int n = windows.count();
    require(n >= 1, "score_dataset: empty batch");
    const int t = windows.window_length;
    require(t == net.config().window_length, "score_dataset: window length mismatch");

    Vector scores(n);
    const int chunk = 256;
    for (int at = 0; at < n; at += chunk) {
        const int m = std::min(chunk, n - at);
        const Matrix x = windows.values.middleCols(static_cast<Eigen::Index>(at) * t,
                                                   static_cast<Eigen::Index>(m) * t);
        Matrix qn, qpn;
        if (view_path) {
            ad::Tape tape;
            auto tp = net.register_params(tape);
            ad::Var q = net.project_view(tape, tp, x, m, Mode::Eval, nullptr, false);
            qn = l2_normalize_columns(tape.value(q));
            qpn = qn;
        } else {
            const auto [q, qp] = net.forward_values(x, m, Mode::Eval, nullptr);
            qn = l2_normalize_columns(q);
            qpn = l2_normalize_columns(qp);
        }
        scores.segment(at, m) = anomaly_scores(qn, qpn, center);
    }
    return scores;
}

}  // namespace

Vector score_dataset(CocaNetwork& net, const Center& center, const WindowBatch& windows) {
    return scores_impl(net, center, windows, false);
}

Vector score_dataset_view(CocaNetwork& net, const Center& center, const WindowBatch& windows) {
    return scores_impl(net, center, windows, true);
}

std::vector<double> make_p_grid(double p_min, double p_max, double p_step) {
    require(p_min > 0.0 && p_max >= p_min && p_step > 0.0, "make_p_grid: bad grid bounds");
    std::vector<double> grid;
    for (double p = p_min; p <= p_max + 1e-12; p += p_step) grid.push_back(p);
    return grid;
}

std::vector<double> default_p_grid() { return make_p_grid(0.0001, 0.0030, 0.0001); }

ThresholdChoice select_threshold(const Vector& scores, const std::vector<Span>& spans,
                                 const Labels& covered, const std::vector<double>& p_grid) {
    require(!p_grid.empty(), "select_threshold: empty p grid");
    require(scores.size() == static_cast<Eigen::Index>(spans.size()),
            "select_threshold: scores/spans mismatch");

    ThresholdChoice best;
    bool first = true;
    for (double p : p_grid) {
        require(p > 0.0 && p < 1.0, "select_threshold: p must be in (0,1)");
        const double tau = nearest_rank_quantile(scores, 1.0 - p);
        const Detection det = classify(scores, tau, spans);
        const double score = f1(rpa_counts(covered, det.point_predictions));
        if (first || score > best.best_f1) {
            best = {tau, p, score};
            first = false;
        }
    }
    return best;
}

double max_score_threshold(const Vector& scores) {
    require(scores.size() >= 1, "max_score_threshold: empty scores");
    const double top = scores.maxCoeff();
    double runner_up = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < scores.size(); ++i)
        if (scores(i) < top) runner_up = std::max(runner_up, scores(i));
    // All scores tied at the maximum (or a single window): anything strictly
    // below the maximum flags them all.
    return std::isfinite(runner_up) ? runner_up : top - 1.0;
}

Detection classify(const Vector& scores, double tau, const std::vector<Span>& spans) {
    require(scores.size() == static_cast<Eigen::Index>(spans.size()),
            "classify: scores/spans mismatch");
    require(!spans.empty(), "classify: empty batch");
    Detection det;
    det.window_scores = scores;
    det.threshold = tau;
    det.covered_start = spans.front().start;
    const int covered_end = spans.back().end;
    det.point_predictions.assign(static_cast<std::size_t>(covered_end - det.covered_start), 0);
    for (std::size_t i = 0; i < spans.size(); ++i) {
        if (scores(static_cast<Eigen::Index>(i)) > tau) {
            for (int t = spans[i].start; t < spans[i].end; ++t)
                det.point_predictions[static_cast<std::size_t>(t - det.covered_start)] = 1;
        }
    }
    return det;
}

void write_scores_csv(std::ostream& out, const Vector& scores, const Detection& detection,
                      const std::vector<Span>& spans) {
    require(scores.size() == static_cast<Eigen::Index>(spans.size()),
            "write_scores_csv: scores/spans mismatch");
    out << "window_index,start,end,score,predicted\n";
    out.precision(17);
    for (std::size_t i = 0; i < spans.size(); ++i) {
        const bool flagged = scores(static_cast<Eigen::Index>(i)) > detection.threshold;
        out << i << ',' << spans[i].start << ',' << spans[i].end << ','
            << scores(static_cast<Eigen::Index>(i)) << ',' << (flagged ? 1 : 0) << '\n';
    }
}

}  // namespace coca
