#pragma once

#include "coca/model.hpp"
#include "coca/objective.hpp"
#include "coca/series.hpp"

#include <iosfwd>
#include <vector>

namespace coca {

// Window scores with a threshold broadcast to point predictions over the
// contiguous region the windows cover (points outside any window are not
// represented; they count as normal).
struct Detection {
    Vector window_scores;
    double threshold = 0.0;
    Labels point_predictions;
    int covered_start = 0;
    double selected_rate = -1.0;  // p from threshold search, < 0 when unused
};

// Eval-mode anomaly scores for every window against a frozen center.
Vector score_dataset(CocaNetwork& net, const Center& center, const WindowBatch& windows);

// As above for the view-contrast variant, which scores the single
// encode+project branch against itself (q' := q).
Vector score_dataset_view(CocaNetwork& net, const Center& center, const WindowBatch& windows);

struct ThresholdChoice {
    double tau = 0.0;
    double p = 0.0;
    double best_f1 = 0.0;
};

// Default anomaly-rate grid: p from 0.01% to 0.30% in steps of 0.01%,
// sized for datasets with tens of thousands of windows; desk-scale runs
// should configure a coarser, wider grid.
std::vector<double> default_p_grid();
std::vector<double> make_p_grid(double p_min, double p_max, double p_step);

// For each candidate rate p, thresholds at the (1-p) nearest-rank quantile
// of the scores, broadcasts window decisions to points, and keeps the p with
// the best RPA F1 against the covered labels; ties go to the smaller p.
ThresholdChoice select_threshold(const Vector& scores, const std::vector<Span>& spans,
                                 const Labels& covered_labels,
                                 const std::vector<double>& p_grid);

// Threshold that flags exactly the maximal-score window (all of them when
// tied at the maximum).
double max_score_threshold(const Vector& scores);

// Strict S > tau, window decision broadcast to every point in its span.
Detection classify(const Vector& scores, double tau, const std::vector<Span>& spans);

// CSV with columns (window_index, start, end, score, predicted).
void write_scores_csv(std::ostream& out, const Vector& scores, const Detection& detection,
                      const std::vector<Span>& spans);

}  // namespace coca
