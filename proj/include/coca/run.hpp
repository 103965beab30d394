#pragma once

#include "coca/augment.hpp"
#include "coca/detect.hpp"
#include "coca/metrics.hpp"
#include "coca/model.hpp"
#include "coca/objective.hpp"
#include "coca/series.hpp"
#include "coca/train.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace coca {

// Everything one run needs, readable from / writable to a flat
// section.key = value config file. run.seed drives data generation and
// training; every field has a default.
struct RunConfig {
    // data
    std::string data_source = "synth";  // synth | csv
    std::vector<std::string> data_files;
    std::vector<std::string> value_columns = {"v1"};
    std::string label_column = "label";
    int train_end = -1;
    double train_fraction = 0.5;

    // synth
    std::string synth_kind = "suite";  // suite | sine | ar1 | mixture
    int synth_train_windows = 100;
    double synth_anomaly_rate = 0.02;

    ModelConfig model;
    ObjectiveConfig objective;
    TrainConfig train;
    AugmentConfig augment;

    // detect
    double p_min = 0.0001;
    double p_max = 0.0030;
    double p_step = 0.0001;
    bool max_score_mode = false;  // flag exactly the top-scoring window

    std::uint64_t seed = 42;
    std::string out_dir = "out";

    static RunConfig from_file(const std::string& path);
    void apply(const std::string& key, const std::string& value);
    std::string echo() const;  // every key, sorted, reparseable
    void validate() const;
};

// Maps a user-facing variant name (full, NoAug, NoOC, NoCL, NoVar, COCA-vi)
// onto the objective variant and the augmentation switch.
void apply_variant_name(RunConfig& cfg, const std::string& name);

std::vector<TimeSeriesObject> load_objects(const RunConfig& cfg);

struct ObjectOutcome {
    std::string id;
    TrainedModel trained;
    Vector scores;
    std::vector<Span> spans;
    Detection detection;
    Labels covered;
    MetricCounts pw, pa, rpa;
    bool collapsed = false;
};

struct RunOutcome {
    std::vector<ObjectOutcome> objects;
    MetricCounts agg_pw, agg_pa, agg_rpa;
    double rpa_f1 = 0.0;  // f1 of agg_rpa
};

// Trains one model per object, scores its test windows, picks a threshold
// (p-grid search, or max-score mode), and evaluates all three protocols.
RunOutcome run_pipeline(const RunConfig& cfg, const std::vector<TimeSeriesObject>& objects);

// Full run with artifacts under cfg.out_dir: config.echo, and per object
// checkpoint.bin, history.log, scores.csv, scorecard.json (at the root for
// single-object runs, under objects/<id>/ otherwise), plus aggregated
// scorecard.json and summary.json. Returns the process exit status.
int cmd_run(const RunConfig& cfg);

struct Scorecard {
    MetricCounts counts;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

// Standalone metric computation over files: the labels CSV needs a "label"
// column; the predictions CSV needs either a "pred" column or a "score"
// column plus a threshold.
Scorecard cmd_eval(const std::string& labels_path, const std::string& preds_path,
                   Protocol protocol, std::optional<double> tau);

// Runs each named variant `repeats` times on shared data (training seeds
// seed + repeat index) and emits one table row per variant with the mean and
// std of the aggregated RPA F1.
int cmd_ablate(const RunConfig& cfg, const std::vector<std::string>& variants, int repeats,
               std::ostream& table);

std::string scorecard_json(const RunOutcome& outcome);

}  // namespace coca
