#include "coca/run.hpp"

#include "coca/checkpoint.hpp"
#include "coca/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

namespace coca {

using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool parse_bool(const std::string& v) {
    const std::string s = lower(v);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw std::invalid_argument("config: expected boolean, got '" + v + "'");
}

int parse_int(const std::string& v) {
    try {
        std::size_t pos = 0;
        const int x = std::stoi(v, &pos);
        require(pos == v.size(), "");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: expected integer, got '" + v + "'");
    }
}

double parse_double(const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        require(pos == v.size(), "");
        return x;
    } catch (const std::exception&) {
        throw std::invalid_argument("config: expected number, got '" + v + "'");
    }
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

Variant parse_objective_variant(const std::string& v) {
    const std::string s = lower(v);
    if (s == "full") return Variant::Full;
    if (s == "nooc") return Variant::NoOC;
    if (s == "nocl") return Variant::NoCL;
    if (s == "novar") return Variant::NoVar;
    if (s == "coca-vi" || s == "cocavi" || s == "vi") return Variant::CocaVi;
    throw std::invalid_argument("config: unknown objective.variant '" + v + "'");
}

std::string sanitize(const std::string& id) {
    std::string out;
    for (char c : id) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out.empty() ? "object" : out;
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

void apply_variant_name(RunConfig& cfg, const std::string& name) {
    const std::string s = lower(name);
    if (s == "noaug") {
        cfg.objective.variant = Variant::Full;
        cfg.augment.enabled = false;
        return;
    }
    cfg.objective.variant = parse_objective_variant(s);
}

void RunConfig::apply(const std::string& key, const std::string& value) {
    if (key == "data.source") data_source = lower(value);
    else if (key == "data.files") data_files = split_list(value);
    else if (key == "data.values") value_columns = split_list(value);
    else if (key == "data.label") label_column = value;
    else if (key == "data.train_end") train_end = parse_int(value);
    else if (key == "data.train_fraction") train_fraction = parse_double(value);
    else if (key == "synth.kind") synth_kind = lower(value);
    else if (key == "synth.train_windows") synth_train_windows = parse_int(value);
    else if (key == "synth.anomaly_rate") synth_anomaly_rate = parse_double(value);
    else if (key == "model.in_channels") model.in_channels = parse_int(value);
    else if (key == "model.conv1") model.conv_channels[0] = parse_int(value);
    else if (key == "model.conv2") model.conv_channels[1] = parse_int(value);
    else if (key == "model.conv3") model.conv_channels[2] = parse_int(value);
    else if (key == "model.kernel") model.kernel_size = parse_int(value);
    else if (key == "model.dropout") model.dropout = parse_double(value);
    else if (key == "model.hidden") model.hidden_size = parse_int(value);
    else if (key == "model.project") model.project_channels = parse_int(value);
    else if (key == "model.window") model.window_length = parse_int(value);
    else if (key == "objective.lambda") objective.lambda = parse_double(value);
    else if (key == "objective.mu") objective.mu = parse_double(value);
    else if (key == "objective.gamma") objective.gamma = parse_double(value);
    else if (key == "objective.epsilon") objective.epsilon = parse_double(value);
    else if (key == "objective.nu") objective.nu = parse_double(value);
    else if (key == "objective.eta") objective.eta = parse_double(value);
    else if (key == "objective.mode") {
        const std::string s = lower(value);
        if (s == "hard") objective.mode = LossMode::Hard;
        else if (s == "soft") objective.mode = LossMode::Soft;
        else throw std::invalid_argument("config: objective.mode must be hard or soft");
    } else if (key == "objective.variant") objective.variant = parse_objective_variant(value);
    else if (key == "train.lr") train.learning_rate = parse_double(value);
    else if (key == "train.weight_decay") train.weight_decay = parse_double(value);
    else if (key == "train.beta1") train.adam_beta1 = parse_double(value);
    else if (key == "train.beta2") train.adam_beta2 = parse_double(value);
    else if (key == "train.batch_size") train.batch_size = parse_int(value);
    else if (key == "train.max_epochs") train.max_epochs = parse_int(value);
    else if (key == "train.center_freeze_epoch") train.center_freeze_epoch = parse_int(value);
    else if (key == "train.patience") train.early_stop_patience = parse_int(value);
    else if (key == "train.min_delta") train.early_stop_min_delta = parse_double(value);
    else if (key == "train.clip_norm") train.clip_norm = parse_double(value);
    else if (key == "augment.enabled") augment.enabled = parse_bool(value);
    else if (key == "augment.jitter") augment.jitter_ratio = parse_double(value);
    else if (key == "augment.scale") augment.scale_ratio = parse_double(value);
    else if (key == "detect.p_min") p_min = parse_double(value);
    else if (key == "detect.p_max") p_max = parse_double(value);
    else if (key == "detect.p_step") p_step = parse_double(value);
    else if (key == "detect.max_score") max_score_mode = parse_bool(value);
    else if (key == "run.seed") {
        seed = static_cast<std::uint64_t>(parse_int(value));
        train.seed = seed;
    } else if (key == "run.out") out_dir = value;
    else throw std::invalid_argument("config: unknown key '" + key + "'");
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    ensure(in.good(), "config: cannot open '" + path + "'");
    RunConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        ensure(eq != std::string::npos,
               "config: '" + path + "' line " + std::to_string(line_no) + ": expected key = value");
        try {
            cfg.apply(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(std::string(e.what()) + " ('" + path + "' line " +
                                        std::to_string(line_no) + ")");
        }
    }
    return cfg;
}

std::string RunConfig::echo() const {
    std::map<std::string, std::string> kv;
    kv["data.source"] = data_source;
    std::string files;
    for (const std::string& f : data_files) files += (files.empty() ? "" : ",") + f;
    kv["data.files"] = files;
    std::string vals;
    for (const std::string& v : value_columns) vals += (vals.empty() ? "" : ",") + v;
    kv["data.values"] = vals;
    kv["data.label"] = label_column;
    kv["data.train_end"] = std::to_string(train_end);
    kv["data.train_fraction"] = fmt(train_fraction);
    kv["synth.kind"] = synth_kind;
    kv["synth.train_windows"] = std::to_string(synth_train_windows);
    kv["synth.anomaly_rate"] = fmt(synth_anomaly_rate);
    kv["model.in_channels"] = std::to_string(model.in_channels);
    kv["model.conv1"] = std::to_string(model.conv_channels[0]);
    kv["model.conv2"] = std::to_string(model.conv_channels[1]);
    kv["model.conv3"] = std::to_string(model.conv_channels[2]);
    kv["model.kernel"] = std::to_string(model.kernel_size);
    kv["model.dropout"] = fmt(model.dropout);
    kv["model.hidden"] = std::to_string(model.hidden_size);
    kv["model.project"] = std::to_string(model.project_channels);
    kv["model.window"] = std::to_string(model.window_length);
    kv["objective.lambda"] = fmt(objective.lambda);
    kv["objective.mu"] = fmt(objective.mu);
    kv["objective.gamma"] = fmt(objective.gamma);
    kv["objective.epsilon"] = fmt(objective.epsilon);
    kv["objective.nu"] = fmt(objective.nu);
    kv["objective.eta"] = fmt(objective.eta);
    kv["objective.mode"] = objective.mode == LossMode::Soft ? "soft" : "hard";
    kv["objective.variant"] = variant_name(objective.variant);
    kv["train.lr"] = fmt(train.learning_rate);
    kv["train.weight_decay"] = fmt(train.weight_decay);
    kv["train.beta1"] = fmt(train.adam_beta1);
    kv["train.beta2"] = fmt(train.adam_beta2);
    kv["train.batch_size"] = std::to_string(train.batch_size);
    kv["train.max_epochs"] = std::to_string(train.max_epochs);
    kv["train.center_freeze_epoch"] = std::to_string(train.center_freeze_epoch);
    kv["train.patience"] = std::to_string(train.early_stop_patience);
    kv["train.min_delta"] = fmt(train.early_stop_min_delta);
    kv["train.clip_norm"] = fmt(train.clip_norm);
    kv["augment.enabled"] = augment.enabled ? "true" : "false";
    kv["augment.jitter"] = fmt(augment.jitter_ratio);
    kv["augment.scale"] = fmt(augment.scale_ratio);
    kv["detect.p_min"] = fmt(p_min);
    kv["detect.p_max"] = fmt(p_max);
    kv["detect.p_step"] = fmt(p_step);
    kv["detect.max_score"] = max_score_mode ? "true" : "false";
    kv["run.seed"] = std::to_string(seed);
    kv["run.out"] = out_dir;

    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

void RunConfig::validate() const {
    require(data_source == "synth" || data_source == "csv",
            "config: data.source must be synth or csv");
    if (data_source == "csv") require(!data_files.empty(), "config: data.files is empty");
    if (data_source == "synth")
        require(synth_kind == "suite" || synth_kind == "sine" || synth_kind == "ar1" ||
                    synth_kind == "mixture",
                "config: synth.kind must be suite, sine, ar1, or mixture");
    model.validate();
    objective.validate();
    train.validate();
    augment.validate();
    if (!max_score_mode)
        require(p_min > 0.0 && p_max >= p_min && p_step > 0.0, "config: bad detect p grid");
}

std::vector<TimeSeriesObject> load_objects(const RunConfig& cfg) {
    std::vector<TimeSeriesObject> objects;
    if (cfg.data_source == "csv") {
        CsvSchema schema;
        schema.value_columns = cfg.value_columns;
        schema.label_column = cfg.label_column;
        schema.train_end = cfg.train_end;
        schema.train_fraction = cfg.train_fraction;
        for (const std::string& f : cfg.data_files) {
            TimeSeriesObject obj = load_csv(f, schema);
            obj.id = fs::path(f).stem().string();
            objects.push_back(std::move(obj));
        }
        return objects;
    }
    if (cfg.synth_kind == "suite")
        return standard_suite(cfg.model.window_length, cfg.synth_train_windows,
                              cfg.synth_anomaly_rate, cfg.seed);
    BaseSignal base = BaseSignal::Sine;
    if (cfg.synth_kind == "ar1") base = BaseSignal::Ar1;
    else if (cfg.synth_kind == "mixture") base = BaseSignal::Mixture;
    objects.push_back(generate(suite_object_spec(cfg.synth_kind, base, cfg.model.window_length,
                                                 cfg.synth_train_windows, cfg.synth_anomaly_rate,
                                                 cfg.seed)));
    return objects;
}

RunOutcome run_pipeline(const RunConfig& cfg, const std::vector<TimeSeriesObject>& objects) {
    cfg.validate();
    require(!objects.empty(), "run: no objects");

    RunOutcome outcome;
    std::vector<MetricCounts> pw_all, pa_all, rpa_all;
    for (const TimeSeriesObject& obj : objects) {
        ObjectOutcome oo;
        oo.id = obj.id;
        oo.trained = train({obj}, cfg.model, cfg.objective, cfg.train, cfg.augment);

        const NormStats& stats = oo.trained.norm_stats.front().stats;
        const TimeSeriesObject normed = normalize(obj, stats);
        const WindowBatch test_windows =
            make_windows(normed, cfg.model.window_length, Split::Test);
        CocaNetwork net(cfg.model, oo.trained.params, oo.trained.buffers);
        oo.scores = cfg.objective.variant == Variant::CocaVi
                        ? score_dataset_view(net, oo.trained.center, test_windows)
                        : score_dataset(net, oo.trained.center, test_windows);
        oo.spans = test_windows.spans;
        oo.covered = covered_labels(obj, test_windows);

        double tau = 0.0;
        double selected_p = -1.0;
        if (cfg.max_score_mode) {
            tau = max_score_threshold(oo.scores);
        } else {
            const ThresholdChoice choice = select_threshold(
                oo.scores, oo.spans, oo.covered, make_p_grid(cfg.p_min, cfg.p_max, cfg.p_step));
            tau = choice.tau;
            selected_p = choice.p;
        }
        oo.detection = classify(oo.scores, tau, oo.spans);
        oo.detection.selected_rate = selected_p;

        oo.pw = pw_counts(oo.covered, oo.detection.point_predictions);
        oo.pa = pa_counts(oo.covered, oo.detection.point_predictions);
        oo.rpa = rpa_counts(oo.covered, oo.detection.point_predictions);
        oo.collapsed = collapse_probe(oo.trained.history, cfg.objective.gamma).collapsed;

        pw_all.push_back(oo.pw);
        pa_all.push_back(oo.pa);
        rpa_all.push_back(oo.rpa);
        outcome.objects.push_back(std::move(oo));
    }
    outcome.agg_pw = aggregate(pw_all);
    outcome.agg_pa = aggregate(pa_all);
    outcome.agg_rpa = aggregate(rpa_all);
    outcome.rpa_f1 = f1(outcome.agg_rpa);
    return outcome;
}

namespace {

ordered_json counts_json(const MetricCounts& c) {
    return ordered_json{{"protocol", protocol_name(c.protocol)},
                        {"tp", c.tp},
                        {"fp", c.fp},
                        {"fn", c.fn},
                        {"precision", precision(c)},
                        {"recall", recall(c)},
                        {"f1", f1(c)}};
}

void write_history_log(const std::string& path, const ObjectOutcome& oo) {
    std::ofstream out(path);
    ensure(out.good(), "run: cannot write '" + path + "'");
    char hex[32];
    for (const EpochRecord& r : oo.trained.history.records) {
        std::snprintf(hex, sizeof hex, "%016llx",
                      static_cast<unsigned long long>(r.center_hash));
        ordered_json line{{"epoch", r.epoch},
                          {"loss", r.loss},
                          {"invariance", r.invariance},
                          {"variance_q", r.variance_q},
                          {"variance_q_prime", r.variance_q_prime},
                          {"sim_q_ce", r.sim_q_ce},
                          {"sim_qp_ce", r.sim_qp_ce},
                          {"sim_q_qp", r.sim_q_qp},
                          {"proj_std", r.proj_std},
                          {"center_hash", hex}};
        out << line.dump() << "\n";
    }
    ordered_json summary{{"summary",
                          ordered_json{{"best_epoch", oo.trained.history.best_epoch},
                                       {"best_loss", oo.trained.history.best_loss},
                                       {"early_stopped", oo.trained.history.early_stopped},
                                       {"collapsed", oo.collapsed},
                                       {"threshold", oo.detection.threshold},
                                       {"selected_rate", oo.detection.selected_rate}}}};
    out << summary.dump() << "\n";
}

void write_object_artifacts(const fs::path& dir, const RunConfig& cfg, const ObjectOutcome& oo) {
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "scores.csv");
        ensure(out.good(), "run: cannot write scores.csv");
        write_scores_csv(out, oo.scores, oo.detection, oo.spans);
    }
    write_history_log((dir / "history.log").string(), oo);
    Checkpoint ckpt{cfg.model, oo.trained.params, oo.trained.buffers, oo.trained.center,
                    oo.trained.norm_stats};
    save_checkpoint((dir / "checkpoint.bin").string(), ckpt);
    ordered_json card{{"object", oo.id},
                      {"pw", counts_json(oo.pw)},
                      {"pa", counts_json(oo.pa)},
                      {"rpa", counts_json(oo.rpa)}};
    std::ofstream out(dir / "scorecard.json");
    ensure(out.good(), "run: cannot write scorecard.json");
    out << card.dump(2) << "\n";
}

}  // namespace

std::string scorecard_json(const RunOutcome& outcome) {
    ordered_json objects = ordered_json::array();
    for (const ObjectOutcome& oo : outcome.objects)
        objects.push_back(ordered_json{{"object", oo.id},
                                       {"pw", counts_json(oo.pw)},
                                       {"pa", counts_json(oo.pa)},
                                       {"rpa", counts_json(oo.rpa)}});
    ordered_json card{{"objects", objects},
                      {"aggregate",
                       ordered_json{{"pw", counts_json(outcome.agg_pw)},
                                    {"pa", counts_json(outcome.agg_pa)},
                                    {"rpa", counts_json(outcome.agg_rpa)}}}};
    return card.dump(2);
}

int cmd_run(const RunConfig& cfg) {
    std::string stage = "config validation";
    try {
        cfg.validate();

        stage = "data loading";
        const std::vector<TimeSeriesObject> objects = load_objects(cfg);

        stage = "output directory";
        fs::create_directories(cfg.out_dir);
        {
            std::ofstream out(fs::path(cfg.out_dir) / "config.echo");
            ensure(out.good(), "run: cannot write config.echo");
            out << cfg.echo();
        }

        stage = "training/detection";
        const RunOutcome outcome = run_pipeline(cfg, objects);

        stage = "artifact writing";
        const fs::path root(cfg.out_dir);
        if (outcome.objects.size() == 1) {
            write_object_artifacts(root, cfg, outcome.objects.front());
        } else {
            for (const ObjectOutcome& oo : outcome.objects)
                write_object_artifacts(root / "objects" / sanitize(oo.id), cfg, oo);
        }
        {
            std::ofstream out(root / "scorecard.json");
            ensure(out.good(), "run: cannot write scorecard.json");
            out << scorecard_json(outcome) << "\n";
        }
        {
            ordered_json per_object = ordered_json::array();
            for (const ObjectOutcome& oo : outcome.objects)
                per_object.push_back(
                    ordered_json{{"object", oo.id},
                                 {"best_epoch", oo.trained.history.best_epoch},
                                 {"best_loss", oo.trained.history.best_loss},
                                 {"epochs", oo.trained.history.records.size()},
                                 {"collapsed", oo.collapsed},
                                 {"threshold", oo.detection.threshold},
                                 {"selected_rate", oo.detection.selected_rate}});
            ordered_json summary{{"seed", cfg.seed},
                                 {"variant", variant_name(cfg.objective.variant)},
                                 {"augment_enabled", cfg.augment.enabled},
                                 {"objects", per_object},
                                 {"aggregate_rpa_f1", outcome.rpa_f1}};
            std::ofstream out(root / "summary.json");
            ensure(out.good(), "run: cannot write summary.json");
            out << summary.dump(2) << "\n";
        }
        return 0;
    } catch (const std::exception& e) {
        throw std::runtime_error("run failed at stage '" + stage + "': " + e.what());
    }
}

namespace {

// Single-column extraction from a headered CSV.
std::vector<std::string> read_column(const std::string& path, const std::string& column,
                                     bool* found) {
    std::ifstream in(path);
    ensure(in.good(), "eval: cannot open '" + path + "'");
    std::string line;
    ensure(static_cast<bool>(std::getline(in, line)), "eval: '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string f;
        while (std::getline(ss, f, ',')) header.push_back(f);
    }
    int idx = -1;
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == column) idx = static_cast<int>(i);
    if (found) *found = idx >= 0;
    std::vector<std::string> cells;
    if (idx < 0) return cells;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string f;
        std::vector<std::string> fields;
        while (std::getline(ss, f, ',')) fields.push_back(f);
        ensure(static_cast<int>(fields.size()) > idx,
               "eval: '" + path + "' line " + std::to_string(line_no) + ": missing column");
        cells.push_back(fields[static_cast<std::size_t>(idx)]);
    }
    return cells;
}

Labels to_labels(const std::vector<std::string>& cells, const std::string& what) {
    Labels out;
    for (const std::string& c : cells) {
        ensure(c == "0" || c == "1", "eval: " + what + " values must be 0 or 1, got '" + c + "'");
        out.push_back(c == "1" ? 1 : 0);
    }
    return out;
}

}  // namespace

Scorecard cmd_eval(const std::string& labels_path, const std::string& preds_path,
                   Protocol protocol, std::optional<double> tau) {
    bool have_label = false;
    const Labels labels = to_labels(read_column(labels_path, "label", &have_label), "label");
    ensure(have_label, "eval: '" + labels_path + "' has no 'label' column");

    bool have_pred = false;
    Labels preds;
    const std::vector<std::string> pred_cells = read_column(preds_path, "pred", &have_pred);
    if (have_pred) {
        preds = to_labels(pred_cells, "pred");
    } else {
        bool have_score = false;
        const std::vector<std::string> score_cells =
            read_column(preds_path, "score", &have_score);
        ensure(have_score, "eval: '" + preds_path + "' has neither 'pred' nor 'score' column");
        require(tau.has_value(),
                "eval: a scores file needs a threshold (pass tau to classify scores)");
        for (const std::string& c : score_cells) {
            const double s = parse_double(c);
            preds.push_back(s > *tau ? 1 : 0);
        }
    }
    require(labels.size() == preds.size(), "eval: labels and predictions differ in length");

    MetricCounts counts;
    switch (protocol) {
        case Protocol::PW: counts = pw_counts(labels, preds); break;
        case Protocol::PA: counts = pa_counts(labels, preds); break;
        case Protocol::RPA: counts = rpa_counts(labels, preds); break;
    }
    return Scorecard{counts, precision(counts), recall(counts), f1(counts)};
}

int cmd_ablate(const RunConfig& cfg, const std::vector<std::string>& variants, int repeats,
               std::ostream& table) {
    require(!variants.empty(), "ablate: variant list is empty");
    require(repeats >= 1, "ablate: repeats must be >= 1");
    cfg.validate();

    // Shared data across variants and repeats; only the training seed moves.
    const std::vector<TimeSeriesObject> objects = load_objects(cfg);

    table << "variant,rpa_f1_mean,rpa_f1_std,repeats\n";
    for (const std::string& name : variants) {
        std::vector<double> f1s;
        for (int r = 0; r < repeats; ++r) {
            RunConfig run_cfg = cfg;
            apply_variant_name(run_cfg, name);
            run_cfg.train.seed = cfg.seed + static_cast<std::uint64_t>(r);
            const RunOutcome outcome = run_pipeline(run_cfg, objects);
            f1s.push_back(outcome.rpa_f1);
        }
        double mean = 0.0;
        for (double v : f1s) mean += v;
        mean /= static_cast<double>(f1s.size());
        double var = 0.0;
        for (double v : f1s) var += (v - mean) * (v - mean);
        var /= static_cast<double>(f1s.size());
        char row[128];
        std::snprintf(row, sizeof row, "%s,%.4f,%.4f,%d\n", lower(name).c_str(), mean,
                      std::sqrt(var), repeats);
        table << row;
    }
    return 0;
}

}  // namespace coca
