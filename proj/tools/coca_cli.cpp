// Command-line front end for the COCA anomaly-detection pipeline:
//   generate  synthesize a labeled series and write it as CSV
//   run       train, detect, evaluate, and write run artifacts
//   eval      score a predictions/scores file against labels
//   ablate    compare loss variants on shared data

#include "coca/run.hpp"
#include "coca/synth.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

coca::RunConfig load_run_config(const std::string& config_path, const std::string& variant,
                                std::optional<long> seed, const std::string& out_dir) {
    coca::RunConfig cfg;
    if (!config_path.empty()) cfg = coca::RunConfig::from_file(config_path);
    if (!variant.empty()) coca::apply_variant_name(cfg, variant);
    if (seed) cfg.apply("run.seed", std::to_string(*seed));
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"COCA: contrastive one-class anomaly detection for time series"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic labeled series as CSV");
    std::string gen_kind = "sine";
    int gen_window = 16, gen_train_windows = 100;
    double gen_rate = 0.02;
    long gen_seed = 1;
    std::string gen_out = "synth.csv";
    gen->add_option("--kind", gen_kind, "sine | ar1 | mixture");
    gen->add_option("--window", gen_window, "window length the series is sized for");
    gen->add_option("--train-windows", gen_train_windows, "training windows before the split");
    gen->add_option("--anomaly-rate", gen_rate, "fraction of test points made anomalous");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--out", gen_out, "output CSV path");

    // run
    auto* run = app.add_subcommand("run", "train, detect, and evaluate one configuration");
    std::string run_config, run_variant, run_out;
    std::optional<long> run_seed;
    run->add_option("--config", run_config, "key = value config file");
    run->add_option("--variant", run_variant, "full | NoAug | NoOC | NoCL | NoVar | COCA-vi");
    run->add_option("--seed", run_seed, "run seed (data + training)");
    run->add_option("--out", run_out, "output directory");

    // eval
    auto* eval = app.add_subcommand("eval", "metrics for an external predictions file");
    std::string eval_labels, eval_preds, eval_protocol = "rpa";
    std::optional<double> eval_tau;
    eval->add_option("--labels", eval_labels, "CSV with a 'label' column")->required();
    eval->add_option("--preds", eval_preds, "CSV with a 'pred' or 'score' column")->required();
    eval->add_option("--protocol", eval_protocol, "pw | pa | rpa");
    eval->add_option("--tau", eval_tau, "threshold when --preds holds scores");

    // ablate
    auto* ablate = app.add_subcommand("ablate", "compare variants on shared data");
    std::string ab_config, ab_variants = "full,novar", ab_out;
    int ab_repeats = 3;
    std::optional<long> ab_seed;
    ablate->add_option("--config", ab_config, "key = value config file");
    ablate->add_option("--variants", ab_variants, "comma-separated variant names");
    ablate->add_option("--repeats", ab_repeats, "training repeats per variant");
    ablate->add_option("--seed", ab_seed, "base seed");
    ablate->add_option("--out", ab_out, "output directory for ablate.csv");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            coca::BaseSignal base = coca::BaseSignal::Sine;
            if (gen_kind == "ar1") base = coca::BaseSignal::Ar1;
            else if (gen_kind == "mixture") base = coca::BaseSignal::Mixture;
            else if (gen_kind != "sine") throw std::invalid_argument("generate: unknown --kind");
            const coca::SynthSpec spec = coca::suite_object_spec(
                gen_kind, base, gen_window, gen_train_windows, gen_rate,
                static_cast<std::uint64_t>(gen_seed));
            coca::save_csv(gen_out, coca::generate(spec));
            std::cout << "wrote " << gen_out << " (train_end " << spec.train_fraction * spec.length
                      << " of " << spec.length << " points)\n";
            return 0;
        }
        if (run->parsed()) {
            return coca::cmd_run(load_run_config(run_config, run_variant, run_seed, run_out));
        }
        if (eval->parsed()) {
            const coca::Scorecard card = coca::cmd_eval(
                eval_labels, eval_preds, coca::parse_protocol(eval_protocol), eval_tau);
            std::cout << "{\"protocol\": \"" << coca::protocol_name(card.counts.protocol)
                      << "\", \"tp\": " << card.counts.tp << ", \"fp\": " << card.counts.fp
                      << ", \"fn\": " << card.counts.fn << ", \"precision\": " << card.precision
                      << ", \"recall\": " << card.recall << ", \"f1\": " << card.f1 << "}\n";
            return 0;
        }
        if (ablate->parsed()) {
            coca::RunConfig cfg = load_run_config(ab_config, "", ab_seed, ab_out);
            std::vector<std::string> names;
            std::stringstream ss(ab_variants);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) names.push_back(item);
            }
            std::ostringstream table;
            const int rc = coca::cmd_ablate(cfg, names, ab_repeats, table);
            std::cout << table.str();
            if (!cfg.out_dir.empty()) {
                std::filesystem::create_directories(cfg.out_dir);
                std::ofstream out(std::filesystem::path(cfg.out_dir) / "ablate.csv");
                out << table.str();
            }
            return rc;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
