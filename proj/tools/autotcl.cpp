// autotcl command-line tool.
//
// Exit codes: 0 success, 1 usage or unexpected failure, 2 configuration error,
// 3 data error (missing/malformed files, invalid inputs), 4 numerical abort.

#include "autotcl/errors.hpp"
#include "autotcl/pipeline.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace autotcl;

namespace {

std::vector<int> parse_horizons(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            const int h = std::stoi(item, &used);
            if (used != item.size() || h < 1) throw std::invalid_argument(item);
            out.push_back(h);
        } catch (const std::exception&) {
            throw ValidationError("bad horizon '" + item + "' in --horizons");
        }
    }
    if (out.empty()) throw ValidationError("--horizons is empty");
    return out;
}

std::string setting_name(const std::string& flag) {
    if (flag == "uni" || flag == "univariate") return "univariate";
    if (flag == "multi" || flag == "multivariate") return "multivariate";
    throw ConfigError("setting", "expected uni or multi, got '" + flag + "'");
}

/// Dataset for an existing run, optionally overridden by --data / --setting.
TimeSeriesDataset run_dataset(const Trainer& trainer, const std::string& data_override, const std::string& setting) {
    DataConfig data = trainer.config().data;
    if (!data_override.empty()) data.path = data_override;
    if (!setting.empty()) data.setting = setting_name(setting);
    TimeSeriesDataset ds = prepare_dataset(data);
    if (static_cast<int>(ds.channels()) != trainer.in_channels())
        throw ValidationError("the run's encoder takes " + std::to_string(trainer.in_channels()) +
                              " channel(s) but the " + data.setting + " dataset has " + std::to_string(ds.channels()));
    return ds;
}

int cmd_train(const std::string& config_path, const std::optional<std::uint64_t>& seed, const std::string& out, bool force) {
    ExperimentConfig cfg = load_config(config_path);
    if (seed) cfg.seed = *seed;
    const TrainedRun run = train_run(cfg, out, force);
    std::cout << "run " << run.manifest.run_id << " (" << run.history.epochs.size() << " epochs) -> " << out << '\n';
    if (!run.history.epochs.empty())
        std::cout << "final l_con " << run.history.epochs.back().mean.l_con << '\n';
    return 0;
}

int cmd_eval(const std::string& run_dir, const std::string& data, const std::string& horizons, const std::string& setting,
             const std::string& out, bool classify) {
    const auto trainer = load_run(run_dir);
    const TimeSeriesDataset ds = run_dataset(*trainer, data, setting);
    if (classify != (ds.task == Task::classification))
        throw ValidationError(classify ? "eval-classify needs a classification dataset"
                                       : "eval-forecast needs a forecasting dataset");
    const ResultTag tag{to_string(trainer->config().variant), ds.name, trainer->config().seed,
                        config_hash(trainer->config())};
    const fs::path csv = out.empty() ? fs::path(run_dir) / (classify ? "classify.csv" : "forecast.csv") : fs::path(out);
    const std::vector<int> hs = horizons.empty() ? default_horizons(ds.name) : parse_horizons(horizons);
    evaluate_run(*trainer, ds, tag, hs, csv);
    std::ifstream in(csv);
    std::cout << in.rdbuf();
    return 0;
}

int cmd_ablate(const std::string& config_path, const std::string& variant, const std::optional<std::uint64_t>& seed,
               const std::string& out, const std::string& horizons, bool force) {
    ExperimentConfig cfg = load_config(config_path);
    cfg.variant = parse_variant(variant);
    if (seed) cfg.seed = *seed;
    cfg.validate();
    train_run(cfg, out, force);
    const auto trainer = load_run(out);
    const TimeSeriesDataset ds = prepare_dataset(cfg.data);
    const ResultTag tag{variant, ds.name, cfg.seed, config_hash(cfg)};
    const std::vector<int> hs = horizons.empty() ? default_horizons(ds.name) : parse_horizons(horizons);
    const fs::path csv = evaluate_run(*trainer, ds, tag, hs, fs::path(out) / "results.csv");
    std::ifstream in(csv);
    std::cout << in.rdbuf();
    return 0;
}

int cmd_export_masks(const std::string& run_dir, const std::string& data, std::size_t n, const std::string& out) {
    const auto trainer = load_run(run_dir);
    const TimeSeriesDataset ds = run_dataset(*trainer, data, "");
    const fs::path dir = out.empty() ? fs::path(run_dir) / "masks" : fs::path(out);
    for (const auto& f : export_masks(*trainer, ds, n, dir)) std::cout << f.string() << '\n';
    return 0;
}

int cmd_plot_losses(const std::string& run_dir, const std::string& out) {
    const EpochLosses losses = read_epoch_losses(fs::path(run_dir) / "train_log.jsonl");
    const fs::path svg = out.empty() ? fs::path(run_dir) / "plots" / "losses.svg" : fs::path(out);
    write_text_file(svg, loss_plot_svg(losses));
    std::cout << svg.string() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AutoTCL: contrastive time series representations with learned augmentations"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out;
    std::string run_dir;
    std::string data;
    std::string horizons;
    std::string setting;
    std::string variant;
    std::uint64_t seed_value = 0;
    std::size_t n = 1;
    bool force = false;

    auto* train = app.add_subcommand("train", "Train an encoder and augmentation network");
    train->add_option("config", config_path, "JSON config file")->required();
    auto* train_seed = train->add_option("--seed", seed_value, "Override the config seed");
    train->add_option("--out", out, "Run directory")->required();
    train->add_flag("--force", force, "Overwrite an existing run directory");

    auto* eval_f = app.add_subcommand("eval-forecast", "Ridge forecasting probe on a trained run");
    eval_f->add_option("run_dir", run_dir, "Run directory")->required();
    eval_f->add_option("--data", data, "Dataset path (defaults to the run's)");
    eval_f->add_option("--horizons", horizons, "Comma-separated horizons");
    eval_f->add_option("--setting", setting, "uni or multi (defaults to the run's)");
    eval_f->add_option("--out", out, "Results CSV (default <run_dir>/forecast.csv)");

    auto* eval_c = app.add_subcommand("eval-classify", "RBF-SVM classification probe on a trained run");
    eval_c->add_option("run_dir", run_dir, "Run directory")->required();
    eval_c->add_option("--data", data, "Dataset path (defaults to the run's)");
    eval_c->add_option("--out", out, "Results CSV (default <run_dir>/classify.csv)");

    auto* ablate = app.add_subcommand("ablate", "Train and evaluate one ablation variant");
    ablate->add_option("config", config_path, "JSON config file")->required();
    ablate->add_option("--variant", variant, "autotcl, wo_h, wo_g, wo_dv, wo_aug, cutout, jitter, random_aug, adversarial")
        ->required();
    auto* ablate_seed = ablate->add_option("--seed", seed_value, "Override the config seed");
    ablate->add_option("--out", out, "Run directory")->required();
    ablate->add_option("--horizons", horizons, "Comma-separated horizons (forecasting data)");
    ablate->add_flag("--force", force, "Overwrite an existing run directory");

    auto* masks = app.add_subcommand("export-masks", "Write eval-mode masks of test instances as CSV");
    masks->add_option("run_dir", run_dir, "Run directory")->required();
    masks->add_option("--data", data, "Dataset path (defaults to the run's)");
    masks->add_option("--n", n, "Number of instances")->check(CLI::PositiveNumber);
    masks->add_option("--out", out, "Output directory (default <run_dir>/masks)");

    auto* plot = app.add_subcommand("plot-losses", "SVG plot of per-epoch augmentation and contrastive losses");
    plot->add_option("run_dir", run_dir, "Run directory")->required();
    plot->add_option("--out", out, "SVG path (default <run_dir>/plots/losses.svg)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    const auto seed_of = [&](CLI::Option* opt) -> std::optional<std::uint64_t> {
        return opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
    };

    try {
        if (*train) return cmd_train(config_path, seed_of(train_seed), out, force);
        if (*eval_f) return cmd_eval(run_dir, data, horizons, setting, out, false);
        if (*eval_c) return cmd_eval(run_dir, data, "", "", out, true);
        if (*ablate) return cmd_ablate(config_path, variant, seed_of(ablate_seed), out, horizons, force);
        if (*masks) return cmd_export_masks(run_dir, data, n, out);
        if (*plot) return cmd_plot_losses(run_dir, out);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const FormatError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const ValidationError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const IoError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const CheckpointError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const InvariantError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const DomainError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
