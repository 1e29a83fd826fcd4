#pragma once

// Run-directory plumbing shared by the CLI and the Python bindings: dataset
// preparation, manifests, result files, mask export and loss plots.

#include "autotcl/config.hpp"
#include "autotcl/data.hpp"
#include "autotcl/eval.hpp"
#include "autotcl/trainer.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace autotcl {

/// Returns `path` if it exists, otherwise $AUTOTCL_DATA_DIR/path when that exists.
std::filesystem::path resolve_data_path(const std::string& path);

/// Loads, splits and standardizes; "univariate" keeps only the target (last) channel.
TimeSeriesDataset prepare_dataset(const DataConfig& data);

/// SHA-1 over the file bytes, or over every file of a directory tree in path order.
std::string dataset_fingerprint(const std::filesystem::path& path);

struct RunManifest {
    std::string run_id;
    json config;
    std::string config_hash;
    std::string dataset_path;
    std::string dataset_fingerprint;
    std::map<std::string, std::string> outputs;  // role -> path relative to the run directory
};

json to_json(const RunManifest& m);
RunManifest manifest_from_json(const json& j);

/// Creates `dir` for a fresh run. An existing non-empty directory is an error
/// unless `force`, in which case its contents are removed first.
void prepare_run_dir(const std::filesystem::path& dir, bool force);

struct TrainedRun {
    RunManifest manifest;
    TrainingHistory history;
};

/// Trains on cfg.data and writes config.json, manifest.json, history.json,
/// train_log.jsonl and checkpoints/ into `dir`.
TrainedRun train_run(const ExperimentConfig& cfg, const std::filesystem::path& dir, bool force);

RunManifest load_manifest(const std::filesystem::path& run_dir);
std::unique_ptr<Trainer> load_run(const std::filesystem::path& run_dir);

json history_to_json(const TrainingHistory& h);

// --- results files ---------------------------------------------------------

inline constexpr const char* kForecastCsvHeader = "method,dataset,setting,horizon,mse,mae,seed,config_hash";
inline constexpr const char* kClassifyCsvHeader = "method,dataset,accuracy,seed,config_hash";

struct ResultTag {
    std::string method;
    std::string dataset;
    std::uint64_t seed = 0;
    std::string config_hash;
};

/// One row per horizon plus an "avg" row with the mean MSE and MAE.
std::string forecast_csv(const ResultTag& tag, const std::vector<ForecastResult>& results);
std::string classify_csv(const ResultTag& tag, const ClassifyResult& result);

/// Side-car JSON recording split ratios, metric scale and the L0 normalization.
json results_metadata(const ExperimentConfig& cfg, const TimeSeriesDataset& ds);

void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Evaluates `trainer` on its own data (forecast or classify by task) and writes the CSV + metadata.
std::filesystem::path evaluate_run(const Trainer& trainer, const TimeSeriesDataset& ds, const ResultTag& tag,
                                   const std::vector<int>& horizons, const std::filesystem::path& csv_path);

// --- masks and plots -------------------------------------------------------

/// Eval-mode masks for the first `n` test instances (classification) or the
/// first `n` non-overlapping test windows of length T (forecasting).
/// Writes <out_dir>/masks_<i>.csv with columns t,x,pi,h,g,v_star.
std::vector<std::filesystem::path> export_masks(const Trainer& trainer, const TimeSeriesDataset& ds, std::size_t n,
                                                const std::filesystem::path& out_dir);

/// Mean length of maximal runs of ones in a {0,1} vector (0 when it has none).
double mean_run_length(const std::vector<double>& h);

struct EpochLosses {
    std::vector<int> aug_epochs;
    std::vector<double> l_aug;
    std::vector<int> con_epochs;
    std::vector<double> l_con;
};

/// Per-epoch means of l_aug and l_con from a JSON-lines training log.
EpochLosses read_epoch_losses(const std::filesystem::path& log_path);

/// Two stacked panels (augmentation loss, contrastive loss) against epoch.
std::string loss_plot_svg(const EpochLosses& losses);

}  // namespace autotcl
