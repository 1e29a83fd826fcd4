#pragma once

// Alternating optimization of the encoder and the augmentation network.
// Every batch produces views, then (on epochs with epoch % M == 0) takes one
// augmentation step on L_aug, then one encoder step on L_con. Each network has
// its own Adam instance; neither step touches the other network's weights.

#include "autotcl/augment.hpp"
#include "autotcl/config.hpp"
#include "autotcl/data.hpp"
#include "autotcl/encoder.hpp"
#include "autotcl/errors.hpp"
#include "autotcl/nn.hpp"
#include "autotcl/objectives.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace autotcl {

inline constexpr int kCheckpointSchemaVersion = 1;

struct StepRecord {
    long long step = 0;
    int epoch = 0;
    LossReport losses;
    bool aug_updated = false;
    // Mask summaries of the batch (only when the augmentation network ran).
    std::optional<double> h_mean;
    std::optional<double> g_min;
    std::optional<double> g_max;
};

struct EpochRecord {
    int epoch = 0;
    LossReport mean;        // averages of the terms computed in this epoch
    bool aug_computed = false;
    int batches = 0;
    double seconds = 0.0;
};

struct TrainingHistory {
    std::vector<EpochRecord> epochs;
    std::vector<std::filesystem::path> checkpoints;
};

/// Raised when a loss turns non-finite; carries the last checkpoint written.
class TrainingAborted : public NumericalError {
public:
    TrainingAborted(const std::string& what, std::filesystem::path last_good)
        : NumericalError(what + (last_good.empty() ? std::string(" (no checkpoint written yet)")
                                                   : " (last good checkpoint: " + last_good.string() + ")")),
          last_good_(std::move(last_good)) {}

    const std::filesystem::path& last_good_checkpoint() const noexcept { return last_good_; }

private:
    std::filesystem::path last_good_;
};

struct TrainOptions {
    std::filesystem::path out_dir;                    // empty: no log or checkpoint files
    std::function<void(const StepRecord&)> on_step;   // called after each batch
    int stop_after_epoch = -1;                        // stop once this many epochs are done
};

/// Training windows: forecasting windows of length T from the training split,
/// or whole training instances for classification data.
struct TrainingWindows {
    int length = 0;
    Matrix values;  // source rows
    std::vector<std::size_t> starts;
};

TrainingWindows training_windows(const TimeSeriesDataset& ds, const ExperimentConfig& cfg);

/// Holds both networks, their optimizers and every named random stream.
/// Not movable: the optimizers keep pointers into the networks.
class Trainer {
public:
    Trainer(ExperimentConfig cfg, int in_channels);
    Trainer(const Trainer&) = delete;
    Trainer& operator=(const Trainer&) = delete;

    TrainingHistory train(const TimeSeriesDataset& ds, const TrainOptions& opts = {});
    TrainingHistory train(const TrainingWindows& windows, const TrainOptions& opts = {});

    /// One optimization step on a stacked batch of windows.
    StepRecord train_step(const Matrix& batch, int length);

    /// Called between the augmentation step and the encoder step of a batch.
    void set_aug_step_hook(std::function<void()> hook) { aug_step_hook_ = std::move(hook); }

    void save_checkpoint(const std::filesystem::path& path) const;
    static std::unique_ptr<Trainer> load_checkpoint(const std::filesystem::path& path);

    const ExperimentConfig& config() const { return cfg_; }
    int in_channels() const { return in_channels_; }
    int epoch() const { return epoch_; }
    long long step_count() const { return step_; }
    long long aug_updates() const { return aug_updates_; }
    long long encoder_updates() const { return enc_updates_; }

    Encoder& encoder() { return encoder_; }
    const Encoder& encoder() const { return encoder_; }
    AugmentationNetwork& augmenter() { return aug_; }
    const AugmentationNetwork& augmenter() const { return aug_; }

private:
    Matrix make_views(const Matrix& batch, int length, MaskPair* masks, AugTrace* trace);

    ExperimentConfig cfg_;
    int in_channels_;
    Encoder encoder_;
    AugmentationNetwork aug_;
    nn::Adam enc_opt_;
    nn::Adam aug_opt_;
    Rng rng_data_;
    Rng rng_eta_;
    Rng rng_concrete_;
    Rng rng_triplet_;
    int epoch_ = 0;
    long long step_ = 0;
    long long aug_updates_ = 0;
    long long enc_updates_ = 0;
    std::function<void()> aug_step_hook_;
    std::filesystem::path last_checkpoint_;  // most recent checkpoint written by train()
};

/// JSON-lines record: step, epoch and the loss terms computed in that step.
json step_to_json(const StepRecord& r);

}  // namespace autotcl
