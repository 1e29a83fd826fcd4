#pragma once

// Linear probes on frozen representations: ridge regression for forecasting,
// an RBF-kernel SVM for classification, and rank aggregation across methods.

#include "autotcl/data.hpp"
#include "autotcl/encoder.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace autotcl {

struct FeatureSet {
    Matrix features;                    // one row per admissible end timestamp
    std::vector<std::size_t> end_rows;  // absolute row index of each window's last timestamp
};

/// r_t for every window of length `window` that ends inside the split
/// (split length S gives S - window + 1 rows). Eta is disabled.
FeatureSet extract_features(const Encoder& encoder, const TimeSeriesDataset& ds, SplitName split, int window,
                            std::size_t batch_windows = 128);

/// Pooled (max over time) embeddings of every instance in the split.
Matrix encode_instances(const Encoder& encoder, const TimeSeriesDataset& ds, SplitName split,
                        std::size_t batch_instances = 64);

/// Rows of `features` whose next `horizon` values stay inside the split,
/// paired with those values (channels flattened time-major).
struct ProbeData {
    Matrix x;
    Matrix y;
};

ProbeData forecast_targets(const TimeSeriesDataset& ds, const FeatureSet& fs, SplitName split, int horizon,
                           const std::vector<std::size_t>& target_channels);

inline constexpr std::array<double, 5> kRidgeGrid{0.01, 0.1, 1.0, 10.0, 100.0};

struct RidgeModel {
    Matrix weights;  // D x K
    Eigen::RowVectorXd bias;
    double l2 = 0.0;

    Matrix predict(const Matrix& x) const;
};

/// Closed-form ridge with an unpenalized bias (solved on centered data).
/// A singular system at l2 = 0 is re-solved at the smallest grid value.
RidgeModel fit_ridge(const Matrix& x, const Matrix& y, double l2);

/// Fits on train for every grid value and keeps the one with the lowest validation MSE.
RidgeModel fit_forecast_probe(const ProbeData& train, const ProbeData& valid);

struct ForecastResult {
    int horizon = 0;
    double mse = 0.0;
    double mae = 0.0;
    std::size_t n_test = 0;
    std::string setting;
    double l2 = 0.0;
};

double mean_squared_error(const Matrix& pred, const Matrix& target);
double mean_absolute_error(const Matrix& pred, const Matrix& target);

ForecastResult evaluate_forecast(const RidgeModel& model, const ProbeData& test, int horizon,
                                 const std::string& setting);

/// Full probe: features for all splits once, then one ridge model per horizon.
std::vector<ForecastResult> forecast_probe(const Encoder& encoder, const TimeSeriesDataset& ds,
                                           const std::vector<int>& horizons, const std::string& setting,
                                           int window, const std::vector<std::size_t>& target_channels);

/// Horizon grid used for a dataset ({24,48,168,336,720} hourly, {24,48,96,288,672} for ETTm1).
std::vector<int> default_horizons(const std::string& dataset_name);

// --- classification ---------------------------------------------------------

class RbfSvm {
public:
    void fit(const Matrix& x, const std::vector<int>& labels, double c, double gamma);
    std::vector<int> predict(const Matrix& x) const;

private:
    struct Binary {
        int positive = 0;
        int negative = 0;
        std::vector<std::size_t> support;  // indices into the training set
        std::vector<double> coef;          // alpha_i * y_i
        double rho = 0.0;
    };

    double kernel(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) const;

    Matrix x_;
    double gamma_ = 1.0;
    std::vector<int> classes_;
    std::vector<Binary> machines_;
};

/// 1 / (2 * median pairwise squared distance).
double median_heuristic_gamma(const Matrix& x);

inline constexpr std::array<double, 4> kSvmPenaltyGrid{0.1, 1.0, 10.0, 100.0};

struct ClassifyResult {
    std::string dataset;
    double accuracy = 0.0;
    std::size_t n_test = 0;
    double c = 0.0;
};

ClassifyResult evaluate_classification(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x,
                                       const std::vector<int>& test_y, const std::string& dataset);

/// Encoder-based convenience wrapper over the train/test instance splits.
ClassifyResult evaluate_classification(const Encoder& encoder, const TimeSeriesDataset& ds);

struct RankEntry {
    std::string method;
    std::string dataset;
    double accuracy = 0.0;
};

struct RankSummary {
    double mean_accuracy = 0.0;
    double mean_rank = 0.0;
    int datasets = 0;
};

/// Rank 1 = best accuracy per dataset; ties share the mean of their ranks.
std::map<std::string, RankSummary> aggregate_ranks(const std::vector<RankEntry>& entries);

}  // namespace autotcl
