#pragma once

#include "autotcl/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace autotcl {

enum class Task { forecasting, classification };
enum class SeriesFormat { ett_csv, uea_archive, generic_csv };
enum class SplitName { train, valid, test };

SeriesFormat parse_series_format(const std::string& name);
std::string to_string(SeriesFormat f);
SplitName parse_split_name(const std::string& name);

/// Half-open row range [begin, end).
struct IndexRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    std::size_t size() const { return end - begin; }
    bool contains(std::size_t i) const { return i >= begin && i < end; }
    bool operator==(const IndexRange&) const = default;
};

struct SplitRanges {
    IndexRange train;
    IndexRange valid;
    IndexRange test;
};

/// Floor applied to per-channel standard deviations.
inline constexpr double kStdFloor = 1e-8;

/// Default chronological split for forecasting data.
inline constexpr double kTrainRatio = 0.6;
inline constexpr double kValidRatio = 0.2;
inline constexpr double kTestRatio = 0.2;

struct TimeSeriesDataset {
    std::string name;
    Task task = Task::forecasting;
    Matrix values;                         // N_total x F, time-major
    std::vector<std::int64_t> timestamps;  // unix seconds, empty when absent
    std::vector<std::string> channel_names;
    Vector channel_mean;                   // filled by standardize()
    Vector channel_std;
    SplitRanges split;

    // Classification only: instances are stacked row blocks of equal length.
    std::size_t instance_length = 0;
    std::vector<int> labels;
    std::vector<std::string> label_names;

    std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
    std::size_t channels() const { return static_cast<std::size_t>(values.cols()); }
    bool standardized() const { return channel_std.size() > 0; }
    std::size_t num_instances() const;

    IndexRange range(SplitName s) const;
    /// Instance indices whose rows fall into the split (classification).
    IndexRange instance_range(SplitName s) const;
    Matrix instance(std::size_t i) const;

    /// Throws ValidationError when an invariant of the type does not hold.
    void validate() const;
};

/// A batch of equal-length windows stacked as (B*T) x F.
struct WindowBatch {
    int length = 0;
    Matrix windows;
    std::vector<std::size_t> origin_indices;  // start offsets inside the split

    std::size_t size() const { return origin_indices.size(); }
};

TimeSeriesDataset load_series(const std::filesystem::path& path, SeriesFormat format);

/// Contiguous chronological split: floor(N*r_train), floor(N*r_valid), remainder.
TimeSeriesDataset split_forecasting(TimeSeriesDataset ds, double r_train, double r_valid, double r_test);

/// z-scores every channel with statistics of the training split.
TimeSeriesDataset standardize(TimeSeriesDataset ds);

/// Maps standardized values of the given channels back to the raw scale.
Matrix inverse_standardize(const TimeSeriesDataset& ds, const Matrix& values,
                           const std::vector<std::size_t>& channels = {});

/// Keeps only the listed channels (statistics are subset accordingly).
TimeSeriesDataset select_channels(TimeSeriesDataset ds, const std::vector<std::size_t>& channels);

std::vector<std::size_t> window_starts(std::size_t split_length, std::size_t length, std::size_t stride);

/// Sliding windows over one split, grouped into consecutive batches.
std::vector<WindowBatch> make_windows(const TimeSeriesDataset& ds, std::size_t length,
                                      std::size_t stride, SplitName split,
                                      std::size_t batch_size = 8);

/// Stacks the rows of `starts` (absolute row offsets) into one window batch.
WindowBatch gather_windows(const Matrix& values, const std::vector<std::size_t>& starts,
                           std::size_t length, std::size_t origin_offset = 0);

}  // namespace autotcl
