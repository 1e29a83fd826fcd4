#include "autotcl/data.hpp"

#include "autotcl/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace autotcl {

namespace fs = std::filesystem;

SeriesFormat parse_series_format(const std::string& name) {
    if (name == "ett_csv") return SeriesFormat::ett_csv;
    if (name == "uea_archive") return SeriesFormat::uea_archive;
    if (name == "generic_csv") return SeriesFormat::generic_csv;
    throw ValidationError("unknown series format '" + name + "'");
}

std::string to_string(SeriesFormat f) {
    switch (f) {
        case SeriesFormat::ett_csv: return "ett_csv";
        case SeriesFormat::uea_archive: return "uea_archive";
        case SeriesFormat::generic_csv: return "generic_csv";
    }
    return "?";
}

SplitName parse_split_name(const std::string& name) {
    if (name == "train") return SplitName::train;
    if (name == "valid") return SplitName::valid;
    if (name == "test") return SplitName::test;
    throw ValidationError("unknown split '" + name + "'");
}

std::size_t TimeSeriesDataset::num_instances() const {
    if (task == Task::classification && instance_length > 0) return rows() / instance_length;
    return 0;
}

IndexRange TimeSeriesDataset::range(SplitName s) const {
    switch (s) {
        case SplitName::train: return split.train;
        case SplitName::valid: return split.valid;
        case SplitName::test: return split.test;
    }
    return {};
}

IndexRange TimeSeriesDataset::instance_range(SplitName s) const {
    if (task != Task::classification || instance_length == 0)
        throw ValidationError("instance ranges exist only for classification datasets");
    const IndexRange r = range(s);
    return {r.begin / instance_length, r.end / instance_length};
}

Matrix TimeSeriesDataset::instance(std::size_t i) const {
    if (i >= num_instances()) throw ValidationError("instance index out of range");
    return values.middleRows(static_cast<Eigen::Index>(i * instance_length),
                             static_cast<Eigen::Index>(instance_length));
}

void TimeSeriesDataset::validate() const {
    const auto& [tr, va, te] = split;
    if (tr.begin > tr.end || va.begin > va.end || te.begin > te.end)
        throw ValidationError("split range with begin > end");
    if (tr.end > va.begin || va.end > te.begin) throw ValidationError("split ranges overlap or are unordered");
    if (te.end > rows()) throw ValidationError("split ranges exceed the series length");
    if (!timestamps.empty() && timestamps.size() != rows())
        throw ValidationError("timestamp count does not match row count");
    if (channel_std.size() > 0 && (channel_std.array() < kStdFloor).any())
        throw ValidationError("channel std below floor");
    if (task == Task::classification) {
        if (instance_length == 0 || rows() % instance_length != 0)
            throw ValidationError("classification rows are not a whole number of instances");
        if (labels.size() != num_instances()) throw ValidationError("label count differs from instance count");
    }
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool parse_double(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    if (cell.front() == '+') cell.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
    return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

double require_double(std::string_view cell, std::size_t line, std::size_t column) {
    double v = 0.0;
    if (cell.empty()) throw FormatError("missing value", line, column);
    if (!parse_double(cell, v)) throw FormatError("non-numeric cell '" + std::string(cell) + "'", line, column);
    return v;
}

std::int64_t parse_timestamp(std::string_view cell, std::size_t line) {
    std::tm tm{};
    std::istringstream in{std::string(cell)};
    in >> std::get_time(&tm, "%Y-%m-%d %H:%M:%S");
    if (in.fail()) {
        in.clear();
        in.str(std::string(cell));
        tm = {};
        in >> std::get_time(&tm, "%Y-%m-%d");
        if (in.fail()) throw FormatError("unparseable timestamp '" + std::string(cell) + "'", line, 1);
    }
    return static_cast<std::int64_t>(timegm(&tm));
}

std::ifstream open_or_throw(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows, std::size_t cols) {
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    return m;
}

TimeSeriesDataset load_ett_csv(const fs::path& path) {
    auto in = open_or_throw(path);
    TimeSeriesDataset ds;
    ds.name = path.stem().string();
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw FormatError("empty file", 1, 1);
    ++lineno;
    const auto header = split_commas(line);
    if (header.size() < 2) throw FormatError("expected a date column and at least one channel", 1, 1);
    for (std::size_t j = 1; j < header.size(); ++j) ds.channel_names.emplace_back(header[j]);
    const std::size_t f = header.size() - 1;

    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() != header.size())
            throw FormatError("expected " + std::to_string(header.size()) + " columns, found " +
                                  std::to_string(cells.size()),
                              lineno, std::min(cells.size(), header.size()) + 1);
        const auto ts = parse_timestamp(cells[0], lineno);
        if (!ds.timestamps.empty() && ts <= ds.timestamps.back())
            throw ValidationError("timestamps are not strictly increasing at line " + std::to_string(lineno));
        ds.timestamps.push_back(ts);
        std::vector<double> row(f);
        for (std::size_t j = 0; j < f; ++j) row[j] = require_double(cells[j + 1], lineno, j + 2);
        rows.push_back(std::move(row));
    }
    ds.values = to_matrix(rows, f);
    return ds;
}

TimeSeriesDataset load_generic_csv(const fs::path& path) {
    auto in = open_or_throw(path);
    TimeSeriesDataset ds;
    ds.name = path.stem().string();
    std::string line;
    std::size_t lineno = 0;
    std::size_t width = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        if (width == 0) {
            width = cells.size();
            double tmp = 0.0;
            const bool numeric = std::all_of(cells.begin(), cells.end(),
                                             [&](std::string_view c) { return parse_double(c, tmp); });
            if (!numeric) {
                for (auto c : cells) ds.channel_names.emplace_back(c);
                continue;
            }
        }
        if (cells.size() != width)
            throw FormatError("expected " + std::to_string(width) + " columns, found " + std::to_string(cells.size()),
                              lineno, std::min(cells.size(), width) + 1);
        std::vector<double> row(width);
        for (std::size_t j = 0; j < width; ++j) row[j] = require_double(cells[j], lineno, j + 1);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw FormatError("no data rows", lineno, 1);
    if (ds.channel_names.empty())
        for (std::size_t j = 0; j < width; ++j) ds.channel_names.push_back("c" + std::to_string(j));
    ds.values = to_matrix(rows, width);
    return ds;
}

struct Instances {
    std::vector<Matrix> series;
    std::vector<std::string> labels;
};

Instances load_uea_split(const fs::path& dir) {
    auto in = open_or_throw(dir / "labels.txt");
    Instances out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() != 2) throw FormatError("expected instance_id,label", lineno, 1);
        const fs::path file = dir / "data" / (std::string(cells[0]) + ".txt");
        auto series_in = open_or_throw(file);
        std::vector<std::vector<double>> rows;
        std::string row_line;
        std::size_t row_no = 0;
        while (std::getline(series_in, row_line)) {
            ++row_no;
            if (trim(row_line).empty()) continue;
            std::istringstream tokens(row_line);
            std::string tok;
            std::vector<double> row;
            while (tokens >> tok) row.push_back(require_double(tok, row_no, row.size() + 1));
            if (!rows.empty() && row.size() != rows.front().size())
                throw FormatError("ragged row in " + file.string(), row_no, row.size());
            rows.push_back(std::move(row));
        }
        if (rows.empty()) throw FormatError("empty instance file " + file.string(), 1, 1);
        out.series.push_back(to_matrix(rows, rows.front().size()));
        out.labels.emplace_back(cells[1]);
    }
    return out;
}

TimeSeriesDataset load_uea_archive(const fs::path& root) {
    const Instances train = load_uea_split(root / "train");
    const Instances test = load_uea_split(root / "test");
    if (train.series.empty() || test.series.empty()) throw ValidationError("archive has an empty split");
    const Eigen::Index t = train.series.front().rows();
    const Eigen::Index f = train.series.front().cols();
    TimeSeriesDataset ds;
    ds.name = root.filename().string();
    if (ds.name.empty()) ds.name = root.parent_path().filename().string();
    ds.task = Task::classification;
    ds.instance_length = static_cast<std::size_t>(t);
    const std::size_t n = train.series.size() + test.series.size();
    ds.values.resize(static_cast<Eigen::Index>(n) * t, f);

    std::map<std::string, int> codes;
    for (const auto* part : {&train, &test})
        for (const auto& l : part->labels) codes.emplace(l, 0);
    int next = 0;
    for (auto& [name, code] : codes) {
        code = next++;
        ds.label_names.push_back(name);
    }
    std::size_t i = 0;
    for (const auto* part : {&train, &test}) {
        for (std::size_t k = 0; k < part->series.size(); ++k, ++i) {
            const Matrix& s = part->series[k];
            if (s.rows() != t || s.cols() != f)
                throw ValidationError("instances must share length and channel count");
            ds.values.middleRows(static_cast<Eigen::Index>(i) * t, t) = s;
            ds.labels.push_back(codes.at(part->labels[k]));
        }
    }
    for (Eigen::Index j = 0; j < f; ++j) ds.channel_names.push_back("c" + std::to_string(j));
    const std::size_t train_rows = train.series.size() * static_cast<std::size_t>(t);
    ds.split = {{0, train_rows}, {train_rows, train_rows}, {train_rows, ds.rows()}};
    ds.validate();
    return ds;
}

}  // namespace

TimeSeriesDataset load_series(const fs::path& path, SeriesFormat format) {
    if (!fs::exists(path)) throw IoError("no such file or directory: " + path.string());
    // Series too short for the default ratios keep every row in the training range;
    // split_forecasting itself still rejects such ratios when called explicitly.
    const auto default_split = [](TimeSeriesDataset ds) {
        const std::size_t n = ds.rows();
        const auto take = [n](double r) { return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9)); };
        if (take(kTrainRatio) == 0 || take(kValidRatio) == 0 || take(kTrainRatio) + take(kValidRatio) >= n) {
            ds.split = {{0, n}, {n, n}, {n, n}};
            return ds;
        }
        return split_forecasting(std::move(ds), kTrainRatio, kValidRatio, kTestRatio);
    };
    switch (format) {
        case SeriesFormat::ett_csv:
            return default_split(load_ett_csv(path));
        case SeriesFormat::generic_csv:
            return default_split(load_generic_csv(path));
        case SeriesFormat::uea_archive:
            return load_uea_archive(path);
    }
    throw ValidationError("unsupported format");
}

TimeSeriesDataset split_forecasting(TimeSeriesDataset ds, double r_train, double r_valid, double r_test) {
    if (r_train <= 0 || r_valid <= 0 || r_test <= 0) throw ValidationError("split ratios must be positive");
    if (std::abs(r_train + r_valid + r_test - 1.0) > 1e-9) throw ValidationError("split ratios must sum to 1");
    const std::size_t n = ds.rows();
    const auto take = [n](double r) {
        return static_cast<std::size_t>(std::floor(static_cast<double>(n) * r + 1e-9));
    };
    const std::size_t n_train = take(r_train);
    const std::size_t n_valid = take(r_valid);
    if (n_train == 0 || n_valid == 0 || n_train + n_valid >= n)
        throw ValidationError("split of " + std::to_string(n) + " rows leaves an empty range");
    ds.split = {{0, n_train}, {n_train, n_train + n_valid}, {n_train + n_valid, n}};
    return ds;
}

TimeSeriesDataset standardize(TimeSeriesDataset ds) {
    const IndexRange tr = ds.split.train;
    if (tr.size() == 0) throw ValidationError("cannot standardize with an empty training split");
    const auto train = ds.values.middleRows(static_cast<Eigen::Index>(tr.begin), static_cast<Eigen::Index>(tr.size()));
    ds.channel_mean = train.colwise().mean().transpose();
    ds.channel_std.resize(ds.values.cols());
    for (Eigen::Index j = 0; j < ds.values.cols(); ++j) {
        const double var = (train.col(j).array() - ds.channel_mean(j)).square().mean();
        ds.channel_std(j) = std::max(std::sqrt(var), kStdFloor);
    }
    ds.values = (ds.values.rowwise() - ds.channel_mean.transpose()).array().rowwise() /
                ds.channel_std.transpose().array();
    return ds;
}

Matrix inverse_standardize(const TimeSeriesDataset& ds, const Matrix& values,
                           const std::vector<std::size_t>& channels) {
    if (!ds.standardized()) throw ValidationError("dataset is not standardized");
    std::vector<std::size_t> idx = channels;
    if (idx.empty())
        for (std::size_t j = 0; j < ds.channels(); ++j) idx.push_back(j);
    if (static_cast<std::size_t>(values.cols()) != idx.size())
        throw ValidationError("column count does not match the channel list");
    Matrix out = values;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        const auto j = static_cast<Eigen::Index>(idx[k]);
        out.col(static_cast<Eigen::Index>(k)) = values.col(static_cast<Eigen::Index>(k)).array() * ds.channel_std(j) +
                                                 ds.channel_mean(j);
    }
    return out;
}

TimeSeriesDataset select_channels(TimeSeriesDataset ds, const std::vector<std::size_t>& channels) {
    if (channels.empty()) throw ValidationError("no channels selected");
    Matrix values(ds.values.rows(), static_cast<Eigen::Index>(channels.size()));
    std::vector<std::string> names;
    Vector mean(static_cast<Eigen::Index>(channels.size()));
    Vector std(static_cast<Eigen::Index>(channels.size()));
    for (std::size_t k = 0; k < channels.size(); ++k) {
        if (channels[k] >= ds.channels()) throw ValidationError("channel index out of range");
        const auto j = static_cast<Eigen::Index>(channels[k]);
        values.col(static_cast<Eigen::Index>(k)) = ds.values.col(j);
        if (j < static_cast<Eigen::Index>(ds.channel_names.size())) names.push_back(ds.channel_names[j]);
        if (ds.standardized()) {
            mean(static_cast<Eigen::Index>(k)) = ds.channel_mean(j);
            std(static_cast<Eigen::Index>(k)) = ds.channel_std(j);
        }
    }
    ds.values = std::move(values);
    ds.channel_names = std::move(names);
    if (ds.standardized()) {
        ds.channel_mean = mean;
        ds.channel_std = std;
    }
    return ds;
}

std::vector<std::size_t> window_starts(std::size_t split_length, std::size_t length, std::size_t stride) {
    if (stride == 0) throw ValidationError("stride must be >= 1");
    if (length == 0 || length > split_length)
        throw ValidationError("window length " + std::to_string(length) + " does not fit a split of length " +
                              std::to_string(split_length));
    std::vector<std::size_t> starts;
    for (std::size_t s = 0; s + length <= split_length; s += stride) starts.push_back(s);
    return starts;
}

WindowBatch gather_windows(const Matrix& values, const std::vector<std::size_t>& starts, std::size_t length,
                           std::size_t origin_offset) {
    WindowBatch batch;
    batch.length = static_cast<int>(length);
    const auto t = static_cast<Eigen::Index>(length);
    batch.windows.resize(static_cast<Eigen::Index>(starts.size()) * t, values.cols());
    for (std::size_t b = 0; b < starts.size(); ++b) {
        batch.windows.middleRows(static_cast<Eigen::Index>(b) * t, t) =
            values.middleRows(static_cast<Eigen::Index>(starts[b]), t);
        batch.origin_indices.push_back(starts[b] - origin_offset);
    }
    return batch;
}

std::vector<WindowBatch> make_windows(const TimeSeriesDataset& ds, std::size_t length, std::size_t stride,
                                      SplitName split, std::size_t batch_size) {
    if (batch_size == 0) throw ValidationError("batch size must be >= 1");
    const IndexRange r = ds.range(split);
    const auto starts = window_starts(r.size(), length, stride);
    std::vector<WindowBatch> out;
    for (std::size_t i = 0; i < starts.size(); i += batch_size) {
        std::vector<std::size_t> abs;
        for (std::size_t k = i; k < std::min(starts.size(), i + batch_size); ++k) abs.push_back(r.begin + starts[k]);
        out.push_back(gather_windows(ds.values, abs, length, r.begin));
    }
    return out;
}

}  // namespace autotcl
