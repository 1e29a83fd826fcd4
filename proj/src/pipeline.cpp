#include "autotcl/pipeline.hpp"

#include "autotcl/errors.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

namespace autotcl {

namespace fs = std::filesystem;

fs::path resolve_data_path(const std::string& path) {
    if (path.empty()) throw ConfigError("data.path", "no dataset path given");
    const fs::path p(path);
    if (fs::exists(p)) return p;
    if (const char* root = std::getenv("AUTOTCL_DATA_DIR"); root && *root && p.is_relative()) {
        const fs::path alt = fs::path(root) / p;
        if (fs::exists(alt)) return alt;
    }
    throw IoError("dataset not found: " + path + " (also looked under $AUTOTCL_DATA_DIR)");
}

TimeSeriesDataset prepare_dataset(const DataConfig& data) {
    TimeSeriesDataset ds = standardize(load_series(resolve_data_path(data.path), parse_series_format(data.format)));
    if (ds.task == Task::forecasting && data.setting == "univariate") ds = select_channels(std::move(ds), {ds.channels() - 1});
    return ds;
}

namespace {

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

}  // namespace

std::string dataset_fingerprint(const fs::path& path) {
    if (!fs::is_directory(path)) return sha1_hex(read_bytes(path));
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string all;
    for (const auto& f : files) {
        all += fs::relative(f, path).generic_string();
        all.push_back('\0');
        all += sha1_hex(read_bytes(f));
    }
    return sha1_hex(all);
}

json to_json(const RunManifest& m) {
    return {{"run_id", m.run_id},
            {"config", m.config},
            {"config_hash", m.config_hash},
            {"dataset_path", m.dataset_path},
            {"dataset_fingerprint", m.dataset_fingerprint},
            {"outputs", m.outputs}};
}

RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.run_id = j.at("run_id").get<std::string>();
    m.config = j.at("config");
    m.config_hash = j.at("config_hash").get<std::string>();
    m.dataset_path = j.at("dataset_path").get<std::string>();
    m.dataset_fingerprint = j.at("dataset_fingerprint").get<std::string>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    return m;
}

void prepare_run_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir) && !fs::is_empty(dir)) {
        if (!force) throw IoError("output directory " + dir.string() + " already exists (use --force to overwrite)");
        fs::remove_all(dir);
    }
    fs::create_directories(dir);
}

void write_text_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

json history_to_json(const TrainingHistory& h) {
    json epochs = json::array();
    for (const auto& e : h.epochs) {
        json r = {{"epoch", e.epoch}, {"batches", e.batches}, {"seconds", e.seconds},
                  {"l_g", e.mean.l_g}, {"l_l", e.mean.l_l}, {"l_con", e.mean.l_con}};
        if (e.aug_computed) {
            r["l_pri"] = e.mean.l_pri;
            r["l_t"] = e.mean.l_t;
            r["l_aug"] = e.mean.l_aug;
        }
        epochs.push_back(std::move(r));
    }
    json ckpts = json::array();
    for (const auto& p : h.checkpoints) ckpts.push_back(p.filename().string());
    return {{"epochs", epochs}, {"checkpoints", ckpts}};
}

TrainedRun train_run(const ExperimentConfig& cfg, const fs::path& dir, bool force) {
    cfg.validate();
    const fs::path data_path = resolve_data_path(cfg.data.path);
    const TimeSeriesDataset ds = prepare_dataset(cfg.data);
    prepare_run_dir(dir, force);

    TrainedRun run;
    RunManifest& m = run.manifest;
    m.config = to_json(cfg);
    m.config_hash = config_hash(cfg);
    m.dataset_path = data_path.string();
    m.dataset_fingerprint = dataset_fingerprint(data_path);
    m.run_id = m.config_hash.substr(0, 12) + "-" + m.dataset_fingerprint.substr(0, 8);
    m.outputs = {{"config", "config.json"},
                 {"log", "train_log.jsonl"},
                 {"history", "history.json"},
                 {"checkpoint", "checkpoints/final.ckpt"}};
    write_text_file(dir / "config.json", canonical_config_text(cfg));
    write_text_file(dir / "manifest.json", to_json(m).dump(2) + "\n");

    Trainer trainer(cfg, static_cast<int>(ds.channels()));
    TrainOptions opts;
    opts.out_dir = dir;
    run.history = trainer.train(ds, opts);
    json hist = history_to_json(run.history);
    for (auto& e : hist["epochs"]) e.erase("seconds");  // keep the file reproducible
    write_text_file(dir / "history.json", hist.dump(2) + "\n");
    return run;
}

RunManifest load_manifest(const fs::path& run_dir) {
    const fs::path p = run_dir / "manifest.json";
    if (!fs::exists(p)) throw IoError("not a run directory (no manifest.json): " + run_dir.string());
    try {
        return manifest_from_json(json::parse(read_bytes(p)));
    } catch (const json::exception& e) {
        throw IoError("malformed manifest " + p.string() + ": " + e.what());
    }
}

std::unique_ptr<Trainer> load_run(const fs::path& run_dir) {
    const RunManifest m = load_manifest(run_dir);
    return Trainer::load_checkpoint(run_dir / m.outputs.at("checkpoint"));
}

std::string forecast_csv(const ResultTag& tag, const std::vector<ForecastResult>& results) {
    std::ostringstream out;
    out << kForecastCsvHeader << '\n';
    double mse = 0.0;
    double mae = 0.0;
    const auto row = [&](const std::string& setting, const std::string& horizon, double a, double b) {
        out << tag.method << ',' << tag.dataset << ',' << setting << ',' << horizon << ',' << format_number(a) << ','
            << format_number(b) << ',' << tag.seed << ',' << tag.config_hash << '\n';
    };
    for (const auto& r : results) {
        row(r.setting, std::to_string(r.horizon), r.mse, r.mae);
        mse += r.mse;
        mae += r.mae;
    }
    if (!results.empty()) {
        const double n = static_cast<double>(results.size());
        row(results.front().setting, "avg", mse / n, mae / n);
    }
    return out.str();
}

std::string classify_csv(const ResultTag& tag, const ClassifyResult& result) {
    std::ostringstream out;
    out << kClassifyCsvHeader << '\n'
        << tag.method << ',' << tag.dataset << ',' << format_number(result.accuracy) << ',' << tag.seed << ','
        << tag.config_hash << '\n';
    return out.str();
}

json results_metadata(const ExperimentConfig& cfg, const TimeSeriesDataset& ds) {
    json j;
    j["dataset"] = ds.name;
    j["task"] = ds.task == Task::forecasting ? "forecasting" : "classification";
    if (ds.task == Task::forecasting) {
        j["split_ratios"] = {kTrainRatio, kValidRatio, kTestRatio};
        j["split_rows"] = {ds.split.train.size(), ds.split.valid.size(), ds.split.test.size()};
        j["metric_scale"] = "standardized (train-split mean and std per channel)";
        j["feature"] = "representation at the final timestamp of the window ending at t";
        j["eval_window"] = cfg.eval_window > 0 ? cfg.eval_window : cfg.T;
        j["ridge_grid"] = kRidgeGrid;
    } else {
        j["svm_penalty_grid"] = kSvmPenaltyGrid;
        j["svm_gamma"] = "1 / (2 * median pairwise squared distance)";
    }
    j["l0_normalization"] = "expected L0 divided by T";
    j["setting"] = cfg.data.setting;
    return j;
}

fs::path evaluate_run(const Trainer& trainer, const TimeSeriesDataset& ds, const ResultTag& tag,
                      const std::vector<int>& horizons, const fs::path& csv_path) {
    const ExperimentConfig& cfg = trainer.config();
    std::string text;
    if (ds.task == Task::forecasting) {
        std::vector<std::size_t> targets(ds.channels());
        for (std::size_t c = 0; c < targets.size(); ++c) targets[c] = c;
        const int window = cfg.eval_window > 0 ? cfg.eval_window : cfg.T;
        text = forecast_csv(tag, forecast_probe(trainer.encoder(), ds, horizons, cfg.data.setting, window, targets));
    } else {
        text = classify_csv(tag, evaluate_classification(trainer.encoder(), ds));
    }
    write_text_file(csv_path, text);
    fs::path meta = csv_path;
    meta.replace_extension(".meta.json");
    write_text_file(meta, results_metadata(cfg, ds).dump(2) + "\n");
    return csv_path;
}

std::vector<fs::path> export_masks(const Trainer& trainer, const TimeSeriesDataset& ds, std::size_t n,
                                   const fs::path& out_dir) {
    if (n == 0) throw ValidationError("--n must be >= 1");
    std::vector<Matrix> inputs;
    if (ds.task == Task::classification) {
        const IndexRange r = ds.instance_range(SplitName::test);
        for (std::size_t i = r.begin; i < std::min(r.end, r.begin + n); ++i) inputs.push_back(ds.instance(i));
    } else {
        const auto t = static_cast<std::size_t>(trainer.config().T);
        const IndexRange r = ds.range(SplitName::test);
        for (std::size_t s : window_starts(r.size(), t, t)) {
            if (inputs.size() == n) break;
            inputs.push_back(ds.values.middleRows(static_cast<Eigen::Index>(r.begin + s), static_cast<Eigen::Index>(t)));
        }
    }
    if (inputs.empty()) throw ValidationError("no test instances to export");
    fs::create_directories(out_dir);
    std::vector<fs::path> files;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const Matrix& x = inputs[i];
        const MaskPair m =
            trainer.augmenter().forward(x, static_cast<int>(x.rows()), AugMode::eval, nullptr, nullptr);
        const AugmentedView view = compose_view(x, m, trainer.config().aug.g_floor);
        std::ostringstream out;
        out << "t,x,pi,h,g,v_star\n";
        for (Eigen::Index t = 0; t < x.rows(); ++t)
            out << t << ',' << format_number(x(t, 0)) << ',' << format_number(m.pi[t]) << ',' << format_number(m.h[t])
                << ',' << format_number(m.g[t]) << ',' << format_number(view.v_star(t, 0)) << '\n';
        char name[32];
        std::snprintf(name, sizeof name, "masks_%03zu.csv", i);
        write_text_file(out_dir / name, out.str());
        files.push_back(out_dir / name);
    }
    return files;
}

double mean_run_length(const std::vector<double>& h) {
    std::size_t runs = 0;
    std::size_t ones = 0;
    bool inside = false;
    for (double v : h) {
        if (v == 1.0) {
            ++ones;
            if (!inside) ++runs;
            inside = true;
        } else {
            inside = false;
        }
    }
    return runs ? static_cast<double>(ones) / static_cast<double>(runs) : 0.0;
}

EpochLosses read_epoch_losses(const fs::path& log_path) {
    std::ifstream in(log_path);
    if (!in) throw IoError("cannot open training log " + log_path.string());
    std::map<int, std::pair<double, int>> aug;
    std::map<int, std::pair<double, int>> con;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw FormatError("malformed training log record", lineno, 1);
        }
        const int epoch = j.at("epoch").get<int>();
        if (j.contains("l_aug")) {
            aug[epoch].first += j["l_aug"].get<double>();
            ++aug[epoch].second;
        }
        con[epoch].first += j.at("l_con").get<double>();
        ++con[epoch].second;
    }
    if (con.empty()) throw ValidationError("training log " + log_path.string() + " has no records");
    EpochLosses out;
    for (const auto& [e, s] : aug) {
        out.aug_epochs.push_back(e);
        out.l_aug.push_back(s.first / s.second);
    }
    for (const auto& [e, s] : con) {
        out.con_epochs.push_back(e);
        out.l_con.push_back(s.first / s.second);
    }
    return out;
}

namespace {

void panel(std::ostringstream& svg, double top, const std::string& title, const std::vector<int>& xs,
           const std::vector<double>& ys, const std::string& colour, int max_epoch) {
    constexpr double left = 70.0;
    constexpr double width = 520.0;
    constexpr double height = 200.0;
    svg << "<g class=\"panel\">\n";
    svg << "<text x=\"" << left + width / 2 << "\" y=\"" << top - 10 << "\" text-anchor=\"middle\">" << title << "</text>\n";
    svg << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << width << "\" height=\"" << height
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << left + width / 2 << "\" y=\"" << top + height + 35 << "\" text-anchor=\"middle\">epoch</text>\n";
    svg << "<text x=\"20\" y=\"" << top + height / 2 << "\" transform=\"rotate(-90 20 " << top + height / 2
        << ")\" text-anchor=\"middle\">loss</text>\n";
    if (ys.empty()) {
        svg << "<text x=\"" << left + width / 2 << "\" y=\"" << top + height / 2
            << "\" text-anchor=\"middle\">not computed in this run</text>\n</g>\n";
        return;
    }
    double lo = *std::min_element(ys.begin(), ys.end());
    double hi = *std::max_element(ys.begin(), ys.end());
    if (hi - lo < 1e-12) {
        lo -= 0.5;
        hi += 0.5;
    }
    const double span_x = std::max(1, max_epoch);
    const auto px = [&](double e) { return left + width * e / span_x; };
    const auto py = [&](double v) { return top + height - height * (v - lo) / (hi - lo); };
    svg << "<text x=\"" << left - 5 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\" font-size=\"10\">"
        << format_number(hi) << "</text>\n";
    svg << "<text x=\"" << left - 5 << "\" y=\"" << top + height << "\" text-anchor=\"end\" font-size=\"10\">"
        << format_number(lo) << "</text>\n";
    svg << "<text x=\"" << left << "\" y=\"" << top + height + 15 << "\" font-size=\"10\">0</text>\n";
    svg << "<text x=\"" << left + width << "\" y=\"" << top + height + 15 << "\" text-anchor=\"end\" font-size=\"10\">"
        << max_epoch << "</text>\n";
    svg << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < ys.size(); ++i) svg << (i ? " " : "") << px(xs[i]) << ',' << py(ys[i]);
    svg << "\"/>\n";
    for (std::size_t i = 0; i < ys.size(); ++i)
        svg << "<circle class=\"point\" cx=\"" << px(xs[i]) << "\" cy=\"" << py(ys[i]) << "\" r=\"2.5\" fill=\"" << colour
            << "\"/>\n";
    svg << "</g>\n";
}

}  // namespace

std::string loss_plot_svg(const EpochLosses& losses) {
    int max_epoch = 0;
    for (int e : losses.con_epochs) max_epoch = std::max(max_epoch, e);
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"580\" font-family=\"sans-serif\" "
           "font-size=\"12\">\n";
    panel(svg, 40, "augmentation loss (l_aug)", losses.aug_epochs, losses.l_aug, "#c0392b", max_epoch);
    panel(svg, 330, "contrastive loss (l_con)", losses.con_epochs, losses.l_con, "#2471a3", max_epoch);
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace autotcl
