// Acceptance run: one PASS/FAIL line per criterion. Tolerances are the
// constants below; nothing is adjusted after seeing a result.

#include "autotcl/errors.hpp"
#include "autotcl/pipeline.hpp"
#include "oracles.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <iostream>
#include <set>
#include <sstream>

using namespace autotcl;
namespace fs = std::filesystem;

namespace {

constexpr std::size_t kSamplerDraws = 1000000;
constexpr double kSamplerSigmas = 3.0;
constexpr int kInvertTriples = 1000;
constexpr double kInvertTol = 1e-6;
constexpr double kOracleTol = 1e-6;
constexpr double kGradRelTol = 1e-3;
constexpr double kLogBTol = 1e-9;
constexpr double kDeskMseMax = 0.055;
constexpr double kDeskMaeMax = 0.19;
constexpr double kBasicMotionsMin = 0.95;
constexpr double kERingMin = 0.85;
const std::vector<int> kAblationHorizons{24, 48, 168};
const std::vector<std::uint64_t> kAblationSeeds{0, 1, 2};

const fs::path kSource = AUTOTCL_SOURCE_DIR;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

Matrix numeric_gradient(Matrix& x, const std::function<double()>& f, double h = 1e-5) {
    Matrix g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double keep = x.data()[i];
        x.data()[i] = keep + h;
        const double up = f();
        x.data()[i] = keep - h;
        const double down = f();
        x.data()[i] = keep;
        g.data()[i] = (up - down) / (2.0 * h);
    }
    return g;
}

double relative_error(const Matrix& a, const Matrix& b) {
    const double scale = std::max(a.norm(), b.norm());
    return scale < 1e-10 ? 0.0 : (a - b).norm() / scale;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// --- desk-scale configurations -------------------------------------------------

ExperimentConfig etth1_desk(std::uint64_t seed, Variant variant) {
    ExperimentConfig c;
    c.encoder.depth = 6;
    c.encoder.hidden_dim = 64;
    c.encoder.repr_dim = 64;
    c.epochs = 20;
    c.T = 128;
    c.window_stride = 64;
    c.L = 16;
    c.batch_size = 8;
    c.seed = seed;
    c.variant = variant;
    c.data.path = (kSource / "data" / "ETTh1.csv").string();
    c.data.format = "ett_csv";
    c.data.setting = "univariate";
    return c;
}

ExperimentConfig uea_desk(const fs::path& root, std::uint64_t seed) {
    ExperimentConfig c;
    c.encoder.depth = 6;
    c.encoder.hidden_dim = 64;
    c.encoder.repr_dim = 64;
    c.aug.hidden_dim = 32;
    c.epochs = 120;
    c.T = 0;
    c.L = 10;
    c.batch_size = 8;
    c.seed = seed;
    c.data.path = root.string();
    c.data.format = "uea_archive";
    c.data.setting = "multivariate";
    return c;
}

struct DeskRun {
    std::vector<ForecastResult> results;
    double train_seconds = 0.0;
};

DeskRun run_forecast(const ExperimentConfig& cfg, const std::vector<int>& horizons) {
    const auto ds = prepare_dataset(cfg.data);
    Trainer tr(cfg, static_cast<int>(ds.channels()));
    const auto t0 = std::chrono::steady_clock::now();
    tr.train(ds);
    DeskRun r;
    r.train_seconds = seconds_since(t0);
    r.results = forecast_probe(tr.encoder(), ds, horizons, cfg.data.setting, cfg.T, {0});
    return r;
}

// --- criteria --------------------------------------------------------------------

Outcome sampler_law() {
    double worst = 0.0;
    std::string where;
    for (double pi : {0.1, 0.3, 0.8}) {
        for (double tau : {0.5, 1.0}) {
            const HardConcreteParams p{tau, -0.1, 1.1};
            const oracle::Law law{tau, -0.1, 1.1};
            Rng rng = make_stream(2024, "acceptance.sampler");
            std::size_t zeros = 0;
            std::size_t ones = 0;
            double sum = 0.0;
            double sq = 0.0;
            for (std::size_t i = 0; i < kSamplerDraws; ++i) {
                const double h = concrete_sample(pi, uniform_open(rng), p);
                zeros += h == 0.0;
                ones += h == 1.0;
                sum += h;
                sq += h * h;
            }
            const double n = static_cast<double>(kSamplerDraws);
            const double p0 = law.p_zero(pi);
            const double p1 = law.p_one(pi);
            const double mean = sum / n;
            const double var = sq / n - mean * mean;
            const double z[3] = {
                std::abs(static_cast<double>(zeros) / n - p0) / std::sqrt(p0 * (1 - p0) / n),
                std::abs(static_cast<double>(ones) / n - p1) / std::sqrt(p1 * (1 - p1) / n),
                std::abs(mean - law.mean(pi)) / std::sqrt(var / n),
            };
            for (double v : z) {
                if (v > worst) {
                    worst = v;
                    where = "pi=" + fmt("%g", pi) + " tau=" + fmt("%g", tau);
                }
            }
        }
    }
    return {worst <= kSamplerSigmas,
            "max |z| = " + fmt("%.3f", worst) + " (" + where + ") over 6 grid points, 1e6 draws each; tol " +
                fmt("%g", kSamplerSigmas) + " SE"};
}

Outcome invertibility() {
    Rng rng = make_stream(7, "acceptance.invert");
    std::uniform_int_distribution<int> len(1, 64);
    std::uniform_int_distribution<int> chans(1, 8);
    double worst = 0.0;
    for (int trial = 0; trial < kInvertTriples; ++trial) {
        const int t = len(rng);
        const Matrix x = random_matrix(t, chans(rng), rng, 3.0);
        MaskPair m;
        m.h.resize(t);
        m.g.resize(t);
        for (int i = 0; i < t; ++i) {
            m.h(i) = trial % 2 ? uniform_open(rng) : static_cast<double>(uniform_open(rng) < 0.5);
            const double mag = kDefaultGFloor + uniform_open(rng) * (2.0 - 2.0 * kDefaultGFloor);
            m.g(i) = uniform_open(rng) < 0.5 ? -mag : mag;
        }
        const AugmentedView view = compose_view(x, m);
        for (int i = 0; i < t; ++i)
            for (Eigen::Index c = 0; c < x.cols(); ++c)
                worst = std::max(worst, std::abs(view.v_star(i, c) / m.g(i) - m.h(i) * x(i, c)));
    }
    return {worst < kInvertTol, "max |v*/g - h*x| = " + fmt("%.3e", worst) + " over 1000 triples; tol 1e-6"};
}

Outcome loss_oracles() {
    Rng rng = make_stream(11, "acceptance.oracles");
    double value_err = 0.0;
    double grad_err = 0.0;
    const auto note_grad = [&](const Matrix& analytic, const Matrix& numeric) {
        grad_err = std::max(grad_err, relative_error(analytic, numeric));
    };
    const HardConcreteParams p;
    for (int trial = 0; trial < 5; ++trial) {
        const Eigen::Index b = 2 + trial % 3;  // 2..4
        const Eigen::Index d = 2 + trial % 3;
        const int t = 12;
        Matrix zx = random_matrix(b, d, rng);
        Matrix zv = random_matrix(b, d, rng);
        Matrix pi = random_matrix(b, t, rng).unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });

        const double beta = 0.3;
        const PriLoss pri = pri_loss(zx, zv, pi, beta, p);
        value_err = std::max(value_err, std::abs(pri.value - oracle::oracle_pri(zx, zv, pi, beta, p)));
        const auto fpri = [&] { return oracle::oracle_pri(zx, zv, pi, beta, p); };
        note_grad(pri.grad_z_x, numeric_gradient(zx, fpri));
        note_grad(pri.grad_z_v, numeric_gradient(zv, fpri));
        note_grad(pri.grad_pi, numeric_gradient(pi, fpri));

        const auto triplets = sample_triplets(static_cast<std::size_t>(b), t, rng);
        const TripletLoss trip = temporal_triplet_loss(pi, triplets);
        value_err = std::max(value_err, std::abs(trip.value - oracle::oracle_triplet(pi, triplets)));
        note_grad(trip.grad_h, numeric_gradient(pi, [&] { return oracle::oracle_triplet(pi, triplets); }));

        const double temp = 0.5 + 0.25 * trial;
        const PairLoss g = global_contrast_loss(zx, zv, temp);
        const auto fg = [&] { return oracle::oracle_global(zx, zv, temp); };
        value_err = std::max(value_err, std::abs(g.value - fg()));
        note_grad(g.grad_a, numeric_gradient(zx, fg));
        note_grad(g.grad_b, numeric_gradient(zv, fg));

        Matrix per_step = random_matrix(b * t, d, rng);
        const int seg = 3;
        const LocalLoss l = local_contrast_loss(per_step, t, seg, temp);
        const auto fl = [&] { return oracle::oracle_local(per_step, t, seg, temp); };
        value_err = std::max(value_err, std::abs(l.value - fl()));
        note_grad(l.grad_per_step, numeric_gradient(per_step, fl));
    }
    return {value_err <= kOracleTol && grad_err <= kGradRelTol,
            "pri/triplet/global/local: max value error " + fmt("%.2e", value_err) + " (tol 1e-6), max gradient rel error " +
                fmt("%.2e", grad_err) + " (tol 1e-3); B<=4, T=12, D<=4"};
}

Outcome infonce_identities() {
    double worst = 0.0;
    for (int b : {2, 4, 8}) {
        Rng rng = make_stream(static_cast<std::uint64_t>(b), "acceptance.infonce");
        const Matrix row = random_matrix(1, 5, rng);
        const Matrix same = row.replicate(b, 1);
        worst = std::max(worst, std::abs(global_contrast_loss(same, same).value - std::log(static_cast<double>(b))));
    }
    Rng rng = make_stream(1, "acceptance.infonce");
    const double single = global_contrast_loss(random_matrix(1, 5, rng), random_matrix(1, 5, rng)).value;
    return {worst <= kLogBTol && single == 0.0,
            "uniform similarity |L - log B| max " + fmt("%.2e", worst) + " for B in {2,4,8} (tol 1e-9); B=1 gives " +
                fmt("%g", single)};
}

Outcome schedule_isolation() {
    auto cfg = etth1_desk(0, Variant::autotcl);
    cfg.encoder.depth = 3;
    cfg.encoder.hidden_dim = 16;
    cfg.encoder.repr_dim = 16;
    cfg.aug.hidden_dim = 16;
    cfg.M = 2;
    cfg.epochs = 4;
    cfg.window_stride = 256;
    const auto ds = prepare_dataset(cfg.data);
    const auto windows = training_windows(ds, cfg);
    const long long batches = static_cast<long long>((windows.starts.size() + 7) / 8);

    Trainer tr(cfg, 1);
    auto prev_enc = nn::checksum(tr.encoder().parameters());
    auto prev_aug = nn::checksum(tr.augmenter().parameters());
    std::uint64_t mid_enc = 0;
    std::uint64_t mid_aug = 0;
    int violations = 0;
    std::set<int> aug_epochs;
    tr.set_aug_step_hook([&] {
        mid_enc = nn::checksum(tr.encoder().parameters());
        mid_aug = nn::checksum(tr.augmenter().parameters());
    });
    TrainOptions opts;
    opts.on_step = [&](const StepRecord& r) {
        const auto enc = nn::checksum(tr.encoder().parameters());
        const auto aug = nn::checksum(tr.augmenter().parameters());
        if (r.aug_updated) {
            aug_epochs.insert(r.epoch);
            violations += mid_enc != prev_enc;  // augmentation step moved the encoder
            violations += aug != mid_aug;       // encoder step moved the augmenter
        } else {
            violations += aug != prev_aug;
        }
        prev_enc = enc;
        prev_aug = aug;
    };
    tr.train(windows, opts);
    const bool pass = tr.aug_updates() == 2 * batches && violations == 0 && aug_epochs == std::set<int>{0, 2};
    return {pass, "aug updates " + std::to_string(tr.aug_updates()) + " (expected 2B = " + std::to_string(2 * batches) +
                      "), epochs with aug steps {" + (aug_epochs.count(0) ? "0" : "") + (aug_epochs.count(2) ? ",2" : "") +
                      "}, checksum violations " + std::to_string(violations)};
}

struct AblationTable {
    std::map<std::string, std::vector<double>> mse;  // variant -> per-seed mean over horizons
    double autotcl_h24_mse = 0.0;
    double autotcl_h24_mae = 0.0;
    double autotcl_seed0_train_seconds = 0.0;
    std::string text;
};

AblationTable run_ablation() {
    AblationTable t;
    std::ostringstream out;
    for (auto v : {Variant::autotcl, Variant::wo_aug, Variant::cutout}) {
        for (auto seed : kAblationSeeds) {
            const auto r = run_forecast(etth1_desk(seed, v), kAblationHorizons);
            double mean = 0.0;
            for (const auto& x : r.results) mean += x.mse / static_cast<double>(r.results.size());
            t.mse[to_string(v)].push_back(mean);
            out << "    " << to_string(v) << " seed " << seed;
            for (const auto& x : r.results) out << "  H" << x.horizon << " mse " << fmt("%.4f", x.mse) << " mae " << fmt("%.4f", x.mae);
            out << "  (train " << fmt("%.0f", r.train_seconds) << " s)\n";
            if (v == Variant::autotcl && seed == 0) {
                t.autotcl_h24_mse = r.results[0].mse;
                t.autotcl_h24_mae = r.results[0].mae;
                t.autotcl_seed0_train_seconds = r.train_seconds;
            }
        }
    }
    t.text = out.str();
    return t;
}

Outcome desk_benchmark(const AblationTable& t) {
    const bool pass = t.autotcl_h24_mse <= kDeskMseMax && t.autotcl_h24_mae <= kDeskMaeMax;
    return {pass, "ETTh1 univariate H=24 seed 0: MSE " + fmt("%.4f", t.autotcl_h24_mse) + " (<= 0.055), MAE " +
                      fmt("%.4f", t.autotcl_h24_mae) + " (<= 0.19); depth 6, D 64, 20 epochs, train " +
                      fmt("%.0f", t.autotcl_seed0_train_seconds) + " s"};
}

Outcome ablation_order(const AblationTable& t) {
    const auto avg = [&](const std::string& k) {
        double s = 0.0;
        for (double v : t.mse.at(k)) s += v;
        return s / static_cast<double>(t.mse.at(k).size());
    };
    const double a = avg("autotcl");
    const double w = avg("wo_aug");
    const double c = avg("cutout");
    return {a <= w && a <= c, "mean MSE over H {24,48,168} x 3 seeds: autotcl " + fmt("%.4f", a) + ", wo_aug " +
                                  fmt("%.4f", w) + ", cutout " + fmt("%.4f", c)};
}

std::optional<fs::path> find_uea(const std::string& name) {
    std::vector<fs::path> candidates{kSource / "data" / "uea" / name};
    if (const char* env = std::getenv("AUTOTCL_DATA_DIR")) {
        candidates.push_back(fs::path(env) / "uea" / name);
        candidates.push_back(fs::path(env) / name);
    }
    for (const auto& c : candidates)
        if (fs::exists(c / "train" / "labels.txt")) return c;
    return std::nullopt;
}

Outcome classification() {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool pass = true;
    for (const auto& [name, bound] : std::vector<std::pair<std::string, double>>{{"BasicMotions", kBasicMotionsMin},
                                                                                 {"ERing", kERingMin}}) {
        const auto root = find_uea(name);
        if (!root) {
            pass = false;
            detail += name + " not available (looked in data/uea and $AUTOTCL_DATA_DIR); ";
            continue;
        }
        const auto cfg = uea_desk(*root, 0);
        const auto ds = prepare_dataset(cfg.data);
        Trainer tr(cfg, static_cast<int>(ds.channels()));
        tr.train(ds);
        const auto r = evaluate_classification(tr.encoder(), ds);
        pass = pass && r.accuracy >= bound;
        detail += name + " accuracy " + fmt("%.3f", r.accuracy) + " (>= " + fmt("%.2f", bound) + "); ";
    }
    return {pass, detail + "total " + fmt("%.0f", seconds_since(t0)) + " s"};
}

Outcome determinism(const fs::path& work) {
    auto cfg = etth1_desk(3, Variant::autotcl);
    cfg.encoder.depth = 3;
    cfg.encoder.hidden_dim = 16;
    cfg.encoder.repr_dim = 16;
    cfg.epochs = 2;
    cfg.window_stride = 128;
    std::vector<std::string> logs;
    std::vector<std::string> csvs;
    for (const char* tag : {"det_a", "det_b"}) {
        const fs::path dir = work / tag;
        const auto run = train_run(cfg, dir, true);
        const auto trainer = load_run(dir);
        const auto ds = prepare_dataset(cfg.data);
        evaluate_run(*trainer, ds, {"autotcl", ds.name, cfg.seed, run.manifest.config_hash}, {24, 48}, dir / "forecast.csv");
        logs.push_back(read_file(dir / "train_log.jsonl"));
        csvs.push_back(read_file(dir / "forecast.csv"));
    }
    const bool pass = !logs[0].empty() && logs[0] == logs[1] && csvs[0] == csvs[1];
    return {pass, std::string("training logs ") + (logs[0] == logs[1] ? "identical" : "DIFFER") + " (" +
                      std::to_string(logs[0].size()) + " bytes), results CSV " + (csvs[0] == csvs[1] ? "identical" : "DIFFER")};
}

double mask_run_length(const ExperimentConfig& cfg, const fs::path& out_dir) {
    const auto ds = prepare_dataset(cfg.data);
    Trainer tr(cfg, static_cast<int>(ds.channels()));
    tr.train(ds);
    fs::remove_all(out_dir);
    const auto files = export_masks(tr, ds, 20, out_dir);
    double total = 0.0;
    for (const auto& f : files) {
        std::ifstream in(f);
        std::string line;
        std::getline(in, line);  // header
        std::vector<double> h;
        while (std::getline(in, line)) {
            std::stringstream ss(line);
            std::string cell;
            for (int c = 0; c < 4; ++c) std::getline(ss, cell, ',');
            h.push_back(std::stod(cell));
        }
        total += mean_run_length(h);
    }
    return files.empty() ? 0.0 : total / static_cast<double>(files.size());
}

Outcome mask_continuity(const fs::path& work) {
    std::vector<std::pair<std::string, ExperimentConfig>> sets{{"ETTh1", etth1_desk(0, Variant::autotcl)}};
    for (const char* name : {"BasicMotions", "GunPoint"})
        if (const auto root = find_uea(name)) sets.emplace_back(name, uea_desk(*root, 0));
    int increased = 0;
    std::string detail;
    for (auto& [name, cfg] : sets) {
        cfg.lambda = 0.2;
        const double with = mask_run_length(cfg, work / ("masks_" + name + "_lambda0.2"));
        cfg.lambda = 0.0;
        const double without = mask_run_length(cfg, work / ("masks_" + name + "_lambda0"));
        increased += with > without;
        detail += name + " " + fmt("%.2f", without) + " -> " + fmt("%.2f", with) + "; ";
    }
    return {increased >= 2, "mean run length of h=1 blocks, lambda 0 -> 0.2: " + detail + std::to_string(increased) +
                                " of " + std::to_string(sets.size()) + " increased (need >= 2 of 3)"};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"AutoTCL acceptance criteria"};
    fs::path work = fs::temp_directory_path() / "autotcl_acceptance";
    std::vector<int> only;
    app.add_option("--work-dir", work, "Scratch directory for runs and exported masks");
    app.add_option("--only", only, "Run only these criteria (1-10)")->delimiter(',');
    CLI11_PARSE(app, argc, argv);
    fs::create_directories(work);

    const auto wanted = [&](int k) { return only.empty() || std::find(only.begin(), only.end(), k) != only.end(); };
    int failures = 0;
    const auto report = [&](int k, const std::string& name, const std::function<Outcome()>& fn) {
        if (!wanted(k)) return;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        failures += !o.pass;
        std::cout << (o.pass ? "PASS" : "FAIL") << " [" << k << "] " << name << ": " << o.detail << " ["
                  << fmt("%.1f", seconds_since(t0)) << " s]" << std::endl;
    };

    report(1, "sampler law", sampler_law);
    report(2, "invertibility", invertibility);
    report(3, "loss oracles", loss_oracles);
    report(4, "InfoNCE identities", infonce_identities);
    report(5, "schedule and isolation", schedule_isolation);
    if (wanted(6) || wanted(7)) {
        std::optional<AblationTable> table;
        std::string error;
        try {
            table = run_ablation();
            std::cout << "  ablation runs:\n" << table->text;
        } catch (const std::exception& e) {
            error = e.what();
        }
        const auto from_table = [&](Outcome (*f)(const AblationTable&)) {
            return [&, f] { return table ? f(*table) : Outcome{false, "error: " + error}; };
        };
        report(6, "desk-scale ETTh1 benchmark", from_table(desk_benchmark));
        report(7, "ablation ordering", from_table(ablation_order));
    }
    report(8, "classification smoke", classification);
    report(9, "determinism", [&] { return determinism(work); });
    report(10, "mask continuity", [&] { return mask_continuity(work); });
    return failures == 0 ? 0 : 1;
}
