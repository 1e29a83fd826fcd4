#include "autotcl/errors.hpp"
#include "autotcl/pipeline.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <fstream>
#include <sstream>

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace autotcl;

namespace {

json to_json_value(const py::handle& obj) {
    auto dumps = py::module_::import("json").attr("dumps");
    return json::parse(dumps(obj).cast<std::string>());
}

py::object to_python(const json& j) {
    auto loads = py::module_::import("json").attr("loads");
    return loads(j.dump());
}

HardConcreteParams params(double tau, double gamma, double zeta) {
    HardConcreteParams p{tau, gamma, zeta};
    p.validate();
    return p;
}

/// A trained run loaded from disk, usable from Python.
class Run {
public:
    explicit Run(const fs::path& dir) : dir_(dir), trainer_(load_run(dir)) {}

    py::object config() const { return to_python(autotcl::to_json(trainer_->config())); }
    std::string config_hash() const { return autotcl::config_hash(trainer_->config()); }
    int epoch() const { return trainer_->epoch(); }

    py::tuple encode(const Matrix& x) const {
        Rng rng(0);
        const Representation r = trainer_->encoder().encode(x, false, rng);
        return py::make_tuple(r.per_step, Vector(r.pooled));
    }

    py::dict masks(const Matrix& x) const {
        Rng rng(0);
        const MaskPair m = trainer_->augmenter().aug_forward(x, AugMode::eval, rng);
        py::dict d;
        d["pi"] = m.pi;
        d["h"] = m.h;
        d["g"] = m.g;
        d["v_star"] = compose_rows(x, m.h, m.g);
        return d;
    }

    std::string evaluate(const std::optional<std::vector<int>>& horizons, const std::optional<fs::path>& csv_path) const {
        const TimeSeriesDataset ds = prepare_dataset(trainer_->config().data);
        const bool classify = ds.task == Task::classification;
        const ResultTag tag{to_string(trainer_->config().variant), ds.name, trainer_->config().seed, config_hash()};
        const fs::path csv = csv_path ? *csv_path : dir_ / (classify ? "classify.csv" : "forecast.csv");
        evaluate_run(*trainer_, ds, tag, horizons ? *horizons : default_horizons(ds.name), csv);
        std::ifstream in(csv);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    std::vector<fs::path> export_masks(std::size_t n, const std::optional<fs::path>& out_dir) const {
        const TimeSeriesDataset ds = prepare_dataset(trainer_->config().data);
        return autotcl::export_masks(*trainer_, ds, n, out_dir ? *out_dir : dir_ / "masks");
    }

private:
    fs::path dir_;
    std::unique_ptr<Trainer> trainer_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "AutoTCL core operations";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<InvariantError>(m, "InvariantError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
    py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_RuntimeError);
    py::register_exception<IoError>(m, "IoError", PyExc_OSError);

    m.def(
        "concrete_sample",
        [](double pi, double eps, double tau, double gamma, double zeta) {
            return concrete_sample(pi, eps, params(tau, gamma, zeta));
        },
        py::arg("pi"), py::arg("eps"), py::arg("tau") = 0.5, py::arg("gamma") = -0.1, py::arg("zeta") = 1.1);
    m.def(
        "prob_zero", [](double pi, double tau, double gamma, double zeta) {
            return hard_concrete_prob_zero(pi, params(tau, gamma, zeta));
        },
        py::arg("pi"), py::arg("tau") = 0.5, py::arg("gamma") = -0.1, py::arg("zeta") = 1.1);
    m.def(
        "prob_one", [](double pi, double tau, double gamma, double zeta) {
            return hard_concrete_prob_one(pi, params(tau, gamma, zeta));
        },
        py::arg("pi"), py::arg("tau") = 0.5, py::arg("gamma") = -0.1, py::arg("zeta") = 1.1);
    m.def(
        "expected_l0",
        [](const std::vector<double>& pi, double tau, double gamma, double zeta) {
            return expected_l0(pi, params(tau, gamma, zeta));
        },
        py::arg("pi"), py::arg("tau") = 0.5, py::arg("gamma") = -0.1, py::arg("zeta") = 1.1);

    m.def(
        "compose_view",
        [](const Matrix& x, const Vector& h, const Vector& g) {
            MaskPair masks;
            masks.h = h;
            masks.g = g;
            return compose_view(x, masks).v_star;
        },
        py::arg("x"), py::arg("h"), py::arg("g"), "v* = (g * h) * x, masks broadcast over channels");

    m.def(
        "pri_loss",
        [](const Matrix& zx, const Matrix& zv, const Matrix& pi, double beta) {
            const PriLoss l = pri_loss(zx, zv, pi, beta, HardConcreteParams{});
            py::dict d;
            d["value"] = l.value;
            d["l0_term"] = l.l0_term;
            d["mmd_term"] = l.mmd_term;
            d["grad_z_x"] = l.grad_z_x;
            d["grad_z_v"] = l.grad_z_v;
            d["grad_pi"] = l.grad_pi;
            return d;
        },
        py::arg("z_x"), py::arg("z_v"), py::arg("pi"), py::arg("beta"));

    m.def(
        "temporal_triplet_loss",
        [](const Matrix& h, std::uint64_t seed) {
            Rng rng(seed);
            const auto triplets = sample_triplets(static_cast<std::size_t>(h.rows()), static_cast<std::size_t>(h.cols()), rng);
            const TripletLoss l = temporal_triplet_loss(h, triplets);
            py::list tr;
            for (const auto& t : triplets) tr.append(py::make_tuple(t.anchor, t.positive, t.negative));
            py::dict d;
            d["value"] = l.value;
            d["grad_h"] = l.grad_h;
            d["triplets"] = tr;
            return d;
        },
        py::arg("h"), py::arg("seed") = 0);

    m.def(
        "global_contrast_loss",
        [](const Matrix& za, const Matrix& zb, double temperature) {
            const PairLoss l = global_contrast_loss(za, zb, temperature);
            py::dict d;
            d["value"] = l.value;
            d["grad_a"] = l.grad_a;
            d["grad_b"] = l.grad_b;
            return d;
        },
        py::arg("z_a"), py::arg("z_b"), py::arg("temperature") = 1.0);

    m.def(
        "local_contrast_loss",
        [](const Matrix& per_step, int length, int segment_length, double temperature) {
            const LocalLoss l = local_contrast_loss(per_step, length, segment_length, temperature);
            py::dict d;
            d["value"] = l.value;
            d["grad_per_step"] = l.grad_per_step;
            return d;
        },
        py::arg("per_step"), py::arg("length"), py::arg("segment_length"), py::arg("temperature") = 1.0);

    m.def(
        "normalize_config", [](const py::object& cfg) { return to_python(autotcl::to_json(config_from_json(to_json_value(cfg)))); },
        py::arg("config"), "Validate a config dict and return it with every default filled in");
    m.def(
        "config_hash", [](const py::object& cfg) { return config_hash(config_from_json(to_json_value(cfg))); },
        py::arg("config"));

    m.def(
        "train",
        [](const py::object& cfg, const fs::path& out_dir, bool force) {
            const ExperimentConfig c = config_from_json(to_json_value(cfg));
            TrainedRun run;
            {
                py::gil_scoped_release release;
                run = train_run(c, out_dir, force);
            }
            return to_python(autotcl::to_json(run.manifest));
        },
        py::arg("config"), py::arg("out_dir"), py::arg("force") = false,
        "Train into out_dir and return the run manifest");

    py::class_<Run>(m, "Run")
        .def(py::init<const fs::path&>(), py::arg("run_dir"))
        .def_property_readonly("config", &Run::config)
        .def_property_readonly("config_hash", &Run::config_hash)
        .def_property_readonly("epoch", &Run::epoch)
        .def("encode", &Run::encode, py::arg("x"), "Per-step and max-pooled representations of one T x F window")
        .def("masks", &Run::masks, py::arg("x"), "Eval-mode pi, h, g and v* for one T x F window")
        .def("evaluate", &Run::evaluate, py::arg("horizons") = py::none(), py::arg("csv_path") = py::none(),
             "Probe the frozen encoder on the run's dataset; returns the results CSV text")
        .def("export_masks", &Run::export_masks, py::arg("n") = 1, py::arg("out_dir") = py::none());
}
