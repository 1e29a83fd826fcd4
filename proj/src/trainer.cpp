#include "autotcl/trainer.hpp"

#include "autotcl/errors.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace autotcl {

namespace fs = std::filesystem;

TrainingWindows training_windows(const TimeSeriesDataset& ds, const ExperimentConfig& cfg) {
    TrainingWindows w;
    w.values = ds.values;
    if (ds.task == Task::classification) {
        w.length = static_cast<int>(ds.instance_length);
        if (cfg.T != 0 && cfg.T != w.length)
            throw ValidationError("T must be 0 or the instance length (" + std::to_string(w.length) + ")");
        const IndexRange r = ds.instance_range(SplitName::train);
        for (std::size_t i = r.begin; i < r.end; ++i) w.starts.push_back(i * ds.instance_length);
    } else {
        if (cfg.T <= 0) throw ValidationError("forecasting data needs T > 0");
        w.length = cfg.T;
        const IndexRange r = ds.split.train;
        for (auto s : window_starts(r.size(), static_cast<std::size_t>(cfg.T), static_cast<std::size_t>(cfg.window_stride)))
            w.starts.push_back(r.begin + s);
    }
    if (cfg.alpha > 0.0 && w.length < 3 * cfg.L)
        throw ValidationError("local contrast needs T >= 3L (T = " + std::to_string(w.length) + ")");
    if (w.starts.empty()) throw ValidationError("no training windows");
    return w;
}

Trainer::Trainer(ExperimentConfig cfg, int in_channels)
    : cfg_(std::move(cfg)),
      in_channels_(in_channels),
      encoder_(in_channels, cfg_.encoder),
      aug_(in_channels, cfg_.aug),
      rng_data_(make_stream(cfg_.seed, "data")),
      rng_eta_(make_stream(cfg_.seed, "eta")),
      rng_concrete_(make_stream(cfg_.seed, "concrete")),
      rng_triplet_(make_stream(cfg_.seed, "triplet")) {
    cfg_.validate();
    aug_.config().force_h_one = cfg_.variant == Variant::wo_h;
    aug_.config().force_g_one = cfg_.variant == Variant::wo_g;
    Rng init_enc = make_stream(cfg_.seed, "init.encoder");
    Rng init_aug = make_stream(cfg_.seed, "init.aug");
    encoder_.init(init_enc);
    aug_.init(init_aug);
    enc_opt_ = nn::Adam(encoder_.parameters(), cfg_.lr_encoder);
    aug_opt_ = nn::Adam(aug_.parameters(), cfg_.lr_aug);
}

Matrix Trainer::make_views(const Matrix& batch, int length, MaskPair* masks, AugTrace* trace) {
    if (uses_augmentation_network(cfg_.variant)) {
        *masks = aug_.forward(batch, length, AugMode::train, &rng_concrete_, trace);
        return compose_rows(batch, masks->h, masks->g);
    }
    if (uses_static_augmentation(cfg_.variant)) {
        StaticPolicy policy;
        policy.kind = cfg_.variant == Variant::cutout   ? StaticPolicy::Kind::cutout
                      : cfg_.variant == Variant::jitter ? StaticPolicy::Kind::jitter
                                                        : StaticPolicy::Kind::random_aug;
        policy.param = cfg_.static_param;
        Matrix views(batch.rows(), batch.cols());
        for (Eigen::Index b = 0; b < batch.rows() / length; ++b) {
            const Matrix x = batch.middleRows(b * length, length);
            views.middleRows(b * length, length) = static_augment(x, policy, rng_concrete_).v;
        }
        return views;
    }
    return batch;
}

StepRecord Trainer::train_step(const Matrix& batch, int length) {
    const Eigen::Index b = batch.rows() / length;
    StepRecord rec;
    rec.step = step_;
    rec.epoch = epoch_;
    rec.losses.batch_size = static_cast<int>(b);

    MaskPair masks;
    AugTrace aug_trace;
    const Matrix views = make_views(batch, length, &masks, &aug_trace);
    if (uses_augmentation_network(cfg_.variant)) {
        rec.h_mean = masks.h.mean();
        rec.g_min = masks.g.minCoeff();
        rec.g_max = masks.g.maxCoeff();
    }

    if (uses_augmentation_network(cfg_.variant) && epoch_ % cfg_.M == 0) {
        nn::zero_grads(aug_.parameters());
        // Clean (eta-free, dropout-free) embeddings; encoder gradients are not accumulated.
        const auto zx = encoder_.forward(batch, length, {}, nullptr, nullptr);
        EncoderTrace vt;
        const auto zv = encoder_.forward(views, length, {}, nullptr, &vt);
        Matrix grad_zv;
        Matrix grad_h_direct;
        Matrix grad_alpha;
        if (cfg_.variant == Variant::adversarial) {
            const PairLoss pl = global_contrast_loss(zx.pooled, zv.pooled, cfg_.temperature);
            rec.losses.l_aug = -pl.value;
            grad_zv = -pl.grad_b;
        } else {
            const Eigen::Map<const Matrix> pi(masks.pi.data(), b, length);
            const Eigen::Map<const Matrix> h(masks.h.data(), b, length);
            const PriLoss pri = pri_loss(zx.pooled, zv.pooled, pi, cfg_.beta, cfg_.aug.concrete);
            const TripletLoss trip = temporal_triplet_loss(h, rng_triplet_);
            rec.losses.l_pri = pri.value;
            rec.losses.l_t = trip.value;
            rec.losses.l_aug = aug_loss(pri.value, trip.value, cfg_.lambda);
            grad_zv = pri.grad_z_v;
            grad_h_direct = cfg_.lambda * trip.grad_h;
            grad_alpha = pri.grad_alpha;
        }
        if (!std::isfinite(rec.losses.l_aug)) throw NumericalError("non-finite augmentation loss");
        const Matrix grad_views = encoder_.backward(vt, Matrix(), grad_zv, false);
        Vector grad_h;
        Vector grad_g;
        compose_backward(batch, masks.h, masks.g, grad_views, grad_h, grad_g);
        if (grad_h_direct.size()) grad_h += Eigen::Map<const Vector>(grad_h_direct.data(), grad_h_direct.size());
        Vector grad_a;
        if (grad_alpha.size()) grad_a = Eigen::Map<const Vector>(grad_alpha.data(), grad_alpha.size());
        aug_.backward(aug_trace, grad_h, grad_g, grad_a);
        aug_opt_.step();
        ++aug_updates_;
        rec.aug_updated = true;
        if (aug_step_hook_) aug_step_hook_();
    }

    nn::zero_grads(encoder_.parameters());
    const EncodeOptions opts{cfg_.variant != Variant::wo_dv, true};
    EncoderTrace tx;
    EncoderTrace tv;
    const auto rx = encoder_.forward(batch, length, opts, &rng_eta_, &tx);
    const auto rv = encoder_.forward(views, length, opts, &rng_eta_, &tv);
    const PairLoss g = global_contrast_loss(rx.pooled, rv.pooled, cfg_.temperature);
    rec.losses.l_g = g.value;
    Matrix grad_local;
    if (cfg_.alpha > 0.0) {
        const LocalLoss l = local_contrast_loss(rv.per_step, length, cfg_.L, cfg_.temperature);
        rec.losses.l_l = l.value;
        grad_local = cfg_.alpha * l.grad_per_step;
    }
    rec.losses.l_con = contrastive_loss(rec.losses.l_g, rec.losses.l_l, cfg_.alpha);
    if (!std::isfinite(rec.losses.l_con)) throw NumericalError("non-finite contrastive loss");
    encoder_.backward(tx, Matrix(), g.grad_a, true);
    encoder_.backward(tv, grad_local, g.grad_b, true);
    enc_opt_.step();
    ++enc_updates_;
    ++step_;
    return rec;
}

json step_to_json(const StepRecord& r) {
    json j;
    j["step"] = r.step;
    j["epoch"] = r.epoch;
    if (r.aug_updated) {
        j["l_pri"] = r.losses.l_pri;
        j["l_t"] = r.losses.l_t;
        j["l_aug"] = r.losses.l_aug;
    }
    j["l_g"] = r.losses.l_g;
    j["l_l"] = r.losses.l_l;
    j["l_con"] = r.losses.l_con;
    if (r.h_mean) j["h_mean"] = *r.h_mean;
    if (r.g_min) j["g_min"] = *r.g_min;
    if (r.g_max) j["g_max"] = *r.g_max;
    return j;
}

TrainingHistory Trainer::train(const TimeSeriesDataset& ds, const TrainOptions& opts) {
    if (static_cast<int>(ds.channels()) != in_channels_) throw ValidationError("dataset channel count differs from the model");
    return train(training_windows(ds, cfg_), opts);
}

TrainingHistory Trainer::train(const TrainingWindows& windows, const TrainOptions& opts) {
    TrainingHistory history;
    std::ofstream log;
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir / "checkpoints");
        log.open(opts.out_dir / "train_log.jsonl", std::ios::app);
        if (!log) throw IoError("cannot open training log in " + opts.out_dir.string());
    }
    const auto write_checkpoint = [&](const std::string& name) {
        const fs::path p = opts.out_dir / "checkpoints" / name;
        save_checkpoint(p);
        history.checkpoints.push_back(p);
        last_checkpoint_ = p;
    };

    std::vector<std::size_t> order(windows.starts.size());
    while (epoch_ < cfg_.epochs && (opts.stop_after_epoch < 0 || epoch_ < opts.stop_after_epoch)) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (std::size_t i = order.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(std::floor(uniform_open(rng_data_) * static_cast<double>(i)));
            std::swap(order[i - 1], order[j]);
        }

        EpochRecord er;
        er.epoch = epoch_;
        int aug_steps = 0;
        for (std::size_t i = 0; i < order.size(); i += static_cast<std::size_t>(cfg_.batch_size)) {
            std::vector<std::size_t> starts;
            for (std::size_t k = i; k < std::min(order.size(), i + static_cast<std::size_t>(cfg_.batch_size)); ++k)
                starts.push_back(windows.starts[order[k]]);
            const WindowBatch wb = gather_windows(windows.values, starts, static_cast<std::size_t>(windows.length));
            StepRecord rec;
            try {
                rec = train_step(wb.windows, windows.length);
            } catch (const NumericalError& e) {
                throw TrainingAborted(e.what(), last_checkpoint_);
            }
            if (log.is_open()) log << step_to_json(rec).dump() << '\n';
            if (opts.on_step) opts.on_step(rec);
            ++er.batches;
            if (rec.aug_updated) {
                ++aug_steps;
                er.mean.l_pri += rec.losses.l_pri;
                er.mean.l_t += rec.losses.l_t;
                er.mean.l_aug += rec.losses.l_aug;
            }
            er.mean.l_g += rec.losses.l_g;
            er.mean.l_l += rec.losses.l_l;
            er.mean.l_con += rec.losses.l_con;
            er.mean.batch_size += rec.losses.batch_size;
        }
        if (aug_steps > 0) {
            er.aug_computed = true;
            er.mean.l_pri /= aug_steps;
            er.mean.l_t /= aug_steps;
            er.mean.l_aug /= aug_steps;
        }
        er.mean.l_g /= er.batches;
        er.mean.l_l /= er.batches;
        er.mean.l_con /= er.batches;
        er.mean.batch_size /= er.batches;
        er.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history.epochs.push_back(er);
        ++epoch_;
        if (!opts.out_dir.empty() && cfg_.checkpoint_every > 0 && epoch_ % cfg_.checkpoint_every == 0) {
            std::ostringstream name;
            name << "epoch_" << std::setw(4) << std::setfill('0') << epoch_ << ".ckpt";
            write_checkpoint(name.str());
        }
    }
    if (log.is_open()) log.flush();
    if (!opts.out_dir.empty()) write_checkpoint("final.ckpt");
    return history;
}

// Checkpoint layout (CBOR): schema fields, config echo, counters, named weight
// arrays with shapes, Adam moments and the four random streams.

namespace {

std::vector<std::uint8_t> to_bytes(const Matrix& m) {
    std::vector<std::uint8_t> out(static_cast<std::size_t>(m.size()) * sizeof(double));
    std::memcpy(out.data(), m.data(), out.size());
    return out;
}

json pack(const nn::ParameterList& params) {
    json arr = json::array();
    for (const auto* p : params)
        arr.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}, {"data", json::binary(to_bytes(p->value))}});
    return arr;
}

void fill(Matrix& m, const json& entry, const std::string& where) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    const auto& bytes = entry.at("data").get_binary();
    if (rows != m.rows() || cols != m.cols() || bytes.size() != static_cast<std::size_t>(m.size()) * sizeof(double))
        throw CheckpointError("shape mismatch for " + where);
    std::memcpy(m.data(), bytes.data(), bytes.size());
}

void unpack(const nn::ParameterList& params, const json& arr) {
    if (arr.size() != params.size()) throw CheckpointError("parameter count mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (arr[i].at("name").get<std::string>() != params[i]->name)
            throw CheckpointError("expected parameter " + params[i]->name + ", found " + arr[i].at("name").get<std::string>());
        fill(params[i]->value, arr[i], params[i]->name);
    }
}

json pack_adam(const nn::Adam& opt) {
    json m = json::array();
    json v = json::array();
    for (const auto& x : opt.first_moments()) m.push_back({{"rows", x.rows()}, {"cols", x.cols()}, {"data", json::binary(to_bytes(x))}});
    for (const auto& x : opt.second_moments()) v.push_back({{"rows", x.rows()}, {"cols", x.cols()}, {"data", json::binary(to_bytes(x))}});
    return {{"t", opt.steps()}, {"m", m}, {"v", v}};
}

void unpack_adam(nn::Adam& opt, const json& j) {
    auto& m = opt.first_moments();
    auto& v = opt.second_moments();
    if (j.at("m").size() != m.size() || j.at("v").size() != v.size()) throw CheckpointError("optimizer state size mismatch");
    for (std::size_t i = 0; i < m.size(); ++i) {
        fill(m[i], j.at("m")[i], "adam.m");
        fill(v[i], j.at("v")[i], "adam.v");
    }
    opt.set_steps(j.at("t").get<long long>());
}

std::string rng_state(const Rng& r) {
    std::ostringstream out;
    out << r;
    return out.str();
}

void restore_rng(Rng& r, const json& j) {
    std::istringstream in(j.get<std::string>());
    in >> r;
    if (!in) throw CheckpointError("corrupt random generator state");
}

}  // namespace

void Trainer::save_checkpoint(const fs::path& path) const {
    auto& self = const_cast<Trainer&>(*this);
    json j;
    j["schema"] = "autotcl-checkpoint";
    j["schema_version"] = kCheckpointSchemaVersion;
    j["config"] = to_json(cfg_);
    j["in_channels"] = in_channels_;
    j["epoch"] = epoch_;
    j["step"] = step_;
    j["aug_updates"] = aug_updates_;
    j["enc_updates"] = enc_updates_;
    j["encoder"] = pack(self.encoder_.parameters());
    j["aug"] = pack(self.aug_.parameters());
    j["enc_opt"] = pack_adam(enc_opt_);
    j["aug_opt"] = pack_adam(aug_opt_);
    j["rng"] = {{"data", rng_state(rng_data_)},
                {"eta", rng_state(rng_eta_)},
                {"concrete", rng_state(rng_concrete_)},
                {"triplet", rng_state(rng_triplet_)}};
    const auto bytes = json::to_cbor(j);
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("failed writing checkpoint " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place: " + ec.message());
}

std::unique_ptr<Trainer> Trainer::load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j;
    try {
        j = json::from_cbor(bytes);
    } catch (const json::exception& e) {
        throw CheckpointError("unreadable checkpoint (expected schema version " + std::to_string(kCheckpointSchemaVersion) +
                              "): " + e.what());
    }
    try {
        if (j.value("schema", std::string()) != "autotcl-checkpoint") throw CheckpointError("not an autotcl checkpoint");
        const int version = j.at("schema_version").get<int>();
        if (version != kCheckpointSchemaVersion)
            throw CheckpointError("schema version mismatch: expected " + std::to_string(kCheckpointSchemaVersion) +
                                  ", found " + std::to_string(version));
        auto t = std::make_unique<Trainer>(config_from_json(j.at("config")), j.at("in_channels").get<int>());
        unpack(t->encoder_.parameters(), j.at("encoder"));
        unpack(t->aug_.parameters(), j.at("aug"));
        unpack_adam(t->enc_opt_, j.at("enc_opt"));
        unpack_adam(t->aug_opt_, j.at("aug_opt"));
        restore_rng(t->rng_data_, j.at("rng").at("data"));
        restore_rng(t->rng_eta_, j.at("rng").at("eta"));
        restore_rng(t->rng_concrete_, j.at("rng").at("concrete"));
        restore_rng(t->rng_triplet_, j.at("rng").at("triplet"));
        t->epoch_ = j.at("epoch").get<int>();
        t->step_ = j.at("step").get<long long>();
        t->aug_updates_ = j.at("aug_updates").get<long long>();
        t->enc_updates_ = j.at("enc_updates").get<long long>();
        return t;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint config invalid: ") + e.what());
    }
}

}  // namespace autotcl
