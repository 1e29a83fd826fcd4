#include "autotcl/encoder.hpp"

#include "autotcl/errors.hpp"

namespace autotcl {

void EncoderConfig::validate() const {
    if (depth < 1) throw ValidationError("encoder depth must be >= 1");
    if (hidden_dim < 1) throw ValidationError("encoder hidden_dim must be >= 1");
    if (repr_dim < 1) throw ValidationError("encoder repr_dim must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("encoder dropout must lie in [0, 1)");
    if (!(mask_prob >= 0.0 && mask_prob <= 1.0)) throw ValidationError("encoder mask_prob must lie in [0, 1]");
}

int receptive_field(const EncoderConfig& cfg) {
    int rf = 1;
    for (int l = 0; l < cfg.depth; ++l) rf += (nn::DilatedConv1d::kKernel - 1) * (1 << l);
    return rf;
}

Encoder::Encoder(int in_channels, EncoderConfig cfg)
    : in_channels_(in_channels),
      cfg_(cfg),
      stack_("encoder", in_channels, cfg.hidden_dim, cfg.depth),
      head_("encoder.head", cfg.hidden_dim, cfg.repr_dim) {
    cfg_.validate();
}

void Encoder::init(Rng& rng) {
    stack_.init(rng);
    head_.init(rng);
}

nn::ParameterList Encoder::parameters() {
    auto out = stack_.parameters();
    for (auto* p : head_.parameters()) out.push_back(p);
    return out;
}

BatchRepresentation Encoder::forward(const Matrix& x, int length, EncodeOptions opts, Rng* rng,
                                     EncoderTrace* trace) const {
    if (length <= 0 || x.rows() % length != 0) throw ValidationError("input rows are not whole windows");
    if (x.cols() != in_channels_) throw ValidationError("encoder input has the wrong channel count");
    if (!x.allFinite()) throw NumericalError("non-finite encoder input", 0);
    const bool use_dropout = opts.dropout && cfg_.dropout > 0.0;
    if ((opts.apply_eta || use_dropout) && !rng) throw ValidationError("stochastic encoder pass needs a generator");

    const Eigen::Index rows = x.rows();
    Vector eta;
    if (opts.apply_eta) {
        eta.resize(rows);
        for (Eigen::Index i = 0; i < rows; ++i) eta(i) = uniform_open(*rng) < cfg_.mask_prob ? 0.0 : 1.0;
    }
    Matrix hidden = stack_.forward(x, length, opts.apply_eta ? &eta : nullptr, trace ? &trace->stack : nullptr);

    Matrix drop;
    if (use_dropout) {
        const double keep = 1.0 - cfg_.dropout;
        drop.resize(hidden.rows(), hidden.cols());
        for (Eigen::Index i = 0; i < drop.size(); ++i) drop.data()[i] = uniform_open(*rng) < keep ? 1.0 / keep : 0.0;
        hidden.array() *= drop.array();
    }

    BatchRepresentation out;
    out.length = length;
    out.per_step = head_.forward(hidden);
    if (!out.per_step.allFinite()) throw NumericalError("non-finite encoder output", cfg_.depth + 1);

    const Eigen::Index windows = rows / length;
    const Eigen::Index d = out.per_step.cols();
    out.pooled.resize(windows, d);
    std::vector<Eigen::Index> argmax(static_cast<std::size_t>(windows * d));
    for (Eigen::Index b = 0; b < windows; ++b) {
        for (Eigen::Index j = 0; j < d; ++j) {
            Eigen::Index best = b * length;
            double best_v = out.per_step(best, j);
            for (Eigen::Index t = 1; t < length; ++t) {
                const double v = out.per_step(b * length + t, j);
                if (v > best_v) {
                    best_v = v;
                    best = b * length + t;
                }
            }
            out.pooled(b, j) = best_v;
            argmax[static_cast<std::size_t>(b * d + j)] = best;
        }
    }
    if (trace) {
        trace->dropout_mask = std::move(drop);
        trace->head_input = std::move(hidden);
        trace->argmax = std::move(argmax);
    }
    return out;
}

Representation Encoder::encode(const Matrix& x, bool apply_eta, Rng& rng) const {
    auto batch = forward(x, static_cast<int>(x.rows()), {apply_eta, false}, &rng, nullptr);
    return {std::move(batch.per_step), batch.pooled.row(0).transpose()};
}

Matrix Encoder::backward(const EncoderTrace& trace, const Matrix& grad_per_step, const Matrix& grad_pooled,
                         bool accumulate) {
    const Eigen::Index rows = trace.head_input.rows();
    const Eigen::Index d = cfg_.repr_dim;
    Matrix g = grad_per_step.size() ? grad_per_step : Matrix::Zero(rows, d);
    if (grad_pooled.size()) {
        for (Eigen::Index b = 0; b < grad_pooled.rows(); ++b)
            for (Eigen::Index j = 0; j < d; ++j) g(trace.argmax[static_cast<std::size_t>(b * d + j)], j) += grad_pooled(b, j);
    }
    Matrix grad_hidden = head_.backward(trace.head_input, g, accumulate);
    if (trace.dropout_mask.size()) grad_hidden.array() *= trace.dropout_mask.array();
    return stack_.backward(trace.stack, grad_hidden, accumulate);
}

}  // namespace autotcl
