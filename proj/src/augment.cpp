#include "autotcl/augment.hpp"

#include "autotcl/errors.hpp"

#include <algorithm>
#include <cmath>

namespace autotcl {

void HardConcreteParams::validate() const {
    if (!(tau > 0.0)) throw ValidationError("hard concrete tau must be > 0");
    if (!(gamma < 0.0)) throw ValidationError("hard concrete gamma must be < 0");
    if (!(zeta > 1.0)) throw ValidationError("hard concrete zeta must be > 1");
}

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

namespace {

double stretched_from_logit(double alpha, double eps, const HardConcreteParams& p, double* s_out = nullptr) {
    const double s = sigmoid((logit(eps) + alpha) / p.tau);
    if (s_out) *s_out = s;
    return s * (p.zeta - p.gamma) + p.gamma;
}

double clip01(double u) { return std::min(1.0, std::max(0.0, u)); }

void require_open_unit(double v, const char* what) {
    if (!(v > 0.0 && v < 1.0)) throw DomainError(std::string(what) + " must lie strictly inside (0, 1)");
}

}  // namespace

double concrete_sample(double pi, double eps, const HardConcreteParams& p) {
    require_open_unit(pi, "pi");
    require_open_unit(eps, "eps");
    return clip01(stretched_from_logit(logit(pi), eps, p));
}

double concrete_sample_dalpha(double alpha, double eps, const HardConcreteParams& p) {
    double s = 0.0;
    const double u = stretched_from_logit(alpha, eps, p, &s);
    if (u <= 0.0 || u >= 1.0) return 0.0;
    return (p.zeta - p.gamma) * s * (1.0 - s) / p.tau;
}

double hard_concrete_prob_zero(double pi, const HardConcreteParams& p) {
    require_open_unit(pi, "pi");
    return sigmoid(p.tau * std::log(-p.gamma / p.zeta) - logit(pi));
}

double hard_concrete_prob_one(double pi, const HardConcreteParams& p) {
    require_open_unit(pi, "pi");
    return 1.0 - sigmoid(p.tau * std::log((1.0 - p.gamma) / (p.zeta - 1.0)) - logit(pi));
}

double expected_l0(std::span<const double> pi, const HardConcreteParams& p) {
    const double shift = p.tau * std::log(-p.gamma / p.zeta);
    double total = 0.0;
    for (double v : pi) {
        require_open_unit(v, "pi");
        total += sigmoid(logit(v) - shift);
    }
    return total;
}

Vector expected_l0_grad_alpha(std::span<const double> alpha, const HardConcreteParams& p) {
    const double shift = p.tau * std::log(-p.gamma / p.zeta);
    Vector g(static_cast<Eigen::Index>(alpha.size()));
    for (std::size_t i = 0; i < alpha.size(); ++i) {
        const double s = sigmoid(alpha[i] - shift);
        g(static_cast<Eigen::Index>(i)) = s * (1.0 - s);
    }
    return g;
}

double nonzero_map(double r, double g_floor) { return 1.0 + std::tanh(r) * (1.0 - g_floor); }

AugmentationNetwork::AugmentationNetwork(int in_channels, AugmentationConfig cfg)
    : cfg_(cfg),
      trunk_("aug", in_channels, cfg.hidden_dim, cfg.depth),
      factor_head_("aug.factor_head", cfg.hidden_dim, 1),
      transform_head_("aug.transform_head", cfg.hidden_dim, 1) {
    cfg_.concrete.validate();
    if (!(cfg_.g_floor > 0.0 && cfg_.g_floor < 1.0)) throw ValidationError("g_floor must lie in (0, 1)");
}

void AugmentationNetwork::init(Rng& rng) {
    trunk_.init(rng);
    factor_head_.init(rng);
    transform_head_.init(rng);
}

nn::ParameterList AugmentationNetwork::parameters() {
    auto out = trunk_.parameters();
    for (auto* p : factor_head_.parameters()) out.push_back(p);
    for (auto* p : transform_head_.parameters()) out.push_back(p);
    return out;
}

MaskPair AugmentationNetwork::forward(const Matrix& x, int length, AugMode mode, Rng* rng, AugTrace* trace) const {
    if (!x.allFinite()) throw NumericalError("non-finite input to the augmentation network", 0);
    if (mode == AugMode::train && !rng) throw ValidationError("train mode needs a generator");
    nn::StackTrace* st = trace ? &trace->stack : nullptr;
    Matrix features = trunk_.forward(x, length, nullptr, st);
    const Vector a = factor_head_.forward(features).col(0);
    const Vector r = transform_head_.forward(features).col(0);
    const int head_layer = trunk_.depth() + 1;
    if (!a.allFinite() || !r.allFinite()) throw NumericalError("non-finite head output", head_layer);

    const Eigen::Index n = x.rows();
    MaskPair m;
    m.pi.resize(n);
    m.alpha.resize(n);
    m.h.resize(n);
    m.g.resize(n);
    Vector pi_raw(n);
    Vector eps = mode == AugMode::train ? Vector(n) : Vector();
    for (Eigen::Index i = 0; i < n; ++i) {
        pi_raw(i) = sigmoid(a(i));
        m.pi(i) = std::clamp(pi_raw(i), kPiClamp, 1.0 - kPiClamp);
        m.alpha(i) = logit(m.pi(i));
        if (mode == AugMode::train) {
            eps(i) = uniform_open(*rng);
            m.h(i) = clip01(stretched_from_logit(m.alpha(i), eps(i), cfg_.concrete));
        } else {
            m.h(i) = m.pi(i) >= 0.5 ? 1.0 : 0.0;
        }
        m.g(i) = nonzero_map(r(i), cfg_.g_floor);
    }
    if (cfg_.force_h_one) m.h.setOnes();
    if (cfg_.force_g_one) m.g.setOnes();

    if (trace) {
        trace->features = std::move(features);
        trace->pi_raw = std::move(pi_raw);
        trace->eps = std::move(eps);
        trace->r = r;
        trace->mode = mode;
    }
    return m;
}

MaskPair AugmentationNetwork::aug_forward(const Matrix& x, AugMode mode, Rng& rng) const {
    return forward(x, static_cast<int>(x.rows()), mode, &rng, nullptr);
}

void AugmentationNetwork::backward(const AugTrace& trace, const Vector& grad_h, const Vector& grad_g,
                                   const Vector& grad_alpha) {
    const Eigen::Index n = trace.features.rows();
    Matrix grad_a = Matrix::Zero(n, 1);
    Matrix grad_r = Matrix::Zero(n, 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double pr = trace.pi_raw(i);
        const bool clamped = pr < kPiClamp || pr > 1.0 - kPiClamp;
        if (!cfg_.force_h_one && !clamped) {
            // alpha = a inside the clamp range
            double d_alpha = grad_alpha.size() ? grad_alpha(i) : 0.0;
            if (trace.mode == AugMode::train && grad_h.size()) {
                const double alpha = logit(std::clamp(pr, kPiClamp, 1.0 - kPiClamp));
                d_alpha += grad_h(i) * concrete_sample_dalpha(alpha, trace.eps(i), cfg_.concrete);
            }
            grad_a(i, 0) = d_alpha;
        }
        if (!cfg_.force_g_one && grad_g.size()) {
            const double t = std::tanh(trace.r(i));
            grad_r(i, 0) = grad_g(i) * (1.0 - cfg_.g_floor) * (1.0 - t * t);
        }
    }
    Matrix grad_features = factor_head_.backward(trace.features, grad_a, true);
    grad_features += transform_head_.backward(trace.features, grad_r, true);
    trunk_.backward(trace.stack, grad_features, true);
}

AugmentedView compose_view(const Matrix& x, const MaskPair& masks, double g_floor) {
    const Eigen::Index t = x.rows();
    if (masks.h.size() != t || masks.g.size() != t) throw ValidationError("mask length differs from series length");
    for (Eigen::Index i = 0; i < t; ++i)
        if (!(std::abs(masks.g(i)) >= g_floor))
            throw InvariantError("transform mask entry " + std::to_string(i) + " is below the non-zero floor");
    AugmentedView view;
    view.v_star = compose_rows(x, masks.h, masks.g);
    view.v = view.v_star;
    view.masks = masks;
    return view;
}

Matrix compose_rows(const Matrix& x, const Vector& h, const Vector& g) {
    Matrix out = x;
    out.array().colwise() *= (g.array() * h.array());
    return out;
}

void compose_backward(const Matrix& x, const Vector& h, const Vector& g, const Matrix& grad_vstar, Vector& grad_h,
                      Vector& grad_g) {
    const Vector inner = (grad_vstar.array() * x.array()).rowwise().sum();
    grad_h = inner.array() * g.array();
    grad_g = inner.array() * h.array();
}

AugmentedView static_augment(const Matrix& x, const StaticPolicy& policy, Rng& rng) {
    const Eigen::Index t = x.rows();
    MaskPair m;
    m.h = Vector::Ones(t);
    m.g = Vector::Ones(t);
    m.pi = Vector::Constant(t, 1.0 - kPiClamp);
    m.alpha = Vector::Constant(t, logit(1.0 - kPiClamp));

    StaticPolicy chosen = policy;
    if (policy.kind == StaticPolicy::Kind::random_aug) {
        if (uniform_open(rng) < 0.5) {
            chosen.kind = StaticPolicy::Kind::cutout;
            chosen.param = kRandomCutoutMin + (kRandomCutoutMax - kRandomCutoutMin) * uniform_open(rng);
        } else {
            chosen.kind = StaticPolicy::Kind::jitter;
            chosen.param = kRandomJitterMin + (kRandomJitterMax - kRandomJitterMin) * uniform_open(rng);
        }
    }

    switch (chosen.kind) {
        case StaticPolicy::Kind::cutout: {
            if (!(chosen.param > 0.0 && chosen.param < 1.0)) throw ValidationError("cutout fraction must lie in (0, 1)");
            const auto len = static_cast<Eigen::Index>(std::lround(chosen.param * static_cast<double>(t)));
            const auto start =
                static_cast<Eigen::Index>(std::floor(uniform_open(rng) * static_cast<double>(t - len + 1)));
            m.h.segment(start, len).setZero();
            m.pi.segment(start, len).setConstant(kPiClamp);
            m.alpha.segment(start, len).setConstant(logit(kPiClamp));
            return compose_view(x, m, 0.0);
        }
        case StaticPolicy::Kind::scaling: {
            if (chosen.param == 0.0) throw InvariantError("scaling factor must be non-zero");
            m.g.setConstant(chosen.param);
            return compose_view(x, m, std::min(kDefaultGFloor, std::abs(chosen.param)));
        }
        case StaticPolicy::Kind::jitter: {
            if (!(chosen.param >= 0.0)) throw ValidationError("jitter sigma must be >= 0");
            AugmentedView view = compose_view(x, m, 0.0);
            view.noise_seed = rng();
            if (chosen.param > 0.0) {
                Rng noise(view.noise_seed);
                std::normal_distribution<double> dist(0.0, chosen.param);
                for (Eigen::Index i = 0; i < view.v.size(); ++i) view.v.data()[i] += dist(noise);
            }
            return view;
        }
        case StaticPolicy::Kind::random_aug: break;
    }
    throw ValidationError("unsupported static policy");
}

}  // namespace autotcl
