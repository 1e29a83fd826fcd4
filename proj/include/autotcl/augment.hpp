#pragma once

// Parametric augmentation: a shared dilated-convolution trunk with a
// factorization head (Bernoulli locations pi, relaxed to hard-concrete
// samples h) and a transformation head (strictly non-zero g). A view is
// v* = (g * h) * x with the per-timestamp masks broadcast over channels.

#include "autotcl/nn.hpp"

#include <cstdint>
#include <span>

namespace autotcl {

struct HardConcreteParams {
    double tau = 0.5;
    double gamma = -0.1;
    double zeta = 1.1;

    /// Throws ValidationError unless gamma < 0 < 1 < zeta and tau > 0.
    void validate() const;
};

/// pi is clamped to [kPiClamp, 1 - kPiClamp] before taking its logit.
inline constexpr double kPiClamp = 1e-6;
inline constexpr double kDefaultGFloor = 0.05;

double sigmoid(double x);
double logit(double p);

/// Stretched-and-clipped binary concrete sample for location pi and uniform draw eps.
double concrete_sample(double pi, double eps, const HardConcreteParams& p);

/// d(sample)/d(alpha) with eps held fixed; zero where the clip is active.
double concrete_sample_dalpha(double alpha, double eps, const HardConcreteParams& p);

/// P(h = 0) = sigmoid(tau * log(-gamma / zeta) - alpha).
double hard_concrete_prob_zero(double pi, const HardConcreteParams& p);

/// P(h = 1) = 1 - sigmoid(tau * log((1 - gamma) / (zeta - 1)) - alpha).
double hard_concrete_prob_one(double pi, const HardConcreteParams& p);

/// Expected number of non-zero mask entries, sum_t sigmoid(alpha_t - tau * log(-gamma / zeta)).
double expected_l0(std::span<const double> pi, const HardConcreteParams& p);

/// Gradient of expected_l0 with respect to the logits alpha_t.
Vector expected_l0_grad_alpha(std::span<const double> alpha, const HardConcreteParams& p);

/// Masks for one window (length T) or for a stacked batch (length B*T).
struct MaskPair {
    Vector pi;
    Vector h;
    Vector g;
    Vector alpha;
};

struct AugmentedView {
    Matrix v;
    Matrix v_star;
    MaskPair masks;
    std::uint64_t noise_seed = 0;
};

enum class AugMode { train, eval };

struct AugmentationConfig {
    int depth = 2;
    int hidden_dim = 64;
    HardConcreteParams concrete;
    double g_floor = kDefaultGFloor;
    bool force_h_one = false;  // ablation: whole instance is informative
    bool force_g_one = false;  // ablation: identity transformation
};

struct AugTrace {
    nn::StackTrace stack;
    Matrix features;  // trunk output, (B*T) x hidden
    Vector pi_raw;    // sigmoid of the factorization logits, before clamping
    Vector eps;       // uniform draws (train mode only)
    Vector r;         // transformation head pre-activation
    AugMode mode = AugMode::train;
};

/// g_t = 1 + tanh(r_t) * (1 - g_floor), always within [g_floor, 2 - g_floor].
double nonzero_map(double r, double g_floor);

class AugmentationNetwork {
public:
    AugmentationNetwork() = default;
    AugmentationNetwork(int in_channels, AugmentationConfig cfg);

    void init(Rng& rng);
    const AugmentationConfig& config() const { return cfg_; }
    AugmentationConfig& config() { return cfg_; }

    /// Masks for a stacked batch. `rng` is required in train mode.
    MaskPair forward(const Matrix& x, int length, AugMode mode, Rng* rng, AugTrace* trace) const;

    /// Single window convenience wrapper (x is T x F).
    MaskPair aug_forward(const Matrix& x, AugMode mode, Rng& rng) const;

    /// Accumulates parameter gradients from dL/dh, dL/dg and a direct dL/dalpha term.
    void backward(const AugTrace& trace, const Vector& grad_h, const Vector& grad_g, const Vector& grad_alpha);

    nn::ParameterList parameters();
    nn::Linear& factor_head() { return factor_head_; }
    nn::Linear& transform_head() { return transform_head_; }

private:
    AugmentationConfig cfg_;
    nn::DilatedStack trunk_;
    nn::Linear factor_head_;
    nn::Linear transform_head_;
};

/// v* = broadcast(g * h) * x. Throws InvariantError if any |g_t| < g_floor.
AugmentedView compose_view(const Matrix& x, const MaskPair& masks, double g_floor = kDefaultGFloor);

/// Batched v* for (B*T) x F inputs without building an AugmentedView.
Matrix compose_rows(const Matrix& x, const Vector& h, const Vector& g);

/// dL/dh_t and dL/dg_t given dL/dv*.
void compose_backward(const Matrix& x, const Vector& h, const Vector& g, const Matrix& grad_vstar,
                      Vector& grad_h, Vector& grad_g);

struct StaticPolicy {
    enum class Kind { cutout, jitter, scaling, random_aug };
    Kind kind = Kind::cutout;
    double param = 0.5;  // cutout fraction, jitter sigma or scale factor
};

/// Parameter ranges for random_aug.
inline constexpr double kRandomCutoutMin = 0.3;
inline constexpr double kRandomCutoutMax = 0.8;
inline constexpr double kRandomJitterMin = 0.3;
inline constexpr double kRandomJitterMax = 1.0;

/// Classic augmentations written as (h, g) masks plus optional additive noise.
AugmentedView static_augment(const Matrix& x, const StaticPolicy& policy, Rng& rng);

}  // namespace autotcl
