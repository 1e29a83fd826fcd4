#pragma once

#include "autotcl/nn.hpp"

#include <vector>

namespace autotcl {

struct EncoderConfig {
    int depth = 10;
    int hidden_dim = 64;
    int repr_dim = 320;
    double dropout = 0.1;
    double mask_prob = 0.5;  // probability that a timestamp is zeroed by eta

    void validate() const;
};

/// Input positions seen by one output position: 1 + sum_l (kernel - 1) * 2^l.
int receptive_field(const EncoderConfig& cfg);

struct Representation {
    Matrix per_step;  // T x D
    Vector pooled;    // D, max over time
};

/// Representations of a stacked batch.
struct BatchRepresentation {
    int length = 0;
    Matrix per_step;  // (B*T) x D
    Matrix pooled;    // B x D
};

struct EncoderTrace {
    nn::StackTrace stack;
    Matrix dropout_mask;  // empty when dropout was not applied
    Matrix head_input;
    std::vector<Eigen::Index> argmax;  // B*D row indices of the pooled maxima
};

struct EncodeOptions {
    bool apply_eta = false;  // random timestamp masking after the input layer
    bool dropout = false;    // training-time dropout before the output head
};

class Encoder {
public:
    Encoder() = default;
    Encoder(int in_channels, EncoderConfig cfg);

    void init(Rng& rng);
    const EncoderConfig& config() const { return cfg_; }
    int in_channels() const { return in_channels_; }

    /// `rng` is only consulted when eta or dropout is active.
    BatchRepresentation forward(const Matrix& x, int length, EncodeOptions opts, Rng* rng,
                                EncoderTrace* trace) const;

    /// Single T x F window; eta optional, dropout off.
    Representation encode(const Matrix& x, bool apply_eta, Rng& rng) const;

    /// Backpropagates dL/d(per_step) and dL/d(pooled); either may be empty.
    /// Returns dL/dx. Parameter gradients accumulate only when `accumulate` is set.
    Matrix backward(const EncoderTrace& trace, const Matrix& grad_per_step, const Matrix& grad_pooled,
                    bool accumulate);

    nn::ParameterList parameters();

private:
    int in_channels_ = 0;
    EncoderConfig cfg_;
    nn::DilatedStack stack_;
    nn::Linear head_;
};

}  // namespace autotcl
