#pragma once

// Minimal dense building blocks with hand-written backward passes.
//
// Activations for a batch of B windows of length T are stored as one
// (B*T) x C row-major matrix; window b occupies rows [b*T, (b+1)*T).
// Layers never cache activations themselves: forward passes write what the
// backward pass needs into a caller-owned trace, so frozen networks can be
// evaluated from several threads at once.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace autotcl {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Rng = std::mt19937_64;

/// Uniform draw on the open interval (0, 1) from 53 random bits.
double uniform_open(Rng& rng);

/// Independent generator for a named purpose ("data", "eta", "concrete", ...).
Rng make_stream(std::uint64_t seed, std::string_view name);

namespace nn {

struct Parameter {
    std::string name;
    Matrix value;
    Matrix grad;

    Parameter() = default;
    Parameter(std::string n, Eigen::Index rows, Eigen::Index cols)
        : name(std::move(n)), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

    void zero_grad() { grad.setZero(); }
};

using ParameterList = std::vector<Parameter*>;

void zero_grads(const ParameterList& params);

/// Order-sensitive FNV-1a digest over the raw bytes of every parameter value.
std::uint64_t checksum(const ParameterList& params);

double gelu(double x);
double gelu_derivative(double x);

/// y = x W + b, applied row-wise.
class Linear {
public:
    Linear() = default;
    Linear(const std::string& name, int in, int out);

    void init(Rng& rng);
    Matrix forward(const Matrix& x) const;
    /// Returns dL/dx. Parameter gradients are added only when `accumulate` is set.
    Matrix backward(const Matrix& x, const Matrix& grad_out, bool accumulate);

    ParameterList parameters() { return {&weight, &bias}; }

    Parameter weight;  // in x out
    Parameter bias;    // 1 x out
};

/// Same-length dilated 1-D convolution, kernel 3, zero padding per window.
class DilatedConv1d {
public:
    DilatedConv1d() = default;
    DilatedConv1d(const std::string& name, int channels, int dilation);

    void init(Rng& rng);
    int dilation() const { return dilation_; }

    /// Unfolds x into (B*T) x (3*C) columns; tap k reads row t + (k-1)*dilation.
    Matrix im2col(const Matrix& x, int length) const;
    Matrix forward_columns(const Matrix& columns) const;
    /// Returns dL/dx given the cached columns.
    Matrix backward(const Matrix& columns, const Matrix& grad_out, int length, bool accumulate);

    ParameterList parameters() { return {&weight, &bias}; }

    static constexpr int kKernel = 3;

    Parameter weight;  // (3*C) x C
    Parameter bias;    // 1 x C

private:
    int channels_ = 0;
    int dilation_ = 1;
};

struct StackTrace {
    int length = 0;
    Matrix input;
    Matrix projected;             // input layer output before the row mask
    Vector row_mask;              // empty when no mask was applied
    std::vector<Matrix> block_in; // residual stream entering each block
    std::vector<Matrix> columns;  // unfolded gelu(block_in)
    Matrix output;
};

/// Input projection followed by residual blocks h <- h + conv_d(gelu(h)),
/// with dilation 2^l in block l. An optional per-row multiplier is applied
/// right after the input layer.
class DilatedStack {
public:
    DilatedStack() = default;
    DilatedStack(const std::string& prefix, int in_channels, int hidden, int depth);

    void init(Rng& rng);
    int depth() const { return static_cast<int>(blocks_.size()); }
    int hidden() const { return hidden_; }

    Matrix forward(const Matrix& x, int length, const Vector* row_mask, StackTrace* trace) const;
    Matrix backward(const StackTrace& trace, const Matrix& grad_out, bool accumulate);

    ParameterList parameters();

private:
    int hidden_ = 0;
    Linear input_;
    std::vector<DilatedConv1d> blocks_;
};

/// Adam with bias correction; one instance per network.
class Adam {
public:
    Adam() = default;
    Adam(ParameterList params, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    void step();
    long long steps() const { return t_; }
    double learning_rate() const { return lr_; }

    // Exposed for checkpointing.
    std::vector<Matrix>& first_moments() { return m_; }
    std::vector<Matrix>& second_moments() { return v_; }
    const std::vector<Matrix>& first_moments() const { return m_; }
    const std::vector<Matrix>& second_moments() const { return v_; }
    void set_steps(long long t) { t_ = t; }

private:
    ParameterList params_;
    std::vector<Matrix> m_;
    std::vector<Matrix> v_;
    double lr_ = 1e-3;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long long t_ = 0;
};

}  // namespace nn
}  // namespace autotcl
