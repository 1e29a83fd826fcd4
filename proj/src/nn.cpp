#include "autotcl/nn.hpp"

#include "autotcl/errors.hpp"

#include <cmath>
#include <cstring>

namespace autotcl {

double uniform_open(Rng& rng) {
    constexpr double kScale = 1.0 / 9007199254740992.0;  // 2^-53
    return (static_cast<double>(rng() >> 11) + 0.5) * kScale;
}

Rng make_stream(std::uint64_t seed, std::string_view name) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed),
                                     static_cast<std::uint32_t>(seed >> 32)};
    for (char c : name) words.push_back(static_cast<unsigned char>(c));
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

namespace nn {

void zero_grads(const ParameterList& params) {
    for (auto* p : params) p->zero_grad();
}

std::uint64_t checksum(const ParameterList& params) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto* p : params) {
        const auto* bytes = reinterpret_cast<const unsigned char*>(p->value.data());
        const std::size_t n = static_cast<std::size_t>(p->value.size()) * sizeof(double);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= bytes[i];
            h *= 1099511628211ULL;
        }
    }
    return h;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }

double gelu_derivative(double x) {
    const double cdf = 0.5 * (1.0 + std::erf(x * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * x * x) * 0.5 * M_2_SQRTPI * M_SQRT1_2;
    return cdf + x * pdf;
}

namespace {

void fan_in_uniform(Matrix& m, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
}

}  // namespace

Linear::Linear(const std::string& name, int in, int out)
    : weight(name + ".weight", in, out), bias(name + ".bias", 1, out) {}

void Linear::init(Rng& rng) {
    const int fan_in = static_cast<int>(weight.value.rows());
    fan_in_uniform(weight.value, fan_in, rng);
    fan_in_uniform(bias.value, fan_in, rng);
}

Matrix Linear::forward(const Matrix& x) const {
    Matrix y = x * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
}

Matrix Linear::backward(const Matrix& x, const Matrix& grad_out, bool accumulate) {
    if (accumulate) {
        weight.grad.noalias() += x.transpose() * grad_out;
        bias.grad.row(0) += grad_out.colwise().sum();
    }
    return grad_out * weight.value.transpose();
}

DilatedConv1d::DilatedConv1d(const std::string& name, int channels, int dilation)
    : weight(name + ".weight", kKernel * channels, channels),
      bias(name + ".bias", 1, channels),
      channels_(channels),
      dilation_(dilation) {}

void DilatedConv1d::init(Rng& rng) {
    fan_in_uniform(weight.value, kKernel * channels_, rng);
    fan_in_uniform(bias.value, kKernel * channels_, rng);
}

Matrix DilatedConv1d::im2col(const Matrix& x, int length) const {
    const Eigen::Index rows = x.rows();
    const Eigen::Index c = x.cols();
    const Eigen::Index windows = rows / length;
    Matrix col = Matrix::Zero(rows, kKernel * c);
    for (Eigen::Index b = 0; b < windows; ++b) {
        const Eigen::Index base = b * length;
        for (int k = 0; k < kKernel; ++k) {
            const long shift = static_cast<long>(k - 1) * dilation_;
            // destination t reads source t + shift, both inside [0, length)
            const long t0 = std::max(0L, -shift);
            const long t1 = std::min<long>(length, length - shift);
            if (t1 <= t0) continue;
            col.block(base + t0, k * c, t1 - t0, c) = x.block(base + t0 + shift, 0, t1 - t0, c);
        }
    }
    return col;
}

Matrix DilatedConv1d::forward_columns(const Matrix& columns) const {
    Matrix y = columns * weight.value;
    y.rowwise() += bias.value.row(0);
    return y;
}

Matrix DilatedConv1d::backward(const Matrix& columns, const Matrix& grad_out, int length,
                               bool accumulate) {
    if (accumulate) {
        weight.grad.noalias() += columns.transpose() * grad_out;
        bias.grad.row(0) += grad_out.colwise().sum();
    }
    const Matrix grad_col = grad_out * weight.value.transpose();
    const Eigen::Index rows = grad_out.rows();
    const Eigen::Index c = channels_;
    Matrix grad_x = Matrix::Zero(rows, c);
    const Eigen::Index windows = rows / length;
    for (Eigen::Index b = 0; b < windows; ++b) {
        const Eigen::Index base = b * length;
        for (int k = 0; k < kKernel; ++k) {
            const long shift = static_cast<long>(k - 1) * dilation_;
            const long t0 = std::max(0L, -shift);
            const long t1 = std::min<long>(length, length - shift);
            if (t1 <= t0) continue;
            grad_x.block(base + t0 + shift, 0, t1 - t0, c) += grad_col.block(base + t0, k * c, t1 - t0, c);
        }
    }
    return grad_x;
}

DilatedStack::DilatedStack(const std::string& prefix, int in_channels, int hidden, int depth)
    : hidden_(hidden), input_(prefix + ".input", in_channels, hidden) {
    blocks_.reserve(depth);
    for (int l = 0; l < depth; ++l)
        blocks_.emplace_back(prefix + ".block" + std::to_string(l), hidden, 1 << l);
}

void DilatedStack::init(Rng& rng) {
    input_.init(rng);
    for (auto& b : blocks_) b.init(rng);
}

ParameterList DilatedStack::parameters() {
    ParameterList out = input_.parameters();
    for (auto& b : blocks_) {
        auto p = b.parameters();
        out.insert(out.end(), p.begin(), p.end());
    }
    return out;
}

Matrix DilatedStack::forward(const Matrix& x, int length, const Vector* row_mask,
                             StackTrace* trace) const {
    if (x.rows() % length != 0) throw ValidationError("row count is not a multiple of the window length");
    Matrix h = input_.forward(x);
    if (trace) {
        trace->length = length;
        trace->input = x;
        trace->projected = h;
        trace->row_mask = row_mask ? *row_mask : Vector();
        trace->block_in.clear();
        trace->columns.clear();
    }
    if (row_mask) h.array().colwise() *= row_mask->array();
    if (!h.allFinite()) throw NumericalError("non-finite activation", 0);

    for (std::size_t l = 0; l < blocks_.size(); ++l) {
        const Matrix activated = h.unaryExpr([](double v) { return gelu(v); });
        Matrix col = blocks_[l].im2col(activated, length);
        Matrix next = h + blocks_[l].forward_columns(col);
        if (!next.allFinite()) throw NumericalError("non-finite activation", static_cast<int>(l) + 1);
        if (trace) {
            trace->block_in.push_back(std::move(h));
            trace->columns.push_back(std::move(col));
        }
        h = std::move(next);
    }
    if (trace) trace->output = h;
    return h;
}

Matrix DilatedStack::backward(const StackTrace& trace, const Matrix& grad_out, bool accumulate) {
    Matrix g = grad_out;
    for (int l = static_cast<int>(blocks_.size()) - 1; l >= 0; --l) {
        Matrix through = blocks_[l].backward(trace.columns[l], g, trace.length, accumulate);
        const Matrix& pre = trace.block_in[l];
        through.array() *= pre.unaryExpr([](double v) { return gelu_derivative(v); }).array();
        g += through;
    }
    if (trace.row_mask.size() > 0) g.array().colwise() *= trace.row_mask.array();
    return input_.backward(trace.input, g, accumulate);
}

Adam::Adam(ParameterList params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (auto* p : params_) {
        m_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
        v_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
}

void Adam::step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
        auto& p = *params_[i];
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * p.grad;
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * p.grad.cwiseProduct(p.grad);
        p.value.array() -= lr_ * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
    }
}

}  // namespace nn
}  // namespace autotcl
