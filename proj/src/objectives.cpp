#include "autotcl/objectives.hpp"

#include "autotcl/errors.hpp"

#include <cmath>

namespace autotcl {

PriLoss pri_loss(const Matrix& z_x, const Matrix& z_vstar, const Matrix& pi, double beta,
                 const HardConcreteParams& p) {
    const Eigen::Index b = z_x.rows();
    if (b == 0) throw ValidationError("pri_loss needs a non-empty batch");
    if (z_vstar.rows() != b || pi.rows() != b) throw ValidationError("pri_loss batch sizes differ");
    if (z_vstar.cols() != z_x.cols()) throw ValidationError("pri_loss embedding widths differ");
    if (beta < 0.0) throw ValidationError("beta must be >= 0");
    const Eigen::Index t = pi.cols();

    PriLoss out;
    out.grad_alpha.resize(b, t);
    out.grad_pi.resize(b, t);
    double l0 = 0.0;
    for (Eigen::Index i = 0; i < b; ++i) {
        const Vector row = pi.row(i).transpose();
        l0 += expected_l0({row.data(), static_cast<std::size_t>(t)}, p) / static_cast<double>(t);
        Vector alpha(t);
        for (Eigen::Index k = 0; k < t; ++k) alpha(k) = logit(row(k));
        const Vector g = expected_l0_grad_alpha({alpha.data(), static_cast<std::size_t>(t)}, p);
        const double scale = beta / static_cast<double>(b * t);
        out.grad_alpha.row(i) = scale * g.transpose();
        out.grad_pi.row(i) = (scale * g.array() / (row.array() * (1.0 - row.array()))).transpose();
    }
    out.l0_term = beta * l0 / static_cast<double>(b);

    const Eigen::RowVectorXd diff = z_x.colwise().mean() - z_vstar.colwise().mean();
    out.mmd_term = diff.squaredNorm();
    const Eigen::RowVectorXd g = 2.0 * diff / static_cast<double>(b);
    out.grad_z_x = g.replicate(b, 1);
    out.grad_z_v = (-g).replicate(b, 1);
    out.value = out.l0_term + out.mmd_term;
    return out;
}

std::vector<Triplet> sample_triplets(std::size_t batch, std::size_t length, Rng& rng) {
    if (length < 3) throw ValidationError("temporal triplets need T >= 3");
    const double far = static_cast<double>(length) / 4.0;
    const auto pick = [&rng](std::size_t n) {
        return static_cast<std::size_t>(std::floor(uniform_open(rng) * static_cast<double>(n)));
    };
    std::vector<Triplet> out;
    out.reserve(batch);
    std::vector<int> candidates;
    for (std::size_t i = 0; i < batch; ++i) {
        Triplet tr;
        tr.anchor = static_cast<int>(pick(length));
        if (tr.anchor == 0)
            tr.positive = 1;
        else if (tr.anchor == static_cast<int>(length) - 1)
            tr.positive = tr.anchor - 1;
        else
            tr.positive = tr.anchor + (uniform_open(rng) < 0.5 ? -1 : 1);
        candidates.clear();
        for (int n = 0; n < static_cast<int>(length); ++n)
            if (std::abs(n - tr.anchor) > far) candidates.push_back(n);
        if (candidates.empty())
            throw ValidationError("no index is far enough from the anchor for T = " + std::to_string(length));
        tr.negative = candidates[pick(candidates.size())];
        out.push_back(tr);
    }
    return out;
}

namespace {
double sign(double v) { return (v > 0.0) - (v < 0.0); }
}  // namespace

TripletLoss temporal_triplet_loss(const Matrix& h, std::span<const Triplet> triplets) {
    const Eigen::Index b = h.rows();
    if (b == 0 || static_cast<std::size_t>(b) != triplets.size())
        throw ValidationError("one triplet per mask row is required");
    TripletLoss out;
    out.grad_h = Matrix::Zero(b, h.cols());
    const double inv_b = 1.0 / static_cast<double>(b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const auto& [a, p, n] = triplets[static_cast<std::size_t>(i)];
        if (a < 0 || p < 0 || n < 0 || a >= h.cols() || p >= h.cols() || n >= h.cols())
            throw ValidationError("triplet index outside the mask");
        const double dp = h(i, a) - h(i, p);
        const double dn = h(i, a) - h(i, n);
        out.value += (std::abs(dp) - std::abs(dn)) * inv_b;
        out.grad_h(i, a) += (sign(dp) - sign(dn)) * inv_b;
        out.grad_h(i, p) -= sign(dp) * inv_b;
        out.grad_h(i, n) += sign(dn) * inv_b;
    }
    return out;
}

TripletLoss temporal_triplet_loss(const Matrix& h, Rng& rng) {
    const auto triplets = sample_triplets(static_cast<std::size_t>(h.rows()), static_cast<std::size_t>(h.cols()), rng);
    return temporal_triplet_loss(h, triplets);
}

CosineSimilarity cosine_similarity(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw ValidationError("embedding widths differ");
    CosineSimilarity cs;
    cs.a_norm = a.rowwise().norm();
    cs.b_norm = b.rowwise().norm();
    constexpr double kTiny = 1e-12;
    if ((cs.a_norm.array() < kTiny).any() || (cs.b_norm.array() < kTiny).any())
        throw NumericalError("zero-norm embedding in cosine similarity");
    cs.a_hat = a.array().colwise() / cs.a_norm.array();
    cs.b_hat = b.array().colwise() / cs.b_norm.array();
    cs.sim = cs.a_hat * cs.b_hat.transpose();
    return cs;
}

void cosine_similarity_backward(const CosineSimilarity& cs, const Matrix& grad_sim, Matrix& grad_a, Matrix& grad_b) {
    const Matrix g_ahat = grad_sim * cs.b_hat;
    const Matrix g_bhat = grad_sim.transpose() * cs.a_hat;
    const Vector ra = (g_ahat.array() * cs.a_hat.array()).rowwise().sum();
    const Vector rb = (g_bhat.array() * cs.b_hat.array()).rowwise().sum();
    grad_a = (g_ahat - cs.a_hat.cwiseProduct(ra.replicate(1, cs.a_hat.cols()))).array().colwise() / cs.a_norm.array();
    grad_b = (g_bhat - cs.b_hat.cwiseProduct(rb.replicate(1, cs.b_hat.cols()))).array().colwise() / cs.b_norm.array();
}

PairLoss global_contrast_loss(const Matrix& z_x, const Matrix& z_v, double temperature) {
    const Eigen::Index b = z_x.rows();
    if (b == 0 || z_v.rows() != b) throw ValidationError("global contrast needs matched non-empty batches");
    if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
    if (!z_x.allFinite() || !z_v.allFinite()) throw NumericalError("non-finite embedding");
    const CosineSimilarity cs = cosine_similarity(z_x, z_v);
    const Matrix s = cs.sim / temperature;

    PairLoss out;
    Matrix grad_s(b, b);
    for (Eigen::Index i = 0; i < b; ++i) {
        const double m = s.row(i).maxCoeff();
        const Eigen::RowVectorXd e = (s.row(i).array() - m).exp();
        const double z = e.sum();
        out.value -= (s(i, i) - (m + std::log(z))) / static_cast<double>(b);
        grad_s.row(i) = e / z / static_cast<double>(b);
        grad_s(i, i) -= 1.0 / static_cast<double>(b);
    }
    cosine_similarity_backward(cs, grad_s / temperature, out.grad_a, out.grad_b);
    return out;
}

LocalLoss local_contrast_loss(const Matrix& per_step, int length, int segment_len, double temperature) {
    if (segment_len < 1) throw ValidationError("segment length must be >= 1");
    if (length < 3 * segment_len)
        throw ValidationError("local contrast needs T >= 3L (T = " + std::to_string(length) +
                              ", L = " + std::to_string(segment_len) + ")");
    if (per_step.rows() % length != 0 || per_step.rows() == 0) throw ValidationError("rows are not whole views");
    if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
    const Eigen::Index views = per_step.rows() / length;
    const Eigen::Index d = per_step.cols();
    const int k = length / segment_len;

    LocalLoss out;
    out.grad_per_step = Matrix::Zero(per_step.rows(), d);
    for (Eigen::Index v = 0; v < views; ++v) {
        Matrix seg(k, d);
        std::vector<Eigen::Index> argmax(static_cast<std::size_t>(k * d));
        for (int s = 0; s < k; ++s) {
            for (Eigen::Index j = 0; j < d; ++j) {
                Eigen::Index best = v * length + s * segment_len;
                for (int t = 1; t < segment_len; ++t) {
                    const Eigen::Index r = v * length + s * segment_len + t;
                    if (per_step(r, j) > per_step(best, j)) best = r;
                }
                seg(s, j) = per_step(best, j);
                argmax[static_cast<std::size_t>(s * d + j)] = best;
            }
        }
        const CosineSimilarity cs = cosine_similarity(seg, seg);
        const Matrix sim = cs.sim / temperature;

        std::vector<int> anchors;
        for (int s = 0; s < k; ++s)
            if (s >= 2 || s + 2 < k) anchors.push_back(s);
        const double w = 1.0 / (static_cast<double>(anchors.size()) * static_cast<double>(views));

        Matrix grad_sim = Matrix::Zero(k, k);
        std::vector<int> cols;
        for (int s : anchors) {
            const int p = s + 1 < k ? s + 1 : s - 1;
            cols.assign(1, p);
            for (int j = 0; j < k; ++j)
                if (std::abs(j - s) >= 2) cols.push_back(j);
            double m = sim(s, p);
            for (int j : cols) m = std::max(m, sim(s, j));
            double z = 0.0;
            for (int j : cols) z += std::exp(sim(s, j) - m);
            out.value -= w * (sim(s, p) - (m + std::log(z)));
            for (int j : cols) grad_sim(s, j) += w * std::exp(sim(s, j) - m) / z;
            grad_sim(s, p) -= w;
        }
        Matrix ga;
        Matrix gb;
        cosine_similarity_backward(cs, grad_sim / temperature, ga, gb);
        const Matrix grad_seg = ga + gb;
        for (int s = 0; s < k; ++s)
            for (Eigen::Index j = 0; j < d; ++j)
                out.grad_per_step(argmax[static_cast<std::size_t>(s * d + j)], j) += grad_seg(s, j);
    }
    return out;
}

}  // namespace autotcl
