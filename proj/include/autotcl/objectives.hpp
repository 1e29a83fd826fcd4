#pragma once

// Loss functions with analytic gradients with respect to their direct inputs.
// Embedding batches are B x D matrices; masks and Bernoulli locations are
// B x T matrices (one row per instance).

#include "autotcl/augment.hpp"
#include "autotcl/nn.hpp"

#include <span>
#include <vector>

namespace autotcl {

struct LossReport {
    double l_pri = 0.0;
    double l_t = 0.0;
    double l_aug = 0.0;
    double l_g = 0.0;
    double l_l = 0.0;
    double l_con = 0.0;
    int batch_size = 0;
};

struct PriLoss {
    double value = 0.0;
    double l0_term = 0.0;   // beta * mean_x expected_l0(pi_x) / T
    double mmd_term = 0.0;  // ||mean f(x) - mean f(v*)||^2
    Matrix grad_z_x;
    Matrix grad_z_v;
    Matrix grad_alpha;  // B x T, with respect to the logits of pi
    Matrix grad_pi;     // B x T
};

/// PRI objective: normalized expected L0 of the factorization masks plus the
/// squared distance between batch-mean embeddings of x and v*.
PriLoss pri_loss(const Matrix& z_x, const Matrix& z_vstar, const Matrix& pi, double beta,
                 const HardConcreteParams& p);

struct Triplet {
    int anchor = 0;
    int positive = 0;
    int negative = 0;
};

/// One (anchor, neighbour, distant) triple per instance; the distant index
/// satisfies |n - a| > T / 4.
std::vector<Triplet> sample_triplets(std::size_t batch, std::size_t length, Rng& rng);

struct TripletLoss {
    double value = 0.0;
    Matrix grad_h;  // B x T
};

/// mean_x (|h_a - h_p| - |h_a - h_n|) for pre-sampled triples.
TripletLoss temporal_triplet_loss(const Matrix& h, std::span<const Triplet> triplets);
TripletLoss temporal_triplet_loss(const Matrix& h, Rng& rng);

inline double aug_loss(double pri, double triplet, double lambda) { return pri + lambda * triplet; }

struct PairLoss {
    double value = 0.0;
    Matrix grad_a;
    Matrix grad_b;
};

/// InfoNCE over cosine similarities / temperature; positives on the diagonal,
/// the denominator runs over all views in the batch including the positive.
PairLoss global_contrast_loss(const Matrix& z_x, const Matrix& z_v, double temperature = 1.0);

struct LocalLoss {
    double value = 0.0;
    Matrix grad_per_step;  // (B*T) x D
};

/// Subsequence contrast inside each view: segments of length L are max-pooled,
/// the adjacent segment is the positive and segments at index distance >= 2
/// are negatives. Segments without any negative are not used as anchors.
LocalLoss local_contrast_loss(const Matrix& per_step, int length, int segment_len, double temperature = 1.0);

inline double contrastive_loss(double global, double local, double alpha) { return global + alpha * local; }

/// Cosine-similarity matrix A_hat * B_hat^T together with what its backward pass needs.
struct CosineSimilarity {
    Matrix a_hat;
    Matrix b_hat;
    Vector a_norm;
    Vector b_norm;
    Matrix sim;
};

CosineSimilarity cosine_similarity(const Matrix& a, const Matrix& b);

/// Given dL/d(sim), returns dL/da and dL/db.
void cosine_similarity_backward(const CosineSimilarity& cs, const Matrix& grad_sim, Matrix& grad_a, Matrix& grad_b);

}  // namespace autotcl
