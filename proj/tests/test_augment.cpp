#include "autotcl/augment.hpp"
#include "autotcl/errors.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <set>

using namespace autotcl;
using oracle::Law;

namespace {

AugmentationNetwork make_net(int channels, std::uint64_t seed, int depth = 2, int hidden = 8) {
    AugmentationConfig cfg;
    cfg.depth = depth;
    cfg.hidden_dim = hidden;
    AugmentationNetwork net(channels, cfg);
    Rng rng(seed);
    net.init(rng);
    return net;
}

void force_pi(AugmentationNetwork& net, double pi) {
    net.factor_head().weight.value.setZero();
    net.factor_head().bias.value.setConstant(std::log(pi / (1 - pi)));
}

}  // namespace

TEST_CASE("concrete_sample hand examples") {
    const HardConcreteParams p{0.5, -0.1, 1.1};
    CHECK(concrete_sample(0.5, 0.5, p) == doctest::Approx(0.5).epsilon(1e-12));
    for (double tau : {0.1, 0.5, 2.0}) CHECK(concrete_sample(0.5, 1.0 - 1e-12, {tau, -0.1, 1.1}) == 1.0);
    CHECK(concrete_sample(0.5, 1e-12, p) == 0.0);
}

TEST_CASE("concrete_sample rejects closed-interval arguments") {
    const HardConcreteParams p;
    CHECK_THROWS_AS(concrete_sample(0.0, 0.5, p), DomainError);
    CHECK_THROWS_AS(concrete_sample(1.0, 0.5, p), DomainError);
    CHECK_THROWS_AS(concrete_sample(0.5, 0.0, p), DomainError);
    CHECK_THROWS_AS(concrete_sample(0.5, 1.0, p), DomainError);
    CHECK_THROWS_AS(expected_l0(std::vector<double>{0.5, 1.0}, p), DomainError);
}

TEST_CASE("hard concrete parameter invariants") {
    CHECK_THROWS_AS((HardConcreteParams{0.0, -0.1, 1.1}.validate()), ValidationError);
    CHECK_THROWS_AS((HardConcreteParams{0.5, 0.1, 1.1}.validate()), ValidationError);
    CHECK_THROWS_AS((HardConcreteParams{0.5, -0.1, 0.5}.validate()), ValidationError);
}

TEST_CASE("sampler law matches the analytic CDF (Monte Carlo, 1e6 draws)") {
    const std::size_t n = 1000000;
    for (double pi : {0.3, 0.7}) {
        for (double tau : {0.5, 1.0}) {
            const HardConcreteParams p{tau, -0.1, 1.1};
            const Law law{tau, -0.1, 1.1};
            Rng rng(42);
            std::size_t zeros = 0;
            std::size_t ones = 0;
            double sum = 0.0;
            double sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double h = concrete_sample(pi, uniform_open(rng), p);
                zeros += h == 0.0;
                ones += h == 1.0;
                sum += h;
                sq += h * h;
            }
            const double nd = static_cast<double>(n);
            const double p0 = law.p_zero(pi);
            const double p1 = law.p_one(pi);
            const double mu = law.mean(pi);
            const double var = sq / nd - (sum / nd) * (sum / nd);
            CAPTURE(pi);
            CAPTURE(tau);
            CHECK(std::abs(zeros / nd - p0) <= 3.0 * std::sqrt(p0 * (1 - p0) / nd));
            CHECK(std::abs(ones / nd - p1) <= 3.0 * std::sqrt(p1 * (1 - p1) / nd));
            CHECK(std::abs(sum / nd - mu) <= 3.0 * std::sqrt(var / nd));
            CHECK(hard_concrete_prob_zero(pi, p) == doctest::Approx(p0).epsilon(1e-12));
            CHECK(hard_concrete_prob_one(pi, p) == doctest::Approx(p1).epsilon(1e-12));
        }
    }
}

TEST_CASE("expected_l0 saturation") {
    const HardConcreteParams p;
    CHECK(expected_l0(std::vector<double>(7, 1 - 1e-9), p) == doctest::Approx(7.0).epsilon(1e-6));
    CHECK(expected_l0(std::vector<double>(7, 1e-9), p) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("expected_l0 matches the Monte Carlo nonzero count") {
    const HardConcreteParams p{0.5, -0.1, 1.1};
    const std::vector<double> pi{0.1, 0.5, 0.9, 0.99};
    const std::size_t n = 1000000;
    Rng rng(7);
    double sum = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double count = 0.0;
        for (double v : pi) count += concrete_sample(v, uniform_open(rng), p) != 0.0;
        sum += count;
        sq += count * count;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sq / n - mean * mean) / n);
    CHECK(std::abs(expected_l0(pi, p) - mean) <= 3.0 * se);
}

TEST_CASE("expected_l0 gradient matches finite differences") {
    const HardConcreteParams p{0.5, -0.1, 1.1};
    Matrix alpha = testutil::random_matrix(1, 6, 3, 2.0);
    const auto f = [&] {
        std::vector<double> pi(6);
        for (int i = 0; i < 6; ++i) pi[i] = 1.0 / (1.0 + std::exp(-alpha(0, i)));
        return expected_l0(pi, p);
    };
    const Vector g = expected_l0_grad_alpha(std::span<const double>(alpha.data(), 6), p);
    const Matrix fd = testutil::numeric_gradient(alpha, f);
    CHECK(testutil::relative_error(g.transpose(), fd) < 1e-6);
    CHECK((g.array() > 0).all());
}

TEST_CASE("eval mode thresholds pi at 0.5") {
    auto net = make_net(3, 1);
    force_pi(net, 0.9);
    Rng rng(0);
    const Matrix x = testutil::random_matrix(20, 3, 5);
    const MaskPair m = net.aug_forward(x, AugMode::eval, rng);
    CHECK(m.h == Vector::Ones(20));
    force_pi(net, 0.2);
    CHECK(net.aug_forward(x, AugMode::eval, rng).h == Vector::Zero(20));
}

TEST_CASE("train mode is deterministic under a fixed seed") {
    const auto net = make_net(2, 11);
    const Matrix x = testutil::random_matrix(30, 2, 6);
    Rng a(99);
    Rng b(99);
    const MaskPair m1 = net.aug_forward(x, AugMode::train, a);
    const MaskPair m2 = net.aug_forward(x, AugMode::train, b);
    CHECK(m1.pi == m2.pi);
    CHECK(m1.h == m2.h);
    CHECK(m1.g == m2.g);
    CHECK((m1.alpha - m1.pi.unaryExpr([](double v) { return std::log(v / (1 - v)); })).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("network masks follow the sampler law (1e4 reseeded calls)") {
    auto net = make_net(1, 2);
    force_pi(net, 0.3);
    const Matrix x = testutil::random_matrix(5, 1, 8);
    const std::size_t n = 10000;
    std::size_t zeros = 0;
    for (std::size_t s = 0; s < n; ++s) {
        Rng rng(1000 + s);
        zeros += net.aug_forward(x, AugMode::train, rng).h(2) == 0.0;
    }
    const Law law{0.5, -0.1, 1.1};
    const double p0 = law.p_zero(0.3);
    CHECK(std::abs(static_cast<double>(zeros) / n - p0) <= 3.0 * std::sqrt(p0 * (1 - p0) / n));
}

TEST_CASE("transform mask is always bounded away from zero") {
    auto net = make_net(2, 3);
    for (auto* p : net.parameters()) p->value *= 50.0;
    Rng rng(1);
    const MaskPair m = net.aug_forward(testutil::random_matrix(40, 2, 9, 10.0), AugMode::train, rng);
    CHECK(m.g.cwiseAbs().minCoeff() >= kDefaultGFloor);
    CHECK(m.g.maxCoeff() <= 2.0 - kDefaultGFloor);
    CHECK(m.h.minCoeff() >= 0.0);
    CHECK(m.h.maxCoeff() <= 1.0);
    CHECK(nonzero_map(-1e6, 0.05) == doctest::Approx(0.05));
}

TEST_CASE("non-finite input reports a layer") {
    const auto net = make_net(1, 1);
    Matrix x = Matrix::Zero(6, 1);
    x(2, 0) = std::nan("");
    Rng rng(0);
    try {
        net.aug_forward(x, AugMode::train, rng);
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.layer() == 0);
    }
}

TEST_CASE("compose_view identities") {
    const Matrix x = testutil::random_matrix(12, 3, 1);
    MaskPair m;
    m.h = Vector::Ones(12);
    m.g = Vector::Ones(12);
    const AugmentedView v = compose_view(x, m);
    CHECK(v.v_star == x);
    CHECK(v.v == v.v_star);
    m.g(4) = 0.01;
    CHECK_THROWS_AS(compose_view(x, m), InvariantError);
    m.g(4) = 1.0;
    m.h = Vector::Ones(11);
    CHECK_THROWS_AS(compose_view(x, m), ValidationError);
}

TEST_CASE("invertibility over random triples") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        const Matrix x = testutil::random_matrix(16, 3, 100 + k, 3.0);
        MaskPair m;
        m.h.resize(16);
        m.g.resize(16);
        for (int t = 0; t < 16; ++t) {
            m.h(t) = unit(rng);
            m.g(t) = nonzero_map(6.0 * (unit(rng) - 0.5), kDefaultGFloor);
        }
        const AugmentedView v = compose_view(x, m);
        for (int t = 0; t < 16; ++t)
            for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(v.v_star(t, c) / m.g(t) - m.h(t) * x(t, c)));
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("factorization mask zero on a segment equals a direct cutout") {
    Matrix x(10, 1);
    for (int t = 0; t < 10; ++t) x(t, 0) = t + 1.0;
    MaskPair m;
    m.h = Vector::Ones(10);
    m.h.segment(3, 4).setZero();
    m.g = Vector::Ones(10);
    Matrix cut = x;
    for (int t = 3; t < 7; ++t) cut(t, 0) = 0.0;
    CHECK(compose_view(x, m).v_star == cut);
}

TEST_CASE("static augmentations in mask form") {
    Rng rng(3);
    const Matrix ones = Matrix::Ones(10, 2);
    const Matrix x = testutil::random_matrix(10, 2, 4);

    const auto jitter0 = static_augment(x, {StaticPolicy::Kind::jitter, 0.0}, rng);
    CHECK(jitter0.v == x);

    const auto scaled = static_augment(ones, {StaticPolicy::Kind::scaling, 2.0}, rng);
    CHECK(scaled.v == 2.0 * ones);
    CHECK(scaled.masks.g == Vector::Constant(10, 2.0));
    CHECK_THROWS_AS(static_augment(ones, {StaticPolicy::Kind::scaling, 0.0}, rng), InvariantError);

    // Every admissible contiguous span of length 5 inside T=10.
    std::set<std::vector<int>> spans;
    for (int s = 0; s + 5 <= 10; ++s) {
        std::vector<int> z;
        for (int t = s; t < s + 5; ++t) z.push_back(t);
        spans.insert(z);
    }
    for (int trial = 0; trial < 50; ++trial) {
        const auto cut = static_augment(ones, {StaticPolicy::Kind::cutout, 0.5}, rng);
        std::vector<int> zeros;
        for (int t = 0; t < 10; ++t)
            if (cut.v(t, 0) == 0.0) zeros.push_back(t);
        CHECK(spans.count(zeros) == 1);
    }

    const auto jit = static_augment(x, {StaticPolicy::Kind::jitter, 0.7}, rng);
    CHECK(jit.v_star == x);
    CHECK((jit.v - x).norm() > 0.0);
}

TEST_CASE("cutout and scaling round-trip through compose_view bit-identically") {
    Rng rng(8);
    const Matrix x = testutil::random_matrix(24, 3, 12);
    for (auto policy : {StaticPolicy{StaticPolicy::Kind::cutout, 0.3}, StaticPolicy{StaticPolicy::Kind::scaling, -1.5},
                        StaticPolicy{StaticPolicy::Kind::scaling, 0.5}}) {
        const auto view = static_augment(x, policy, rng);
        const auto again = compose_view(x, view.masks, 0.0);
        CHECK(std::memcmp(again.v_star.data(), view.v_star.data(), sizeof(double) * 72) == 0);
        CHECK(view.v == view.v_star);
    }
}

TEST_CASE("random_aug stays inside its parameter ranges") {
    Rng rng(21);
    const Matrix ones = Matrix::Ones(100, 1);
    int cutouts = 0;
    int jitters = 0;
    for (int i = 0; i < 200; ++i) {
        const auto v = static_augment(ones, {StaticPolicy::Kind::random_aug, 0.0}, rng);
        const double zeroed = (v.masks.h.array() == 0.0).count();
        if (zeroed > 0) {
            ++cutouts;
            CHECK(zeroed >= 30);
            CHECK(zeroed <= 80);
        } else {
            ++jitters;
            const double sd = std::sqrt((v.v - ones).array().square().mean());
            CHECK(sd > 0.2);
            CHECK(sd < 1.2);
        }
    }
    CHECK(cutouts > 50);
    CHECK(jitters > 50);
}

TEST_CASE("augmentation network gradients match finite differences (eps frozen)") {
    auto net = make_net(2, 17, 2, 5);
    const Matrix x = testutil::random_matrix(24, 2, 18);  // two windows of 12
    const Matrix w = testutil::random_matrix(24, 2, 19);
    const HardConcreteParams p = net.config().concrete;
    const double beta = 0.7;

    // Scalar objective: <w, v*> + beta * expected_l0(pi); eps re-drawn from the same seed each call.
    const auto loss = [&] {
        Rng rng(123);
        const MaskPair m = net.forward(x, 12, AugMode::train, &rng, nullptr);
        const Matrix v = compose_rows(x, m.h, m.g);
        return (v.array() * w.array()).sum() + beta * expected_l0(std::span<const double>(m.pi.data(), 24), p);
    };

    Rng rng(123);
    AugTrace trace;
    const MaskPair m = net.forward(x, 12, AugMode::train, &rng, &trace);
    Vector gh;
    Vector gg;
    compose_backward(x, m.h, m.g, w, gh, gg);
    const Vector galpha = beta * expected_l0_grad_alpha(std::span<const double>(m.alpha.data(), 24), p);
    nn::zero_grads(net.parameters());
    net.backward(trace, gh, gg, galpha);

    for (auto* param : net.parameters()) {
        const Matrix analytic = param->grad;
        const Matrix numeric = testutil::numeric_gradient(param->value, loss, 1e-6);
        CAPTURE(param->name);
        CHECK(testutil::relative_error(analytic, numeric) < 1e-3);
    }
}
