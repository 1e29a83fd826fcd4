#include "autotcl/errors.hpp"
#include "autotcl/eval.hpp"
#include "test_util.hpp"

#include <cstring>

using namespace autotcl;

namespace {

Encoder small_encoder(int f, std::uint64_t seed) {
    EncoderConfig cfg;
    cfg.depth = 2;
    cfg.hidden_dim = 8;
    cfg.repr_dim = 6;
    Encoder enc(f, cfg);
    Rng rng(seed);
    enc.init(rng);
    return enc;
}

TimeSeriesDataset series(std::size_t n, int channels, std::uint64_t seed) {
    TimeSeriesDataset ds;
    ds.name = "synthetic";
    ds.values = testutil::random_matrix(static_cast<Eigen::Index>(n), channels, seed);
    for (Eigen::Index t = 0; t < ds.values.rows(); ++t) ds.values(t, 0) += std::sin(0.2 * static_cast<double>(t));
    return split_forecasting(ds, 0.6, 0.2, 0.2);
}

/// Ridge with unpenalized bias via the augmented normal equations, solved by
/// full-pivot Householder QR.
Matrix oracle_ridge(const Matrix& x, const Matrix& y, double l2) {
    Matrix a(x.rows(), x.cols() + 1);
    a << x, Matrix::Ones(x.rows(), 1);
    Matrix lhs = a.transpose() * a;
    for (Eigen::Index i = 0; i < x.cols(); ++i) lhs(i, i) += l2;
    return lhs.fullPivHouseholderQr().solve(a.transpose() * y);
}

}  // namespace

TEST_CASE("ridge recovers a realizable linear map") {
    const Matrix x = testutil::random_matrix(200, 4, 1);
    Matrix w(4, 2);
    w << 1, -2, 0.5, 0, 3, 1, -1, 0.25;
    Eigen::RowVector2d b(0.7, -1.3);
    const Matrix y = (x * w).rowwise() + b;
    const RidgeModel m = fit_ridge(x, y, 0.0);
    CHECK(m.l2 == 0.0);
    CHECK((m.weights - w).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((m.bias - b).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("ridge on zero features predicts the target mean") {
    const Matrix x = Matrix::Zero(10, 3);
    const Matrix y = testutil::random_matrix(10, 2, 3);
    const RidgeModel m = fit_ridge(x, y, 1.0);
    CHECK((m.bias - y.colwise().mean()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(m.weights.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("ridge agrees with the augmented normal equations") {
    for (double l2 : kRidgeGrid) {
        const Matrix x = testutil::random_matrix(60, 5, 4);
        const Matrix y = testutil::random_matrix(60, 3, 5);
        const RidgeModel m = fit_ridge(x, y, l2);
        const Matrix o = oracle_ridge(x, y, l2);
        CAPTURE(l2);
        CHECK((m.weights - o.topRows(5)).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((m.bias - o.bottomRows(1)).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("singular system at l2 = 0 falls back to the smallest grid value") {
    Matrix x = testutil::random_matrix(20, 3, 6);
    x.col(2) = x.col(0);  // rank deficient
    const Matrix y = testutil::random_matrix(20, 1, 7);
    const RidgeModel m = fit_ridge(x, y, 0.0);
    CHECK(m.l2 == kRidgeGrid.front());
    CHECK(m.weights.allFinite());
    CHECK_THROWS_AS(fit_ridge(x, y, -1.0), ValidationError);
}

TEST_CASE("validation selects the grid value with the lowest error") {
    const Matrix x = testutil::random_matrix(80, 6, 8);
    const Matrix noise = testutil::random_matrix(80, 1, 9, 2.0);
    const Matrix y = x.col(0) + noise;
    ProbeData train{x.topRows(40), y.topRows(40)};
    ProbeData valid{x.bottomRows(40), y.bottomRows(40)};
    const RidgeModel best = fit_forecast_probe(train, valid);
    double best_mse = std::numeric_limits<double>::infinity();
    double best_l2 = -1;
    for (double l2 : kRidgeGrid) {
        const double e = mean_squared_error(fit_ridge(train.x, train.y, l2).predict(valid.x), valid.y);
        if (e < best_mse) {
            best_mse = e;
            best_l2 = l2;
        }
    }
    CHECK(best.l2 == best_l2);
}

TEST_CASE("error metrics on small examples") {
    Matrix p(3, 1);
    Matrix t(3, 1);
    p << 1, 2, 3;
    t << 1, 4, 0;
    CHECK(mean_squared_error(p, t) == doctest::Approx((0.0 + 4.0 + 9.0) / 3.0));
    CHECK(mean_absolute_error(p, t) == doctest::Approx((0.0 + 2.0 + 3.0) / 3.0));
    CHECK(mean_squared_error(t, t) == 0.0);
    CHECK(mean_absolute_error(t, t) == 0.0);
    CHECK_THROWS_AS(mean_squared_error(p, Matrix::Zero(2, 1)), ValidationError);
}

TEST_CASE("predicting the mean of standardized targets gives mse near one") {
    Matrix y = testutil::random_matrix(20000, 1, 10);
    y.array() -= y.mean();
    y /= std::sqrt(y.squaredNorm() / static_cast<double>(y.rows()));
    CHECK(mean_squared_error(Matrix::Zero(y.rows(), 1), y) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("features cover every admissible end timestamp") {
    const auto ds = series(300, 2, 11);
    const auto enc = small_encoder(2, 12);
    const auto fs = extract_features(enc, ds, SplitName::valid, 16, 7);
    CHECK(fs.features.rows() == static_cast<Eigen::Index>(ds.split.valid.size() - 16 + 1));
    CHECK(fs.end_rows.front() == ds.split.valid.begin + 15);
    CHECK(fs.end_rows.back() == ds.split.valid.end - 1);
    // The feature of a window is the last per-step representation of that window alone.
    Rng rng(0);
    const Matrix w = ds.values.middleRows(static_cast<Eigen::Index>(ds.split.valid.begin) + 3, 16);
    const Matrix direct = enc.encode(w, false, rng).per_step.bottomRows(1);
    CHECK((fs.features.row(3) - direct).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(extract_features(enc, ds, SplitName::valid, static_cast<int>(ds.split.valid.size()) + 1),
                    ValidationError);
}

TEST_CASE("feature extraction is deterministic and batch independent") {
    const auto ds = series(200, 1, 13);
    const auto enc = small_encoder(1, 14);
    const auto a = extract_features(enc, ds, SplitName::test, 12, 128);
    const auto b = extract_features(enc, ds, SplitName::test, 12, 5);
    CHECK(std::memcmp(a.features.data(), b.features.data(), sizeof(double) * static_cast<std::size_t>(a.features.size())) == 0);
}

TEST_CASE("perturbing the input changes the features") {
    auto ds = series(200, 1, 15);
    const auto enc = small_encoder(1, 16);
    const auto a = extract_features(enc, ds, SplitName::train, 12);
    ds.values(50, 0) += 1.0;
    const auto b = extract_features(enc, ds, SplitName::train, 12);
    CHECK((a.features - b.features).norm() > 0.0);
}

TEST_CASE("forecast targets keep windows whose horizon stays in the split") {
    const auto ds = series(300, 2, 17);
    const auto enc = small_encoder(2, 18);
    const auto fs = extract_features(enc, ds, SplitName::test, 10);
    const auto pd = forecast_targets(ds, fs, SplitName::test, 5, {0, 1});
    CHECK(pd.x.rows() == static_cast<Eigen::Index>(ds.split.test.size() - 10 + 1 - 5));
    CHECK(pd.y.cols() == 10);
    const auto t = static_cast<Eigen::Index>(fs.end_rows[0]);
    CHECK(pd.y(0, 0) == ds.values(t + 1, 0));
    CHECK(pd.y(0, 3) == ds.values(t + 2, 1));
    CHECK_THROWS_AS(forecast_targets(ds, fs, SplitName::test, static_cast<int>(ds.split.test.size()), {0}),
                    ValidationError);
}

TEST_CASE("probing leaves the encoder untouched") {
    const auto ds = series(400, 1, 19);
    auto enc = small_encoder(1, 20);
    const auto before = nn::checksum(enc.parameters());
    const auto res = forecast_probe(enc, ds, {4, 8}, "univariate", 16, {0});
    CHECK(nn::checksum(enc.parameters()) == before);
    REQUIRE(res.size() == 2);
    CHECK(res[0].horizon == 4);
    CHECK(res[1].n_test == ds.split.test.size() - 16 + 1 - 8);
    CHECK(std::isfinite(res[0].mse));
}

TEST_CASE("default horizon grids") {
    CHECK(default_horizons("ETTh1") == std::vector<int>{24, 48, 168, 336, 720});
    CHECK(default_horizons("ETTm1") == std::vector<int>{24, 48, 96, 288, 672});
}

TEST_CASE("median heuristic on points with known distances") {
    Matrix x(3, 1);
    x << 0, 1, 3;  // squared distances 1, 9, 4 -> median 4
    CHECK(median_heuristic_gamma(x) == doctest::Approx(1.0 / 8.0));
}

TEST_CASE("svm separates well separated clusters") {
    const int per = 30;
    Matrix x(3 * per, 2);
    std::vector<int> y;
    const Matrix noise = testutil::random_matrix(3 * per, 2, 21, 0.3);
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per; ++i) {
            x.row(c * per + i) = Eigen::RowVector2d(5.0 * c, c == 1 ? 5.0 : 0.0) + noise.row(c * per + i);
            y.push_back(c);
        }
    const Matrix tx = x + testutil::random_matrix(3 * per, 2, 22, 0.3);
    const auto r = evaluate_classification(x, y, tx, y, "clusters");
    CHECK(r.accuracy == 1.0);
    CHECK(r.n_test == static_cast<std::size_t>(3 * per));
}

TEST_CASE("svm on shuffled labels is near chance") {
    const Matrix x = testutil::random_matrix(200, 3, 23);
    const Matrix tx = testutil::random_matrix(400, 3, 24);
    std::mt19937_64 rng(25);
    std::vector<int> y(200);
    std::vector<int> ty(400);
    for (auto& v : y) v = static_cast<int>(rng() % 2);
    for (auto& v : ty) v = static_cast<int>(rng() % 2);
    const auto r = evaluate_classification(x, y, tx, ty, "noise");
    CHECK(std::abs(r.accuracy - 0.5) < 0.1);
}

TEST_CASE("svm input validation") {
    const Matrix x = testutil::random_matrix(6, 2, 26);
    CHECK_THROWS_AS(evaluate_classification(x, {1, 1, 1, 1, 1, 1}, x, {1, 1, 1, 1, 1, 1}, "one"), ValidationError);
    CHECK_THROWS_AS(evaluate_classification(x, {0, 1, 0, 1, 0, 1}, x, {0, 1}, "short"), ValidationError);
}

TEST_CASE("rank aggregation with ties") {
    const std::vector<RankEntry> entries{
        {"a", "d1", 0.9}, {"b", "d1", 0.8}, {"c", "d1", 0.7},
        {"a", "d2", 0.5}, {"b", "d2", 0.5}, {"c", "d2", 0.6},
    };
    const auto s = aggregate_ranks(entries);
    CHECK(s.at("a").mean_rank == doctest::Approx((1.0 + 2.5) / 2.0));
    CHECK(s.at("b").mean_rank == doctest::Approx((2.0 + 2.5) / 2.0));
    CHECK(s.at("c").mean_rank == doctest::Approx((3.0 + 1.0) / 2.0));
    CHECK(s.at("a").mean_accuracy == doctest::Approx(0.7));
    CHECK(s.at("c").datasets == 2);
}
