#include "autotcl/eval.hpp"

#include "autotcl/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

namespace autotcl {

FeatureSet extract_features(const Encoder& encoder, const TimeSeriesDataset& ds, SplitName split, int window,
                            std::size_t batch_windows) {
    const IndexRange r = ds.range(split);
    if (window <= 0 || static_cast<std::size_t>(window) > r.size())
        throw ValidationError("feature window does not fit the split");
    FeatureSet out;
    const std::size_t n = r.size() - static_cast<std::size_t>(window) + 1;
    out.features.resize(static_cast<Eigen::Index>(n), encoder.config().repr_dim);
    out.end_rows.reserve(n);
    for (std::size_t i = 0; i < n; i += batch_windows) {
        std::vector<std::size_t> starts;
        for (std::size_t k = i; k < std::min(n, i + batch_windows); ++k) starts.push_back(r.begin + k);
        const WindowBatch wb = gather_windows(ds.values, starts, static_cast<std::size_t>(window));
        const auto rep = encoder.forward(wb.windows, window, {}, nullptr, nullptr);
        for (std::size_t k = 0; k < starts.size(); ++k) {
            out.features.row(static_cast<Eigen::Index>(i + k)) =
                rep.per_step.row(static_cast<Eigen::Index>((k + 1) * static_cast<std::size_t>(window) - 1));
            out.end_rows.push_back(starts[k] + static_cast<std::size_t>(window) - 1);
        }
    }
    return out;
}

Matrix encode_instances(const Encoder& encoder, const TimeSeriesDataset& ds, SplitName split,
                        std::size_t batch_instances) {
    const IndexRange ir = ds.instance_range(split);
    const auto len = static_cast<Eigen::Index>(ds.instance_length);
    Matrix out(static_cast<Eigen::Index>(ir.size()), encoder.config().repr_dim);
    for (std::size_t i = ir.begin; i < ir.end; i += batch_instances) {
        const std::size_t count = std::min(ir.end, i + batch_instances) - i;
        const Matrix x = ds.values.middleRows(static_cast<Eigen::Index>(i) * len, static_cast<Eigen::Index>(count) * len);
        const auto rep = encoder.forward(x, static_cast<int>(len), {}, nullptr, nullptr);
        out.middleRows(static_cast<Eigen::Index>(i - ir.begin), static_cast<Eigen::Index>(count)) = rep.pooled;
    }
    return out;
}

ProbeData forecast_targets(const TimeSeriesDataset& ds, const FeatureSet& fs, SplitName split, int horizon,
                           const std::vector<std::size_t>& target_channels) {
    if (horizon < 1) throw ValidationError("horizon must be >= 1");
    const IndexRange r = ds.range(split);
    std::vector<Eigen::Index> keep;
    for (std::size_t i = 0; i < fs.end_rows.size(); ++i)
        if (fs.end_rows[i] + static_cast<std::size_t>(horizon) < r.end) keep.push_back(static_cast<Eigen::Index>(i));
    if (keep.empty())
        throw ValidationError("horizon " + std::to_string(horizon) + " exceeds the length of the split");
    const auto c = static_cast<Eigen::Index>(target_channels.size());
    ProbeData pd;
    pd.x.resize(static_cast<Eigen::Index>(keep.size()), fs.features.cols());
    pd.y.resize(static_cast<Eigen::Index>(keep.size()), horizon * c);
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto i = keep[k];
        pd.x.row(static_cast<Eigen::Index>(k)) = fs.features.row(i);
        const auto t = static_cast<Eigen::Index>(fs.end_rows[static_cast<std::size_t>(i)]);
        for (Eigen::Index h = 0; h < horizon; ++h)
            for (Eigen::Index j = 0; j < c; ++j)
                pd.y(static_cast<Eigen::Index>(k), h * c + j) =
                    ds.values(t + 1 + h, static_cast<Eigen::Index>(target_channels[static_cast<std::size_t>(j)]));
    }
    return pd;
}

Matrix RidgeModel::predict(const Matrix& x) const {
    Matrix p = x * weights;
    p.rowwise() += bias;
    return p;
}

RidgeModel fit_ridge(const Matrix& x, const Matrix& y, double l2) {
    if (x.rows() < 1 || x.rows() != y.rows()) throw ValidationError("ridge needs matching, non-empty X and Y");
    if (l2 < 0.0) throw ValidationError("l2 must be >= 0");
    const Eigen::RowVectorXd x_mean = x.colwise().mean();
    const Eigen::RowVectorXd y_mean = y.colwise().mean();
    const Matrix xc = x.rowwise() - x_mean;
    const Matrix yc = y.rowwise() - y_mean;
    Matrix gram = xc.transpose() * xc;
    gram.diagonal().array() += l2;
    const Matrix rhs = xc.transpose() * yc;

    RidgeModel m;
    m.l2 = l2;
    Eigen::LDLT<Matrix> ldlt(gram);
    const bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
                          (ldlt.vectorD().array().abs() <= 1e-12 * std::max(1.0, gram.diagonal().cwiseAbs().maxCoeff())).any();
    if (singular && l2 == 0.0) return fit_ridge(x, y, kRidgeGrid.front());
    m.weights = ldlt.solve(rhs);
    if (!m.weights.allFinite()) {
        if (l2 == 0.0) return fit_ridge(x, y, kRidgeGrid.front());
        throw NumericalError("ridge solve produced non-finite weights");
    }
    m.bias = y_mean - x_mean * m.weights;
    return m;
}

double mean_squared_error(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.size() == 0)
        throw ValidationError("prediction and target shapes differ");
    return (pred - target).array().square().mean();
}

double mean_absolute_error(const Matrix& pred, const Matrix& target) {
    if (pred.rows() != target.rows() || pred.cols() != target.cols() || pred.size() == 0)
        throw ValidationError("prediction and target shapes differ");
    return (pred - target).array().abs().mean();
}

RidgeModel fit_forecast_probe(const ProbeData& train, const ProbeData& valid) {
    RidgeModel best;
    double best_mse = std::numeric_limits<double>::infinity();
    for (double l2 : kRidgeGrid) {
        RidgeModel m = fit_ridge(train.x, train.y, l2);
        const double mse = mean_squared_error(m.predict(valid.x), valid.y);
        if (mse < best_mse) {
            best_mse = mse;
            best = std::move(m);
        }
    }
    return best;
}

ForecastResult evaluate_forecast(const RidgeModel& model, const ProbeData& test, int horizon, const std::string& setting) {
    ForecastResult r;
    r.horizon = horizon;
    r.setting = setting;
    r.l2 = model.l2;
    r.n_test = static_cast<std::size_t>(test.x.rows());
    const Matrix pred = model.predict(test.x);
    r.mse = mean_squared_error(pred, test.y);
    r.mae = mean_absolute_error(pred, test.y);
    return r;
}

std::vector<ForecastResult> forecast_probe(const Encoder& encoder, const TimeSeriesDataset& ds,
                                           const std::vector<int>& horizons, const std::string& setting, int window,
                                           const std::vector<std::size_t>& target_channels) {
    const FeatureSet tr = extract_features(encoder, ds, SplitName::train, window);
    const FeatureSet va = extract_features(encoder, ds, SplitName::valid, window);
    const FeatureSet te = extract_features(encoder, ds, SplitName::test, window);
    std::vector<ForecastResult> out;
    for (int h : horizons) {
        const ProbeData test = forecast_targets(ds, te, SplitName::test, h, target_channels);
        const RidgeModel m = fit_forecast_probe(forecast_targets(ds, tr, SplitName::train, h, target_channels),
                                                forecast_targets(ds, va, SplitName::valid, h, target_channels));
        out.push_back(evaluate_forecast(m, test, h, setting));
    }
    return out;
}

std::vector<int> default_horizons(const std::string& dataset_name) {
    if (dataset_name.find("ETTm") != std::string::npos) return {24, 48, 96, 288, 672};
    return {24, 48, 168, 336, 720};
}

// --- SVM --------------------------------------------------------------------

double RbfSvm::kernel(const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) const {
    return std::exp(-gamma_ * (a - b).squaredNorm());
}

namespace {

// Dual C-SVC solver with second-order working-set selection, no shrinking.
// Q(i,j) = y_i y_j K(i,j). Returns alpha and rho.
void solve_binary(const Matrix& k, const std::vector<double>& y, double c, std::vector<double>& alpha, double& rho) {
    const auto n = static_cast<Eigen::Index>(y.size());
    constexpr double kTau = 1e-12;
    constexpr double kEps = 1e-3;
    alpha.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> grad(static_cast<std::size_t>(n), -1.0);
    const auto q = [&](Eigen::Index i, Eigen::Index j) { return y[i] * y[j] * k(i, j); };
    const auto upper = [&](Eigen::Index i) { return alpha[i] >= c; };
    const auto lower = [&](Eigen::Index i) { return alpha[i] <= 0.0; };

    const long max_iter = std::max<long>(10000000L, 100L * n);
    for (long iter = 0; iter < max_iter; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        double gmax2 = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y[t] > 0) {
                if (!upper(t) && -grad[t] >= gmax) {
                    gmax = -grad[t];
                    i = t;
                }
            } else if (!lower(t) && grad[t] >= gmax) {
                gmax = grad[t];
                i = t;
            }
        }
        Eigen::Index j = -1;
        double obj_min = std::numeric_limits<double>::infinity();
        if (i >= 0) {
            for (Eigen::Index t = 0; t < n; ++t) {
                double gdiff = 0.0;
                double quad = 0.0;
                if (y[t] > 0) {
                    if (lower(t)) continue;
                    gdiff = gmax + grad[t];
                    gmax2 = std::max(gmax2, grad[t]);
                    quad = k(i, i) + k(t, t) - 2.0 * y[i] * q(i, t);
                } else {
                    if (upper(t)) continue;
                    gdiff = gmax - grad[t];
                    gmax2 = std::max(gmax2, -grad[t]);
                    quad = k(i, i) + k(t, t) + 2.0 * y[i] * q(i, t);
                }
                if (gdiff > 0.0) {
                    const double obj = -(gdiff * gdiff) / (quad > 0.0 ? quad : kTau);
                    if (obj <= obj_min) {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        if (i < 0 || j < 0 || gmax + gmax2 < kEps) break;

        const double old_i = alpha[i];
        const double old_j = alpha[j];
        if (y[i] != y[j]) {
            double quad = k(i, i) + k(j, j) + 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0.0) {
                if (alpha[j] < 0.0) {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if (diff > 0.0) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if (alpha[j] > c) {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            double quad = k(i, i) + k(j, j) - 2.0 * q(i, j);
            if (quad <= 0.0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > c) {
                if (alpha[i] > c) {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if (alpha[j] < 0.0) {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if (sum > c) {
                if (alpha[j] > c) {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if (alpha[i] < 0.0) {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        const double di = alpha[i] - old_i;
        const double dj = alpha[j] - old_j;
        for (Eigen::Index t = 0; t < n; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
    }

    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (upper(t)) {
            if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else if (lower(t)) {
            if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    rho = n_free > 0 ? sum_free / n_free : 0.5 * (ub + lb);
}

}  // namespace

void RbfSvm::fit(const Matrix& x, const std::vector<int>& labels, double c, double gamma) {
    if (x.rows() != static_cast<Eigen::Index>(labels.size()) || labels.empty())
        throw ValidationError("SVM needs one label per row");
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) throw ValidationError("SVM training set has a single class");
    x_ = x;
    gamma_ = gamma;
    classes_.assign(distinct.begin(), distinct.end());
    machines_.clear();

    const Eigen::Index n = x.rows();
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) k(i, j) = k(j, i) = kernel(x.row(i), x.row(j));

    for (std::size_t a = 0; a < classes_.size(); ++a) {
        for (std::size_t b = a + 1; b < classes_.size(); ++b) {
            std::vector<Eigen::Index> idx;
            std::vector<double> y;
            for (Eigen::Index i = 0; i < n; ++i) {
                if (labels[static_cast<std::size_t>(i)] == classes_[a]) {
                    idx.push_back(i);
                    y.push_back(1.0);
                } else if (labels[static_cast<std::size_t>(i)] == classes_[b]) {
                    idx.push_back(i);
                    y.push_back(-1.0);
                }
            }
            const auto m = static_cast<Eigen::Index>(idx.size());
            Matrix sub(m, m);
            for (Eigen::Index i = 0; i < m; ++i)
                for (Eigen::Index j = 0; j < m; ++j) sub(i, j) = k(idx[i], idx[j]);
            std::vector<double> alpha;
            Binary machine;
            machine.positive = classes_[a];
            machine.negative = classes_[b];
            solve_binary(sub, y, c, alpha, machine.rho);
            for (Eigen::Index i = 0; i < m; ++i) {
                if (alpha[i] > 0.0) {
                    machine.support.push_back(static_cast<std::size_t>(idx[i]));
                    machine.coef.push_back(alpha[i] * y[i]);
                }
            }
            machines_.push_back(std::move(machine));
        }
    }
}

std::vector<int> RbfSvm::predict(const Matrix& x) const {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(x.rows()));
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
        std::vector<int> votes(classes_.size(), 0);
        std::size_t m = 0;
        for (std::size_t a = 0; a < classes_.size(); ++a) {
            for (std::size_t b = a + 1; b < classes_.size(); ++b, ++m) {
                const Binary& bin = machines_[m];
                double f = -bin.rho;
                for (std::size_t s = 0; s < bin.support.size(); ++s)
                    f += bin.coef[s] * kernel(x_.row(static_cast<Eigen::Index>(bin.support[s])), x.row(r));
                ++votes[f > 0.0 ? a : b];
            }
        }
        const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
        out.push_back(classes_[static_cast<std::size_t>(best)]);
    }
    return out;
}

double median_heuristic_gamma(const Matrix& x) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) d.push_back((x.row(i) - x.row(j)).squaredNorm());
    if (d.empty()) return 1.0;
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    const double med = *mid;
    return med > 0.0 ? 1.0 / (2.0 * med) : 1.0;
}

namespace {

double accuracy(const std::vector<int>& pred, const std::vector<int>& truth) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == truth[i];
    return static_cast<double>(hit) / static_cast<double>(pred.size());
}

}  // namespace

ClassifyResult evaluate_classification(const Matrix& train_x, const std::vector<int>& train_y, const Matrix& test_x,
                                       const std::vector<int>& test_y, const std::string& dataset) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < train_y.size(); ++i) by_class[train_y[i]].push_back(i);
    if (by_class.size() < 2) throw ValidationError("classification training set has a single class");
    if (test_x.rows() == 0 || test_x.rows() != static_cast<Eigen::Index>(test_y.size()))
        throw ValidationError("test embeddings and labels differ in count");
    const double gamma = median_heuristic_gamma(train_x);

    std::size_t smallest = train_y.size();
    for (const auto& [cls, members] : by_class) smallest = std::min(smallest, members.size());
    const std::size_t folds = std::min<std::size_t>(5, smallest);

    double best_c = kSvmPenaltyGrid.front();
    if (folds >= 2) {
        // Stratified folds: the r-th member of each class goes to fold r mod k.
        std::vector<std::size_t> fold_of(train_y.size());
        for (const auto& [cls, members] : by_class)
            for (std::size_t r = 0; r < members.size(); ++r) fold_of[members[r]] = r % folds;
        double best_acc = -1.0;
        for (double c : kSvmPenaltyGrid) {
            std::size_t hits = 0;
            for (std::size_t f = 0; f < folds; ++f) {
                std::vector<Eigen::Index> tr;
                std::vector<Eigen::Index> va;
                for (std::size_t i = 0; i < train_y.size(); ++i) (fold_of[i] == f ? va : tr).push_back(static_cast<Eigen::Index>(i));
                std::vector<int> ytr;
                std::vector<int> yva;
                for (auto i : tr) ytr.push_back(train_y[static_cast<std::size_t>(i)]);
                for (auto i : va) yva.push_back(train_y[static_cast<std::size_t>(i)]);
                if (std::set<int>(ytr.begin(), ytr.end()).size() < 2) continue;
                RbfSvm svm;
                svm.fit(train_x(tr, Eigen::all), ytr, c, gamma);
                const auto pred = svm.predict(train_x(va, Eigen::all));
                for (std::size_t k = 0; k < pred.size(); ++k) hits += pred[k] == yva[k];
            }
            const double acc = static_cast<double>(hits) / static_cast<double>(train_y.size());
            if (acc > best_acc) {
                best_acc = acc;
                best_c = c;
            }
        }
    }
    RbfSvm svm;
    svm.fit(train_x, train_y, best_c, gamma);
    ClassifyResult r;
    r.dataset = dataset;
    r.c = best_c;
    r.n_test = test_y.size();
    r.accuracy = accuracy(svm.predict(test_x), test_y);
    return r;
}

ClassifyResult evaluate_classification(const Encoder& encoder, const TimeSeriesDataset& ds) {
    const Matrix tr = encode_instances(encoder, ds, SplitName::train);
    const Matrix te = encode_instances(encoder, ds, SplitName::test);
    const IndexRange itr = ds.instance_range(SplitName::train);
    const IndexRange ite = ds.instance_range(SplitName::test);
    const std::vector<int> ytr(ds.labels.begin() + static_cast<std::ptrdiff_t>(itr.begin),
                               ds.labels.begin() + static_cast<std::ptrdiff_t>(itr.end));
    const std::vector<int> yte(ds.labels.begin() + static_cast<std::ptrdiff_t>(ite.begin),
                               ds.labels.begin() + static_cast<std::ptrdiff_t>(ite.end));
    return evaluate_classification(tr, ytr, te, yte, ds.name);
}

std::map<std::string, RankSummary> aggregate_ranks(const std::vector<RankEntry>& entries) {
    std::map<std::string, std::vector<const RankEntry*>> by_dataset;
    for (const auto& e : entries) by_dataset[e.dataset].push_back(&e);
    std::map<std::string, RankSummary> out;
    for (auto& [ds, list] : by_dataset) {
        std::vector<const RankEntry*> sorted = list;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const RankEntry* a, const RankEntry* b) { return a->accuracy > b->accuracy; });
        for (std::size_t i = 0; i < sorted.size();) {
            std::size_t j = i;
            while (j < sorted.size() && sorted[j]->accuracy == sorted[i]->accuracy) ++j;
            const double rank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1 .. j
            for (std::size_t k = i; k < j; ++k) {
                auto& s = out[sorted[k]->method];
                s.mean_rank += rank;
                s.mean_accuracy += sorted[k]->accuracy;
                ++s.datasets;
            }
            i = j;
        }
    }
    for (auto& [m, s] : out) {
        s.mean_rank /= s.datasets;
        s.mean_accuracy /= s.datasets;
    }
    return out;
}

}  // namespace autotcl
