#include "cvcov/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

#include "cvcov/errors.hpp"

namespace cvcov {

namespace {

void require_plan(const DataMatrix& x, const SplitPlan& plan, SplitMode mode, const char* where) {
    if (plan.mode != mode) {
        throw ParameterError(std::string(where) + ": split plan has the wrong mode");
    }
    if (x.cols() != plan.t) {
        throw DimensionError(std::string(where) + ": data has " + std::to_string(x.cols()) +
                             " observations, split plan expects t=" + std::to_string(plan.t));
    }
    if (plan.t_out < 1 || plan.t_in() < 1 || plan.folds.empty()) {
        throw ParameterError(std::string(where) + ": empty train or test set");
    }
}

}  // namespace

std::vector<Index> SplitPlan::train(std::size_t fold) const {
    const auto& test = folds.at(fold);
    std::vector<Index> in;
    in.reserve(static_cast<std::size_t>(t - t_out));
    std::size_t cursor = 0;
    for (Index i = 0; i < t; ++i) {
        if (cursor < test.size() && test[cursor] == i) {
            ++cursor;
        } else {
            in.push_back(i);
        }
    }
    return in;
}

SplitPlan make_split(Index t, Index t_out, SplitMode mode, bool shuffle, const SeededRng& rng) {
    if (t < 2 || t_out < 1 || t_out > t - 1) {
        throw ParameterError("make_split: need 1 <= t_out <= t-1, got t=" + std::to_string(t) +
                             ", t_out=" + std::to_string(t_out));
    }
    if (mode == SplitMode::kfold && t % t_out != 0) {
        throw ParameterError("make_split: k-fold needs t_out to divide t, got t=" +
                             std::to_string(t) + ", t_out=" + std::to_string(t_out));
    }

    std::vector<Index> order(static_cast<std::size_t>(t));
    std::iota(order.begin(), order.end(), Index{0});
    if (shuffle) {
        auto engine = rng.engine();
        std::shuffle(order.begin(), order.end(), engine);
    }

    SplitPlan plan;
    plan.t = t;
    plan.t_out = t_out;
    plan.mode = mode;
    const Index k = mode == SplitMode::kfold ? t / t_out : 1;
    for (Index l = 0; l < k; ++l) {
        const auto end = order.begin() + (t - l * t_out);
        std::vector<Index> test(end - t_out, end);
        std::sort(test.begin(), test.end());
        plan.folds.push_back(std::move(test));
    }
    return plan;
}

ShrinkageCoefficient ShrinkageCoefficient::from_pq(double p, double q) {
    if (!(p >= 0.0) || !(q > 0.0)) {
        throw ParameterError("ShrinkageCoefficient: need p >= 0 and q > 0");
    }
    return ShrinkageCoefficient(std::clamp(p / (p + q), 0.0, 1.0));
}

Vector oracle_eigenvalues(const Spectrum& sample, const SymmetricMatrix& sigma) {
    return diag_quadratic(sample.eigenvectors, sigma);
}

SymmetricMatrix oracle_estimator(const SymmetricMatrix& e, const SymmetricMatrix& sigma) {
    if (e.n() != sigma.n()) {
        throw DimensionError("oracle_estimator: dimension mismatch (" + std::to_string(e.n()) +
                             " vs " + std::to_string(sigma.n()) + ")");
    }
    const Spectrum s = eigh_ascending(e);
    return compose(s.eigenvectors, oracle_eigenvalues(s, sigma));
}

HoldoutFold fit_fold(const DataMatrix& x, const SplitPlan& plan, std::size_t fold) {
    const auto& test = plan.folds.at(fold);
    const SymmetricMatrix e_in = sample_covariance(select_columns(x, plan.train(fold)));
    const SymmetricMatrix e_out = sample_covariance(select_columns(x, test));
    HoldoutFold out{eigh_ascending(e_in), Vector()};
    out.holdout_eigenvalues = diag_quadratic(out.train.eigenvectors, e_out);
    return out;
}

std::vector<HoldoutFold> fit_folds(const DataMatrix& x, const SplitPlan& plan) {
    std::vector<HoldoutFold> folds;
    folds.reserve(plan.fold_count());
    for (std::size_t l = 0; l < plan.fold_count(); ++l) {
        folds.push_back(fit_fold(x, plan, l));
    }
    return folds;
}

SymmetricMatrix average_fold_estimators(const std::vector<HoldoutFold>& folds) {
    if (folds.empty()) {
        throw ParameterError("average_fold_estimators: no folds");
    }
    Matrix sum = Matrix::Zero(folds.front().train.n(), folds.front().train.n());
    for (const auto& f : folds) {
        sum += compose(f.train.eigenvectors, f.holdout_eigenvalues).matrix();
    }
    return SymmetricMatrix(sum / static_cast<double>(folds.size()));
}

Vector average_fold_eigenvalues(const std::vector<HoldoutFold>& folds) {
    if (folds.empty()) {
        throw ParameterError("average_fold_eigenvalues: no folds");
    }
    Vector sum = Vector::Zero(folds.front().holdout_eigenvalues.size());
    for (const auto& f : folds) {
        sum += f.holdout_eigenvalues;
    }
    return sum / static_cast<double>(folds.size());
}

SymmetricMatrix holdout_estimator(const DataMatrix& x, const SplitPlan& plan) {
    require_plan(x, plan, SplitMode::holdout, "holdout_estimator");
    const HoldoutFold f = fit_fold(x, plan, 0);
    return compose(f.train.eigenvectors, f.holdout_eigenvalues);
}

SymmetricMatrix holdout_rie_estimator(const DataMatrix& x, const SplitPlan& plan) {
    require_plan(x, plan, SplitMode::holdout, "holdout_rie_estimator");
    return holdout_rie_estimator(x, plan, eigh_ascending(sample_covariance(x)));
}

SymmetricMatrix holdout_rie_estimator(const DataMatrix& x, const SplitPlan& plan,
                                      const Spectrum& full_sample) {
    require_plan(x, plan, SplitMode::holdout, "holdout_rie_estimator");
    const HoldoutFold f = fit_fold(x, plan, 0);
    return compose(full_sample.eigenvectors, f.holdout_eigenvalues);
}

SymmetricMatrix kfold_cv_estimator(const DataMatrix& x, const SplitPlan& plan) {
    require_plan(x, plan, SplitMode::kfold, "kfold_cv_estimator");
    return average_fold_estimators(fit_folds(x, plan));
}

SymmetricMatrix kfold_cv_rie_estimator(const DataMatrix& x, const SplitPlan& plan) {
    require_plan(x, plan, SplitMode::kfold, "kfold_cv_rie_estimator");
    return kfold_cv_rie_estimator(x, plan, eigh_ascending(sample_covariance(x)));
}

SymmetricMatrix kfold_cv_rie_estimator(const DataMatrix& x, const SplitPlan& plan,
                                       const Spectrum& full_sample) {
    require_plan(x, plan, SplitMode::kfold, "kfold_cv_rie_estimator");
    return compose(full_sample.eigenvectors, average_fold_eigenvalues(fit_folds(x, plan)));
}

SymmetricMatrix linear_shrinkage(const SymmetricMatrix& e, double p, double q) {
    const double r = ShrinkageCoefficient::from_pq(p, q).value();
    Matrix out = r * e.matrix();
    out.diagonal().array() += 1.0 - r;
    return SymmetricMatrix(out);
}

double default_lp_bandwidth(Index n) {
    return 1.0 / std::sqrt(static_cast<double>(n));
}

LedoitPecheResult ledoit_peche_eigenvalues(const Spectrum& sample, double q, double eta,
                                           BandwidthScale scale) {
    if (!(q > 0.0)) {
        throw ParameterError("ledoit_peche_eigenvalues: need q > 0");
    }
    if (!(eta > 0.0)) {
        throw ParameterError("ledoit_peche_eigenvalues: need eta > 0, got eta=" +
                             std::to_string(eta));
    }
    const Vector& lambda = sample.eigenvalues;
    const Index n = lambda.size();

    LedoitPecheResult out{Vector(n), 0};
    for (Index i = 0; i < n; ++i) {
        const double li = lambda(i);
        const double offset = scale == BandwidthScale::relative ? eta * li : eta;
        double xi = 0.0;
        if (offset > 0.0) {
            const std::complex<double> z(li, offset);
            std::complex<double> g(0.0, 0.0);
            for (Index j = 0; j < n; ++j) {
                g += 1.0 / (z - lambda(j));
            }
            g /= static_cast<double>(n);
            xi = li / std::norm(1.0 - q + q * li * g);
        } else {
            // relative bandwidth at a null eigenvalue: xi -> lambda
            xi = li;
        }
        if (xi < 0.0) {
            xi = 0.0;
            ++out.floored;
        }
        out.eigenvalues(i) = xi;
    }
    return out;
}

SymmetricMatrix ledoit_peche_estimator(const Spectrum& sample, const LedoitPecheResult& corrected) {
    return compose(sample.eigenvectors, corrected.eigenvalues);
}

}  // namespace cvcov
