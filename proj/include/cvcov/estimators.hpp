#pragma once

#include <cstddef>
#include <vector>

#include "cvcov/ensembles.hpp"
#include "cvcov/linalg.hpp"

namespace cvcov {

enum class SplitMode { holdout, kfold };

/**
 * Partition of observation indices {0..t-1} into test sets.
 *
 * Holdout plans carry one test set of size t_out; k-fold plans carry
 * k = t / t_out disjoint test sets covering every index. Each training set is
 * the complement of its test set. Index sets are kept sorted.
 */
struct SplitPlan {
    Index t = 0;
    Index t_out = 0;
    SplitMode mode = SplitMode::holdout;
    std::vector<std::vector<Index>> folds;

    Index t_in() const noexcept { return t - t_out; }
    /// Train-test ratio factor t / t_out.
    double k() const noexcept { return static_cast<double>(t) / static_cast<double>(t_out); }
    std::size_t fold_count() const noexcept { return folds.size(); }
    std::vector<Index> train(std::size_t fold) const;
};

/**
 * Contiguous blocks by default: the holdout test set is the trailing t_out
 * indices, and k-fold test sets are consecutive blocks starting from the end.
 * With `shuffle`, blocks are taken from a permutation drawn from `rng`.
 * Throws ParameterError when t_out is outside {1..t-1} or, for k-fold,
 * does not divide t.
 */
SplitPlan make_split(Index t, Index t_out, SplitMode mode, bool shuffle = false,
                     const SeededRng& rng = SeededRng(0, 0));

/// Linear shrinkage intensity r = p / (p + q), always in [0, 1].
class ShrinkageCoefficient {
public:
    static ShrinkageCoefficient from_pq(double p, double q);
    double value() const noexcept { return r_; }

private:
    explicit ShrinkageCoefficient(double r) : r_(r) {}
    double r_;
};

/// Diag(V^T Sigma V) for the sample eigenvectors V.
Vector oracle_eigenvalues(const Spectrum& sample, const SymmetricMatrix& sigma);

/// V Diag(V^T Sigma V) V^T with V the eigenvectors of E.
SymmetricMatrix oracle_estimator(const SymmetricMatrix& e, const SymmetricMatrix& sigma);

/// One train/test split evaluated: the train spectrum and Diag(V_in^T E_out V_in).
struct HoldoutFold {
    Spectrum train;
    /// Holdout eigenvalues, index i paired with the i-th smallest train eigenvalue.
    Vector holdout_eigenvalues;
};

HoldoutFold fit_fold(const DataMatrix& x, const SplitPlan& plan, std::size_t fold);

/// Every fold of the plan, in plan order.
std::vector<HoldoutFold> fit_folds(const DataMatrix& x, const SplitPlan& plan);

/// Mean over folds of V_in,l Diag(Lambda^H_l) V_in,l^T.
SymmetricMatrix average_fold_estimators(const std::vector<HoldoutFold>& folds);

/// Rank-wise mean of the folds' holdout eigenvalues.
Vector average_fold_eigenvalues(const std::vector<HoldoutFold>& folds);

/// V_in Diag(V_in^T E_out V_in) V_in^T.
SymmetricMatrix holdout_estimator(const DataMatrix& x, const SplitPlan& plan);

/// Holdout eigenvalues recombined with the eigenvectors of the full-sample E.
SymmetricMatrix holdout_rie_estimator(const DataMatrix& x, const SplitPlan& plan);
SymmetricMatrix holdout_rie_estimator(const DataMatrix& x, const SplitPlan& plan,
                                      const Spectrum& full_sample);

/// (1/k) sum_l of the per-fold holdout estimators.
SymmetricMatrix kfold_cv_estimator(const DataMatrix& x, const SplitPlan& plan);

/// Fold-averaged holdout eigenvalues recombined with the full-sample eigenvectors.
SymmetricMatrix kfold_cv_rie_estimator(const DataMatrix& x, const SplitPlan& plan);
SymmetricMatrix kfold_cv_rie_estimator(const DataMatrix& x, const SplitPlan& plan,
                                       const Spectrum& full_sample);

/// r E + (1 - r) I with r = p / (p + q).
SymmetricMatrix linear_shrinkage(const SymmetricMatrix& e, double p, double q);

/**
 * How the imaginary offset of the Stieltjes evaluation point is set.
 *
 * absolute: z_i = lambda_i + i*eta.
 * relative: z_i = lambda_i + i*eta*lambda_i, which keeps the result
 *           equivariant under a rescaling of E.
 */
enum class BandwidthScale { absolute, relative };

struct LedoitPecheResult {
    Vector eigenvalues;
    /// Corrected eigenvalues that came out negative and were set to 0.
    Index floored = 0;
};

/// eta = n^{-1/2}.
double default_lp_bandwidth(Index n);

/**
 * xi_i = lambda_i / |1 - q + q lambda_i g(z_i)|^2 with the discrete Stieltjes
 * transform g(z) = (1/n) sum_j 1 / (z - lambda_j) of the sample spectrum.
 * Throws ParameterError for q <= 0 or eta <= 0.
 */
LedoitPecheResult ledoit_peche_eigenvalues(const Spectrum& sample, double q, double eta,
                                           BandwidthScale scale = BandwidthScale::relative);

/// Sample eigenvectors with Ledoit-Peche corrected eigenvalues.
SymmetricMatrix ledoit_peche_estimator(const Spectrum& sample, const LedoitPecheResult& corrected);

}  // namespace cvcov
