#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <set>
#include <vector>

#include "cvcov/errors.hpp"
#include "cvcov/estimators.hpp"
#include "oracles.hpp"

using namespace cvcov;
using namespace cvcov::testing;

namespace {

std::vector<Index> range(Index a, Index b) {
    std::vector<Index> v;
    for (Index i = a; i < b; ++i) {
        v.push_back(i);
    }
    return v;
}

SplitPlan holdout_on(Index t, std::vector<Index> test) {
    SplitPlan p;
    p.t = t;
    p.t_out = static_cast<Index>(test.size());
    p.mode = SplitMode::holdout;
    p.folds = {std::move(test)};
    return p;
}

/// Independent composition: naive covariances, a separate solver, naive quadratic forms.
Matrix hand_holdout(const Matrix& x, const std::vector<Index>& test) {
    Matrix in(x.rows(), 0), out(x.rows(), 0);
    for (Index c = 0; c < x.cols(); ++c) {
        Matrix& dst = std::find(test.begin(), test.end(), c) != test.end() ? out : in;
        dst.conservativeResize(Eigen::NoChange, dst.cols() + 1);
        dst.col(dst.cols() - 1) = x.col(c);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> solver(naive_sample_covariance(in));
    const Matrix v = solver.eigenvectors();
    return naive_compose(v, naive_quadratic(v, naive_sample_covariance(out)));
}

Vector sorted(Vector v) {
    std::sort(v.data(), v.data() + v.size());
    return v;
}

double min_eigenvalue_ratio(const SymmetricMatrix& a) {
    const Vector ev = eigh_ascending(a).eigenvalues;
    return ev(0) / std::max(ev(ev.size() - 1), 1e-300);
}

}  // namespace

TEST_CASE("make_split layouts") {
    const SplitPlan kf = make_split(6, 2, SplitMode::kfold);
    REQUIRE(kf.fold_count() == 3);
    CHECK(kf.folds[0] == std::vector<Index>{4, 5});
    CHECK(kf.folds[1] == std::vector<Index>{2, 3});
    CHECK(kf.folds[2] == std::vector<Index>{0, 1});
    CHECK(kf.k() == 3.0);

    const SplitPlan ho = make_split(10, 3, SplitMode::holdout);
    REQUIRE(ho.fold_count() == 1);
    CHECK(ho.folds[0] == std::vector<Index>{7, 8, 9});
    CHECK(ho.train(0) == range(0, 7));
    CHECK(ho.t_in() == 7);

    CHECK_THROWS_AS(make_split(10, 3, SplitMode::kfold), ParameterError);
    CHECK_THROWS_AS(make_split(10, 10, SplitMode::holdout), ParameterError);
    CHECK_THROWS_AS(make_split(10, 0, SplitMode::holdout), ParameterError);
}

TEST_CASE("shuffled k-fold plans partition the indices") {
    const SplitPlan a = make_split(24, 6, SplitMode::kfold, true, SeededRng(3, 1));
    const SplitPlan b = make_split(24, 6, SplitMode::kfold, true, SeededRng(3, 1));
    CHECK(a.folds == b.folds);
    std::set<Index> seen;
    for (const auto& f : a.folds) {
        CHECK(f.size() == 6);
        seen.insert(f.begin(), f.end());
    }
    CHECK(seen.size() == 24);
    CHECK(a.folds != make_split(24, 6, SplitMode::kfold).folds);
}

TEST_CASE("shrinkage coefficient") {
    CHECK(ShrinkageCoefficient::from_pq(1.5, 0.5).value() == 0.75);
    CHECK(ShrinkageCoefficient::from_pq(0.0, 0.5).value() == 0.0);
    CHECK_THROWS_AS(ShrinkageCoefficient::from_pq(-1.0, 0.5), ParameterError);
    CHECK_THROWS_AS(ShrinkageCoefficient::from_pq(1.0, 0.0), ParameterError);
}

TEST_CASE("oracle estimator") {
    Rng rng(21);
    const SymmetricMatrix e(random_spd(6, rng));
    const SymmetricMatrix sigma(random_spd(6, rng));

    CHECK((oracle_estimator(e, SymmetricMatrix::identity(6)).matrix() - Matrix::Identity(6, 6))
              .cwiseAbs()
              .maxCoeff() < 1e-12);

    Vector de(4), ds(4);
    de << 1, 2, 3, 4;
    ds << 0.5, 3, 1, 2;
    const SymmetricMatrix sd = SymmetricMatrix::diagonal(ds);
    CHECK((oracle_estimator(SymmetricMatrix::diagonal(de), sd).matrix() - sd.matrix())
              .cwiseAbs()
              .maxCoeff() < 1e-12);

    const SymmetricMatrix o = oracle_estimator(e, sigma);
    CHECK(normalized_trace(o) == doctest::Approx(normalized_trace(sigma)).epsilon(1e-10));
    CHECK(min_eigenvalue_ratio(o) >= -1e-10);
    CHECK_THROWS_AS(oracle_estimator(e, SymmetricMatrix::identity(5)), DimensionError);
}

TEST_CASE("oracle eigenvalues are a local minimum of the error") {
    Rng rng(22);
    for (Index n = 2; n <= 8; ++n) {
        const SymmetricMatrix e(random_spd(n, rng));
        const SymmetricMatrix sigma(random_spd(n, rng));
        const Spectrum s = eigh_ascending(e);
        const Vector lo = oracle_eigenvalues(s, sigma);
        const double base = frobenius_error(compose(s.eigenvectors, lo), sigma);
        for (Index i = 0; i < n; ++i) {
            for (double eps : {1e-3, -1e-3}) {
                Vector moved = lo;
                moved(i) += eps;
                CHECK(frobenius_error(compose(s.eigenvectors, moved), sigma) > base);
            }
        }
    }
}

TEST_CASE("oracle is rotation equivariant") {
    Rng rng(23);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix e = random_spd(7, rng);
        const Matrix sigma = random_spd(7, rng);
        const Matrix o = random_orthogonal(7, rng);
        const Matrix lhs =
            oracle_estimator(SymmetricMatrix(o * e * o.transpose()), SymmetricMatrix(o * sigma * o.transpose()))
                .matrix();
        const Matrix rhs = o * oracle_estimator(SymmetricMatrix(e), SymmetricMatrix(sigma)).matrix() *
                           o.transpose();
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("holdout estimator") {
    Rng rng(24);
    SUBCASE("scalar case is the test-set variance") {
        const Matrix x = gaussian_matrix(1, 7, rng);
        const SplitPlan plan = make_split(7, 3, SplitMode::holdout);
        const double var = x.rightCols(3).squaredNorm() / 3.0;
        CHECK(holdout_estimator(x, plan)(0, 0) == doctest::Approx(var).epsilon(1e-14));
        CHECK(holdout_rie_estimator(x, plan)(0, 0) == doctest::Approx(var).epsilon(1e-14));
    }
    SUBCASE("identical train and test blocks give E_in") {
        const Matrix a = gaussian_matrix(3, 4, rng);
        Matrix x(3, 8);
        x << a, a;
        const SplitPlan plan = make_split(8, 4, SplitMode::holdout);
        const Matrix e_in = naive_sample_covariance(a);
        CHECK((holdout_estimator(x, plan).matrix() - e_in).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((holdout_rie_estimator(x, plan).matrix() - e_in).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("matches an independent composition") {
        const Matrix x = gaussian_matrix(4, 8, rng);
        const SplitPlan plan = make_split(8, 3, SplitMode::holdout);
        CHECK((holdout_estimator(x, plan).matrix() - hand_holdout(x, plan.folds[0]))
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
    SUBCASE("rotation-invariant variant carries the holdout eigenvalues") {
        const Matrix x = gaussian_matrix(4, 8, rng);
        const SplitPlan plan = make_split(8, 3, SplitMode::holdout);
        const HoldoutFold f = fit_fold(x, plan, 0);
        const Vector ev = eigh_ascending(holdout_rie_estimator(x, plan)).eigenvalues;
        CHECK((ev - sorted(f.holdout_eigenvalues)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("errors") {
        const Matrix x = gaussian_matrix(3, 8, rng);
        CHECK_THROWS_AS(holdout_estimator(x, make_split(8, 2, SplitMode::kfold)), ParameterError);
        CHECK_THROWS_AS(holdout_estimator(x, make_split(9, 2, SplitMode::holdout)), DimensionError);
        CHECK_THROWS_AS(holdout_estimator(x, holdout_on(8, {})), ParameterError);
    }
}

TEST_CASE("k-fold estimator") {
    Rng rng(25);
    SUBCASE("mean of the per-fold holdout estimators") {
        const Matrix x = gaussian_matrix(4, 8, rng);
        const SplitPlan plan = make_split(8, 2, SplitMode::kfold);
        Matrix mean = Matrix::Zero(4, 4);
        for (const auto& fold : plan.folds) {
            mean += holdout_estimator(x, holdout_on(8, fold)).matrix() / 4.0;
        }
        CHECK((kfold_cv_estimator(x, plan).matrix() - mean).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("leave-one-out test sets are rank one") {
        const Matrix x = gaussian_matrix(4, 6, rng);
        const SplitPlan plan = make_split(6, 1, SplitMode::kfold);
        CHECK(plan.fold_count() == 6);
        for (const auto& fold : plan.folds) {
            const SymmetricMatrix e_out = sample_covariance(select_columns(x, fold));
            Eigen::FullPivLU<Matrix> lu(e_out.matrix());
            lu.setThreshold(1e-10);
            CHECK(lu.rank() == 1);
        }
        CHECK(normalized_trace(kfold_cv_estimator(x, plan)) ==
              doctest::Approx(x.squaredNorm() / 6.0 / 4.0).epsilon(1e-10));
    }
    SUBCASE("identical columns") {
        const Vector c = gaussian_matrix(3, 1, rng);
        const Matrix x = c.replicate(1, 6);
        const Matrix expected = c * c.transpose();
        CHECK((kfold_cv_estimator(x, make_split(6, 2, SplitMode::kfold)).matrix() - expected)
                  .cwiseAbs()
                  .maxCoeff() < 1e-12);
    }
    SUBCASE("trace is the mean test-set trace") {
        const Matrix x = gaussian_matrix(5, 12, rng);
        const SplitPlan plan = make_split(12, 4, SplitMode::kfold);
        double mean = 0.0;
        for (const auto& fold : plan.folds) {
            mean += normalized_trace(sample_covariance(select_columns(x, fold))) / 3.0;
        }
        CHECK(normalized_trace(kfold_cv_estimator(x, plan)) == doctest::Approx(mean).epsilon(1e-10));
    }
    SUBCASE("wrong mode") {
        const Matrix x = gaussian_matrix(3, 8, rng);
        CHECK_THROWS_AS(kfold_cv_estimator(x, make_split(8, 2, SplitMode::holdout)), ParameterError);
    }
}

TEST_CASE("rotation-invariant k-fold estimator") {
    Rng rng(26);
    SUBCASE("scalar case is the mean test variance") {
        const Matrix x = gaussian_matrix(1, 6, rng);
        const SplitPlan plan = make_split(6, 2, SplitMode::kfold);
        double mean = 0.0;
        for (Index b = 0; b < 3; ++b) {
            mean += x.middleCols(2 * b, 2).squaredNorm() / 2.0 / 3.0;
        }
        CHECK(kfold_cv_rie_estimator(x, plan)(0, 0) == doctest::Approx(mean).epsilon(1e-14));
    }
    SUBCASE("hand-composed rank-wise average") {
        const Matrix x = gaussian_matrix(4, 8, rng);
        const SplitPlan plan = make_split(8, 4, SplitMode::kfold);
        Vector avg = Vector::Zero(4);
        for (const auto& fold : plan.folds) {
            Matrix in(4, 0);
            for (Index c : range(0, 8)) {
                if (std::find(fold.begin(), fold.end(), c) == fold.end()) {
                    in.conservativeResize(Eigen::NoChange, in.cols() + 1);
                    in.col(in.cols() - 1) = x.col(c);
                }
            }
            Eigen::SelfAdjointEigenSolver<Matrix> solver(naive_sample_covariance(in));
            avg += naive_quadratic(solver.eigenvectors(),
                                   naive_sample_covariance(select_columns(x, fold))) / 2.0;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> full(naive_sample_covariance(x));
        const Matrix expected = naive_compose(full.eigenvectors(), avg);
        CHECK((kfold_cv_rie_estimator(x, plan).matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);
        const Vector ev = eigh_ascending(kfold_cv_rie_estimator(x, plan)).eigenvalues;
        CHECK((ev - sorted(avg)).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("identical folds") {
        const Matrix a = gaussian_matrix(3, 4, rng);
        Matrix x(3, 8);
        x << a, a;
        const SplitPlan plan = make_split(8, 4, SplitMode::kfold);
        const auto folds = fit_folds(x, plan);
        CHECK((average_fold_eigenvalues(folds) - folds[0].holdout_eigenvalues).cwiseAbs().maxCoeff() <
              1e-12);
    }
}

TEST_CASE("linear shrinkage") {
    Rng rng(27);
    const SymmetricMatrix e(random_spd(5, rng));
    CHECK((linear_shrinkage(e, 0.0, 0.5).matrix() - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff() ==
          0.0);
    const Matrix expected = 0.75 * e.matrix() + 0.25 * Matrix::Identity(5, 5);
    CHECK((linear_shrinkage(e, 1.5, 0.5).matrix() - expected).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((linear_shrinkage(e, 1.5, 1e-12).matrix() - e.matrix()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Ledoit-Peche eigenvalues") {
    Spectrum one{Vector::Constant(1, 2.0), Matrix::Identity(1, 1)};
    const auto r = ledoit_peche_eigenvalues(one, 0.1, 0.01, BandwidthScale::absolute);
    // g = 1/(i eta): |1 - q + q lambda g|^2 = (1-q)^2 + (q lambda / eta)^2
    CHECK(r.eigenvalues(0) == doctest::Approx(2.0 / (0.81 + 400.0)).epsilon(1e-12));
    CHECK(r.floored == 0);

    Rng rng(28);
    const Spectrum s = eigh_ascending(SymmetricMatrix(random_spd(30, rng)));
    for (auto scale : {BandwidthScale::absolute, BandwidthScale::relative}) {
        const Vector xi = ledoit_peche_eigenvalues(s, 1e-9, 0.05, scale).eigenvalues;
        CHECK((xi - s.eigenvalues).cwiseAbs().maxCoeff() < 1e-6);
    }
    CHECK_THROWS_AS(ledoit_peche_eigenvalues(s, 0.5, 0.0), ParameterError);
    CHECK_THROWS_AS(ledoit_peche_eigenvalues(s, 0.5, -1.0), ParameterError);
    CHECK_THROWS_AS(ledoit_peche_eigenvalues(s, 0.0, 0.1), ParameterError);
    CHECK(default_lp_bandwidth(400) == 0.05);
}

TEST_CASE("Ledoit-Peche keeps the mean eigenvalue on an inverse Wishart draw") {
    const EnsembleSpec spec = with_aspect_ratio(spec_from_np(200, 1.5), 0.5);
    const SymmetricMatrix sigma = sample_white_inverse_wishart(spec, SeededRng(29, 0));
    const DataMatrix x = sample_gaussian_data(sigma, spec.t, SeededRng(29, 1));
    const Spectrum s = eigh_ascending(sample_covariance(x));
    for (auto scale : {BandwidthScale::relative, BandwidthScale::absolute}) {
        const auto r = ledoit_peche_eigenvalues(s, spec.q, default_lp_bandwidth(200), scale);
        CHECK(r.eigenvalues.minCoeff() >= 0.0);
        CHECK(r.eigenvalues.mean() == doctest::Approx(s.eigenvalues.mean()).epsilon(0.05));
    }
}

TEST_CASE("holdout error does not depend on the split layout") {
    // i.i.d. columns: contiguous and shuffled plans share the mean error.
    const EnsembleSpec spec = with_aspect_ratio(spec_from_np(30, 1.0), 0.5);
    std::vector<double> diff;
    for (std::uint64_t rep = 0; rep < 300; ++rep) {
        const SymmetricMatrix sigma =
            sample_white_inverse_wishart(spec, replication_stream(30, rep, StreamRole::population));
        const DataMatrix x =
            sample_gaussian_data(sigma, spec.t, replication_stream(30, rep, StreamRole::data));
        const SplitPlan contiguous = make_split(spec.t, 15, SplitMode::holdout);
        const SplitPlan shuffled = make_split(spec.t, 15, SplitMode::holdout, true,
                                              replication_stream(30, rep, StreamRole::split));
        diff.push_back(frobenius_error(holdout_estimator(x, contiguous), sigma) -
                       frobenius_error(holdout_estimator(x, shuffled), sigma));
    }
    const MeanSe d = mean_se(diff);
    CHECK(std::abs(d.mean) <= 3.0 * d.se);
}
