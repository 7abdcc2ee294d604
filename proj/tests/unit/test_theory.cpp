#include <doctest.h>

#include <cmath>
#include <random>
#include <tuple>

#include "cvcov/errors.hpp"
#include "cvcov/theory.hpp"

using namespace cvcov;
using namespace cvcov::theory;

namespace {

double derivative(double n, double p, double q, double k) {
    const double h = 1e-4 * k;
    return (holdout_error_closed_form(n, p, q, k + h) - holdout_error_closed_form(n, p, q, k - h)) /
           (2.0 * h);
}

}  // namespace

TEST_CASE("closed-form holdout error") {
    CHECK(holdout_error_closed_form(200, 1.5, 0.5, 4) == doctest::Approx(0.502308).epsilon(2e-6));
    for (double k : {1.5, 2.0, 10.0, 100.0}) {
        CHECK(holdout_error_closed_form(200, 0.0, 0.5, k) == doctest::Approx(2.0 * k / 400.0));
        CHECK(holdout_error_closed_form(37, 0.0, 0.2, k) == doctest::Approx(2.0 * k / 185.0));
    }
    // 1 << k << n: tends to the oracle error; at (1e6, 1e3) the O(k/t) term still shows.
    CHECK(holdout_error_closed_form(1e6, 1.5, 0.5, 1e3) == doctest::Approx(0.377406).epsilon(2e-6));
    CHECK(std::abs(holdout_error_closed_form(1e8, 1.5, 0.5, 1e4) - 0.375) <= 1e-3);
    double previous = INFINITY;
    for (double n : {1e4, 1e6, 1e8, 1e10}) {
        const double gap = std::abs(holdout_error_closed_form(n, 1.5, 0.5, std::sqrt(n)) - 0.375);
        CHECK(gap < previous);
        previous = gap;
    }

    CHECK_THROWS_AS(holdout_error_closed_form(200, 1.5, 0.5, 1.0), DomainError);
    CHECK_THROWS_AS(holdout_error_closed_form(200, 1.5, 0.5, 401.0), DomainError);
    CHECK_THROWS_AS(holdout_error_closed_form(200, -0.1, 0.5, 2.0), DomainError);
    CHECK_THROWS_AS(holdout_error_closed_form(1, 1.5, 0.9, 1.05), DomainError);
    CHECK_NOTHROW(holdout_error_closed_form(200, 1.5, 0.5, 400.0));
    // t_out = 1 with q = n / t carried as a double.
    for (int n = 100; n <= 1000; ++n) {
        for (int t : {n + 1, 2 * n + 1, 917, 1111}) {
            const double q = static_cast<double>(n) / t;
            CHECK_NOTHROW(holdout_error_closed_form(n, 1.5, q, static_cast<double>(t)));
        }
    }
}

TEST_CASE("optimal split") {
    CHECK(k_opt_exact(200, 1.5, 0.5) == doctest::Approx(5.96156).epsilon(2e-6));
    CHECK(std::abs(k_opt_exact(750, 0.06, 0.75) - 1.5074) <= 1e-3);
    CHECK_THROWS_AS(k_opt_exact(200, 0.0, 0.5), DomainError);
    CHECK_THROWS_AS(k_opt_exact(200, 1.5, 0.0), DomainError);
    CHECK_THROWS_AS(k_opt_exact(3, 1.5, 0.5), DomainError);

    CHECK(k_opt_asymptotic_coefficient(1.5, 0.5) == doctest::Approx(0.363803).epsilon(2e-6));
    CHECK(k_opt_asymptotic_coefficient(1.5, 0.5) == doctest::Approx(1.5 / std::sqrt(17.0)));
    CHECK(k_opt_asymptotic(200, 1.5, 0.5) == doctest::Approx(5.14496).epsilon(2e-6));
    CHECK(k_opt_asymptotic(800, 1.5, 0.5) / k_opt_asymptotic(200, 1.5, 0.5) == 2.0);
    CHECK(k_opt_exact(1e6, 1.5, 0.5) / k_opt_asymptotic(1e6, 1.5, 0.5) ==
          doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("stationary root of the closed form") {
    for (auto [n, p, q] : {std::tuple{200.0, 1.5, 0.5}, std::tuple{750.0, 0.06, 0.75},
                           std::tuple{1000.0, 9.0, 0.1}, std::tuple{400.0, 0.5, 0.3}}) {
        const double k = k_opt_stationary(n, p, q);
        CHECK(std::abs(derivative(n, p, q, k)) <= 1e-6);
        // The published optimum agrees to leading order.
        CHECK(k_opt_exact(n, p, q) / k == doctest::Approx(1.0).epsilon(0.01));
    }
    CHECK(k_opt_stationary(200, 1.5, 0.5) == doctest::Approx(5.88530).epsilon(2e-6));
    CHECK(k_opt_stationary(750, 0.06, 0.75) == doctest::Approx(1.50523).epsilon(2e-6));
}

TEST_CASE("stationary root minimizes over a log grid") {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> n_dist(100, 1000), p_dist(0.1, 9), q_dist(0.1, 0.9);
    int checked = 0;
    while (checked < 200) {
        const double n = std::round(n_dist(rng)), p = p_dist(rng), q = q_dist(rng);
        const double t = n / q;
        const double k_star = k_opt_stationary(n, p, q);
        if (!(k_star > 1.01) || k_star >= t) {
            continue;
        }
        const double best = holdout_error_closed_form(n, p, q, k_star);
        for (int i = 0; i < 200; ++i) {
            const double k = std::exp(std::log(1.01) + (std::log(t) - std::log(1.01)) * i / 199.0);
            CHECK(best <= holdout_error_closed_form(n, p, q, std::min(k, t)) + 1e-12);
        }
        ++checked;
    }
}

TEST_CASE("square-root scaling of the optimal split") {
    const double c = k_opt_asymptotic_coefficient(1.5, 0.5);
    double previous_gap = INFINITY;
    for (double n : {1e3, 1e4, 1e5, 1e6}) {
        const double gap = std::abs(k_opt_exact(n, 1.5, 0.5) / std::sqrt(n) - c) / c;
        CHECK(gap < previous_gap);
        previous_gap = gap;
    }
    CHECK(previous_gap <= 0.01);
}

TEST_CASE("oracle and sample errors") {
    CHECK(oracle_error(1.5, 0.5) == 0.375);
    CHECK(oracle_error(0.0, 0.5) == 0.0);
    CHECK(oracle_error(2.0, 1e12) == doctest::Approx(2.0));
    CHECK(sample_error(0.5) == 0.5);
    CHECK(sample_error(1e-9) == doctest::Approx(0.0));
    CHECK_THROWS_AS(sample_error(0.0), DomainError);
    CHECK_THROWS_AS(oracle_error(-1.0, 0.5), DomainError);

    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> u(0.0, 10.0);
    for (int i = 0; i < 500; ++i) {
        const double p = u(rng), q = u(rng) + 1e-3, n = 100 + 100 * u(rng);
        CHECK(oracle_error(p, q) <= sample_error(q));
        const double t = n / q;
        for (double k : {1.001, 2.0, std::sqrt(t), t}) {
            if (k > 1.0 && k <= t) {
                CHECK(holdout_error_closed_form(n, p, q, k) >= oracle_error(p, q));
            }
        }
    }
}

TEST_CASE("Wick right-hand side and variance decomposition") {
    CHECK(wick_identity_rhs(3.0, 2.5, 2.0) == 2.5);
    CHECK(wick_identity_rhs(1.7, 1.7, 1.0e9) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(wick_identity_rhs(2.0, 2.0, 1.0) == 4.0);
    CHECK_THROWS_AS(wick_identity_rhs(1.0, 1.0, 0.0), DomainError);

    CHECK(variance_decomposition_error(0.4, 0.4, 1.0, 400.0) == doctest::Approx(2.0 * 1.4 / 400.0));
    CHECK(variance_decomposition_error(0.4, 0.0, 1.0, 10.0) == doctest::Approx(0.4 + 0.2));
    CHECK_THROWS_AS(variance_decomposition_error(0.3, 0.4, 1.0, 10.0), DomainError);

    std::mt19937_64 rng(33);
    std::uniform_real_distribution<double> u(0.0, 3.0);
    for (int i = 0; i < 500; ++i) {
        const double vt = u(rng), vo = vt * u(rng) / 3.0, m = u(rng), t_out = 1.0 + 50.0 * u(rng);
        const double direct = variance_decomposition_error(vt, vo, m, t_out);
        const double algebra = (2.0 / t_out - 1.0) * (m * m + vo) + (m * m + vt);
        const double wick = wick_identity_rhs(m * m + vo, m * m + vt, t_out);
        CHECK(direct == doctest::Approx(algebra).epsilon(1e-12));
        CHECK(std::abs(direct - wick) <= 1e-12 * std::max(1.0, std::abs(wick)));
    }
}

TEST_CASE("inverse Wishart moments") {
    CHECK(expected_tau_sigma_sq(200, 1.5) == doctest::Approx(2.53075).epsilon(2e-6));
    CHECK(expected_tau_sigma_sq(1e8, 1.5) == doctest::Approx(2.5).epsilon(1e-6));
    CHECK(expected_tau_sigma_sq(100, 0.0) == 1.0);
    CHECK_THROWS_AS(expected_tau_sigma_sq(12, 4.0), DomainError);
    CHECK(inverse_wishart_element_variance(100, 1.0, true) ==
          doctest::Approx((99.0 + 101.0) / (100.0 * 97.0)));
    CHECK(inverse_wishart_element_variance(100, 1.0, false) == doctest::Approx(99.0 / (100.0 * 97.0)));
}

TEST_CASE("split diagnostic") {
    const double n = 10000;
    const LamDiagnostic root = lam_split_diagnostic(n, std::sqrt(n));
    CHECK(root.ok);
    CHECK(root.lam_sufficient);
    CHECK(root.t_out_over_sqrt_n == doctest::Approx(1.0));

    const LamDiagnostic cube = lam_split_diagnostic(n, std::cbrt(n));
    CHECK(cube.ok);
    CHECK(cube.corollary_sufficient);
    CHECK_FALSE(cube.lam_sufficient);

    const LamDiagnostic one = lam_split_diagnostic(n, 1.0);
    CHECK_FALSE(one.ok);
    CHECK_FALSE(lam_split_diagnostic(n, n).ok);
}

TEST_CASE("theory point") {
    const TheoryPoint pt = theory_point(200, 1.5, 0.5, 4);
    CHECK(pt.t == 400);
    CHECK(pt.predicted_error == doctest::Approx(0.502308).epsilon(2e-6));
    REQUIRE(pt.k_opt);
    CHECK(*pt.k_opt == doctest::Approx(5.96156).epsilon(2e-6));
    CHECK_FALSE(pt.p_over_n_large);
    CHECK(pt.lam_condition_ok);

    const TheoryPoint flat = theory_point(200, 0.0, 0.5, 4);
    CHECK_FALSE(flat.k_opt);
    CHECK(flat.predicted_error == doctest::Approx(0.02));
    CHECK(theory_point(100, 3.0, 0.5, 2).p_over_n_large);

    // Small p: the published optimum falls below 1 and is not reported.
    CHECK(k_opt_exact(100, 0.001, 0.9) < 1.0);
    CHECK_FALSE(theory_point(100, 0.001, 0.9, 2).k_opt);
}
