#pragma once

#include <optional>

namespace cvcov::theory {

/// Scatter experiments show the closed form underestimating the error above this p/n.
inline constexpr double kBiasedPOverN = 1e-2;

/// Floor applied to an estimated p before it feeds k_opt.
inline constexpr double kMinEstimatedP = 1e-6;

/**
 * Expected holdout Frobenius error for a white inverse Wishart population:
 *
 *   (2k/t - 1) (p^2 / (p + k n / (k t - t)) + 1) + 1 + p,   t = n / q.
 *
 * Valid for 1 < k <= t; throws DomainError otherwise.
 */
double holdout_error_closed_form(double n, double p, double q, double k);

/// The published closed-form optimal split; throws DomainError for p <= 0.
double k_opt_exact(double n, double p, double q);

/**
 * Exact root of d/dk holdout_error_closed_form:
 *
 *   p/(p+q) + p sqrt(2A (n(p+q) - 2pq)) / (2 (p+q) A),   A = p + p^2 + q.
 *
 * Agrees with k_opt_exact to leading order in n; throws DomainError for p <= 0.
 */
double k_opt_stationary(double n, double p, double q);

/// p / sqrt(2 (p+q)(p+p^2+q)).
double k_opt_asymptotic_coefficient(double p, double q);

/// Leading-order k_opt ~ coefficient * sqrt(n).
double k_opt_asymptotic(double n, double p, double q);

/// pq / (p+q).
double oracle_error(double p, double q);

/// q.
double sample_error(double q);

/// (2/t_out - 1) * E[tau(Diag(V_in^T Sigma V_in)^2)] + E[tau(Sigma^2)].
double wick_identity_rhs(double diag_oracle_sq_mean, double sigma_sq_mean, double t_out);

/**
 * V[lambda_true] - V[lambda_O] + 2 (E[lambda_true]^2 + V[lambda_O]) / t_out.
 * Throws DomainError when var_oracle > var_true.
 */
double variance_decomposition_error(double var_true, double var_oracle, double mean_true,
                                    double t_out);

/// Finite-n E[tau(Sigma^2)] = (n-p)(np-p+n) / (n(n-3p)); tends to 1+p.
double expected_tau_sigma_sq(double n, double p);

/// Var[Sigma_ij] = (p(n-p) + p(n+p) delta_ij) / (n(n-3p)).
double inverse_wishart_element_variance(double n, double p, bool diagonal);

struct LamDiagnostic {
    bool ok = false;                    ///< lam_sufficient || corollary_sufficient
    bool lam_sufficient = false;        ///< n^{2/5+eps} <= t_out <= n^{1-eps}
    bool corollary_sufficient = false;  ///< max(2, n^eps) <= t_out <= n^{1-eps}
    double t_out_over_sqrt_n = 0.0;
};

/// Advisory check of a split against the asymptotic convergence conditions.
LamDiagnostic lam_split_diagnostic(double n, double t_out, double epsilon = 0.05);

struct TheoryPoint {
    double n = 0, p = 0, q = 0, t = 0, k = 0;
    double predicted_error = 0;
    std::optional<double> k_opt;  ///< k_opt_exact when p > 0 and it falls in (1, t)
    bool p_over_n_large = false;
    bool lam_condition_ok = false;
};

TheoryPoint theory_point(double n, double p, double q, double k);

}  // namespace cvcov::theory
