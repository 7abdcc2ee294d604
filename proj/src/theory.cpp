#include "cvcov/theory.hpp"

#include <cmath>
#include <string>

#include "cvcov/errors.hpp"

namespace cvcov::theory {

namespace {

void require_kopt_domain(double n, double p, double q, const char* where) {
    if (!(p > 0.0)) {
        throw DomainError(std::string(where) +
                          ": p must be > 0 (at p = 0 the holdout error is monotone in k)");
    }
    if (!(q > 0.0) || !(n >= 4.0)) {
        throw DomainError(std::string(where) + ": need q > 0 and n >= 4");
    }
}

}  // namespace

double holdout_error_closed_form(double n, double p, double q, double k) {
    if (!(n > 0.0) || !(q > 0.0) || !(p >= 0.0)) {
        throw DomainError("holdout_error_closed_form: need n > 0, q > 0, p >= 0");
    }
    const double t = n / q;
    if (t < 2.0) {
        throw DomainError("holdout_error_closed_form: t = n/q must be >= 2");
    }
    // t = n / q is recomputed in floating point; k = t must stay admissible.
    if (!(k > 1.0) || k > t * (1.0 + 1e-12)) {
        throw DomainError("holdout_error_closed_form: k=" + std::to_string(k) +
                          " outside (1, t], t=" + std::to_string(t));
    }
    const double q_in = k * n / (k * t - t);
    return (2.0 * k / t - 1.0) * (p * p / (p + q_in) + 1.0) + 1.0 + p;
}

double k_opt_exact(double n, double p, double q) {
    require_kopt_domain(n, p, q, "k_opt_exact");
    const double a = p + p * p + q;
    const double root = std::sqrt(p * p * q * q + 2.0 * n * (p + q) * a);
    return p * (2.0 * q + p * (2.0 + 2.0 * p + q) + root) / (2.0 * (p + q) * a);
}

double k_opt_stationary(double n, double p, double q) {
    require_kopt_domain(n, p, q, "k_opt_stationary");
    const double a = p + p * p + q;
    const double radicand = 2.0 * a * (n * (p + q) - 2.0 * p * q);
    if (!(radicand >= 0.0)) {
        throw DomainError("k_opt_stationary: no real stationary point");
    }
    return p / (p + q) + p * std::sqrt(radicand) / (2.0 * (p + q) * a);
}

double k_opt_asymptotic_coefficient(double p, double q) {
    if (!(p > 0.0) || !(q > 0.0)) {
        throw DomainError("k_opt_asymptotic_coefficient: need p > 0 and q > 0");
    }
    return p / std::sqrt(2.0 * (p + q) * (p + p * p + q));
}

double k_opt_asymptotic(double n, double p, double q) {
    require_kopt_domain(n, p, q, "k_opt_asymptotic");
    return k_opt_asymptotic_coefficient(p, q) * std::sqrt(n);
}

double oracle_error(double p, double q) {
    if (!(p >= 0.0) || !(q > 0.0)) {
        throw DomainError("oracle_error: need p >= 0 and q > 0");
    }
    return p * q / (p + q);
}

double sample_error(double q) {
    if (!(q > 0.0)) {
        throw DomainError("sample_error: need q > 0");
    }
    return q;
}

double wick_identity_rhs(double diag_oracle_sq_mean, double sigma_sq_mean, double t_out) {
    if (!(t_out >= 1.0)) {
        throw DomainError("wick_identity_rhs: need t_out >= 1");
    }
    return (2.0 / t_out - 1.0) * diag_oracle_sq_mean + sigma_sq_mean;
}

double variance_decomposition_error(double var_true, double var_oracle, double mean_true,
                                    double t_out) {
    if (!(t_out >= 1.0)) {
        throw DomainError("variance_decomposition_error: need t_out >= 1");
    }
    if (!(var_oracle >= 0.0) || var_oracle > var_true) {
        throw DomainError(
            "variance_decomposition_error: need 0 <= var_oracle <= var_true (oracle shrinks the "
            "eigenvalue variance)");
    }
    return var_true - var_oracle + 2.0 * (mean_true * mean_true + var_oracle) / t_out;
}

double expected_tau_sigma_sq(double n, double p) {
    if (!(p >= 0.0) || !(3.0 * p < n)) {
        throw DomainError("expected_tau_sigma_sq: need 0 <= p < n/3");
    }
    return (n - p) * (n * p - p + n) / (n * (n - 3.0 * p));
}

double inverse_wishart_element_variance(double n, double p, bool diagonal) {
    if (!(p >= 0.0) || !(3.0 * p < n)) {
        throw DomainError("inverse_wishart_element_variance: need 0 <= p < n/3");
    }
    const double delta = diagonal ? 1.0 : 0.0;
    return (p * (n - p) + p * (n + p) * delta) / (n * (n - 3.0 * p));
}

LamDiagnostic lam_split_diagnostic(double n, double t_out, double epsilon) {
    LamDiagnostic d;
    const double upper = std::pow(n, 1.0 - epsilon);
    d.lam_sufficient = t_out >= std::pow(n, 0.4 + epsilon) && t_out <= upper;
    d.corollary_sufficient = t_out >= 2.0 && t_out >= std::pow(n, epsilon) && t_out <= upper;
    d.ok = d.lam_sufficient || d.corollary_sufficient;
    d.t_out_over_sqrt_n = t_out / std::sqrt(n);
    return d;
}

TheoryPoint theory_point(double n, double p, double q, double k) {
    TheoryPoint pt;
    pt.n = n;
    pt.p = p;
    pt.q = q;
    pt.t = n / q;
    pt.k = k;
    pt.predicted_error = holdout_error_closed_form(n, p, q, k);
    if (p > 0.0 && n >= 4.0) {
        const double k_opt = k_opt_exact(n, p, q);
        if (k_opt > 1.0 && k_opt < pt.t) {
            pt.k_opt = k_opt;
        }
    }
    pt.p_over_n_large = p / n > kBiasedPOverN;
    pt.lam_condition_ok = lam_split_diagnostic(n, pt.t / k).ok;
    return pt;
}

}  // namespace cvcov::theory
