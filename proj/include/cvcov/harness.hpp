#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cvcov/ensembles.hpp"
#include "cvcov/estimators.hpp"

namespace cvcov {

enum class EstimatorKind { sample, oracle, linear, lp, holdout, holdout_rie, kfold, kfold_rie };

std::string_view to_string(EstimatorKind kind);
std::optional<EstimatorKind> parse_estimator(std::string_view name);

/// True for estimators evaluated once per split size.
bool uses_split(EstimatorKind kind);
bool uses_kfold(EstimatorKind kind);

enum class PopulationModel {
    inverse_wishart,
    identity,  ///< Sigma = I, the p -> 0 limit
};

struct ExperimentConfig {
    EnsembleSpec ensemble;  ///< must carry an observation count
    std::vector<EstimatorKind> estimators;
    std::vector<Index> t_out_grid;  ///< split sizes for split-based estimators
    Index replications = 1;
    std::uint64_t master_seed = 0;
    bool shuffle = false;
    unsigned workers = 1;
    PopulationModel population = PopulationModel::inverse_wishart;
    double lp_eta = 0.0;  ///< 0 selects default_lp_bandwidth(n)
    BandwidthScale lp_scale = BandwidthScale::relative;

    /// Throws ParameterError naming the offending field.
    void validate() const;
    /// p used by closed forms and by the linear estimator (0 for the identity population).
    double model_p() const;
};

/// One (estimator, split size) evaluated in every replication.
struct Cell {
    EstimatorKind estimator;
    std::optional<Index> t_out;
};

/// Cells in output order: estimators as configured, split sizes in grid order.
std::vector<Cell> experiment_cells(const ExperimentConfig& config);

struct ReplicationResult {
    std::uint64_t index = 0;
    std::vector<double> errors;  ///< aligned with experiment_cells()
};

/**
 * One population draw and one data draw shared by every cell. Streams are
 * derived from (master_seed, rep_index) only, so the result does not depend
 * on scheduling. Sampler failures are rethrown as ReplicationError.
 */
ReplicationResult run_replication(const ExperimentConfig& config, std::uint64_t rep_index);

class ReplicationError : public std::runtime_error {
public:
    ReplicationError(std::uint64_t index, const std::string& what)
        : std::runtime_error("replication " + std::to_string(index) + ": " + what),
          index_(index) {}
    std::uint64_t index() const noexcept { return index_; }

private:
    std::uint64_t index_;
};

struct ErrorRow {
    EstimatorKind estimator;
    std::optional<Index> t_out;
    std::optional<double> k;
    double mc_mean = 0.0;
    double mc_stderr = 0.0;
    Index replications = 0;
    std::optional<double> theory;
    bool p_over_n_large = false;
    std::optional<bool> lam_condition_ok;
};

struct ErrorSummary {
    ExperimentConfig config;
    std::vector<ErrorRow> rows;
    /// Per-replication errors, replications x cells, kept for paired comparisons.
    std::vector<std::vector<double>> per_replication;
};

ErrorSummary run_experiment(const ExperimentConfig& config);

struct MeanStderr {
    double mean = 0.0;
    double standard_error = 0.0;
};

/// Compensated mean and standard error of the mean (0 for a single value).
MeanStderr summarize(std::span<const double> values);

/**
 * Runs body(i) for i in [0, count) on `workers` threads. On failure the
 * remaining indices are skipped and the exception of the lowest failing
 * index is rethrown.
 */
void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& body);

/// Split sizes t / k for the divisors k of t with k_min <= k <= k_max, ordered by increasing k.
std::vector<Index> divisor_t_out_grid(Index t, double k_min = 2.0,
                                      double k_max = std::numeric_limits<double>::infinity());

/// Up to max_points split sizes log-spaced over {1..t-1}, ordered by increasing k.
std::vector<Index> log_spaced_t_out_grid(Index t, std::size_t max_points = 64);

/// t_out = round(t / k) for each requested k; throws ParameterError if one lands outside {1..t-1}.
std::vector<Index> t_out_grid_from_k(Index t, std::span<const double> ks);

struct ScatterConfig {
    Index trials = 0;
    Index replications = 100;
    std::uint64_t master_seed = 0;
    unsigned workers = 1;
    Index n_min = 100, n_max = 1000;
    double p_min = 0.1, p_max = 9.0;
    double q_min = 0.1, q_max = 0.9;
    /// Redraw (n, p) until p/n exceeds this value.
    double min_p_over_n = 0.0;
    bool shuffle = false;
};

struct ScatterRow {
    Index trial = 0;
    Index n = 0;
    double p = 0.0;
    double q = 0.0;
    double k = 0.0;
    Index t_out = 0;
    double mc_error = 0.0;
    double mc_stderr = 0.0;
    double theory_error = 0.0;
    double p_over_n = 0.0;
    bool flag_biased = false;
};

/// Randomized (n, p, q, k) trials of the holdout estimator against the closed form.
std::vector<ScatterRow> run_scatter(const ScatterConfig& config);

struct WickResult {
    Index t_out = 0;
    Index replications = 0;
    MeanStderr lhs;           ///< tau((Xi^H - Sigma)^2)
    MeanStderr diag_sq;       ///< tau(Diag(V_in^T Sigma V_in)^2)
    MeanStderr sigma_sq;      ///< tau(Sigma^2)
    MeanStderr rhs_terms;     ///< per-replication right-hand side
    double rhs = 0.0;         ///< wick_identity_rhs of the two means
    double combined_stderr = 0.0;  ///< sqrt(se_lhs^2 + se_rhs^2)
    double paired_stderr = 0.0;    ///< standard error of lhs - rhs per replication
};

/// Both sides of the Wick identity by Monte Carlo; uses config.t_out_grid.front().
WickResult wick_identity_experiment(const ExperimentConfig& config);

}  // namespace cvcov
