#include "cvcov/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "cvcov/errors.hpp"
#include "cvcov/theory.hpp"

namespace cvcov {

namespace {

constexpr std::pair<EstimatorKind, std::string_view> kEstimatorNames[] = {
    {EstimatorKind::sample, "sample"},           {EstimatorKind::oracle, "oracle"},
    {EstimatorKind::linear, "linear"},           {EstimatorKind::lp, "lp"},
    {EstimatorKind::holdout, "holdout"},         {EstimatorKind::holdout_rie, "holdout_rie"},
    {EstimatorKind::kfold, "kfold"},             {EstimatorKind::kfold_rie, "kfold_rie"},
};

// Neumaier summation.
class CompensatedSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

bool any_of_kind(const ExperimentConfig& c, bool (*pred)(EstimatorKind)) {
    return std::any_of(c.estimators.begin(), c.estimators.end(), pred);
}

SymmetricMatrix draw_population(const ExperimentConfig& c, std::uint64_t rep) {
    if (c.population == PopulationModel::identity) {
        return SymmetricMatrix::identity(c.ensemble.n);
    }
    return sample_white_inverse_wishart(
        c.ensemble, replication_stream(c.master_seed, rep, StreamRole::population));
}

SplitPlan draw_split(const ExperimentConfig& c, std::uint64_t rep, Index t_out, SplitMode mode) {
    const SeededRng split_stream = replication_stream(c.master_seed, rep, StreamRole::split);
    const SeededRng rng(c.master_seed, split_stream.stream_id(), static_cast<std::uint64_t>(t_out));
    return make_split(c.ensemble.t, t_out, mode, c.shuffle, rng);
}

}  // namespace

std::string_view to_string(EstimatorKind kind) {
    for (const auto& [k, name] : kEstimatorNames) {
        if (k == kind) {
            return name;
        }
    }
    return "unknown";
}

std::optional<EstimatorKind> parse_estimator(std::string_view name) {
    for (const auto& [k, n] : kEstimatorNames) {
        if (n == name) {
            return k;
        }
    }
    return std::nullopt;
}

bool uses_split(EstimatorKind kind) {
    return kind == EstimatorKind::holdout || kind == EstimatorKind::holdout_rie ||
           uses_kfold(kind);
}

bool uses_kfold(EstimatorKind kind) {
    return kind == EstimatorKind::kfold || kind == EstimatorKind::kfold_rie;
}

void ExperimentConfig::validate() const {
    const Index n = ensemble.n;
    const Index t = ensemble.t;
    if (n < 1) {
        throw ParameterError("n: dimension must be >= 1");
    }
    if (!ensemble.has_observations()) {
        throw ParameterError("q: no observation count attached to the ensemble");
    }
    if (population == PopulationModel::inverse_wishart && ensemble.t_star <= n + 1) {
        throw ParameterError("p: inverse Wishart needs t_star > n+1");
    }
    if (estimators.empty()) {
        throw ParameterError("estimators: at least one estimator is required");
    }
    if (replications < 1) {
        throw ParameterError("reps: replications must be >= 1");
    }
    if (workers < 1) {
        throw ParameterError("workers: need at least one worker");
    }
    if (lp_eta < 0.0) {
        throw ParameterError("eta: must be >= 0");
    }
    if (any_of_kind(*this, uses_split)) {
        if (t_out_grid.empty()) {
            throw ParameterError("k: split-based estimators need a nonempty k grid");
        }
        const bool kfold = any_of_kind(*this, uses_kfold);
        for (const Index t_out : t_out_grid) {
            if (t_out < 1 || t_out > t - 1) {
                throw ParameterError("k: t_out=" + std::to_string(t_out) + " outside {1.." +
                                     std::to_string(t - 1) + "}");
            }
            if (kfold && t % t_out != 0) {
                throw ParameterError("k: k-fold needs t_out to divide t (t=" + std::to_string(t) +
                                     ", t_out=" + std::to_string(t_out) + ")");
            }
        }
    }
}

double ExperimentConfig::model_p() const {
    return population == PopulationModel::identity ? 0.0 : ensemble.p;
}

std::vector<Cell> experiment_cells(const ExperimentConfig& config) {
    std::vector<Cell> cells;
    for (const EstimatorKind kind : config.estimators) {
        if (uses_split(kind)) {
            for (const Index t_out : config.t_out_grid) {
                cells.push_back({kind, t_out});
            }
        } else {
            cells.push_back({kind, std::nullopt});
        }
    }
    return cells;
}

ReplicationResult run_replication(const ExperimentConfig& c, std::uint64_t rep_index) {
    try {
        const Index t = c.ensemble.t;
        const SymmetricMatrix sigma = draw_population(c, rep_index);
        const DataMatrix x = sample_gaussian_data(
            sigma, t, replication_stream(c.master_seed, rep_index, StreamRole::data));

        std::optional<SymmetricMatrix> e;
        std::optional<Spectrum> full;
        auto sample = [&]() -> const SymmetricMatrix& {
            if (!e) {
                e = sample_covariance(x);
            }
            return *e;
        };
        auto full_spectrum = [&]() -> const Spectrum& {
            if (!full) {
                full = eigh_ascending(sample());
            }
            return *full;
        };

        std::map<Index, HoldoutFold> holdout_fits;
        std::map<Index, std::vector<HoldoutFold>> kfold_fits;
        auto holdout_fit = [&](Index t_out) -> const HoldoutFold& {
            auto it = holdout_fits.find(t_out);
            if (it == holdout_fits.end()) {
                const SplitPlan plan = draw_split(c, rep_index, t_out, SplitMode::holdout);
                it = holdout_fits.emplace(t_out, fit_fold(x, plan, 0)).first;
            }
            return it->second;
        };
        auto kfold_fit = [&](Index t_out) -> const std::vector<HoldoutFold>& {
            auto it = kfold_fits.find(t_out);
            if (it == kfold_fits.end()) {
                const SplitPlan plan = draw_split(c, rep_index, t_out, SplitMode::kfold);
                it = kfold_fits.emplace(t_out, fit_folds(x, plan)).first;
            }
            return it->second;
        };

        const double q = c.ensemble.q;
        ReplicationResult out;
        out.index = rep_index;
        for (const Cell& cell : experiment_cells(c)) {
            double err = 0.0;
            switch (cell.estimator) {
                case EstimatorKind::sample:
                    err = frobenius_error(sample(), sigma);
                    break;
                case EstimatorKind::oracle: {
                    const Spectrum& s = full_spectrum();
                    err = frobenius_error(compose(s.eigenvectors, oracle_eigenvalues(s, sigma)),
                                          sigma);
                    break;
                }
                case EstimatorKind::linear:
                    err = frobenius_error(linear_shrinkage(sample(), c.model_p(), q), sigma);
                    break;
                case EstimatorKind::lp: {
                    const Spectrum& s = full_spectrum();
                    const double eta = c.lp_eta > 0.0 ? c.lp_eta : default_lp_bandwidth(s.n());
                    const auto lp = ledoit_peche_eigenvalues(s, q, eta, c.lp_scale);
                    err = frobenius_error(ledoit_peche_estimator(s, lp), sigma);
                    break;
                }
                case EstimatorKind::holdout: {
                    const HoldoutFold& f = holdout_fit(*cell.t_out);
                    err = frobenius_error(compose(f.train.eigenvectors, f.holdout_eigenvalues),
                                          sigma);
                    break;
                }
                case EstimatorKind::holdout_rie: {
                    const HoldoutFold& f = holdout_fit(*cell.t_out);
                    err = frobenius_error(
                        compose(full_spectrum().eigenvectors, f.holdout_eigenvalues), sigma);
                    break;
                }
                case EstimatorKind::kfold:
                    err = frobenius_error(average_fold_estimators(kfold_fit(*cell.t_out)), sigma);
                    break;
                case EstimatorKind::kfold_rie:
                    err = frobenius_error(compose(full_spectrum().eigenvectors,
                                                  average_fold_eigenvalues(kfold_fit(*cell.t_out))),
                                          sigma);
                    break;
            }
            out.errors.push_back(err);
        }
        return out;
    } catch (const ReplicationError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ReplicationError(rep_index, ex.what());
    }
}

MeanStderr summarize(std::span<const double> values) {
    MeanStderr out;
    if (values.empty()) {
        return out;
    }
    const double count = static_cast<double>(values.size());
    CompensatedSum sum;
    for (const double v : values) {
        sum.add(v);
    }
    out.mean = sum.value() / count;
    if (values.size() > 1) {
        CompensatedSum sq;
        for (const double v : values) {
            sq.add((v - out.mean) * (v - out.mean));
        }
        out.standard_error = std::sqrt(sq.value() / (count - 1.0) / count);
    }
    return out;
}

void parallel_for(std::size_t count, unsigned workers,
                  const std::function<void(std::size_t)>& body) {
    if (count == 0) {
        return;
    }
    const unsigned threads = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, workers), count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::vector<std::exception_ptr> failures(count);
    {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                while (!stop.load(std::memory_order_relaxed)) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= count) {
                        return;
                    }
                    try {
                        body(i);
                    } catch (...) {
                        failures[i] = std::current_exception();
                        stop.store(true);
                    }
                }
            });
        }
    }
    for (const auto& f : failures) {
        if (f) {
            std::rethrow_exception(f);
        }
    }
}

ErrorSummary run_experiment(const ExperimentConfig& config) {
    config.validate();
    const auto reps = static_cast<std::size_t>(config.replications);
    std::vector<ReplicationResult> results(reps);
    parallel_for(reps, config.workers,
                 [&](std::size_t i) { results[i] = run_replication(config, i); });

    ErrorSummary summary;
    summary.config = config;
    summary.per_replication.reserve(reps);
    for (auto& r : results) {
        summary.per_replication.push_back(std::move(r.errors));
    }

    const auto cells = experiment_cells(config);
    const double n = static_cast<double>(config.ensemble.n);
    const double t = static_cast<double>(config.ensemble.t);
    const double p = config.model_p();
    const double q = config.ensemble.q;
    std::vector<double> column(reps);
    for (std::size_t j = 0; j < cells.size(); ++j) {
        for (std::size_t i = 0; i < reps; ++i) {
            column[i] = summary.per_replication[i][j];
        }
        const MeanStderr stats = summarize(column);

        ErrorRow row;
        row.estimator = cells[j].estimator;
        row.t_out = cells[j].t_out;
        row.mc_mean = stats.mean;
        row.mc_stderr = stats.standard_error;
        row.replications = config.replications;
        row.p_over_n_large = p / n > theory::kBiasedPOverN;
        if (row.t_out) {
            row.k = t / static_cast<double>(*row.t_out);
            row.lam_condition_ok = theory::lam_split_diagnostic(n, static_cast<double>(*row.t_out)).ok;
        }
        switch (row.estimator) {
            case EstimatorKind::sample:
                row.theory = theory::sample_error(q);
                break;
            case EstimatorKind::oracle:
                row.theory = theory::oracle_error(p, q);
                break;
            case EstimatorKind::holdout:
                row.theory = theory::holdout_error_closed_form(n, p, q, *row.k);
                break;
            default:
                break;
        }
        summary.rows.push_back(row);
    }
    return summary;
}

std::vector<Index> divisor_t_out_grid(Index t, double k_min, double k_max) {
    std::vector<Index> grid;
    for (Index k = 2; k <= t; ++k) {
        const double dk = static_cast<double>(k);
        if (t % k == 0 && dk >= k_min && dk <= k_max) {
            grid.push_back(t / k);
        }
    }
    return grid;
}

std::vector<Index> log_spaced_t_out_grid(Index t, std::size_t max_points) {
    std::vector<Index> grid;
    if (t < 2 || max_points == 0) {
        return grid;
    }
    const Index largest = t - 1;
    const std::size_t points = std::min<std::size_t>(max_points, static_cast<std::size_t>(largest));
    const double top = std::log(static_cast<double>(largest));
    for (std::size_t j = 0; j < points; ++j) {
        const double frac = points == 1 ? 0.0 : static_cast<double>(j) / static_cast<double>(points - 1);
        const auto t_out = static_cast<Index>(std::llround(std::exp(top * (1.0 - frac))));
        if (grid.empty() || grid.back() != t_out) {
            grid.push_back(std::clamp<Index>(t_out, 1, largest));
        }
    }
    return grid;
}

std::vector<Index> t_out_grid_from_k(Index t, std::span<const double> ks) {
    std::vector<Index> grid;
    for (const double k : ks) {
        if (!(k > 0.0)) {
            throw ParameterError("k: values must be positive");
        }
        const auto t_out = static_cast<Index>(std::llround(static_cast<double>(t) / k));
        if (t_out < 1 || t_out > t - 1) {
            throw ParameterError("k: k=" + std::to_string(k) + " gives t_out=" +
                                 std::to_string(t_out) + " outside {1.." + std::to_string(t - 1) +
                                 "}");
        }
        if (std::find(grid.begin(), grid.end(), t_out) == grid.end()) {
            grid.push_back(t_out);
        }
    }
    return grid;
}

std::vector<ScatterRow> run_scatter(const ScatterConfig& config) {
    if (config.trials < 0 || config.replications < 1) {
        throw ParameterError("trials/reps: need trials >= 0 and reps >= 1");
    }
    if (config.n_min < 4 || config.n_max < config.n_min || !(config.p_min > 0.0) ||
        config.p_max < config.p_min || !(config.q_min > 0.0) || config.q_max < config.q_min) {
        throw ParameterError("scatter: invalid parameter ranges");
    }

    std::vector<ScatterRow> rows;
    for (Index trial = 0; trial < config.trials; ++trial) {
        auto engine = SeededRng(config.master_seed, static_cast<std::uint64_t>(trial)).engine();
        std::uniform_int_distribution<Index> n_dist(config.n_min, config.n_max);
        std::uniform_real_distribution<double> p_dist(config.p_min, config.p_max);
        std::uniform_real_distribution<double> q_dist(config.q_min, config.q_max);

        Index n = 0;
        double p = 0.0;
        for (int attempt = 0;; ++attempt) {
            if (attempt == 100000) {
                throw ParameterError("scatter: no (n, p) in range satisfies p/n > min_p_over_n");
            }
            n = n_dist(engine);
            p = p_dist(engine);
            const double dn = static_cast<double>(n);
            if (p / dn > config.min_p_over_n && 3.0 * p < dn) {
                break;
            }
        }
        const double q = q_dist(engine);

        ExperimentConfig exp;
        exp.ensemble = with_aspect_ratio(spec_from_np(n, p), q);
        const std::vector<Index> divisors = divisor_t_out_grid(exp.ensemble.t);
        if (divisors.empty()) {
            throw ParameterError("scatter: t=" + std::to_string(exp.ensemble.t) + " too small");
        }
        std::uniform_int_distribution<std::size_t> pick(0, divisors.size() - 1);
        const Index t_out = divisors[pick(engine)];

        exp.estimators = {EstimatorKind::holdout};
        exp.t_out_grid = {t_out};
        exp.replications = config.replications;
        exp.master_seed = engine();
        exp.shuffle = config.shuffle;
        exp.workers = config.workers;
        const ErrorSummary summary = run_experiment(exp);
        const ErrorRow& r = summary.rows.front();

        ScatterRow row;
        row.trial = trial;
        row.n = n;
        row.p = exp.ensemble.p;
        row.q = exp.ensemble.q;
        row.k = *r.k;
        row.t_out = t_out;
        row.mc_error = r.mc_mean;
        row.mc_stderr = r.mc_stderr;
        row.theory_error = *r.theory;
        row.p_over_n = exp.ensemble.p_over_n();
        row.flag_biased = row.p_over_n > theory::kBiasedPOverN;
        rows.push_back(row);
    }
    return rows;
}

WickResult wick_identity_experiment(const ExperimentConfig& config) {
    ExperimentConfig c = config;
    c.estimators = {EstimatorKind::holdout};
    if (c.t_out_grid.size() != 1) {
        throw ParameterError("t-out: the Wick check takes exactly one split size");
    }
    c.validate();

    const Index t_out = c.t_out_grid.front();
    const auto reps = static_cast<std::size_t>(c.replications);
    std::vector<double> lhs(reps), diag_sq(reps), sigma_sq(reps), rhs(reps), diff(reps);
    parallel_for(reps, c.workers, [&](std::size_t i) {
        try {
            const SymmetricMatrix sigma = draw_population(c, i);
            const DataMatrix x = sample_gaussian_data(
                sigma, c.ensemble.t, replication_stream(c.master_seed, i, StreamRole::data));
            const SplitPlan plan = draw_split(c, i, t_out, SplitMode::holdout);
            const HoldoutFold f = fit_fold(x, plan, 0);
            const double dn = static_cast<double>(sigma.n());
            lhs[i] = frobenius_error(compose(f.train.eigenvectors, f.holdout_eigenvalues), sigma);
            diag_sq[i] = diag_quadratic(f.train.eigenvectors, sigma).squaredNorm() / dn;
            sigma_sq[i] = sigma.matrix().squaredNorm() / dn;
            rhs[i] = theory::wick_identity_rhs(diag_sq[i], sigma_sq[i], static_cast<double>(t_out));
            diff[i] = lhs[i] - rhs[i];
        } catch (const std::exception& ex) {
            throw ReplicationError(i, ex.what());
        }
    });

    WickResult out;
    out.t_out = t_out;
    out.replications = c.replications;
    out.lhs = summarize(lhs);
    out.diag_sq = summarize(diag_sq);
    out.sigma_sq = summarize(sigma_sq);
    out.rhs_terms = summarize(rhs);
    out.rhs = theory::wick_identity_rhs(out.diag_sq.mean, out.sigma_sq.mean,
                                        static_cast<double>(t_out));
    out.combined_stderr = std::hypot(out.lhs.standard_error, out.rhs_terms.standard_error);
    out.paired_stderr = summarize(diff).standard_error;
    return out;
}

}  // namespace cvcov
