#include "cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "cvcov/errors.hpp"
#include "cvcov/harness.hpp"
#include "cvcov/theory.hpp"
#include "svg_plot.hpp"
#include "table_io.hpp"

namespace cvcov::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct GlobalArgs {
    std::uint64_t seed = 1;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::string config;
    std::string out_dir = ".";
    bool svg = false;
};

struct SweepArgs {
    Index n = 200;
    double p = 1.5;
    double q = 0.5;
    Index t = 0;
    Index reps = 100;
    std::string estimators = "holdout,kfold";
    std::string k;
    std::string grid = "auto";
    bool shuffle = false;
    std::string population = "inverse-wishart";
    double eta = 0.0;
    std::string eta_scale = "relative";
    std::string name = "sweep";
};

struct TheoryArgs {
    double n = 200;
    double p = 1.5;
    double q = 0.5;
    std::string k;
    std::size_t points = 40;
};

struct ScatterArgs {
    Index trials = 50;
    Index reps = 100;
    Index n_min = 100, n_max = 1000;
    double p_min = 0.1, p_max = 9.0;
    double q_min = 0.1, q_max = 0.9;
    double min_p_over_n = 0.0;
    bool shuffle = false;
    std::string name = "scatter";
};

struct WickArgs {
    Index n = 100;
    double p = 1.5;
    double q = 0.5;
    Index t_out = 40;
    Index reps = 500;
    std::string population = "inverse-wishart";
    bool shuffle = false;
};

struct CleanArgs {
    std::string input;
    std::string method = "holdout";
    bool features_in_rows = false;
    bool demean = false;
    bool header = false;
    double k = 0.0;
    double eta = 0.0;
    std::string eta_scale = "relative";
    bool shuffle = false;
    std::string name = "cleaned";
};

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> items;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto a = item.find_first_not_of(" \t");
        const auto b = item.find_last_not_of(" \t");
        if (a != std::string::npos) {
            items.push_back(item.substr(a, b - a + 1));
        }
    }
    return items;
}

std::vector<double> parse_k_list(const std::string& s) {
    std::vector<double> ks;
    for (const auto& item : split_list(s)) {
        try {
            std::size_t used = 0;
            ks.push_back(std::stod(item, &used));
            if (used != item.size()) {
                throw std::invalid_argument(item);
            }
        } catch (const std::logic_error&) {
            throw UsageError("--k: not a number: '" + item + "'");
        }
    }
    return ks;
}

PopulationModel parse_population(const std::string& s) {
    if (s == "inverse-wishart") {
        return PopulationModel::inverse_wishart;
    }
    if (s == "identity") {
        return PopulationModel::identity;
    }
    throw UsageError("--population: expected inverse-wishart or identity, got '" + s + "'");
}

BandwidthScale parse_scale(const std::string& s) {
    if (s == "relative") {
        return BandwidthScale::relative;
    }
    if (s == "absolute") {
        return BandwidthScale::absolute;
    }
    throw UsageError("--eta-scale: expected relative or absolute, got '" + s + "'");
}

EnsembleSpec make_ensemble(Index n, double p, double q, Index t, PopulationModel population) {
    EnsembleSpec spec;
    if (population == PopulationModel::identity) {
        if (n < 1) {
            throw UsageError("--n: must be >= 1");
        }
        spec.n = n;
        spec.p = 0.0;
    } else {
        spec = spec_from_np(n, p);
    }
    return t > 0 ? with_observations(spec, t) : with_aspect_ratio(spec, q);
}

fs::path output_path(const GlobalArgs& g, const std::string& file) {
    const fs::path dir(g.out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw std::runtime_error("--out: cannot create directory " + dir.string() + ": " +
                                 ec.message());
    }
    return dir / file;
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw std::runtime_error("cannot write " + path.string());
    }
    f << content;
    f.close();
    if (!f) {
        throw std::runtime_error("write failed: " + path.string());
    }
}

// ---------------------------------------------------------------- sweep

int cmd_sweep(const GlobalArgs& g, const SweepArgs& a, std::ostream& out) {
    ExperimentConfig c;
    c.population = parse_population(a.population);
    c.ensemble = make_ensemble(a.n, a.p, a.q, a.t, c.population);
    for (const auto& name : split_list(a.estimators)) {
        const auto kind = parse_estimator(name);
        if (!kind) {
            throw UsageError("--estimators: unknown estimator '" + name +
                             "' (sample, oracle, linear, lp, holdout, holdout_rie, kfold, "
                             "kfold_rie)");
        }
        c.estimators.push_back(*kind);
    }
    if (c.estimators.empty()) {
        throw UsageError("--estimators: empty list");
    }

    const Index t = c.ensemble.t;
    const bool split = std::any_of(c.estimators.begin(), c.estimators.end(), uses_split);
    const bool kfold = std::any_of(c.estimators.begin(), c.estimators.end(), uses_kfold);
    if (!a.k.empty()) {
        const auto ks = parse_k_list(a.k);
        c.t_out_grid = t_out_grid_from_k(t, ks);
    } else if (split) {
        if (a.grid == "divisors" || (a.grid == "auto" && kfold)) {
            c.t_out_grid = divisor_t_out_grid(t);
        } else if (a.grid == "log" || a.grid == "auto") {
            c.t_out_grid = log_spaced_t_out_grid(t);
        } else {
            throw UsageError("--grid: expected auto, divisors or log, got '" + a.grid + "'");
        }
    }
    c.replications = a.reps;
    c.master_seed = g.seed;
    c.shuffle = a.shuffle;
    c.workers = g.workers;
    c.lp_eta = a.eta;
    c.lp_scale = parse_scale(a.eta_scale);
    c.validate();

    const ErrorSummary summary = run_experiment(c);

    std::ostringstream csv;
    csv << "estimator,k,t_out,mc_error_mean,mc_error_stderr,theory_error,n,p,q,reps,seed\n";
    for (const ErrorRow& r : summary.rows) {
        csv << to_string(r.estimator) << ',' << format_number(r.k) << ','
            << (r.t_out ? std::to_string(*r.t_out) : std::string()) << ','
            << format_number(r.mc_mean) << ',' << format_number(r.mc_stderr) << ','
            << format_number(r.theory) << ',' << c.ensemble.n << ',' << format_number(c.model_p())
            << ',' << format_number(c.ensemble.q) << ',' << r.replications << ',' << g.seed
            << '\n';
    }
    const fs::path csv_path = output_path(g, a.name + ".csv");
    write_file(csv_path, csv.str());
    out << "wrote " << csv_path.string() << " (" << summary.rows.size() << " rows)\n";

    if (g.svg) {
        std::vector<PlotSeries> series;
        double k_lo = 2.0, k_hi = static_cast<double>(t);
        for (const Index t_out : c.t_out_grid) {
            const double k = static_cast<double>(t) / static_cast<double>(t_out);
            k_lo = std::min(k_lo, k);
            k_hi = std::max(k_hi, k);
        }
        PlotSeries theory{"holdout (closed form)", {}, {}};
        for (const EstimatorKind kind : c.estimators) {
            PlotSeries s{std::string(to_string(kind)), {}, {}};
            for (const ErrorRow& r : summary.rows) {
                if (r.estimator != kind) {
                    continue;
                }
                if (r.k) {
                    s.x.push_back(*r.k);
                    s.y.push_back(r.mc_mean);
                    if (kind == EstimatorKind::holdout && r.theory) {
                        theory.x.push_back(*r.k);
                        theory.y.push_back(*r.theory);
                    }
                } else {
                    s.x = {k_lo, k_hi};
                    s.y = {r.mc_mean, r.mc_mean};
                }
            }
            series.push_back(std::move(s));
        }
        if (!theory.x.empty()) {
            series.push_back(std::move(theory));
        }
        PlotOptions opt;
        opt.title = "Frobenius error, n=" + std::to_string(c.ensemble.n) +
                    " p=" + format_number(std::round(c.model_p() * 1e4) / 1e4) +
                    " q=" + format_number(std::round(c.ensemble.q * 1e4) / 1e4);
        opt.x_label = "k = t / t_out";
        opt.y_label = "mean error";
        opt.log_x = true;
        const fs::path svg_path = output_path(g, a.name + ".svg");
        write_file(svg_path, render_svg(series, opt));
        out << "wrote " << svg_path.string() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------- theory

int cmd_theory(const GlobalArgs& g, const TheoryArgs& a, bool write_csv, std::ostream& out) {
    if (!(a.n >= 4.0) || !(a.q > 0.0) || !(a.p >= 0.0)) {
        throw UsageError("theory: need --n >= 4, --q > 0 and --p >= 0");
    }
    const double t = a.n / a.q;
    if (t < 2.0) {
        throw UsageError("theory: t = n/q must be >= 2");
    }

    out << "n: " << format_number(a.n) << '\n'
        << "p: " << format_number(a.p) << '\n'
        << "q: " << format_number(a.q) << '\n'
        << "t: " << format_number(t) << '\n'
        << "oracle_error: " << format_number(theory::oracle_error(a.p, a.q)) << '\n'
        << "sample_error: " << format_number(theory::sample_error(a.q)) << '\n'
        << "p_over_n: " << format_number(a.p / a.n) << '\n'
        << "p_over_n_large: " << (a.p / a.n > theory::kBiasedPOverN ? "true" : "false") << '\n';

    if (a.p == 0.0) {
        out << "regime: monotone (p = 0): error 2k/t increases with k, no k_opt\n";
    } else {
        const double k_exact = theory::k_opt_exact(a.n, a.p, a.q);
        out << "k_opt_exact: " << format_number(k_exact) << '\n'
            << "k_opt_stationary: " << format_number(theory::k_opt_stationary(a.n, a.p, a.q))
            << '\n'
            << "k_opt_asymptotic: " << format_number(theory::k_opt_asymptotic(a.n, a.p, a.q))
            << '\n';
        if (k_exact > 1.0 && k_exact < t) {
            const double t_out = t / k_exact;
            const auto lam = theory::lam_split_diagnostic(a.n, t_out);
            out << "regime: interior minimum\n"
                << "error_at_k_opt: "
                << format_number(theory::holdout_error_closed_form(a.n, a.p, a.q, k_exact)) << '\n'
                << "t_out_at_k_opt: " << format_number(t_out) << '\n'
                << "lam_sufficient: " << (lam.lam_sufficient ? "true" : "false") << '\n'
                << "corollary_sufficient: " << (lam.corollary_sufficient ? "true" : "false")
                << '\n'
                << "t_out_over_sqrt_n: " << format_number(lam.t_out_over_sqrt_n) << '\n';
        } else {
            out << "regime: monotone on (1, t]: k_opt falls outside the valid split range\n";
        }
    }

    std::vector<double> ks;
    if (!a.k.empty()) {
        ks = parse_k_list(a.k);
    } else {
        const auto t_int = static_cast<Index>(std::llround(t));
        for (const Index t_out : log_spaced_t_out_grid(t_int, a.points)) {
            ks.push_back(t / static_cast<double>(t_out));
        }
    }
    std::ostringstream csv;
    csv << "k,t_out,predicted_error,lam_condition_ok\n";
    for (const double k : ks) {
        if (!(k > 1.0) || k > t) {
            throw UsageError("--k: " + format_number(k) + " outside (1, t]");
        }
        const auto pt = theory::theory_point(a.n, a.p, a.q, k);
        csv << format_number(k) << ',' << format_number(t / k) << ','
            << format_number(pt.predicted_error) << ',' << (pt.lam_condition_ok ? "true" : "false")
            << '\n';
    }
    out << '\n' << csv.str();
    if (write_csv) {
        const fs::path path = output_path(g, "theory.csv");
        write_file(path, csv.str());
        out << "wrote " << path.string() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------- scatter

int cmd_scatter(const GlobalArgs& g, const ScatterArgs& a, std::ostream& out) {
    ScatterConfig c;
    c.trials = a.trials;
    c.replications = a.reps;
    c.master_seed = g.seed;
    c.workers = g.workers;
    c.n_min = a.n_min;
    c.n_max = a.n_max;
    c.p_min = a.p_min;
    c.p_max = a.p_max;
    c.q_min = a.q_min;
    c.q_max = a.q_max;
    c.min_p_over_n = a.min_p_over_n;
    c.shuffle = a.shuffle;
    const auto rows = run_scatter(c);

    std::ostringstream csv;
    csv << "trial,n,p,q,k,mc_error,theory_error,p_over_n,flag_biased\n";
    std::vector<double> biased_diff;
    PlotSeries flat{"p/n <= 0.01", {}, {}}, biased{"p/n > 0.01", {}, {}};
    for (const ScatterRow& r : rows) {
        csv << r.trial << ',' << r.n << ',' << format_number(r.p) << ',' << format_number(r.q)
            << ',' << format_number(r.k) << ',' << format_number(r.mc_error) << ','
            << format_number(r.theory_error) << ',' << format_number(r.p_over_n) << ','
            << (r.flag_biased ? "true" : "false") << '\n';
        PlotSeries& s = r.flag_biased ? biased : flat;
        s.x.push_back(r.theory_error);
        s.y.push_back(r.mc_error);
        if (r.flag_biased) {
            biased_diff.push_back(r.mc_error - r.theory_error);
        }
    }
    const fs::path csv_path = output_path(g, a.name + ".csv");
    write_file(csv_path, csv.str());
    out << "wrote " << csv_path.string() << " (" << rows.size() << " trials)\n";
    if (biased_diff.size() > 1) {
        const MeanStderr d = summarize(biased_diff);
        out << "biased trials: " << biased_diff.size()
            << ", mean(mc - theory) = " << format_number(d.mean)
            << ", t = " << format_number(d.mean / d.standard_error) << '\n';
    }
    if (g.svg) {
        PlotOptions opt;
        opt.title = "Holdout error: Monte Carlo vs closed form";
        opt.x_label = "closed-form error";
        opt.y_label = "Monte Carlo error";
        opt.lines = false;
        opt.diagonal = true;
        const fs::path svg_path = output_path(g, a.name + ".svg");
        write_file(svg_path, render_svg({flat, biased}, opt));
        out << "wrote " << svg_path.string() << '\n';
    }
    return kExitOk;
}

// ---------------------------------------------------------------- wick-check

int cmd_wick(const GlobalArgs& g, const WickArgs& a, std::ostream& out) {
    ExperimentConfig c;
    c.population = parse_population(a.population);
    c.ensemble = make_ensemble(a.n, a.p, a.q, 0, c.population);
    c.t_out_grid = {a.t_out};
    c.replications = a.reps;
    c.master_seed = g.seed;
    c.workers = g.workers;
    c.shuffle = a.shuffle;
    const WickResult w = wick_identity_experiment(c);
    const double diff = w.lhs.mean - w.rhs;
    json j = {
        {"n", c.ensemble.n},
        {"p", c.model_p()},
        {"q", c.ensemble.q},
        {"t", c.ensemble.t},
        {"t_out", w.t_out},
        {"replications", w.replications},
        {"seed", g.seed},
        {"lhs", w.lhs.mean},
        {"lhs_stderr", w.lhs.standard_error},
        {"tau_diag_sq", w.diag_sq.mean},
        {"tau_sigma_sq", w.sigma_sq.mean},
        {"rhs", w.rhs},
        {"rhs_stderr", w.rhs_terms.standard_error},
        {"difference", diff},
        {"combined_stderr", w.combined_stderr},
        {"paired_stderr", w.paired_stderr},
        {"within_3_combined_stderr", std::abs(diff) <= 3.0 * w.combined_stderr},
    };
    out << j.dump(2) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- clean

Index nearest_divisor(Index t, double k) {
    Index best = 0;
    double best_gap = std::numeric_limits<double>::infinity();
    for (Index d = 2; d <= t; ++d) {
        const double gap = std::abs(static_cast<double>(d) - k);
        if (t % d == 0 && gap < best_gap) {
            best = d;
            best_gap = gap;
        }
    }
    return best;
}

int cmd_clean(const GlobalArgs& g, const CleanArgs& a, std::ostream& out) {
    static const std::vector<std::string> methods = {"sample", "linear", "lp", "holdout", "kfold"};
    if (std::find(methods.begin(), methods.end(), a.method) == methods.end()) {
        throw UsageError("--method: expected sample, linear, lp, holdout or kfold, got '" +
                         a.method + "'");
    }
    if (a.k != 0.0 && !(a.k > 1.0)) {
        throw UsageError("--k: must be > 1");
    }
    if (a.eta < 0.0) {
        throw UsageError("--eta: must be > 0");
    }
    const BandwidthScale scale = parse_scale(a.eta_scale);

    const Matrix raw = read_numeric_csv_file(a.input, a.header);
    DataMatrix x = a.features_in_rows ? raw : Matrix(raw.transpose());
    const Index n = x.rows();
    const Index t = x.cols();
    if (t < 2) {
        throw InputError(a.input + ": need at least 2 observations, found " + std::to_string(t));
    }
    if (a.demean) {
        x.colwise() -= x.rowwise().mean();
        // Rescaled so that XX^T / t carries the unbiased divisor t - 1.
        x *= std::sqrt(static_cast<double>(t) / static_cast<double>(t - 1));
    }
    const double q = static_cast<double>(n) / static_cast<double>(t);
    const SymmetricMatrix e = sample_covariance(x);
    const double p_hat = estimate_p_from_sample(e, q);
    const double r = ShrinkageCoefficient::from_pq(std::max(p_hat, 0.0), q).value();

    json side = {{"method", a.method}, {"n", n},       {"t", t},         {"q", q},
                 {"p_hat", p_hat},     {"r", r},       {"k_used", nullptr}, {"t_out", nullptr},
                 {"eta", nullptr},     {"floored_eigenvalues", 0}, {"seed", g.seed},
                 {"demean", a.demean}};

    SymmetricMatrix result = e;
    if (a.method == "linear") {
        result = linear_shrinkage(e, std::max(p_hat, 0.0), q);
    } else if (a.method == "lp") {
        const Spectrum s = eigh_ascending(e);
        const double eta = a.eta > 0.0 ? a.eta : default_lp_bandwidth(n);
        const auto lp = ledoit_peche_eigenvalues(s, q, eta, scale);
        result = ledoit_peche_estimator(s, lp);
        side["eta"] = eta;
        side["eta_scale"] = a.eta_scale;
        side["floored_eigenvalues"] = lp.floored;
    } else if (a.method == "holdout" || a.method == "kfold") {
        double k = a.k;
        bool fallback = false;
        if (k == 0.0) {
            if (p_hat <= 0.0) {
                k = 10.0;
                fallback = true;
            } else {
                const double p_floor = std::max(p_hat, theory::kMinEstimatedP);
                k = std::round(theory::k_opt_exact(static_cast<double>(n), p_floor, q));
            }
        }
        k = std::clamp(k, 2.0, static_cast<double>(t));
        Index t_out = 0;
        SplitMode mode = SplitMode::holdout;
        if (a.method == "kfold") {
            mode = SplitMode::kfold;
            t_out = t / nearest_divisor(t, k);
        } else {
            t_out = std::clamp<Index>(static_cast<Index>(std::llround(static_cast<double>(t) / k)),
                                      1, t - 1);
        }
        const SplitPlan plan = make_split(t, t_out, mode, a.shuffle, SeededRng(g.seed, 0));
        result = mode == SplitMode::kfold ? kfold_cv_estimator(x, plan) : holdout_estimator(x, plan);
        side["k_used"] = plan.k();
        side["t_out"] = t_out;
        side["k_default_fallback"] = fallback;
    }

    std::ostringstream csv;
    write_matrix_csv(csv, result.matrix());
    const fs::path csv_path = output_path(g, a.name + ".csv");
    write_file(csv_path, csv.str());
    const fs::path json_path = output_path(g, a.name + ".json");
    write_file(json_path, side.dump(2) + "\n");
    out << "wrote " << csv_path.string() << " and " << json_path.string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------- config file

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) {
        return {};
    }
    return s.substr(a, s.find_last_not_of(" \t\r") - a + 1);
}

bool has_option(const CLI::App* app, const std::string& flag) {
    return app->get_option_no_throw(flag) != nullptr;
}

struct ConfigTokens {
    std::vector<std::string> global;
    std::vector<std::string> command;
};

/// key=value lines turned into "--key=value" tokens, validated against the selected command.
ConfigTokens config_tokens(const std::string& path, const CLI::App& app, const CLI::App* command) {
    std::ifstream f(path);
    if (!f) {
        throw UsageError("--config: cannot open " + path);
    }
    ConfigTokens tokens;
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        const std::string where = path + ":" + std::to_string(line_no);
        if (eq == std::string::npos) {
            throw UsageError(where + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') &&
            value.back() == value.front()) {
            value = value.substr(1, value.size() - 2);
        }
        const std::string flag = "--" + key;
        if (key == "config" || key == "help") {
            throw UsageError(where + ": key '" + key + "' is not allowed in a config file");
        }
        if (command && has_option(command, flag)) {
            tokens.command.push_back(flag + "=" + value);
        } else if (has_option(&app, flag)) {
            tokens.global.push_back(flag + "=" + value);
        } else {
            throw UsageError(where + ": unknown key '" + key + "'");
        }
    }
    return tokens;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    GlobalArgs g;
    SweepArgs sweep;
    TheoryArgs th;
    ScatterArgs sc;
    WickArgs wk;
    CleanArgs cl;

    CLI::App app{"Covariance cleaning by cross-validation: Monte Carlo benchmarks and closed-form theory",
                 "cvcov"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    app.fallthrough();
    app.add_option("--seed", g.seed, "Master seed")->capture_default_str();
    app.add_option("--workers", g.workers, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--config", g.config, "key = value file; flags override its values");
    app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
    app.add_flag("--svg", g.svg, "Also write an SVG plot");

    auto* s = app.add_subcommand("sweep", "Error curves over the split ratio k");
    s->add_option("--n", sweep.n, "Dimension")->capture_default_str();
    s->add_option("--p", sweep.p, "Inverse Wishart shape")->capture_default_str();
    s->add_option("--q", sweep.q, "Aspect ratio n/t")->capture_default_str();
    s->add_option("--t", sweep.t, "Observation count (overrides --q)");
    s->add_option("--reps", sweep.reps, "Replications")->capture_default_str();
    s->add_option("--estimators", sweep.estimators,
                  "Comma list of sample, oracle, linear, lp, holdout, holdout_rie, kfold, kfold_rie")
        ->capture_default_str();
    s->add_option("--k", sweep.k, "Comma list of k values (overrides --grid)");
    s->add_option("--grid", sweep.grid,
                  "auto (divisors when a k-fold estimator is selected, else log), divisors, log")
        ->capture_default_str();
    s->add_flag("--shuffle", sweep.shuffle, "Shuffle observations before splitting");
    s->add_option("--population", sweep.population, "inverse-wishart or identity")
        ->capture_default_str();
    s->add_option("--eta", sweep.eta, "Ledoit-Peche bandwidth (default n^-1/2)");
    s->add_option("--eta-scale", sweep.eta_scale, "relative or absolute")->capture_default_str();
    s->add_option("--name", sweep.name, "Output file stem")->capture_default_str();

    auto* t = app.add_subcommand("theory", "Closed-form error curve and optimal split");
    t->add_option("--n", th.n, "Dimension")->capture_default_str();
    t->add_option("--p", th.p, "Inverse Wishart shape")->capture_default_str();
    t->add_option("--q", th.q, "Aspect ratio n/t")->capture_default_str();
    t->add_option("--k", th.k, "Comma list of k values for the curve");
    t->add_option("--points", th.points, "Curve points when --k is absent")->capture_default_str();

    auto* c = app.add_subcommand("scatter", "Randomized holdout trials against the closed form");
    c->add_option("--trials", sc.trials, "Number of trials")->capture_default_str();
    c->add_option("--reps", sc.reps, "Replications per trial")->capture_default_str();
    c->add_option("--n-min", sc.n_min)->capture_default_str();
    c->add_option("--n-max", sc.n_max)->capture_default_str();
    c->add_option("--p-min", sc.p_min)->capture_default_str();
    c->add_option("--p-max", sc.p_max)->capture_default_str();
    c->add_option("--q-min", sc.q_min)->capture_default_str();
    c->add_option("--q-max", sc.q_max)->capture_default_str();
    c->add_option("--min-p-over-n", sc.min_p_over_n, "Keep only draws with p/n above this")
        ->capture_default_str();
    c->add_flag("--shuffle", sc.shuffle);
    c->add_option("--name", sc.name, "Output file stem")->capture_default_str();

    auto* w = app.add_subcommand("wick-check", "Monte Carlo check of the holdout error identity");
    w->add_option("--n", wk.n)->capture_default_str();
    w->add_option("--p", wk.p)->capture_default_str();
    w->add_option("--q", wk.q)->capture_default_str();
    w->add_option("--t-out", wk.t_out, "Test-set size")->capture_default_str();
    w->add_option("--reps", wk.reps)->capture_default_str();
    w->add_option("--population", wk.population, "inverse-wishart or identity")
        ->capture_default_str();
    w->add_flag("--shuffle", wk.shuffle);

    auto* k = app.add_subcommand("clean", "Clean the covariance of a data file");
    k->add_option("--input,input", cl.input, "CSV file, rows = observations")->required();
    k->add_option("--method", cl.method, "sample, linear, lp, holdout or kfold")
        ->capture_default_str();
    k->add_flag("--features-in-rows", cl.features_in_rows, "Rows are features instead");
    k->add_flag("--demean", cl.demean, "Subtract feature means (divisor t-1)");
    k->add_flag("--header", cl.header, "Skip the first line");
    k->add_option("--k", cl.k, "Train-test ratio t/t_out (default from the closed-form optimum)");
    k->add_option("--eta", cl.eta, "Ledoit-Peche bandwidth (default n^-1/2)");
    k->add_option("--eta-scale", cl.eta_scale, "relative or absolute")->capture_default_str();
    k->add_flag("--shuffle", cl.shuffle, "Shuffle observations before splitting");
    k->add_option("--name", cl.name, "Output file stem")->capture_default_str();

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        std::string config_path;
        CLI::App* command = nullptr;
        std::size_t command_pos = 0;
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) {
                config_path = args[i + 1];
            } else if (args[i].rfind("--config=", 0) == 0) {
                config_path = args[i].substr(9);
            } else if (!command && args[i].rfind("-", 0) != 0) {
                for (CLI::App* sub : app.get_subcommands({})) {
                    if (sub->get_name() == args[i]) {
                        command = sub;
                        command_pos = i + 1;
                    }
                }
            }
        }
        if (!config_path.empty()) {
            // File values go first in their scope so that later flags win (TakeLast).
            const auto tokens = config_tokens(config_path, app, command);
            args.insert(args.begin() + static_cast<std::ptrdiff_t>(command_pos),
                        tokens.command.begin(), tokens.command.end());
            args.insert(args.begin(), tokens.global.begin(), tokens.global.end());
        }
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (s->parsed()) {
            return cmd_sweep(g, sweep, out);
        }
        if (t->parsed()) {
            return cmd_theory(g, th, app.get_option("--out")->count() > 0, out);
        }
        if (c->parsed()) {
            return cmd_scatter(g, sc, out);
        }
        if (w->parsed()) {
            return cmd_wick(g, wk, out);
        }
        return cmd_clean(g, cl, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::invalid_argument& e) {
        // ParameterError and DimensionError: invalid parameter combinations.
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace cvcov::cli
