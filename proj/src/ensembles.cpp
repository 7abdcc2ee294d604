#include "cvcov/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cvcov/errors.hpp"

namespace cvcov {

namespace {

constexpr double kMinReciprocalCondition = 1e-14;

std::string fmt(double v) {
    return std::to_string(v);
}

}  // namespace

EnsembleSpec spec_from_np(Index n, double p_requested) {
    if (n < 4) {
        throw ParameterError("spec_from_np: need n >= 4, got n=" + std::to_string(n));
    }
    if (!(p_requested > 0.0)) {
        throw ParameterError("spec_from_np: need p > 0, got p=" + fmt(p_requested));
    }
    const double dn = static_cast<double>(n);
    if (p_requested >= dn / 3.0) {
        throw ParameterError("spec_from_np: p=" + fmt(p_requested) + " violates p < n/3 (n=" +
                             std::to_string(n) +
                             "); the inverse Wishart element variance is infinite there");
    }

    EnsembleSpec spec;
    spec.n = n;
    spec.t_star = static_cast<Index>(std::llround(dn * (1.0 + p_requested) / p_requested));
    if (spec.t_star <= n + 1) {
        throw ParameterError("spec_from_np: t_star=" + std::to_string(spec.t_star) +
                             " must exceed n+1=" + std::to_string(n + 1));
    }
    spec.p = dn / static_cast<double>(spec.t_star - n);
    if (spec.p >= dn / 3.0) {
        throw ParameterError("spec_from_np: effective p=" + fmt(spec.p) +
                             " after rounding t_star violates p < n/3");
    }
    return spec;
}

EnsembleSpec with_observations(EnsembleSpec spec, Index t) {
    if (t < 1) {
        throw ParameterError("with_observations: need t >= 1, got t=" + std::to_string(t));
    }
    spec.t = t;
    spec.q = static_cast<double>(spec.n) / static_cast<double>(t);
    return spec;
}

EnsembleSpec with_aspect_ratio(EnsembleSpec spec, double q_requested) {
    if (!(q_requested > 0.0)) {
        throw ParameterError("with_aspect_ratio: need q > 0, got q=" + fmt(q_requested));
    }
    const auto t = static_cast<Index>(std::llround(static_cast<double>(spec.n) / q_requested));
    return with_observations(spec, std::max<Index>(t, 1));
}

std::mt19937_64 SeededRng::engine() const {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(master_seed_), hi(master_seed_), lo(stream_id_),
                      hi(stream_id_),   lo(substream_),   hi(substream_)};
    return std::mt19937_64(seq);
}

SeededRng replication_stream(std::uint64_t master_seed, std::uint64_t replication,
                             StreamRole role) {
    return SeededRng(master_seed, replication * 4 + static_cast<std::uint64_t>(role));
}

Matrix standard_normal(Index rows, Index cols, std::mt19937_64& engine) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    double* data = m.data();
    const Index size = m.size();
    for (Index i = 0; i < size; ++i) {
        data[i] = normal(engine);
    }
    return m;
}

SymmetricMatrix sample_white_inverse_wishart(const EnsembleSpec& spec, const SeededRng& rng) {
    const Index n = spec.n;
    if (n < 1 || spec.t_star <= n + 1) {
        throw ParameterError("sample_white_inverse_wishart: need t_star > n+1 (n=" +
                             std::to_string(n) + ", t_star=" + std::to_string(spec.t_star) + ")");
    }
    const double scale = 1.0 / static_cast<double>(spec.t_star - n - 1);

    SeededRng stream = rng;
    double rcond = 0.0;
    for (int attempt = 0; attempt < 2; ++attempt) {
        auto engine = stream.engine();
        const Matrix g = standard_normal(n, spec.t_star, engine);
        Matrix w = Matrix::Zero(n, n);
        w.selfadjointView<Eigen::Lower>().rankUpdate(g, scale);

        Eigen::LLT<Matrix, Eigen::Lower> llt(w);
        rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
        if (rcond >= kMinReciprocalCondition) {
            return SymmetricMatrix(llt.solve(Matrix::Identity(n, n)));
        }
        stream = stream.next_substream();
    }
    throw NumericalError("sample_white_inverse_wishart: Wishart draw singular twice (n=" +
                             std::to_string(n) + ", rcond=" + fmt(rcond) + ")",
                         static_cast<long>(n), rcond);
}

DataMatrix sample_gaussian_data(const SymmetricMatrix& sigma, Index t, const SeededRng& rng) {
    if (t < 1) {
        throw ParameterError("sample_gaussian_data: need t >= 1, got t=" + std::to_string(t));
    }
    const Spectrum s = eigh_ascending(sigma);
    if (s.eigenvalues(0) < -1e-10) {
        throw ParameterError("sample_gaussian_data: sigma is not positive definite (min eigenvalue " +
                             fmt(s.eigenvalues(0)) + ")");
    }
    const Vector root = s.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    const Matrix factor = s.eigenvectors * root.asDiagonal() * s.eigenvectors.transpose();

    auto engine = rng.engine();
    const Matrix y = standard_normal(sigma.n(), t, engine);
    return factor * y;
}

SymmetricMatrix sample_covariance(const DataMatrix& x) {
    if (x.rows() < 1 || x.cols() < 1) {
        throw DimensionError("sample_covariance: empty data matrix");
    }
    Matrix e = Matrix::Zero(x.rows(), x.rows());
    e.selfadjointView<Eigen::Lower>().rankUpdate(x, 1.0 / static_cast<double>(x.cols()));
    return SymmetricMatrix::from_lower(e);
}

DataMatrix select_columns(const DataMatrix& x, const std::vector<Index>& columns) {
    DataMatrix out(x.rows(), static_cast<Index>(columns.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        out.col(static_cast<Index>(j)) = x.col(columns[j]);
    }
    return out;
}

double estimate_p_from_sample(const SymmetricMatrix& e, double q) {
    const double tau_e2 = e.matrix().squaredNorm() / static_cast<double>(e.n());
    return tau_e2 - 1.0 - q;
}

}  // namespace cvcov
