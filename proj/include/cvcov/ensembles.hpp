#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cvcov/linalg.hpp"

namespace cvcov {

/**
 * Population model of the white inverse Wishart ensemble plus the data shape.
 *
 * The inverse Wishart part is fixed by (n, t_star); p = n / (t_star - n) is
 * the effective value after t_star has been rounded to an integer, and every
 * closed form downstream consumes this effective p. t and q = n / t describe
 * the Gaussian data drawn from the population; they are zero until attached
 * with with_observations() or with_aspect_ratio().
 */
struct EnsembleSpec {
    Index n = 0;
    double p = 0.0;
    Index t_star = 0;
    Index t = 0;
    double q = 0.0;

    bool has_observations() const noexcept { return t > 0; }
    double p_over_n() const noexcept { return p / static_cast<double>(n); }
};

/// Builds the inverse Wishart parameters from the requested p (t_star rounded to nearest).
EnsembleSpec spec_from_np(Index n, double p_requested);

/// Attaches an observation count t; q becomes n / t.
EnsembleSpec with_observations(EnsembleSpec spec, Index t);

/// Attaches t = round(n / q_requested); the stored q is the effective n / t.
EnsembleSpec with_aspect_ratio(EnsembleSpec spec, double q_requested);

/**
 * Counter-based seeding: a (master_seed, stream_id, substream) triple always
 * yields the same engine state, independent of which thread asks for it.
 */
class SeededRng {
public:
    SeededRng(std::uint64_t master_seed, std::uint64_t stream_id, std::uint64_t substream = 0)
        : master_seed_(master_seed), stream_id_(stream_id), substream_(substream) {}

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t substream() const noexcept { return substream_; }

    SeededRng next_substream() const { return {master_seed_, stream_id_, substream_ + 1}; }

    /// A fresh engine positioned at the start of this stream.
    std::mt19937_64 engine() const;

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_id_;
    std::uint64_t substream_;
};

enum class StreamRole : std::uint64_t { population = 0, data = 1, split = 2 };

/// Disjoint stream per (replication, role).
SeededRng replication_stream(std::uint64_t master_seed, std::uint64_t replication,
                             StreamRole role);

/// rows x cols matrix of independent N(0, 1) draws, filled column-major.
Matrix standard_normal(Index rows, Index cols, std::mt19937_64& engine);

/**
 * Sigma = W^{-1} with W = G G^T / (t_star - n - 1), G an n x t_star standard
 * normal matrix, so that E[Sigma] = identity.
 *
 * If W is numerically singular (reciprocal condition estimate below 1e-14)
 * the draw is repeated once on rng.next_substream(); a second failure throws
 * NumericalError.
 */
SymmetricMatrix sample_white_inverse_wishart(const EnsembleSpec& spec, const SeededRng& rng);

/// X = Sigma^{1/2} Y with Y an n x t standard normal matrix; Sigma^{1/2} from eigh.
DataMatrix sample_gaussian_data(const SymmetricMatrix& sigma, Index t, const SeededRng& rng);

/// E = X X^T / t, no demeaning.
SymmetricMatrix sample_covariance(const DataMatrix& x);

/// Columns of `x` listed in `columns`, in that order.
DataMatrix select_columns(const DataMatrix& x, const std::vector<Index>& columns);

/// p_hat = tau(E^2) - 1 - q. May be negative; callers decide on flooring.
double estimate_p_from_sample(const SymmetricMatrix& e, double q);

}  // namespace cvcov
