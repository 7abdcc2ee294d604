#pragma once

#include <Eigen/Dense>

namespace cvcov {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Observations stored column-wise: n rows (features) by t columns.
using DataMatrix = Eigen::MatrixXd;

/**
 * Dense real symmetric n x n matrix.
 *
 * Construction from an arbitrary square matrix stores (M + M^T)/2, which is
 * exactly symmetric in floating point; from_lower() mirrors the lower triangle
 * instead and is the right choice for results of selfadjoint rank updates.
 */
class SymmetricMatrix {
public:
    explicit SymmetricMatrix(const Matrix& m);

    static SymmetricMatrix from_lower(const Matrix& m);
    static SymmetricMatrix identity(Index n);
    static SymmetricMatrix zero(Index n);
    static SymmetricMatrix diagonal(const Vector& d);

    Index n() const noexcept { return m_.rows(); }
    double operator()(Index i, Index j) const { return m_(i, j); }
    const Matrix& matrix() const noexcept { return m_; }

private:
    struct Trusted {};
    SymmetricMatrix(Matrix m, Trusted) : m_(std::move(m)) {}

    Matrix m_;
};

/// Eigenvalues in ascending order; column i of `eigenvectors` pairs with eigenvalue i.
struct Spectrum {
    Vector eigenvalues;
    Matrix eigenvectors;

    Index n() const noexcept { return eigenvalues.size(); }
};

/// tau(A) = Tr(A) / n.
double normalized_trace(const SymmetricMatrix& a);

/// Normalized Frobenius error tau((A - B)^2) = (1/n) sum_ij (A - B)_ij^2.
double frobenius_error(const SymmetricMatrix& a, const SymmetricMatrix& b);

/**
 * Symmetric eigendecomposition with eigenvalues ascending.
 *
 * Each eigenvector is signed so that its largest-magnitude component is
 * positive (first such index on ties), which makes the output deterministic.
 * Degenerate eigenspaces get whatever orthonormal basis the solver returns.
 * Throws NumericalError if the solver does not converge.
 */
Spectrum eigh_ascending(const SymmetricMatrix& a);

/// d_i = v_i^T A v_i for each column v_i of `basis`.
Vector diag_quadratic(const Matrix& basis, const SymmetricMatrix& a);

/// basis * Diag(values) * basis^T.
SymmetricMatrix compose(const Matrix& basis, const Vector& values);

/// V * Diag(lambda) * V^T for a spectrum.
SymmetricMatrix reconstruct(const Spectrum& spectrum);

}  // namespace cvcov
