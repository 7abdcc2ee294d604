#include "cvcov/linalg.hpp"

#include <cmath>
#include <string>

#include "cvcov/errors.hpp"

namespace cvcov {

namespace {

void require_square(const Matrix& m) {
    if (m.rows() < 1 || m.rows() != m.cols()) {
        throw DimensionError("SymmetricMatrix: need a non-empty square matrix, got " +
                             std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
    }
}

void require_same_dimension(Index a, Index b, const char* where) {
    if (a != b) {
        throw DimensionError(std::string(where) + ": dimension mismatch (" + std::to_string(a) +
                             " vs " + std::to_string(b) + ")");
    }
}

}  // namespace

SymmetricMatrix::SymmetricMatrix(const Matrix& m) {
    require_square(m);
    m_ = 0.5 * (m + m.transpose());
}

SymmetricMatrix SymmetricMatrix::from_lower(const Matrix& m) {
    require_square(m);
    Matrix full = m.selfadjointView<Eigen::Lower>();
    return SymmetricMatrix(std::move(full), Trusted{});
}

SymmetricMatrix SymmetricMatrix::identity(Index n) {
    return SymmetricMatrix(Matrix::Identity(n, n), Trusted{});
}

SymmetricMatrix SymmetricMatrix::zero(Index n) {
    return SymmetricMatrix(Matrix::Zero(n, n), Trusted{});
}

SymmetricMatrix SymmetricMatrix::diagonal(const Vector& d) {
    if (d.size() < 1) {
        throw DimensionError("SymmetricMatrix::diagonal: empty diagonal");
    }
    return SymmetricMatrix(Matrix(d.asDiagonal()), Trusted{});
}

double normalized_trace(const SymmetricMatrix& a) {
    return a.matrix().trace() / static_cast<double>(a.n());
}

double frobenius_error(const SymmetricMatrix& a, const SymmetricMatrix& b) {
    require_same_dimension(a.n(), b.n(), "frobenius_error");
    return (a.matrix() - b.matrix()).squaredNorm() / static_cast<double>(a.n());
}

Spectrum eigh_ascending(const SymmetricMatrix& a) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(a.matrix(), Eigen::ComputeEigenvectors);
    if (solver.info() != Eigen::Success) {
        const double scale = a.matrix().cwiseAbs().maxCoeff();
        throw NumericalError("eigh_ascending: eigen-solver did not converge (n=" +
                                 std::to_string(a.n()) + ", max|a_ij|=" + std::to_string(scale) +
                                 ")",
                             static_cast<long>(a.n()), scale);
    }

    Spectrum s{solver.eigenvalues(), solver.eigenvectors()};
    for (Index j = 0; j < s.eigenvectors.cols(); ++j) {
        Index pivot = 0;
        s.eigenvectors.col(j).cwiseAbs().maxCoeff(&pivot);
        if (s.eigenvectors(pivot, j) < 0.0) {
            s.eigenvectors.col(j) = -s.eigenvectors.col(j);
        }
    }
    return s;
}

Vector diag_quadratic(const Matrix& basis, const SymmetricMatrix& a) {
    require_same_dimension(basis.rows(), a.n(), "diag_quadratic");
    const Matrix av = a.matrix() * basis;
    return basis.cwiseProduct(av).colwise().sum().transpose();
}

SymmetricMatrix compose(const Matrix& basis, const Vector& values) {
    require_same_dimension(basis.cols(), values.size(), "compose");
    const Matrix scaled = basis * values.asDiagonal();
    return SymmetricMatrix(scaled * basis.transpose());
}

SymmetricMatrix reconstruct(const Spectrum& spectrum) {
    return compose(spectrum.eigenvectors, spectrum.eigenvalues);
}

}  // namespace cvcov
