#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace btf {

/// Raised when a banded factorization or solve breaks down.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Strictly increasing abscissae x_1 < ... < x_n.
class InputGrid {
public:
    InputGrid() = default;
    /// Throws std::domain_error unless the values are finite and strictly increasing.
    explicit InputGrid(std::vector<double> x);

    /// Regularly spaced grid of n points on [lo, hi].
    static InputGrid regular(std::size_t n, double lo, double hi);

    std::size_t size() const noexcept { return x_.size(); }
    double operator[](std::size_t i) const { return x_[i]; }
    std::span<const double> values() const noexcept { return x_; }

private:
    std::vector<double> x_;
};

/// Symmetric positive (semi-)definite matrix stored as packed upper bands.
///
/// Storage is row-major: entry A(i, i + d) for d = 0..bandwidth lives at
/// data[i * (bandwidth + 1) + d]. Entries past the last column are kept at
/// zero. The lower triangle is implied by symmetry.
class BandedSPD {
public:
    BandedSPD() = default;
    BandedSPD(std::size_t n, std::size_t bandwidth);

    std::size_t size() const noexcept { return n_; }
    std::size_t bandwidth() const noexcept { return bw_; }

    /// Upper-band accessor, requires d <= bandwidth and i + d < size.
    double& band(std::size_t i, std::size_t d) { return data_[i * (bw_ + 1) + d]; }
    double band(std::size_t i, std::size_t d) const { return data_[i * (bw_ + 1) + d]; }

    /// Full symmetric accessor; zero outside the band.
    double operator()(std::size_t i, std::size_t j) const;

    void add_to_diagonal(double value);
    /// y = A x
    std::vector<double> multiply(std::span<const double> x) const;

private:
    std::size_t n_ = 0;
    std::size_t bw_ = 0;
    std::vector<double> data_;
};

/// Upper-triangular banded Cholesky factor R with A = R^T R.
class BandedCholesky {
public:
    /// Throws NumericalError if a pivot is not strictly positive.
    explicit BandedCholesky(const BandedSPD& a);

    std::size_t size() const noexcept { return factor_.size(); }
    const BandedSPD& factor() const noexcept { return factor_; }

    /// Solves A x = b.
    std::vector<double> solve(std::span<const double> b) const;
    /// Solves R^T x = b (forward substitution), in place.
    void solve_lower(std::span<double> b) const;
    /// Solves R x = b (back substitution), in place.
    void solve_upper(std::span<double> b) const;

private:
    BandedSPD factor_;
};

/// The order-(k+1) divided-difference penalty D^(x,k+1) on an input grid.
///
/// Row i has exactly k + 2 nonzeros, in columns i .. i + k + 1, so only
/// those coefficients are stored. The operator is immutable once built.
class DifferenceOperator {
public:
    DifferenceOperator() = default;

    std::size_t order() const noexcept { return k_; }
    std::size_t rows() const noexcept { return m_; }
    std::size_t cols() const noexcept { return n_; }
    /// Nonzeros per row (k + 2).
    std::size_t width() const noexcept { return k_ + 2; }

    /// Coefficient in row i, column i + offset.
    double coefficient(std::size_t i, std::size_t offset) const {
        return coef_[i * width() + offset];
    }
    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(coef_).subspan(i * width(), width());
    }

    /// D f without materializing D. Throws std::length_error on size mismatch.
    std::vector<double> apply(std::span<const double> f) const;
    /// D^T u.
    std::vector<double> apply_transpose(std::span<const double> u) const;

    /// D^T diag(w) D as an n x n band of half-width k + 1.
    /// Throws std::domain_error on a nonpositive or non-finite weight.
    BandedSPD weighted_gram(std::span<const double> w) const;
    /// D D^T as an m x m band of half-width k + 1.
    BandedSPD outer_gram() const;

    /// Mean row l1 norm divided by 2^(k+1): the factor c with D = c * (unit-grid
    /// differences) on a regular grid, i.e. (spacing)^(-k).
    double unit_scale() const;

    /// Dense row-major copy (m x n); intended for diagnostics and tests.
    std::vector<double> to_dense() const;

    friend DifferenceOperator build_difference_operator(const InputGrid& grid, std::size_t k);

private:
    std::size_t k_ = 0;
    std::size_t n_ = 0;
    std::size_t m_ = 0;
    std::vector<double> coef_;
};

/// Builds D^(x,k+1) by the divided-difference recursion
///   D^(x,1)   = first differences, rows (-1, +1)
///   D^(x,j+1) = D^(1) diag(j / (x_{i+j} - x_i)) D^(x,j),   j = 1..k.
/// On a unit-spaced grid this is the ordinary (k+1)-th difference matrix.
/// Throws std::length_error when the grid has fewer than k + 2 points.
DifferenceOperator build_difference_operator(const InputGrid& grid, std::size_t k);

}  // namespace btf
