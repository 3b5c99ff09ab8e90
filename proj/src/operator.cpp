#include "btf/operator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace btf {

InputGrid::InputGrid(std::vector<double> x) : x_(std::move(x)) {
    for (std::size_t i = 0; i < x_.size(); ++i) {
        if (!std::isfinite(x_[i])) {
            throw std::domain_error("input grid: non-finite value at index " + std::to_string(i));
        }
        if (i > 0 && !(x_[i] > x_[i - 1])) {
            throw std::domain_error("input grid: values not strictly increasing at index " +
                                    std::to_string(i));
        }
    }
}

InputGrid InputGrid::regular(std::size_t n, double lo, double hi) {
    std::vector<double> x(n);
    if (n == 1) {
        x[0] = lo;
    }
    for (std::size_t i = 0; n > 1 && i < n; ++i) {
        x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return InputGrid(std::move(x));
}

BandedSPD::BandedSPD(std::size_t n, std::size_t bandwidth)
    : n_(n), bw_(bandwidth), data_(n * (bandwidth + 1), 0.0) {}

double BandedSPD::operator()(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    const std::size_t d = j - i;
    return d <= bw_ ? band(i, d) : 0.0;
}

void BandedSPD::add_to_diagonal(double value) {
    for (std::size_t i = 0; i < n_; ++i) band(i, 0) += value;
}

std::vector<double> BandedSPD::multiply(std::span<const double> x) const {
    if (x.size() != n_) throw std::length_error("banded multiply: size mismatch");
    std::vector<double> y(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
        y[i] += band(i, 0) * x[i];
        for (std::size_t d = 1; d <= bw_ && i + d < n_; ++d) {
            const double a = band(i, d);
            y[i] += a * x[i + d];
            y[i + d] += a * x[i];
        }
    }
    return y;
}

BandedCholesky::BandedCholesky(const BandedSPD& a) : factor_(a) {
    const std::size_t n = factor_.size();
    const std::size_t bw = factor_.bandwidth();
    BandedSPD& r = factor_;
    // Row-oriented upper Cholesky: R(i,j) = (A(i,j) - sum_{l<i} R(l,i) R(l,j)) / R(i,i).
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t first = i > bw ? i - bw : 0;
        double pivot = r.band(i, 0);
        for (std::size_t l = first; l < i; ++l) {
            const double v = r.band(l, i - l);
            pivot -= v * v;
        }
        if (!(pivot > 0.0) || !std::isfinite(pivot)) {
            throw NumericalError("banded Cholesky: nonpositive pivot at row " + std::to_string(i));
        }
        const double rii = std::sqrt(pivot);
        r.band(i, 0) = rii;
        for (std::size_t d = 1; d <= bw && i + d < n; ++d) {
            const std::size_t j = i + d;
            double s = r.band(i, d);
            // l ranges over rows whose band reaches both columns i and j.
            const std::size_t lo = j > bw ? j - bw : 0;
            for (std::size_t l = std::max(first, lo); l < i; ++l) {
                s -= r.band(l, i - l) * r.band(l, j - l);
            }
            r.band(i, d) = s / rii;
        }
    }
}

void BandedCholesky::solve_lower(std::span<double> b) const {
    const std::size_t n = size();
    const std::size_t bw = factor_.bandwidth();
    if (b.size() != n) throw std::length_error("banded solve: size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        const std::size_t first = i > bw ? i - bw : 0;
        for (std::size_t l = first; l < i; ++l) s -= factor_.band(l, i - l) * b[l];
        b[i] = s / factor_.band(i, 0);
    }
}

void BandedCholesky::solve_upper(std::span<double> b) const {
    const std::size_t n = size();
    const std::size_t bw = factor_.bandwidth();
    if (b.size() != n) throw std::length_error("banded solve: size mismatch");
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t d = 1; d <= bw && ii + d < n; ++d) s -= factor_.band(ii, d) * b[ii + d];
        b[ii] = s / factor_.band(ii, 0);
    }
}

std::vector<double> BandedCholesky::solve(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    solve_lower(x);
    solve_upper(x);
    return x;
}

DifferenceOperator build_difference_operator(const InputGrid& grid, std::size_t k) {
    const std::size_t n = grid.size();
    if (n < k + 2) {
        throw std::length_error("difference operator of order " + std::to_string(k + 1) +
                                " needs at least " + std::to_string(k + 2) + " inputs, got " +
                                std::to_string(n));
    }

    // Current operator D^(x,j) has n - j rows of j + 1 coefficients each.
    std::size_t width = 2;
    std::vector<double> cur((n - 1) * width);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        cur[i * width] = -1.0;
        cur[i * width + 1] = 1.0;
    }
    for (std::size_t j = 1; j <= k; ++j) {
        const std::size_t rows = n - j;
        std::vector<double> scaled(cur);
        for (std::size_t i = 0; i < rows; ++i) {
            const double s = static_cast<double>(j) / (grid[i + j] - grid[i]);
            for (std::size_t c = 0; c < width; ++c) scaled[i * width + c] *= s;
        }
        // Row i of D^(1) * scaled = scaled row (i+1) shifted by one column minus scaled row i.
        const std::size_t next_width = width + 1;
        std::vector<double> next((rows - 1) * next_width, 0.0);
        for (std::size_t i = 0; i + 1 < rows; ++i) {
            for (std::size_t c = 0; c < width; ++c) {
                next[i * next_width + c] -= scaled[i * width + c];
                next[i * next_width + c + 1] += scaled[(i + 1) * width + c];
            }
        }
        cur = std::move(next);
        width = next_width;
    }

    DifferenceOperator d;
    d.k_ = k;
    d.n_ = n;
    d.m_ = n - k - 1;
    d.coef_ = std::move(cur);
    return d;
}

std::vector<double> DifferenceOperator::apply(std::span<const double> f) const {
    if (f.size() != n_) {
        throw std::length_error("difference operator: expected vector of length " +
                                std::to_string(n_) + ", got " + std::to_string(f.size()));
    }
    const std::size_t w = width();
    std::vector<double> out(m_);
    for (std::size_t i = 0; i < m_; ++i) {
        double s = 0.0;
        for (std::size_t c = 0; c < w; ++c) s += coef_[i * w + c] * f[i + c];
        out[i] = s;
    }
    return out;
}

std::vector<double> DifferenceOperator::apply_transpose(std::span<const double> u) const {
    if (u.size() != m_) throw std::length_error("difference operator transpose: size mismatch");
    const std::size_t w = width();
    std::vector<double> out(n_, 0.0);
    for (std::size_t i = 0; i < m_; ++i) {
        for (std::size_t c = 0; c < w; ++c) out[i + c] += coef_[i * w + c] * u[i];
    }
    return out;
}

BandedSPD DifferenceOperator::weighted_gram(std::span<const double> w) const {
    if (w.size() != m_) throw std::length_error("weighted gram: weight length mismatch");
    const std::size_t width_ = width();
    BandedSPD g(n_, k_ + 1);
    for (std::size_t i = 0; i < m_; ++i) {
        const double wi = w[i];
        if (!(wi > 0.0) || !std::isfinite(wi)) {
            throw std::domain_error("weighted gram: weight " + std::to_string(i) +
                                    " is not a positive finite number");
        }
        const double* row_i = &coef_[i * width_];
        for (std::size_t a = 0; a < width_; ++a) {
            const double wa = wi * row_i[a];
            for (std::size_t b = a; b < width_; ++b) g.band(i + a, b - a) += wa * row_i[b];
        }
    }
    return g;
}

BandedSPD DifferenceOperator::outer_gram() const {
    const std::size_t w = width();
    BandedSPD g(m_, k_ + 1);
    for (std::size_t i = 0; i < m_; ++i) {
        for (std::size_t d = 0; d < w && i + d < m_; ++d) {
            // Rows i and i+d overlap in columns i+d .. i+w-1.
            double s = 0.0;
            for (std::size_t c = d; c < w; ++c) s += coef_[i * w + c] * coef_[(i + d) * w + c - d];
            g.band(i, d) = s;
        }
    }
    return g;
}

double DifferenceOperator::unit_scale() const {
    double s = 0.0;
    for (double c : coef_) s += std::abs(c);
    return s / (static_cast<double>(m_) * std::ldexp(1.0, static_cast<int>(k_ + 1)));
}

std::vector<double> DifferenceOperator::to_dense() const {
    std::vector<double> dense(m_ * n_, 0.0);
    const std::size_t w = width();
    for (std::size_t i = 0; i < m_; ++i) {
        for (std::size_t c = 0; c < w; ++c) dense[i * n_ + i + c] = coef_[i * w + c];
    }
    return dense;
}

}  // namespace btf
