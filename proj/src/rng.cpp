#include "btf/rng.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace btf {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream),
                      static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

void require_positive(double value, const char* what) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw std::domain_error(std::string(what) + " must be positive and finite, got " +
                                std::to_string(value));
    }
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

double RngStream::uniform() {
    // 53 random bits centred in their cell: never exactly 0 or 1.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t bound) {
    if (bound == 0) throw std::domain_error("uniform_index: empty range");
    // Rejection to remove modulo bias.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t r;
    do {
        r = engine_();
    } while (r >= limit);
    return r % bound;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
}

double draw_inverse_gaussian(RngStream& rng, double mean, double shape) {
    require_positive(mean, "inverse-Gaussian mean");
    require_positive(shape, "inverse-Gaussian shape");
    for (;;) {
        const double z = rng.normal();
        const double v = z * z;
        const double t = mean * v / (2.0 * shape);
        const double root = mean / (1.0 + t + std::sqrt(t * t + 2.0 * t));
        if (!(root > 0.0) || !std::isfinite(root)) continue;
        const double x = rng.uniform() * (mean + root) <= mean ? root : mean * (mean / root);
        if (x > 0.0 && std::isfinite(x)) return x;
    }
}

double draw_gamma(RngStream& rng, double shape, double rate) {
    require_positive(shape, "gamma shape");
    require_positive(rate, "gamma rate");
    if (shape < 1.0) {
        for (;;) {
            const double g = draw_gamma(rng, shape + 1.0, rate);
            const double x = g * std::pow(rng.uniform(), 1.0 / shape);
            if (x > 0.0) return x;
        }
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double z, v;
        do {
            z = rng.normal();
            v = 1.0 + c * z;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        const double z2 = z * z;
        if (u < 1.0 - 0.0331 * z2 * z2 ||
            std::log(u) < 0.5 * z2 + d * (1.0 - v + std::log(v))) {
            const double x = d * v / rate;
            if (x > 0.0 && std::isfinite(x)) return x;
        }
    }
}

double draw_inverse_gamma(RngStream& rng, double shape, double scale) {
    require_positive(shape, "inverse-gamma shape");
    require_positive(scale, "inverse-gamma scale");
    for (;;) {
        const double x = 1.0 / draw_gamma(rng, shape, scale);
        if (x > 0.0 && std::isfinite(x)) return x;
    }
}

std::vector<double> gaussian_mean(std::span<const double> rhs, const BandedCholesky& precision) {
    return precision.solve(rhs);
}

void add_gaussian_fluctuation(RngStream& rng, std::span<double> mean,
                              const BandedCholesky& precision, double scale2) {
    require_positive(scale2, "Gaussian scale");
    std::vector<double> z(precision.size());
    for (double& zi : z) zi = rng.normal();
    precision.solve_upper(z);
    const double sigma = std::sqrt(scale2);
    for (std::size_t i = 0; i < z.size(); ++i) mean[i] += sigma * z[i];
}

std::vector<double> draw_gaussian_banded(RngStream& rng, std::span<const double> rhs,
                                         const BandedCholesky& precision, double scale2) {
    if (rhs.size() != precision.size()) {
        throw std::length_error("banded Gaussian: rhs length does not match precision");
    }
    std::vector<double> x = gaussian_mean(rhs, precision);
    add_gaussian_fluctuation(rng, x, precision, scale2);
    return x;
}

std::vector<double> draw_gaussian_banded(RngStream& rng, std::span<const double> rhs,
                                         const BandedSPD& precision, double scale2) {
    return draw_gaussian_banded(rng, rhs, BandedCholesky(precision), scale2);
}

}  // namespace btf
