#pragma once

// Counter-based random numbers for reproducible parallel simulation.
//
// Philox4x32-10: a keyed bijection of a 128-bit counter.  Every frame gets
// its own substream keyed by (seed, frame_index), so a frame's random inputs
// depend only on those two values — never on which worker produced it or in
// what order.  Verified against the published test vectors of the reference
// implementation.

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "paircorr/errors.hpp"

namespace paircorr {

// One application of the Philox4x32 10-round bijection.
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                  std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1),
               std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], std::uint32_t(p0)};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

// Stream generator over one (seed, stream) substream.
class PhiloxRng {
public:
    PhiloxRng(std::uint64_t seed, std::uint64_t stream)
        : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
          stream_(stream) {}

    std::uint64_t next_u64() {
        if (pos_ == 2) refill();
        return buf_[pos_++];
    }

    // Uniform on [0, 1) with 53 random bits.
    double next_double() {
        return double(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return next_double() < p; }

private:
    void refill() {
        const auto out = philox4x32_10(
            {std::uint32_t(block_), std::uint32_t(block_ >> 32),
             std::uint32_t(stream_), std::uint32_t(stream_ >> 32)},
            key_);
        buf_[0] = std::uint64_t(out[0]) | (std::uint64_t(out[1]) << 32);
        buf_[1] = std::uint64_t(out[2]) | (std::uint64_t(out[3]) << 32);
        ++block_;
        pos_ = 0;
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buf_{};
    int pos_ = 2;  // empty buffer
};

// Poisson variate by sequential inversion of the CDF; one uniform per draw.
// Exact for the moderate means used here (guarded against exp underflow).
class PoissonSampler {
public:
    explicit PoissonSampler(double mu) : mu_(mu), p0_(std::exp(-(long double)mu)) {
        if (!(mu >= 0)) throw model_error("poisson: mu must be >= 0");
        if (mu > 700) throw model_error("poisson: mu too large for inversion sampling");
        cap_ = std::int64_t(std::ceil(mu + 12.0 * std::sqrt(mu + 1.0) + 30.0));
    }

    template <class Rng>
    std::int64_t operator()(Rng& rng) const {
        const long double u = rng.next_double();
        long double p = p0_, cum = p0_;
        std::int64_t n = 0;
        while (u > cum && n < cap_) {
            ++n;
            p *= mu_ / (long double)n;
            cum += p;
        }
        return n;
    }

private:
    double mu_;
    long double p0_;
    std::int64_t cap_;
};

// Draw a cell (i, j) of a weight matrix, proportional to its weight.
// Cumulative table over the row-major flattening + binary search.
class CategoricalCellSampler {
public:
    explicit CategoricalCellSampler(const Eigen::MatrixXd& weights)
        : cols_(weights.cols()) {
        if (weights.size() == 0 || (weights.array() < 0).any())
            throw model_error("categorical: weights must be a nonempty >= 0 matrix");
        cdf_.reserve(std::size_t(weights.size()));
        long double cum = 0.0L;
        for (Eigen::Index i = 0; i < weights.rows(); ++i)
            for (Eigen::Index j = 0; j < weights.cols(); ++j) {
                cum += weights(i, j);
                cdf_.push_back(double(cum));
            }
        total_ = cdf_.back();
        if (!(total_ > 0)) throw model_error("categorical: all weights zero");
    }

    template <class Rng>
    std::pair<Eigen::Index, Eigen::Index> operator()(Rng& rng) const {
        const double u = rng.next_double() * total_;
        std::size_t lo = 0, hi = cdf_.size() - 1;
        while (lo < hi) {  // first index with cdf > u
            const std::size_t mid = (lo + hi) / 2;
            if (cdf_[mid] > u) hi = mid; else lo = mid + 1;
        }
        return {Eigen::Index(lo) / cols_, Eigen::Index(lo) % cols_};
    }

private:
    Eigen::Index cols_;
    std::vector<double> cdf_;
    double total_;
};

}  // namespace paircorr
