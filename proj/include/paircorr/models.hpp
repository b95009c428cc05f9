#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "paircorr/errors.hpp"

namespace paircorr {

// Per-pixel detector response: each photon arriving at a pixel is registered
// with probability p_d; a pixel that registered no photon fires anyway with
// probability p_n (dark counts, afterpulses, stray light).  Pixels are
// binary per frame: once lit, further photons or noise change nothing.
template <class Scalar = double>
struct DetectorModel {
    Scalar p_d{1};
    Scalar p_n{0};

    DetectorModel(Scalar pd, Scalar pn) : p_d(pd), p_n(pn) {
        if (!(std::isfinite(double(pd)) && pd >= Scalar(0) && pd <= Scalar(1)))
            throw model_error("detector: p_d must lie in [0, 1]");
        if (!(std::isfinite(double(pn)) && pn >= Scalar(0) && pn < Scalar(1)))
            throw model_error("detector: p_n must lie in [0, 1)");
    }
};

// Photon-pair source: the number of pairs per frame is Poisson with mean mu.
// Averages over the pair number are truncated once the cumulative Poisson
// weight reaches 1 - truncation_tail (with a hard cap ~ mu + 12*sqrt(mu)).
template <class Scalar = double>
struct SourceModel {
    Scalar mu{0};
    Scalar truncation_tail{Scalar(1e-12)};

    explicit SourceModel(Scalar mean_pairs, Scalar tail = Scalar(1e-12))
        : mu(mean_pairs), truncation_tail(tail) {
        if (!(std::isfinite(double(mu)) && mu >= Scalar(0)))
            throw model_error("source: mu must be finite and >= 0");
        if (!(tail > Scalar(0) && tail < Scalar(1)))
            throw model_error("source: truncation_tail must lie in (0, 1)");
    }

    // Largest pair number the truncated series will ever include.
    std::int64_t n_max() const {
        const double m = double(mu);
        return std::int64_t(std::ceil(m + 12.0 * std::sqrt(m + 1.0) + 30.0));
    }
};

}  // namespace paircorr
