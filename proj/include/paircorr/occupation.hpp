#pragma once

// Occupation probabilities of a detector-mode pair (i,j) illuminated by n
// independently placed photon pairs, and their Poisson averages over n.
//
// With A = 1-P_ij, B = 1-P_i-P_j+P_ij, C = 1-P_i, D = 1-P_j the conditional
// probabilities given n emitted pairs are
//
//   pair   : 1 - A^n            (at least one pair lands exactly on (i,j))
//   cross  : A^n + B^n - C^n - D^n   (both modes hit, never by one pair)
//   i only : D^n - B^n
//   j only : C^n - B^n
//   none   : B^n
//
// and the five sum to one identically.  The differences above cancel
// catastrophically when evaluated power-by-power, so every difference
// v^n - u^n (0 <= u <= v <= 1) is computed as
//   v^n * -expm1(n * log1p((u - v)/v))
// in extended precision.

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

#include "paircorr/errors.hpp"
#include "paircorr/joint_distribution.hpp"
#include "paircorr/models.hpp"

namespace paircorr {

using count_t = std::int64_t;

namespace detail {

// (1-x)^n for x in [0,1], n >= 0.
inline long double pow1m(long double x, count_t n) {
    if (n == 0) return 1.0L;
    if (x <= 0.0L) return 1.0L;
    if (x >= 1.0L) return 0.0L;
    return std::exp(static_cast<long double>(n) * std::log1p(-x));
}

// (1-b)^n - (1-a)^n for 0 <= b <= a <= 1 (a nonnegative difference of
// near-equal powers; the naive subtraction loses all digits when a ~ b).
inline long double diff_pow1m(long double a, long double b, count_t n) {
    if (n == 0 || a <= b) return 0.0L;
    if (b >= 1.0L) return 0.0L;
    if (a >= 1.0L) return pow1m(b, n);
    const long double vn = pow1m(b, n);
    const long double log_ratio =
        static_cast<long double>(n) * std::log1p(-(a - b) / (1.0L - b));
    return vn * -std::expm1(log_ratio);
}

// Clamp tiny numerical residue onto [0,1]; anything clearly outside is a bug
// in the caller's algebra, not an input problem.
template <class Scalar>
Scalar finalize_probability(long double x) {
    if (std::fabs(x) < 1e-14L) return Scalar(0);
    if (x < 0.0L) {
        if (x > -1e-12L) return Scalar(0);
        throw std::logic_error("probability computed as negative");
    }
    if (x > 1.0L) {
        if (x < 1.0L + 1e-12L) return Scalar(1);
        throw std::logic_error("probability computed above one");
    }
    return static_cast<Scalar>(x);
}

struct PairMarginals {
    long double p_i, p_j, p_ij, sum;  // sum = p_i + p_j - p_ij
};

// Validates 0 <= P_ij <= min(P_i,P_j), P_i+P_j-P_ij <= 1 and absorbs
// floating-point slack from marginals assembled by summation.
inline PairMarginals check_marginals(long double p_i, long double p_j,
                                     long double p_ij) {
    constexpr long double slack = 1e-9L;
    if (!(p_i >= 0.0L && p_i <= 1.0L + slack) ||
        !(p_j >= 0.0L && p_j <= 1.0L + slack) || !(p_ij >= 0.0L))
        throw model_error("occupation: probabilities must lie in [0, 1]");
    if (p_ij > p_i + slack || p_ij > p_j + slack)
        throw model_error("occupation: P_ij exceeds a marginal");
    long double sum = p_i + p_j - p_ij;
    if (sum > 1.0L + slack)
        throw model_error("occupation: P_i + P_j - P_ij exceeds 1");
    PairMarginals m;
    m.p_i = std::min(p_i, 1.0L);
    m.p_j = std::min(p_j, 1.0L);
    m.p_ij = std::min(p_ij, std::min(m.p_i, m.p_j));
    m.sum = std::min(sum, 1.0L);
    return m;
}

inline void check_count(count_t n) {
    if (n < 0) throw model_error("occupation: pair count must be >= 0");
}

}  // namespace detail

// P(mode pair occupied by at least one full pair | n pairs) = 1-(1-P_ij)^n.
// Accurate down to P_ij ~ 1e-12 with n up to 1e6.
template <class Scalar>
Scalar pair_conditional(Scalar p_ij, count_t n) {
    detail::check_count(n);
    if (!(p_ij >= Scalar(0) && p_ij <= Scalar(1)))
        throw model_error("pair_conditional: P_ij must lie in [0, 1]");
    if (n == 0 || p_ij == Scalar(0)) return Scalar(0);
    if (p_ij >= Scalar(1)) return Scalar(1);
    const long double x = -std::expm1(static_cast<long double>(n) *
                                      std::log1p(-(long double)p_ij));
    return detail::finalize_probability<Scalar>(x);
}

// P(both modes occupied, but by photons of different pairs | n pairs).
template <class Scalar>
Scalar cross_conditional(Scalar p_i, Scalar p_j, Scalar p_ij, count_t n) {
    detail::check_count(n);
    const auto m = detail::check_marginals(p_i, p_j, p_ij);
    if (n <= 1) return Scalar(0);
    // (A^n - C^n) - (D^n - B^n), both differences nonnegative and stable.
    const long double x = detail::diff_pow1m(m.p_i, m.p_ij, n) -
                          detail::diff_pow1m(m.sum, m.p_j, n);
    return detail::finalize_probability<Scalar>(x);
}

enum class Direction { i_occupied, j_occupied };

// P(exactly one of the modes is photon-occupied | n pairs): the channel that
// lets detector noise on the empty mode fake a coincidence.
template <class Scalar>
Scalar photon_noise_conditional(Scalar p_i, Scalar p_j, Scalar p_ij, count_t n,
                                Direction direction) {
    detail::check_count(n);
    const auto m = detail::check_marginals(p_i, p_j, p_ij);
    if (n == 0) return Scalar(0);
    const long double x = direction == Direction::i_occupied
                              ? detail::diff_pow1m(m.sum, m.p_j, n)   // D^n-B^n
                              : detail::diff_pow1m(m.sum, m.p_i, n);  // C^n-B^n
    return detail::finalize_probability<Scalar>(x);
}

// P(neither mode photon-occupied | n pairs) = (1-P_i-P_j+P_ij)^n.
template <class Scalar>
Scalar none_conditional(Scalar p_i, Scalar p_j, Scalar p_ij, count_t n) {
    detail::check_count(n);
    const auto m = detail::check_marginals(p_i, p_j, p_ij);
    return detail::finalize_probability<Scalar>(detail::pow1m(m.sum, n));
}

// Sum_{n=0}^{n_max} P_n f(n) with Poisson weights P_n = e^{-mu} mu^n / n!
// built by upward recurrence; truncated once the accumulated weight reaches
// 1 - truncation_tail (hard cap from SourceModel::n_max).
template <class Scalar, class F>
Scalar poisson_average(F&& f, const SourceModel<Scalar>& source) {
    const long double mu = source.mu;
    const long double tail = source.truncation_tail;
    const count_t n_cap = source.n_max();
    long double w = std::exp(-mu);
    long double cum = w;
    long double acc = w * static_cast<long double>(f(count_t(0)));
    for (count_t n = 1; cum < 1.0L - tail && n <= n_cap; ++n) {
        w *= mu / static_cast<long double>(n);
        cum += w;
        acc += w * static_cast<long double>(f(n));
    }
    return static_cast<Scalar>(acc);
}

// The five Poisson-averaged occupation probabilities of one mode pair.
template <class Scalar = double>
struct OccupationProbabilities {
    Scalar pair{};    // both modes occupied by one emitted pair
    Scalar cross{};   // both occupied, but never by a single pair
    Scalar only_i{};  // mode i occupied, mode j empty
    Scalar only_j{};  // mode j occupied, mode i empty
    Scalar none{};    // neither occupied

    Scalar sum() const { return pair + cross + only_i + only_j + none; }
};

// Poisson-averaged occupation probabilities from the three pair-level
// probabilities.  Single pass over n sharing the Poisson weights.
template <class Scalar>
OccupationProbabilities<Scalar> occupation_from_marginals(
    Scalar p_i, Scalar p_j, Scalar p_ij, const SourceModel<Scalar>& source) {
    const auto m = detail::check_marginals(p_i, p_j, p_ij);
    const long double mu = source.mu;
    const long double tail = source.truncation_tail;
    const count_t n_cap = source.n_max();

    long double w = std::exp(-mu);
    long double cum = w;
    long double acc_pair = 0.0L, acc_cross = 0.0L, acc_i = 0.0L, acc_j = 0.0L;
    long double acc_none = w;  // n = 0: everything empty
    const long double log_a =
        m.p_ij < 1.0L ? std::log1p(-m.p_ij) : -std::numeric_limits<long double>::infinity();
    for (count_t n = 1; cum < 1.0L - tail && n <= n_cap; ++n) {
        w *= mu / static_cast<long double>(n);
        cum += w;
        const long double pair_n =  // 1 - A^n
            m.p_ij == 0.0L ? 0.0L : -std::expm1(static_cast<long double>(n) * log_a);
        const long double an_c = detail::diff_pow1m(m.p_i, m.p_ij, n);  // A^n-C^n
        const long double dn_b = detail::diff_pow1m(m.sum, m.p_j, n);   // D^n-B^n
        const long double cn_b = detail::diff_pow1m(m.sum, m.p_i, n);   // C^n-B^n
        const long double bn = detail::pow1m(m.sum, n);
        acc_pair += w * pair_n;
        if (n > 1) acc_cross += w * (an_c - dn_b);
        acc_i += w * dn_b;
        acc_j += w * cn_b;
        acc_none += w * bn;
    }
    OccupationProbabilities<Scalar> out;
    out.pair = detail::finalize_probability<Scalar>(acc_pair);
    out.cross = detail::finalize_probability<Scalar>(acc_cross);
    out.only_i = detail::finalize_probability<Scalar>(acc_i);
    out.only_j = detail::finalize_probability<Scalar>(acc_j);
    out.none = detail::finalize_probability<Scalar>(acc_none);
    return out;
}

template <class Scalar>
OccupationProbabilities<Scalar> occupation(const JointDistribution<Scalar>& joint,
                                           Eigen::Index i, Eigen::Index j,
                                           const SourceModel<Scalar>& source) {
    if (i < 0 || i >= joint.rows() || j < 0 || j >= joint.cols())
        throw model_error("occupation: mode index out of range");
    return occupation_from_marginals(joint.marginal_i(i), joint.marginal_j(j),
                                     joint.p(i, j), source);
}

enum class EventsModel { exact, linear };

// Mean thresholded events on one pixel receiving mu_i photons per frame:
// a pixel fires on a photo-detection or, failing that, on noise.
//   exact : p_d*mu_i + p_n*(1 - p_d*mu_i)
//   linear: p_d*mu_i + p_n
template <class Scalar>
Scalar mean_events_per_pixel(Scalar mu_i, const DetectorModel<Scalar>& det,
                             EventsModel model = EventsModel::exact) {
    if (!(mu_i >= Scalar(0)))
        throw model_error("mean_events_per_pixel: mu_i must be >= 0");
    const Scalar load = det.p_d * mu_i;
    if (load > Scalar(1))
        throw model_error("mean_events_per_pixel: p_d*mu_i exceeds 1");
    return model == EventsModel::exact ? load + det.p_n * (Scalar(1) - load)
                                       : load + det.p_n;
}

// Mean number of photon-populated mode pairs, mu_p = sum_ij mu^pair_ij.
// Always < mu for mu > 0: a source can emit several pairs into one mode.
template <class Scalar>
Scalar populated_modes(const JointDistribution<Scalar>& joint,
                       const SourceModel<Scalar>& source) {
    long double total = 0.0L;
    for (Eigen::Index i = 0; i < joint.rows(); ++i)
        for (Eigen::Index j = 0; j < joint.cols(); ++j) {
            const Scalar p = joint.p(i, j);
            if (p == Scalar(0)) continue;
            // Poisson average of 1-(1-p)^n has the closed form 1-e^{-mu p};
            // evaluated through the same truncated series as everything else.
            total += poisson_average<Scalar>(
                [p](count_t n) { return pair_conditional(p, n); }, source);
        }
    return static_cast<Scalar>(total);
}

}  // namespace paircorr
