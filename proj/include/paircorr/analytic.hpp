#pragma once

// Measured intensity correlation G2_ij of a lossy, noisy binary detector
// array pair, its four-term decomposition, the pair-removed background
// correlation, visibility, and the visibility-optimal mean pair number.
//
// Everything is driven by three per-cell detection-level probabilities for
// one emitted pair: a_i (detection at pixel i), a_j, and a_ij (detections at
// both).  Given n pairs the mode-occupation algebra of occupation.hpp
// applies verbatim with (a_i, a_j, a_ij) in place of (P_i, P_j, P_ij), and a
// coincidence arises from an occupied-occupied cell, or from noise filling
// the empty side(s):
//
//   C_ij = pair + cross + (only_i + only_j) * p_n + none * p_n^2

#include <Eigen/Dense>
#include <cmath>
#include <utility>

#include "paircorr/errors.hpp"
#include "paircorr/joint_distribution.hpp"
#include "paircorr/models.hpp"
#include "paircorr/occupation.hpp"

namespace paircorr {

enum class ArrayMode { dual, single };
enum class BackgroundMethod { exact, quadratic };

// Normalized correlation matrix plus its decomposition in pre-normalization
// units (per-frame coincidence probabilities), so term fractions are exact.
// std_error is filled by the Monte Carlo estimator only.
template <class Scalar = double>
struct CorrelationResult {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    Matrix g2;           // normalized: sums to 1
    Matrix pair, cross, photon_noise, noise_noise;
    Matrix std_error;    // empty unless estimated from counts
    Scalar normalization_constant{};  // pre-normalization total

    Matrix unnormalized() const { return pair + cross + photon_noise + noise_noise; }
    bool has_std_error() const { return std_error.size() > 0; }
};

namespace detail {

// Per-pair detection-level probabilities for one detector pair.
template <class Scalar>
struct CellProbs {
    Scalar a_i, a_j, a_ij;
};

// dual: signal array pixel i against idler array pixel j.
// single: both photons land on the same array, so the per-pixel photon
// probability doubles (row + column marginal), with an inclusion-exclusion
// correction for a pair falling entirely onto one pixel, and a pair connects
// (i,j) through either photon ordering.
template <class Scalar>
CellProbs<Scalar> cell_probs(const JointDistribution<Scalar>& joint,
                             const DetectorModel<Scalar>& det, Eigen::Index i,
                             Eigen::Index j, ArrayMode mode) {
    const Scalar pd = det.p_d;
    if (mode == ArrayMode::dual)
        return {pd * joint.marginal_i(i), pd * joint.marginal_j(j),
                pd * pd * joint.p(i, j)};
    return {pd * (joint.marginal_i(i) + joint.marginal_j(i)) - pd * pd * joint.p(i, i),
            pd * (joint.marginal_i(j) + joint.marginal_j(j)) - pd * pd * joint.p(j, j),
            pd * pd * (joint.p(i, j) + joint.p(j, i))};
}

template <class Scalar>
struct G2Terms {
    Scalar pair{}, cross{}, photon_noise{}, noise_noise{};
    Scalar total() const { return pair + cross + photon_noise + noise_noise; }
};

template <class Scalar>
G2Terms<Scalar> g2_cell_exact(const CellProbs<Scalar>& c, Scalar p_n,
                              const SourceModel<Scalar>& source) {
    const auto occ = occupation_from_marginals(c.a_i, c.a_j, c.a_ij, source);
    return {occ.pair, occ.cross, (occ.only_i + occ.only_j) * p_n,
            occ.none * p_n * p_n};
}

// Second-order expansion of the exact series in mu (with the noise-noise
// term kept at its leading constant, as the source formula does).
template <class Scalar>
G2Terms<Scalar> g2_cell_quadratic(const CellProbs<Scalar>& c, Scalar p_n,
                                  Scalar mu) {
    const Scalar ei = c.a_i - c.a_ij;
    const Scalar ej = c.a_j - c.a_ij;
    return {mu * c.a_ij, mu * mu * ei * ej, mu * p_n * (ei + ej), p_n * p_n};
}

template <class Scalar>
void check_single_mode(const JointDistribution<Scalar>& joint, ArrayMode mode) {
    if (mode == ArrayMode::single && joint.rows() != joint.cols())
        throw model_error("single-array mode requires a square joint distribution");
}

template <class Scalar, class CellFn>
CorrelationResult<Scalar> assemble_result(const JointDistribution<Scalar>& joint,
                                          ArrayMode mode, CellFn&& cell_fn) {
    using Matrix = typename CorrelationResult<Scalar>::Matrix;
    const Eigen::Index r = joint.rows(), c = joint.cols();
    CorrelationResult<Scalar> out;
    out.pair = Matrix::Zero(r, c);
    out.cross = Matrix::Zero(r, c);
    out.photon_noise = Matrix::Zero(r, c);
    out.noise_noise = Matrix::Zero(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) {
            if (mode == ArrayMode::single && i == j) continue;  // saturation
            const G2Terms<Scalar> t = cell_fn(i, j);
            out.pair(i, j) = t.pair;
            out.cross(i, j) = t.cross;
            out.photon_noise(i, j) = t.photon_noise;
            out.noise_noise(i, j) = t.noise_noise;
        }
    const Matrix total = out.unnormalized();
    out.normalization_constant = total.sum();
    if (!(out.normalization_constant > Scalar(0)))
        throw model_error("correlation is identically zero (mu = 0 and p_n = 0?)");
    out.g2 = total / out.normalization_constant;
    return out;
}

}  // namespace detail

// Cell with the largest P_ij — the default location for visibility
// evaluation.  In single-array mode the diagonal carries no coincidences and
// is skipped.
template <class Scalar>
std::pair<Eigen::Index, Eigen::Index> peak_cell(
    const JointDistribution<Scalar>& joint, ArrayMode mode = ArrayMode::dual) {
    if (mode == ArrayMode::dual) return joint.argmax();
    detail::check_single_mode(joint, mode);
    Eigen::Index bi = -1, bj = -1;
    Scalar best = Scalar(0);
    for (Eigen::Index i = 0; i < joint.rows(); ++i)
        for (Eigen::Index j = 0; j < joint.cols(); ++j) {
            if (i == j) continue;
            if (joint.p(i, j) > best) { best = joint.p(i, j); bi = i; bj = j; }
        }
    if (bi < 0) throw model_error("joint distribution has no off-diagonal mass");
    return {bi, bj};
}

// Exact Poisson-averaged correlation with its four-term decomposition.  In
// single-array mode both photons share one array: per-pixel photon
// probabilities double, the result is symmetric by construction, and the
// diagonal is zero (a saturated pixel cannot register two events).
template <class Scalar>
CorrelationResult<Scalar> g2_exact(const JointDistribution<Scalar>& joint,
                                   const DetectorModel<Scalar>& det,
                                   const SourceModel<Scalar>& source,
                                   ArrayMode mode = ArrayMode::dual) {
    detail::check_single_mode(joint, mode);
    return detail::assemble_result(joint, mode, [&](Eigen::Index i, Eigen::Index j) {
        return detail::g2_cell_exact(detail::cell_probs(joint, det, i, j, mode),
                                     det.p_n, source);
    });
}

// Quadratic (small-mu) approximation, term by term:
//   pair  = mu p_d^2 P_ij
//   cross = mu^2 p_d^2 (P_i - p_d P_ij)(P_j - p_d P_ij)
//   ph-n  = mu p_d p_n (P_i + P_j - 2 p_d P_ij)
//   n-n   = p_n^2
// Each term overestimates its exact counterpart at large mu.
template <class Scalar>
CorrelationResult<Scalar> g2_quadratic(const JointDistribution<Scalar>& joint,
                                       const DetectorModel<Scalar>& det,
                                       Scalar mu,
                                       ArrayMode mode = ArrayMode::dual) {
    detail::check_single_mode(joint, mode);
    return detail::assemble_result(joint, mode, [&](Eigen::Index i, Eigen::Index j) {
        return detail::g2_cell_quadratic(detail::cell_probs(joint, det, i, j, mode),
                                         det.p_n, mu);
    });
}

// Background correlation: P_ij -> 0 with marginals preserved, removing the
// pair term while keeping cross, photon-noise and noise-noise channels.
template <class Scalar>
CorrelationResult<Scalar> background_g2(const JointDistribution<Scalar>& joint,
                                        const DetectorModel<Scalar>& det,
                                        Scalar mu, BackgroundMethod method,
                                        ArrayMode mode = ArrayMode::dual) {
    detail::check_single_mode(joint, mode);
    const SourceModel<Scalar> source(mu);
    return detail::assemble_result(joint, mode, [&](Eigen::Index i, Eigen::Index j) {
        detail::CellProbs<Scalar> c = detail::cell_probs(joint, det, i, j, mode);
        c.a_ij = Scalar(0);
        return method == BackgroundMethod::exact
                   ? detail::g2_cell_exact(c, det.p_n, source)
                   : detail::g2_cell_quadratic(c, det.p_n, mu);
    });
}

// V = (G2 - background) / (G2 + background), in (-1, 1].
template <class Scalar>
Scalar visibility(Scalar g2_value, Scalar g2_background_value) {
    if (!(g2_value >= Scalar(0)) || !(g2_background_value >= Scalar(0)))
        throw model_error("visibility: inputs must be >= 0");
    const Scalar sum = g2_value + g2_background_value;
    if (sum == Scalar(0))
        throw undefined_visibility_error("visibility undefined: 0/0");
    return (g2_value - g2_background_value) / sum;
}

// Closed-form quadratic visibility at one cell:
//   N = mu p_d^2 P_ij [1 - p_d mu (P_i + P_j - p_d P_ij) - 2 p_n]
//   V = N / (N + 2 (mu^2 p_d^2 P_i P_j + mu p_d p_n (P_i + P_j) + p_n^2))
// Must agree with visibility(g2_quadratic, quadratic background) to 1e-12.
template <class Scalar>
Scalar visibility_quadratic(const JointDistribution<Scalar>& joint,
                            const DetectorModel<Scalar>& det, Scalar mu,
                            Eigen::Index i, Eigen::Index j) {
    const Scalar pd = det.p_d, pn = det.p_n;
    const Scalar pi = joint.marginal_i(i), pj = joint.marginal_j(j);
    const Scalar pij = joint.p(i, j);
    const Scalar num =
        mu * pd * pd * pij * (Scalar(1) - pd * mu * (pi + pj - pd * pij) - Scalar(2) * pn);
    const Scalar bg = mu * mu * pd * pd * pi * pj + mu * pd * pn * (pi + pj) + pn * pn;
    const Scalar den = num + Scalar(2) * bg;
    if (den == Scalar(0))
        throw undefined_visibility_error("visibility undefined: 0/0");
    return num / den;
}

// Stationary point of the quadratic visibility: per-detector photo-detection
// probability equal to the noise probability, p_d mu sqrt(P_i P_j) = p_n.
// One shared array halves the optimum (each pixel sees both photon fluxes).
template <class Scalar>
Scalar optimal_mu_approx(const JointDistribution<Scalar>& joint,
                         const DetectorModel<Scalar>& det, Eigen::Index i,
                         Eigen::Index j, ArrayMode mode = ArrayMode::dual) {
    detail::check_single_mode(joint, mode);
    const Scalar pi = joint.marginal_i(i), pj = joint.marginal_j(j);
    if (!(pi > Scalar(0)) || !(pj > Scalar(0)))
        throw model_error("optimal_mu_approx: degenerate marginal (P_i*P_j = 0)");
    if (!(det.p_d > Scalar(0)))
        throw model_error("optimal_mu_approx: p_d must be > 0");
    const Scalar mu = det.p_n / (det.p_d * std::sqrt(pi * pj));
    return mode == ArrayMode::single ? Scalar(0.5) * mu : mu;
}

// Golden-section maximization of the exact visibility at cell (i,j) over mu.
// Returns (mu_opt, v_max).  A maximizer that converges onto a bracket
// endpoint is returned as that endpoint (monotone visibility, e.g. p_n = 0);
// an endpoint that beats the interior optimum while the search converged
// elsewhere signals a non-unimodal curve and raises bracket_error.
template <class Scalar>
std::pair<Scalar, Scalar> optimal_mu_exact(const JointDistribution<Scalar>& joint,
                                           const DetectorModel<Scalar>& det,
                                           Eigen::Index i, Eigen::Index j,
                                           ArrayMode mode,
                                           std::pair<Scalar, Scalar> bracket) {
    detail::check_single_mode(joint, mode);
    Scalar lo = bracket.first, hi = bracket.second;
    if (!(lo > Scalar(0)) || !(lo < hi))
        throw bracket_error("optimal_mu_exact: need 0 < mu_lo < mu_hi");

    detail::CellProbs<Scalar> cell = detail::cell_probs(joint, det, i, j, mode);
    detail::CellProbs<Scalar> bg_cell = cell;
    bg_cell.a_ij = Scalar(0);
    const auto vis = [&](Scalar mu) {
        const SourceModel<Scalar> source(mu);
        return visibility(detail::g2_cell_exact(cell, det.p_n, source).total(),
                          detail::g2_cell_exact(bg_cell, det.p_n, source).total());
    };

    constexpr Scalar inv_phi = Scalar(0.6180339887498949);
    const Scalar v_lo_end = vis(lo), v_hi_end = vis(hi);
    Scalar a = lo, b = hi;
    Scalar c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
    Scalar fc = vis(c), fd = vis(d);
    while (b - a > Scalar(1e-4) * (std::abs(a) + std::abs(b)) / Scalar(2)) {
        if (fc > fd) {
            b = d; d = c; fd = fc;
            c = b - inv_phi * (b - a);
            fc = vis(c);
        } else {
            a = c; c = d; fc = fd;
            d = a + inv_phi * (b - a);
            fd = vis(d);
        }
    }
    Scalar mu_opt = fc > fd ? c : d;
    Scalar v_max = std::max(fc, fd);

    // Converged against an end of the bracket: the maximizer is the endpoint.
    const Scalar edge = Scalar(1e-3) * (hi - lo);
    if (mu_opt - lo <= edge && v_lo_end >= v_max) return {lo, v_lo_end};
    if (hi - mu_opt <= edge && v_hi_end >= v_max) return {hi, v_hi_end};

    const Scalar slack = Scalar(1e-7) * (Scalar(1) + std::abs(v_max));
    if (v_lo_end > v_max + slack || v_hi_end > v_max + slack)
        throw bracket_error("optimal_mu_exact: endpoint beats interior optimum; "
                            "visibility not unimodal on the bracket");
    return {mu_opt, v_max};
}

template <class Scalar>
std::pair<Scalar, Scalar> optimal_mu_exact(const JointDistribution<Scalar>& joint,
                                           const DetectorModel<Scalar>& det,
                                           Eigen::Index i, Eigen::Index j,
                                           ArrayMode mode = ArrayMode::dual) {
    const Scalar guess = optimal_mu_approx(joint, det, i, j, mode);
    return optimal_mu_exact(joint, det, i, j, mode,
                            {Scalar(1e-4), Scalar(10) * guess + Scalar(1)});
}

// Reduce a square correlation matrix over the label difference
// i' = (i - j) mod D: r(i') = sum_j m(j + i' mod D, j).  Mass-preserving.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> diagonal_reduce(
    const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    if (m.rows() != m.cols())
        throw model_error("diagonal_reduce: matrix must be square");
    const Eigen::Index d = m.rows();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r =
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) r((i - j + d) % d) += m(i, j);
    return r;
}

// Reduce by the difference of per-index labels (e.g. angular bins):
// r(k) = sum over cells with (label_i - label_j) mod n_bins = k.
template <class Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> reduce_by_labels(
    const Eigen::MatrixBase<Derived>& m, const Eigen::VectorXi& labels,
    int n_bins) {
    using Scalar = typename Derived::Scalar;
    if (m.rows() != m.cols() || m.rows() != labels.size())
        throw model_error("reduce_by_labels: size mismatch");
    if (n_bins <= 0) throw model_error("reduce_by_labels: n_bins must be > 0");
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r =
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n_bins);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            const int k = ((labels(i) - labels(j)) % n_bins + n_bins) % n_bins;
            r(k) += m(i, j);
        }
    return r;
}

}  // namespace paircorr
