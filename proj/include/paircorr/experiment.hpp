#pragma once

// The two concrete scenarios studied with the model: a D-mode example state
// with tunable label correlation, and an annular far-field region of
// interest where pair photons arrive at diametrically opposed angles on a
// single camera.  Plus the sweep drivers that regenerate the visibility
// figures (analytic sweep over noise levels; Monte Carlo sweep over photon
// load).

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "paircorr/analytic.hpp"
#include "paircorr/joint_distribution.hpp"
#include "paircorr/models.hpp"

namespace paircorr {

// P_ij = c_ij / D with c_ij = c on the diagonal and (1-c)/2 on the two
// cyclically adjacent off-diagonals: a photon pair lands on equal labels
// with probability c, and on labels differing by +-1 (mod D) with
// probability (1-c)/2 each.  Marginals are uniform 1/D by construction.
struct ExampleStateSpec {
    Eigen::Index dimension = 50;
    double correlation = 0.6;
};

JointDistribution<double> build_example_state(const ExampleStateSpec& spec);

struct AnnulusPixel {
    int x, y;          // integer offsets from the ring center
    double r;          // center distance in pixels
    double theta_deg;  // [0, 360)
    int bin;           // angular bin, floor(theta / bin_width)
};

// Integer-lattice rasterization of an annular ROI: a pixel belongs to the
// ring iff its center satisfies inner <= r < outer.  Pixels are assigned to
// angular bins of bin_width degrees; diametrically opposed pixels land in
// bins exactly n_bins/2 apart by construction (the bin of a pixel in the
// lower half-plane is derived from its point-mirror partner), so opposed
// bins always hold the same number of pixels.
class AnnularGeometry {
public:
    AnnularGeometry(double inner_radius, double outer_radius, double bin_width_deg);

    double inner_radius() const { return inner_; }
    double outer_radius() const { return outer_; }
    double bin_width_deg() const { return bin_width_; }
    int n_bins() const { return n_bins_; }
    Eigen::Index n_pixels() const { return Eigen::Index(pixels_.size()); }
    const std::vector<AnnulusPixel>& pixels() const { return pixels_; }
    const std::vector<std::vector<int>>& bin_members() const { return members_; }

    int opposed_bin(int bin) const;
    Eigen::VectorXi bin_labels() const;  // per-pixel bin index

private:
    double inner_, outer_, bin_width_;
    int n_bins_;
    std::vector<AnnulusPixel> pixels_;
    std::vector<std::vector<int>> members_;
};

AnnularGeometry build_annulus(double inner_radius, double outer_radius,
                              double bin_width_deg);

// Pixel-level joint distribution on the annulus: the signal photon is
// uniform over all pixels; the idler lands uniformly on the pixels of the
// diametrically opposed angular bin (any radius within the ring).  Marginals
// are uniform and the matrix is symmetric with a zero diagonal.
JointDistribution<double> build_annular_joint(const AnnularGeometry& geom);

// Noise probability depends on the exposure setting in the lab; the model
// has no clock, so exposures are labels resolved through a user table.
double noise_for_exposure(const std::map<std::string, double>& table,
                          const std::string& label);

// --- Visibility-vs-noise sweep (analytic), one curve per p_n --------------

struct VisibilitySweepRow {
    double p_n, mu, pd_mu;
    double v_exact, v_quadratic;
};

struct VisibilityOptimum {
    double p_n;
    double mu_opt_exact, v_max;
    double mu_opt_approx;
};

// Four-term split of the correlation and its background at the peak cell,
// plus whole-matrix masses, for stacked-bar style comparisons.
struct DecompositionRow {
    double p_n, mu;
    const char* term;  // "pair", "cross", "photon_noise", "noise_noise"
    double g2_peak, background_peak;
    double g2_mass;
};

struct VisibilitySweep {
    std::vector<VisibilitySweepRow> curve;
    std::vector<VisibilityOptimum> optima;
    std::vector<DecompositionRow> decomposition;
};

// Exact and quadratic visibility at the peak cell of the example state over
// mu_grid, for each noise level; optima from golden-section search; term
// decompositions at mu_opt/4, mu_opt and 4*mu_opt.
VisibilitySweep replicate_fig3(const std::vector<double>& p_n_list, double p_d,
                               const ExampleStateSpec& spec,
                               const std::vector<double>& mu_grid);

// --- Visibility-vs-photon-load sweep (Monte Carlo, single array) ----------

struct LoadSweepPoint {
    double mu;
    double mean_events;       // detected events per frame (photons + noise)
    double visibility;        // peak bin vs mean background, multiplicity-normalized
    double peak_value;        // per-cell-normalized reduced curve at 180 deg
    double background_level;  // mean of the same curve away from the peak
};

struct LoadSweep {
    std::vector<LoadSweepPoint> points;
    Eigen::MatrixXd curves;           // one reduced coincidence curve per mu (raw counts)
    std::vector<double> delta_theta;  // degrees, per curve column
};

LoadSweep replicate_fig4(const AnnularGeometry& geom, const DetectorModel<double>& det,
                         const std::vector<double>& mu_grid, std::int64_t n_frames,
                         std::uint64_t seed = 1, int workers = 0);

}  // namespace paircorr
