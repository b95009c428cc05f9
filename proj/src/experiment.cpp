#include "paircorr/experiment.hpp"

#include <algorithm>
#include <cmath>

#include "paircorr/montecarlo.hpp"

namespace paircorr {

JointDistribution<double> build_example_state(const ExampleStateSpec& spec) {
    const Eigen::Index d = spec.dimension;
    const double c = spec.correlation;
    if (d < 2) throw model_error("example state: dimension must be >= 2");
    if (!(c >= 0.0 && c <= 1.0))
        throw model_error("example state: correlation must lie in [0, 1]");

    const double diag = c / double(d);
    const double off = (1.0 - c) / 2.0 / double(d);
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        p(i, i) += diag;
        p(i, (i + 1) % d) += off;  // label j = i+1 (mod D)
        p((i + 1) % d, i) += off;  // label i = j+1 (mod D); for D=2 both land on (0,1)/(1,0)
    }
    return JointDistribution<double>(p);
}

// ---------------------------------------------------------------------------
// Annular geometry

namespace {

// Angular bin of a pixel in the canonical half-plane (y > 0, or y = 0 with
// x > 0), where theta is in [0, 180).
int canonical_bin(int x, int y, double bin_width, int n_bins) {
    const double theta = std::atan2(double(y), double(x)) * 180.0 / M_PI;
    int bin = int(theta / bin_width);  // theta >= 0 here
    if (bin >= n_bins) bin = n_bins - 1;
    return bin;
}

}  // namespace

AnnularGeometry::AnnularGeometry(double inner_radius, double outer_radius,
                                 double bin_width_deg)
    : inner_(inner_radius), outer_(outer_radius), bin_width_(bin_width_deg) {
    if (!(inner_ > 0.0) || !(outer_ > inner_))
        throw model_error("annulus: need 0 < inner < outer");
    if (!(bin_width_ > 0.0))
        throw model_error("annulus: bin width must be positive");
    n_bins_ = int(std::lround(360.0 / bin_width_));
    if (n_bins_ < 1 || std::abs(double(n_bins_) * bin_width_ - 360.0) > 1e-9)
        throw model_error("annulus: bin width must divide 360 degrees");

    const double r2_lo = inner_ * inner_, r2_hi = outer_ * outer_;
    const int reach = int(std::ceil(outer_));
    const bool even = n_bins_ % 2 == 0;
    members_.assign(std::size_t(n_bins_), {});

    for (int y = -reach; y <= reach; ++y)
        for (int x = -reach; x <= reach; ++x) {
            const double r2 = double(x) * x + double(y) * y;
            if (!(r2 >= r2_lo && r2 < r2_hi)) continue;
            AnnulusPixel px;
            px.x = x;
            px.y = y;
            px.r = std::sqrt(r2);
            const bool canonical = y > 0 || (y == 0 && x > 0);
            if (canonical) {
                px.theta_deg = std::atan2(double(y), double(x)) * 180.0 / M_PI;
                px.bin = canonical_bin(x, y, bin_width_, n_bins_);
            } else if (even) {
                // Derive from the point-mirrored partner so that opposed
                // pixels sit exactly n_bins/2 bins apart.
                const int partner = canonical_bin(-x, -y, bin_width_, n_bins_);
                px.bin = (partner + n_bins_ / 2) % n_bins_;
                px.theta_deg =
                    std::atan2(double(-y), double(-x)) * 180.0 / M_PI + 180.0;
            } else {
                double theta = std::atan2(double(y), double(x)) * 180.0 / M_PI;
                if (theta < 0) theta += 360.0;
                px.theta_deg = theta;
                px.bin = std::min(int(theta / bin_width_), n_bins_ - 1);
            }
            members_[std::size_t(px.bin)].push_back(int(pixels_.size()));
            pixels_.push_back(px);
        }

    if (pixels_.empty()) throw model_error("annulus: no pixel centers inside the ring");
}

int AnnularGeometry::opposed_bin(int bin) const {
    if (bin < 0 || bin >= n_bins_) throw model_error("annulus: bin out of range");
    if (n_bins_ % 2 != 0)
        throw model_error("annulus: opposed bin undefined for an odd bin count");
    return (bin + n_bins_ / 2) % n_bins_;
}

Eigen::VectorXi AnnularGeometry::bin_labels() const {
    Eigen::VectorXi labels(Eigen::Index(pixels_.size()));
    for (std::size_t k = 0; k < pixels_.size(); ++k) labels(Eigen::Index(k)) = pixels_[k].bin;
    return labels;
}

AnnularGeometry build_annulus(double inner_radius, double outer_radius,
                              double bin_width_deg) {
    return AnnularGeometry(inner_radius, outer_radius, bin_width_deg);
}

JointDistribution<double> build_annular_joint(const AnnularGeometry& geom) {
    const Eigen::Index n = geom.n_pixels();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index u = 0; u < n; ++u) {
        const int opp = geom.opposed_bin(geom.pixels()[std::size_t(u)].bin);
        const auto& targets = geom.bin_members()[std::size_t(opp)];
        if (targets.empty())
            throw model_error("annulus: opposed bin has no pixels");
        const double w = 1.0 / (double(n) * double(targets.size()));
        for (int v : targets) p(u, v) = w;
    }
    return JointDistribution<double>(std::move(p));
}

double noise_for_exposure(const std::map<std::string, double>& table,
                          const std::string& label) {
    const auto it = table.find(label);
    if (it == table.end())
        throw model_error("no noise entry for exposure label '" + label + "'");
    return it->second;
}

// ---------------------------------------------------------------------------
// Figure sweeps

VisibilitySweep replicate_fig3(const std::vector<double>& p_n_list, double p_d,
                               const ExampleStateSpec& spec,
                               const std::vector<double>& mu_grid) {
    const JointDistribution<double> joint = build_example_state(spec);
    const auto [pi, pj] = peak_cell(joint, ArrayMode::dual);

    VisibilitySweep sweep;
    static const char* const term_names[] = {"pair", "cross", "photon_noise",
                                             "noise_noise"};
    for (double p_n : p_n_list) {
        const DetectorModel<double> det(p_d, p_n);
        const auto cell = detail::cell_probs(joint, det, pi, pj, ArrayMode::dual);
        auto bg_cell = cell;
        bg_cell.a_ij = 0.0;

        for (double mu : mu_grid) {
            const SourceModel<double> source(mu);
            const double g2 = detail::g2_cell_exact(cell, p_n, source).total();
            const double bg = detail::g2_cell_exact(bg_cell, p_n, source).total();
            sweep.curve.push_back({p_n, mu, p_d * mu, visibility(g2, bg),
                                   visibility_quadratic(joint, det, mu, pi, pj)});
        }

        const double mu_approx = optimal_mu_approx(joint, det, pi, pj, ArrayMode::dual);
        const auto [mu_opt, v_max] = optimal_mu_exact(joint, det, pi, pj, ArrayMode::dual);
        sweep.optima.push_back({p_n, mu_opt, v_max, mu_approx});

        for (double mu : {mu_opt / 4.0, mu_opt, 4.0 * mu_opt}) {
            const SourceModel<double> source(mu);
            const auto peak = detail::g2_cell_exact(cell, p_n, source);
            const auto bg = detail::g2_cell_exact(bg_cell, p_n, source);
            const auto full = g2_exact(joint, det, source, ArrayMode::dual);
            const double peak_terms[] = {peak.pair, peak.cross, peak.photon_noise,
                                         peak.noise_noise};
            const double bg_terms[] = {bg.pair, bg.cross, bg.photon_noise,
                                       bg.noise_noise};
            const double masses[] = {full.pair.sum(), full.cross.sum(),
                                     full.photon_noise.sum(), full.noise_noise.sum()};
            for (int t = 0; t < 4; ++t)
                sweep.decomposition.push_back(
                    {p_n, mu, term_names[t], peak_terms[t], bg_terms[t], masses[t]});
        }
    }
    return sweep;
}

LoadSweep replicate_fig4(const AnnularGeometry& geom, const DetectorModel<double>& det,
                         const std::vector<double>& mu_grid, std::int64_t n_frames,
                         std::uint64_t seed, int workers) {
    const JointDistribution<double> joint = build_annular_joint(geom);
    const Eigen::VectorXi labels = geom.bin_labels();
    const int nb = geom.n_bins();
    const int half = nb / 2;
    if (nb % 2 != 0)
        throw model_error("load sweep: even bin count required for a 180-degree peak");

    // Ordered pixel-pair multiplicity per bin difference, to average the
    // reduced curve per cell instead of per bin (bins hold 0..6 pixels).
    Eigen::VectorXd mult = Eigen::VectorXd::Zero(nb);
    Eigen::VectorXd pop = Eigen::VectorXd::Zero(nb);
    for (int b = 0; b < nb; ++b) pop(b) = double(geom.bin_members()[std::size_t(b)].size());
    for (int d = 0; d < nb; ++d) {
        double m = 0;
        for (int b = 0; b < nb; ++b) m += pop(b) * pop((b + d) % nb);
        if (d == 0) m -= pop.sum();  // no self-coincidences
        mult(d) = m;
    }

    LoadSweep sweep;
    sweep.curves.resize(Eigen::Index(mu_grid.size()), nb);
    sweep.delta_theta.resize(std::size_t(nb));
    for (int d = 0; d < nb; ++d) sweep.delta_theta[std::size_t(d)] = d * geom.bin_width_deg();

    for (std::size_t k = 0; k < mu_grid.size(); ++k) {
        const double mu = mu_grid[k];
        const FrameSampler sampler(joint, det, SourceModel<double>(mu), ArrayMode::single);
        RunConfig config;
        config.seed = seed + 1000003ull * k;
        config.n_frames = n_frames;
        config.array_mode = ArrayMode::single;
        config.workers = workers;
        const CoincidenceAccumulator acc = accumulate(sampler, config);

        const Eigen::VectorXd reduced =
            reduce_by_labels(acc.counts().cast<double>(), labels, nb);
        sweep.curves.row(Eigen::Index(k)) = reduced.transpose();

        Eigen::VectorXd norm(nb);
        for (int d = 0; d < nb; ++d) norm(d) = mult(d) > 0 ? reduced(d) / mult(d) : 0.0;
        const double peak = norm(half);
        double bg = 0.0;
        for (int d = 0; d < nb; ++d)
            if (d != half) bg += norm(d);
        bg /= double(nb - 1);

        const double denom = peak + bg;
        sweep.points.push_back({mu, acc.events_per_frame_a(),
                                denom > 0 ? (peak - bg) / denom : 0.0, peak, bg});
    }
    return sweep;
}

}  // namespace paircorr
