#pragma once

// Frame-by-frame simulation of the detection model: Poisson pair emission,
// placement of each pair on a mode cell, per-photon detection loss, pixel
// saturation, and conditional noise on photon-free pixels.  Coincidences are
// accumulated into integer count matrices; with tagging enabled every
// coincidence is classified by its ground-truth origin (pair / cross /
// photon-noise / noise-noise), which the real experiment cannot do.
//
// Reproducibility contract: a frame's content is a pure function of
// (seed, frame_index, model); identical runs give bit-identical accumulators
// for any worker count, because workers own disjoint frame ranges and the
// merge is integer addition.

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "paircorr/analytic.hpp"
#include "paircorr/joint_distribution.hpp"
#include "paircorr/models.hpp"
#include "paircorr/rng.hpp"

namespace paircorr {

enum class PixelTruth : std::uint8_t { dark = 0, photon = 1, noise = 2 };

// One photo-detection: which pixel, and from which emitted pair it came.
struct Detection {
    std::int32_t pixel;
    std::int32_t pair_id;
};

struct Frame {
    using Bits = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>;
    Bits outputs_a;               // thresholded outputs, one per pixel
    Bits outputs_b;               // empty in single-array mode
    Bits truth_a, truth_b;        // PixelTruth per pixel (filled when tagging)
    std::vector<Detection> detections_a, detections_b;  // filled when tagging
};

enum class Tag { pair = 0, cross = 1, photon_noise = 2, noise_noise = 3 };
inline constexpr int n_tags = 4;

struct RunConfig {
    std::uint64_t seed = 0;
    std::int64_t n_frames = 0;
    ArrayMode array_mode = ArrayMode::dual;
    bool tagging = false;
    int workers = 0;        // 0 = hardware concurrency; capped by PAIRCORR_THREADS
    std::string dump_path;  // optional raw frame dump (forces serial accumulation)
};

// Integer coincidence tallies plus per-frame first/second moments of the
// per-tag coincidence totals (enough to attach standard errors to tag
// fractions).  All fields are integers, so merging partial accumulators is
// exact and order-independent.
class CoincidenceAccumulator {
public:
    using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

    CoincidenceAccumulator(Eigen::Index d1, Eigen::Index d2, ArrayMode mode,
                           bool tagging);

    void add_frame(const Frame& frame);
    void merge_from(const CoincidenceAccumulator& other);

    const CountMatrix& counts() const { return c_; }
    std::int64_t n_frames() const { return n_frames_; }
    ArrayMode array_mode() const { return mode_; }
    bool tagging() const { return tagging_; }
    const CountMatrix& tagged(Tag t) const;

    std::int64_t total_events_a() const { return events_a_; }
    std::int64_t total_events_b() const { return events_b_; }
    double events_per_frame_a() const;
    double events_per_frame_b() const;

    // Per-frame coincidence-total moments: sum_k X_k and sum_k X_k^2, where
    // X_k is frame k's coincidence count (total or per tag), plus the
    // cross-moment sum_k X_k S_k against the frame total S_k.
    std::int64_t coinc_sum() const { return coinc_sum_; }
    std::int64_t coinc_sumsq() const { return coinc_sumsq_; }
    std::int64_t tag_sum(Tag t) const { return tag_sum_[int(t)]; }
    std::int64_t tag_sumsq(Tag t) const { return tag_sumsq_[int(t)]; }
    std::int64_t tag_cross_sum(Tag t) const { return tag_cross_[int(t)]; }

private:
    Tag classify(const Frame& frame, Eigen::Index u, Eigen::Index v) const;

    CountMatrix c_;
    std::array<CountMatrix, n_tags> tagged_;
    ArrayMode mode_;
    bool tagging_;
    std::int64_t n_frames_ = 0;
    std::int64_t events_a_ = 0, events_b_ = 0;
    std::int64_t coinc_sum_ = 0, coinc_sumsq_ = 0;
    std::array<std::int64_t, n_tags> tag_sum_{}, tag_sumsq_{}, tag_cross_{};

    // scratch: lit-pixel lists reused across frames
    mutable std::vector<std::int32_t> lit_a_, lit_b_;
};

// Binds the model to samplers; stateless across frames.
class FrameSampler {
public:
    FrameSampler(JointDistribution<double> joint, DetectorModel<double> det,
                 SourceModel<double> source, ArrayMode mode);

    void sample_frame(Frame& frame, std::uint64_t seed, std::int64_t frame_index,
                      bool tagging) const;
    Frame sample_frame(std::uint64_t seed, std::int64_t frame_index,
                       bool tagging = false) const;

    const JointDistribution<double>& joint() const { return joint_; }
    const DetectorModel<double>& det() const { return det_; }
    const SourceModel<double>& source() const { return source_; }
    ArrayMode array_mode() const { return mode_; }
    Eigen::Index d1() const { return joint_.rows(); }
    Eigen::Index d2() const { return mode_ == ArrayMode::dual ? joint_.cols() : 0; }

private:
    JointDistribution<double> joint_;
    DetectorModel<double> det_;
    SourceModel<double> source_;
    ArrayMode mode_;
    CategoricalCellSampler cells_;
    PoissonSampler pairs_;
};

// Number of worker threads actually used for a requested count (0 = auto),
// honoring the PAIRCORR_THREADS cap.
int effective_workers(int requested);

// Sample config.n_frames frames and accumulate coincidences, parallel over
// contiguous frame ranges.
CoincidenceAccumulator accumulate(const FrameSampler& sampler, const RunConfig& config);

// Normalized estimate with per-cell binomial standard errors on the
// pre-normalization coincidence probability; decomposition filled from tags
// when available.
CorrelationResult<double> estimate_g2(const CoincidenceAccumulator& acc);

// Raw-frame dump (debugging): header {magic "PCFR", u16 version, u32 D1,
// u32 D2 (0 in single mode), u64 n_frames}, then per frame the bit-packed
// outputs of array a (and b when dual), pixel k -> byte k>>3, bit k&7.
// Little-endian throughout.
class FrameDumpWriter {
public:
    FrameDumpWriter(const std::string& path, Eigen::Index d1, Eigen::Index d2,
                    std::int64_t n_frames);
    ~FrameDumpWriter();
    FrameDumpWriter(const FrameDumpWriter&) = delete;
    FrameDumpWriter& operator=(const FrameDumpWriter&) = delete;

    void write(const Frame& frame);

private:
    void* file_;  // FILE*
    Eigen::Index d1_, d2_;
    std::int64_t declared_, written_ = 0;
    std::vector<std::uint8_t> buf_;
};

struct FrameDump {
    Eigen::Index d1 = 0, d2 = 0;
    std::vector<Frame> frames;
};

FrameDump read_frame_dump(const std::string& path);

}  // namespace paircorr
