#include "paircorr/montecarlo.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace paircorr {

namespace {

Eigen::Index acc_cols(Eigen::Index d1, Eigen::Index d2, ArrayMode mode) {
    return mode == ArrayMode::dual ? d2 : d1;
}

}  // namespace

CoincidenceAccumulator::CoincidenceAccumulator(Eigen::Index d1, Eigen::Index d2,
                                               ArrayMode mode, bool tagging)
    : mode_(mode), tagging_(tagging) {
    if (d1 < 1 || (mode == ArrayMode::dual && d2 < 1))
        throw model_error("accumulator: empty detector array");
    c_ = CountMatrix::Zero(d1, acc_cols(d1, d2, mode));
    if (tagging_)
        for (auto& m : tagged_) m = CountMatrix::Zero(c_.rows(), c_.cols());
}

const CoincidenceAccumulator::CountMatrix& CoincidenceAccumulator::tagged(Tag t) const {
    if (!tagging_) throw model_error("accumulator: tagging was not enabled");
    return tagged_[int(t)];
}

double CoincidenceAccumulator::events_per_frame_a() const {
    return n_frames_ > 0 ? double(events_a_) / double(n_frames_) : 0.0;
}

double CoincidenceAccumulator::events_per_frame_b() const {
    return n_frames_ > 0 ? double(events_b_) / double(n_frames_) : 0.0;
}

Tag CoincidenceAccumulator::classify(const Frame& frame, Eigen::Index u,
                                     Eigen::Index v) const {
    const bool dual = mode_ == ArrayMode::dual;
    const PixelTruth tu = PixelTruth(frame.truth_a(u));
    const PixelTruth tv = dual ? PixelTruth(frame.truth_b(v)) : PixelTruth(frame.truth_a(v));
    if (tu == PixelTruth::noise && tv == PixelTruth::noise) return Tag::noise_noise;
    if (tu == PixelTruth::noise || tv == PixelTruth::noise) return Tag::photon_noise;
    // Both fired on photons: same emitted pair, or photons of different pairs
    // (the latter includes pairs that each lost their partner photon).
    const auto& du = frame.detections_a;
    const auto& dv = dual ? frame.detections_b : frame.detections_a;
    for (const Detection& a : du) {
        if (a.pixel != u) continue;
        for (const Detection& b : dv)
            if (b.pixel == v && b.pair_id == a.pair_id) return Tag::pair;
    }
    return Tag::cross;
}

void CoincidenceAccumulator::add_frame(const Frame& frame) {
    if (frame.outputs_a.size() != c_.rows())
        throw model_error("accumulator: frame size mismatch");
    const bool dual = mode_ == ArrayMode::dual;
    if (dual && frame.outputs_b.size() != c_.cols())
        throw model_error("accumulator: frame size mismatch");
    if (tagging_ && frame.truth_a.size() != frame.outputs_a.size())
        throw model_error("accumulator: tagging requires frame provenance");

    lit_a_.clear();
    for (Eigen::Index p = 0; p < frame.outputs_a.size(); ++p)
        if (frame.outputs_a(p)) lit_a_.push_back(std::int32_t(p));
    events_a_ += std::int64_t(lit_a_.size());

    std::int64_t frame_coinc = 0;
    std::array<std::int64_t, n_tags> frame_tag{};

    if (dual) {
        lit_b_.clear();
        for (Eigen::Index p = 0; p < frame.outputs_b.size(); ++p)
            if (frame.outputs_b(p)) lit_b_.push_back(std::int32_t(p));
        events_b_ += std::int64_t(lit_b_.size());

        for (std::int32_t u : lit_a_)
            for (std::int32_t v : lit_b_) {
                c_(u, v) += 1;
                ++frame_coinc;
                if (tagging_) {
                    const Tag t = classify(frame, u, v);
                    tagged_[int(t)](u, v) += 1;
                    ++frame_tag[int(t)];
                }
            }
    } else {
        // One array: every unordered lit pair is a coincidence, recorded
        // symmetrically; the diagonal is structurally empty (saturation).
        for (std::size_t x = 0; x < lit_a_.size(); ++x)
            for (std::size_t y = x + 1; y < lit_a_.size(); ++y) {
                const std::int32_t u = lit_a_[x], v = lit_a_[y];
                c_(u, v) += 1;
                c_(v, u) += 1;
                frame_coinc += 2;
                if (tagging_) {
                    const Tag t = classify(frame, u, v);
                    tagged_[int(t)](u, v) += 1;
                    tagged_[int(t)](v, u) += 1;
                    frame_tag[int(t)] += 2;
                }
            }
    }

    ++n_frames_;
    coinc_sum_ += frame_coinc;
    coinc_sumsq_ += frame_coinc * frame_coinc;
    for (int t = 0; t < n_tags; ++t) {
        tag_sum_[t] += frame_tag[t];
        tag_sumsq_[t] += frame_tag[t] * frame_tag[t];
        tag_cross_[t] += frame_tag[t] * frame_coinc;
    }
}

void CoincidenceAccumulator::merge_from(const CoincidenceAccumulator& other) {
    if (other.c_.rows() != c_.rows() || other.c_.cols() != c_.cols() ||
        other.mode_ != mode_ || other.tagging_ != tagging_)
        throw model_error("accumulator: merge shape/config mismatch");
    c_ += other.c_;
    n_frames_ += other.n_frames_;
    events_a_ += other.events_a_;
    events_b_ += other.events_b_;
    coinc_sum_ += other.coinc_sum_;
    coinc_sumsq_ += other.coinc_sumsq_;
    for (int t = 0; t < n_tags; ++t) {
        tag_sum_[t] += other.tag_sum_[t];
        tag_sumsq_[t] += other.tag_sumsq_[t];
        tag_cross_[t] += other.tag_cross_[t];
        if (tagging_) tagged_[t] += other.tagged_[t];
    }
}

FrameSampler::FrameSampler(JointDistribution<double> joint, DetectorModel<double> det,
                           SourceModel<double> source, ArrayMode mode)
    : joint_(std::move(joint)),
      det_(det),
      source_(source),
      mode_(mode),
      cells_(joint_.p()),
      pairs_(source_.mu) {
    if (mode_ == ArrayMode::single && joint_.rows() != joint_.cols())
        throw model_error("single-array mode requires a square joint distribution");
}

void FrameSampler::sample_frame(Frame& frame, std::uint64_t seed,
                                std::int64_t frame_index, bool tagging) const {
    const Eigen::Index da = joint_.rows();
    const Eigen::Index db = mode_ == ArrayMode::dual ? joint_.cols() : 0;
    frame.outputs_a.setZero(da);
    frame.outputs_b.setZero(db);
    if (tagging) {
        frame.truth_a.setZero(da);
        frame.truth_b.setZero(db);
        frame.detections_a.clear();
        frame.detections_b.clear();
    } else {
        frame.truth_a.resize(0);
        frame.truth_b.resize(0);
        frame.detections_a.clear();
        frame.detections_b.clear();
    }

    PhiloxRng rng(seed, std::uint64_t(frame_index));
    const std::int64_t n = pairs_(rng);

    const auto place = [&](Frame::Bits& out, Frame::Bits& truth,
                           std::vector<Detection>& dets, Eigen::Index pixel,
                           std::int64_t pair_id) {
        out(pixel) = 1;
        if (tagging) {
            truth(pixel) = std::uint8_t(PixelTruth::photon);
            dets.push_back({std::int32_t(pixel), std::int32_t(pair_id)});
        }
    };

    for (std::int64_t k = 0; k < n; ++k) {
        const auto [i, j] = cells_(rng);
        const bool det_signal = rng.bernoulli(det_.p_d);
        const bool det_idler = rng.bernoulli(det_.p_d);
        if (det_signal) place(frame.outputs_a, frame.truth_a, frame.detections_a, i, k);
        if (mode_ == ArrayMode::dual) {
            if (det_idler) place(frame.outputs_b, frame.truth_b, frame.detections_b, j, k);
        } else {
            if (det_idler) place(frame.outputs_a, frame.truth_a, frame.detections_a, j, k);
        }
    }

    if (det_.p_n > 0) {
        // Noise only on pixels without a photo-detection (conditional model).
        for (Eigen::Index p = 0; p < da; ++p)
            if (!frame.outputs_a(p) && rng.bernoulli(det_.p_n)) {
                frame.outputs_a(p) = 1;
                if (tagging) frame.truth_a(p) = std::uint8_t(PixelTruth::noise);
            }
        for (Eigen::Index p = 0; p < db; ++p)
            if (!frame.outputs_b(p) && rng.bernoulli(det_.p_n)) {
                frame.outputs_b(p) = 1;
                if (tagging) frame.truth_b(p) = std::uint8_t(PixelTruth::noise);
            }
    }
}

Frame FrameSampler::sample_frame(std::uint64_t seed, std::int64_t frame_index,
                                 bool tagging) const {
    Frame f;
    sample_frame(f, seed, frame_index, tagging);
    return f;
}

int effective_workers(int requested) {
    int hw = int(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    int w = requested > 0 ? requested : hw;
    if (const char* env = std::getenv("PAIRCORR_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1 && cap < long(1 << 20)) w = std::min(w, int(cap));
    }
    return std::max(1, w);
}

CoincidenceAccumulator accumulate(const FrameSampler& sampler, const RunConfig& config) {
    if (config.n_frames < 0) throw model_error("accumulate: n_frames must be >= 0");
    const Eigen::Index d1 = sampler.joint().rows();
    const Eigen::Index d2 = sampler.joint().cols();
    const ArrayMode mode = sampler.array_mode();

    int workers = effective_workers(config.workers);
    if (!config.dump_path.empty()) workers = 1;  // ordered dump
    if (std::int64_t(workers) > std::max<std::int64_t>(config.n_frames, 1))
        workers = int(std::max<std::int64_t>(config.n_frames, 1));

    if (workers == 1) {
        CoincidenceAccumulator acc(d1, d2, mode, config.tagging);
        Frame frame;
        if (!config.dump_path.empty()) {
            FrameDumpWriter dump(config.dump_path, sampler.d1(),
                                 sampler.d2(), config.n_frames);
            for (std::int64_t k = 0; k < config.n_frames; ++k) {
                sampler.sample_frame(frame, config.seed, k, config.tagging);
                dump.write(frame);
                acc.add_frame(frame);
            }
        } else {
            for (std::int64_t k = 0; k < config.n_frames; ++k) {
                sampler.sample_frame(frame, config.seed, k, config.tagging);
                acc.add_frame(frame);
            }
        }
        return acc;
    }

    std::vector<CoincidenceAccumulator> parts;
    parts.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w)
        parts.emplace_back(d1, d2, mode, config.tagging);

    std::vector<std::thread> threads;
    threads.reserve(std::size_t(workers));
    for (int w = 0; w < workers; ++w) {
        const std::int64_t lo = config.n_frames * w / workers;
        const std::int64_t hi = config.n_frames * (w + 1) / workers;
        threads.emplace_back([&, w, lo, hi] {
            Frame frame;
            for (std::int64_t k = lo; k < hi; ++k) {
                sampler.sample_frame(frame, config.seed, k, config.tagging);
                parts[std::size_t(w)].add_frame(frame);
            }
        });
    }
    for (auto& t : threads) t.join();
    for (int w = 1; w < workers; ++w) parts[0].merge_from(parts[std::size_t(w)]);
    return std::move(parts[0]);
}

CorrelationResult<double> estimate_g2(const CoincidenceAccumulator& acc) {
    const auto& c = acc.counts();
    const double total = double(c.sum());
    if (!(total > 0)) throw model_error("estimate_g2: accumulator has no coincidences");
    const double nf = double(acc.n_frames());

    CorrelationResult<double> r;
    const Eigen::MatrixXd p_hat = c.cast<double>() / nf;
    r.g2 = c.cast<double>() / total;
    r.normalization_constant = total / nf;
    r.std_error = (p_hat.array() * (1.0 - p_hat.array()) / nf).sqrt().matrix();
    if (acc.tagging()) {
        r.pair = acc.tagged(Tag::pair).cast<double>() / nf;
        r.cross = acc.tagged(Tag::cross).cast<double>() / nf;
        r.photon_noise = acc.tagged(Tag::photon_noise).cast<double>() / nf;
        r.noise_noise = acc.tagged(Tag::noise_noise).cast<double>() / nf;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Raw frame dump

namespace {

void put_bytes(std::FILE* f, const void* p, std::size_t n, const std::string& path) {
    if (std::fwrite(p, 1, n, f) != n) throw io_error("frame dump: write failed: " + path);
}

template <class T>
void put_le(std::FILE* f, T value, const std::string& path) {
    std::uint8_t b[sizeof(T)];
    for (std::size_t k = 0; k < sizeof(T); ++k)
        b[k] = std::uint8_t((std::uint64_t(value) >> (8 * k)) & 0xFF);
    put_bytes(f, b, sizeof(T), path);
}

template <class T>
T get_le(std::FILE* f, const std::string& path) {
    std::uint8_t b[sizeof(T)];
    if (std::fread(b, 1, sizeof(T), f) != sizeof(T))
        throw io_error("frame dump: truncated file: " + path);
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < sizeof(T); ++k) v |= std::uint64_t(b[k]) << (8 * k);
    return T(v);
}

void pack_bits(const Frame::Bits& bits, std::vector<std::uint8_t>& out) {
    const std::size_t nbytes = (std::size_t(bits.size()) + 7) / 8;
    const std::size_t base = out.size();
    out.resize(base + nbytes, 0);
    for (Eigen::Index k = 0; k < bits.size(); ++k)
        if (bits(k)) out[base + std::size_t(k >> 3)] |= std::uint8_t(1u << (k & 7));
}

void unpack_bits(const std::vector<std::uint8_t>& in, std::size_t base,
                 Frame::Bits& bits) {
    for (Eigen::Index k = 0; k < bits.size(); ++k)
        bits(k) = (in[base + std::size_t(k >> 3)] >> (k & 7)) & 1u;
}

constexpr char kMagic[4] = {'P', 'C', 'F', 'R'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

FrameDumpWriter::FrameDumpWriter(const std::string& path, Eigen::Index d1,
                                 Eigen::Index d2, std::int64_t n_frames)
    : d1_(d1), d2_(d2), declared_(n_frames) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw io_error("frame dump: cannot open for writing: " + path);
    file_ = f;
    put_bytes(f, kMagic, 4, path);
    put_le<std::uint16_t>(f, kVersion, path);
    put_le<std::uint32_t>(f, std::uint32_t(d1), path);
    put_le<std::uint32_t>(f, std::uint32_t(d2), path);
    put_le<std::uint64_t>(f, std::uint64_t(n_frames), path);
}

FrameDumpWriter::~FrameDumpWriter() {
    if (file_) std::fclose(static_cast<std::FILE*>(file_));
}

void FrameDumpWriter::write(const Frame& frame) {
    if (written_ >= declared_) throw io_error("frame dump: more frames than declared");
    if (frame.outputs_a.size() != d1_ || frame.outputs_b.size() != d2_)
        throw io_error("frame dump: frame shape mismatch");
    buf_.clear();
    pack_bits(frame.outputs_a, buf_);
    if (d2_ > 0) pack_bits(frame.outputs_b, buf_);
    put_bytes(static_cast<std::FILE*>(file_), buf_.data(), buf_.size(), "<dump>");
    ++written_;
}

FrameDump read_frame_dump(const std::string& path) {
    std::FILE* f = std::fopen(path.c_str(), "rb");
    if (!f) throw io_error("frame dump: cannot open: " + path);
    struct Closer {
        std::FILE* f;
        ~Closer() { std::fclose(f); }
    } closer{f};

    char magic[4];
    if (std::fread(magic, 1, 4, f) != 4 || std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("frame dump: bad magic: " + path);
    if (get_le<std::uint16_t>(f, path) != kVersion)
        throw io_error("frame dump: unsupported version: " + path);

    FrameDump dump;
    dump.d1 = Eigen::Index(get_le<std::uint32_t>(f, path));
    dump.d2 = Eigen::Index(get_le<std::uint32_t>(f, path));
    const std::uint64_t n = get_le<std::uint64_t>(f, path);

    const std::size_t bytes_a = (std::size_t(dump.d1) + 7) / 8;
    const std::size_t bytes_b = (std::size_t(dump.d2) + 7) / 8;
    std::vector<std::uint8_t> buf(bytes_a + bytes_b);
    dump.frames.reserve(n);
    for (std::uint64_t k = 0; k < n; ++k) {
        if (std::fread(buf.data(), 1, buf.size(), f) != buf.size())
            throw io_error("frame dump: truncated file: " + path);
        Frame frame;
        frame.outputs_a.resize(dump.d1);
        unpack_bits(buf, 0, frame.outputs_a);
        frame.outputs_b.resize(dump.d2);
        if (dump.d2 > 0) unpack_bits(buf, bytes_a, frame.outputs_b);
        dump.frames.push_back(std::move(frame));
    }
    return dump;
}

}  // namespace paircorr
