// Command-line front end: analytic sweeps, Monte Carlo runs, and figure
// replication, all driven by one declarative config (INI sections + flags).
#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "paircorr/analytic.hpp"
#include "paircorr/errors.hpp"
#include "paircorr/experiment.hpp"
#include "paircorr/io.hpp"
#include "paircorr/montecarlo.hpp"
#include "paircorr/version.hpp"

namespace fs = std::filesystem;
using namespace paircorr;

namespace {

struct Options {
    // state
    std::string state_kind = "example";
    int dimension = 50;
    double correlation = 0.6;
    double inner = 24.0;
    double outer = 28.0;
    double bin_width = 2.0;
    std::string matrix_path;
    // detector
    double p_d = 0.5;
    double p_n = 0.01;
    std::string exposure;
    std::string exposure_table;  // "label=p_n,label=p_n,..."
    // source
    double mu = 1.0;
    // sweeps (comma list or "lo:hi:n[:log]"; empty = per-command default)
    std::string mu_grid;
    std::string p_n_list = "0.01,0.02,0.05,0.1";
    // run
    std::uint64_t seed = 1;
    long long frames = -1;  // -1 = per-command default
    std::string out_dir = "out";
    bool tagging = false;
    std::string array_mode = "dual";
    int workers = 0;
    std::string dump_path;
};

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> values;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        if (!item.empty()) {
            std::size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size())
                throw model_error("could not parse number '" + item + "'");
        }
        pos = comma + 1;
    }
    if (values.empty()) throw model_error("empty number list");
    return values;
}

std::vector<double> parse_grid(const std::string& text) {
    if (text.find(':') == std::string::npos) return parse_number_list(text);
    // "lo:hi:n" (linear) or "lo:hi:n:log"
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t colon = text.find(':', pos);
        if (colon == std::string::npos) colon = text.size();
        parts.push_back(text.substr(pos, colon - pos));
        pos = colon + 1;
    }
    if (parts.size() < 3 || parts.size() > 4)
        throw model_error("grid spec must be lo:hi:n or lo:hi:n:log");
    const double lo = std::stod(parts[0]);
    const double hi = std::stod(parts[1]);
    const int n = std::stoi(parts[2]);
    const bool log_spaced = parts.size() == 4 && parts[3] == "log";
    if (n < 2 || !(lo < hi) || (log_spaced && lo <= 0.0))
        throw model_error("invalid grid spec '" + text + "'");
    std::vector<double> grid(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double t = double(k) / double(n - 1);
        grid[std::size_t(k)] =
            log_spaced ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t;
    }
    return grid;
}

std::map<std::string, double> parse_exposure_table(const std::string& text) {
    std::map<std::string, double> table;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(pos, comma - pos);
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw model_error("exposure table entry must be label=value: '" +
                              item + "'");
        table[item.substr(0, eq)] = std::stod(item.substr(eq + 1));
        pos = comma + 1;
    }
    return table;
}

ArrayMode parse_mode(const std::string& name) {
    return name == "single" ? ArrayMode::single : ArrayMode::dual;
}

struct StateBundle {
    JointDistribution<double> joint;
    std::optional<AnnularGeometry> geometry;
};

StateBundle make_state(const Options& opt) {
    if (opt.state_kind == "example") {
        ExampleStateSpec spec;
        spec.dimension = opt.dimension;
        spec.correlation = opt.correlation;
        return {build_example_state(spec), std::nullopt};
    }
    if (opt.state_kind == "annulus") {
        AnnularGeometry geom = build_annulus(opt.inner, opt.outer, opt.bin_width);
        JointDistribution<double> joint = build_annular_joint(geom);
        return {std::move(joint), std::move(geom)};
    }
    if (opt.matrix_path.empty())
        throw model_error("state.kind=matrix requires --state.matrix PATH");
    const Eigen::MatrixXd m = read_matrix_csv(opt.matrix_path);
    return {JointDistribution<double>(m, JointDistribution<double>::Normalize::rescale),
            std::nullopt};
}

DetectorModel<double> make_detector(const Options& opt) {
    double p_n = opt.p_n;
    if (!opt.exposure.empty())
        p_n = noise_for_exposure(parse_exposure_table(opt.exposure_table),
                                 opt.exposure);
    return DetectorModel<double>(opt.p_d, p_n);
}

// Regroup the flat dotted keys CLI11 emits ('state.kind'=...) into INI
// sections ([state] kind=...); the parser accepts the sectioned form.
std::string sectioned_config(const std::string& flat) {
    std::vector<std::string> order{""};
    std::map<std::string, std::string> chunks{{"", ""}};
    std::string pending;
    std::size_t pos = 0;
    while (pos <= flat.size()) {
        std::size_t nl = flat.find('\n', pos);
        if (nl == std::string::npos) nl = flat.size();
        const std::string line = flat.substr(pos, nl - pos);
        pos = nl + 1;
        if (line.empty() || line[0] == '#' || line[0] == ';') {
            pending += line + "\n";
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            pending += line + "\n";
            continue;
        }
        std::string key = line.substr(0, eq);
        if (key.size() >= 2 && (key.front() == '\'' || key.front() == '"') &&
            key.back() == key.front())
            key = key.substr(1, key.size() - 2);
        std::string section;
        const std::size_t dot = key.find('.');
        if (dot != std::string::npos) {
            section = key.substr(0, dot);
            key = key.substr(dot + 1);
        }
        if (chunks.find(section) == chunks.end()) {
            order.push_back(section);
            chunks[section] = "";
        }
        chunks[section] += pending + key + line.substr(eq) + "\n";
        pending.clear();
    }
    std::string out;
    for (const std::string& section : order) {
        if (chunks[section].empty()) continue;
        if (!section.empty()) out += "\n[" + section + "]\n";
        out += chunks[section];
    }
    out += pending;
    return out;
}

// The stock reader resolves "[section] key" entries against subcommands
// only, so values under [state] etc. would be dropped silently.  This
// formatter folds section parents back into the dotted option names on read
// and emits the sectioned layout on write, making the dump re-readable.
class SectionedConfig : public CLI::ConfigBase {
  public:
    std::string to_config(const CLI::App* app, bool default_also,
                          bool write_description,
                          std::string prefix) const override {
        return sectioned_config(CLI::ConfigBase::to_config(
            app, default_also, write_description, prefix));
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
        std::vector<CLI::ConfigItem> items = CLI::ConfigBase::from_config(input);
        for (CLI::ConfigItem& item : items) {
            if (item.parents.empty() || item.name == "++" || item.name == "--")
                continue;
            std::string flat;
            for (const std::string& parent : item.parents) flat += parent + '.';
            item.name = flat + item.name;
            item.parents.clear();
        }
        return items;
    }
};

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// Per-array mean detected events per frame (photon + noise), analytic.
double analytic_events_per_frame(const JointDistribution<double>& joint,
                                 const DetectorModel<double>& det, double mu,
                                 ArrayMode mode) {
    double events = 0.0;
    if (mode == ArrayMode::dual) {
        for (Eigen::Index i = 0; i < joint.rows(); ++i)
            events += mean_events_per_pixel(mu * joint.marginal_i(i), det);
    } else {
        for (Eigen::Index k = 0; k < joint.rows(); ++k)
            events += mean_events_per_pixel(
                mu * (joint.marginal_i(k) + joint.marginal_j(k)), det);
    }
    return events;
}

struct RunContext {
    fs::path out;
    std::string run_hash;
    std::vector<std::string> outputs;
    std::vector<std::pair<std::string, std::string>> manifest;

    std::vector<std::string> csv_comments(std::initializer_list<std::string> extra = {}) const {
        std::vector<std::string> lines{"run: " + run_hash};
        lines.insert(lines.end(), extra.begin(), extra.end());
        return lines;
    }
    fs::path file(const std::string& name) {
        outputs.push_back(name);
        return out / name;
    }
    void finish() {
        std::string joined;
        for (const auto& name : outputs)
            joined += (joined.empty() ? "" : ";") + name;
        manifest.emplace_back("outputs", joined);
        manifest.emplace_back("created_utc", utc_timestamp());
        write_manifest((out / "manifest.txt").string(), manifest);
        std::fprintf(stderr, "wrote %zu files to %s\n", outputs.size() + 1,
                     out.string().c_str());
    }
};

RunContext make_context(const Options& opt, const std::string& command,
                        const std::string& resolved_config) {
    RunContext ctx;
    ctx.out = opt.out_dir;
    fs::create_directories(ctx.out);
    ctx.run_hash = hex64(fnv1a64(command + "\n" + resolved_config));
    ctx.manifest = {{"command", command},
                    {"config_hash", ctx.run_hash},
                    {"seed", std::to_string(opt.seed)},
                    {"version", version()}};
    return ctx;
}

void cmd_analytic(const Options& opt, const std::string& resolved_config) {
    RunContext ctx = make_context(opt, "analytic", resolved_config);
    const StateBundle state = make_state(opt);
    const DetectorModel<double> det = make_detector(opt);
    const ArrayMode mode = parse_mode(opt.array_mode);
    const std::vector<double> grid =
        parse_grid(opt.mu_grid.empty() ? "0.05:50:40:log" : opt.mu_grid);

    const auto [pi, pj] = peak_cell(state.joint, mode);
    const double mu_opt_approx_v = optimal_mu_approx(state.joint, det, pi, pj, mode);
    const double mu_opt_exact_v = optimal_mu_exact(state.joint, det, pi, pj, mode).first;

    CsvWriter sweep(ctx.file("analytic_sweep.csv").string());
    for (const auto& line : ctx.csv_comments(
             {"columns: mu = mean photon pairs per frame; detected_events = "
              "mean detected events per frame on one array (photons + noise); "
              "visibility_* = (G2_peak - bg_peak)/(G2_peak + bg_peak); "
              "mu_opt_* = flux maximizing visibility (repeated per row)"}))
        sweep.comment(line);
    sweep.header({"mu", "detected_events", "visibility_exact",
                  "visibility_quadratic", "mu_opt_approx", "mu_opt_exact"});

    const detail::CellProbs<double> cell =
        detail::cell_probs(state.joint, det, pi, pj, mode);
    detail::CellProbs<double> bg_cell = cell;
    bg_cell.a_ij = 0.0;

    const char* term_names[] = {"pair", "cross", "photon_noise", "noise_noise"};
    int file_index = 0;
    for (const double mu : grid) {
        const SourceModel<double> source(mu);
        const auto peak_terms = detail::g2_cell_exact(cell, det.p_n, source);
        const auto bg_terms = detail::g2_cell_exact(bg_cell, det.p_n, source);
        const double v_exact = visibility(peak_terms.total(), bg_terms.total());
        const double v_quad =
            mode == ArrayMode::dual
                ? visibility_quadratic(state.joint, det, mu, pi, pj)
                : visibility(detail::g2_cell_quadratic(cell, det.p_n, mu).total(),
                             detail::g2_cell_quadratic(bg_cell, det.p_n, mu).total());

        sweep.row({mu, analytic_events_per_frame(state.joint, det, mu, mode),
                   v_exact, v_quad, mu_opt_approx_v, mu_opt_exact_v});

        CsvWriter dec(ctx.file("decomposition_" + std::to_string(file_index++) +
                               ".csv").string());
        for (const auto& line : ctx.csv_comments(
                 {"mu = " + format_double(mu),
                  "columns: term name; unnormalized per-frame coincidence "
                  "probability at the peak cell; same for the uncorrelated "
                  "background state"}))
            dec.comment(line);
        dec.header({"term", "g2_peak", "background_peak"});
        const double peak_vals[] = {peak_terms.pair, peak_terms.cross,
                                    peak_terms.photon_noise, peak_terms.noise_noise};
        const double bg_vals[] = {bg_terms.pair, bg_terms.cross,
                                  bg_terms.photon_noise, bg_terms.noise_noise};
        for (int t = 0; t < 4; ++t)
            dec.row({std::string(term_names[t]), format_double(peak_vals[t]),
                     format_double(bg_vals[t])});
    }
    ctx.manifest.emplace_back("mu_grid_points", std::to_string(grid.size()));
    ctx.finish();
}

void cmd_mc(const Options& opt, const std::string& resolved_config) {
    RunContext ctx = make_context(opt, "mc", resolved_config);
    const StateBundle state = make_state(opt);
    const DetectorModel<double> det = make_detector(opt);
    const SourceModel<double> source(opt.mu);
    const ArrayMode mode = parse_mode(opt.array_mode);

    RunConfig config;
    config.seed = opt.seed;
    config.n_frames = opt.frames < 0 ? 1000 : opt.frames;
    config.array_mode = mode;
    config.tagging = opt.tagging;
    config.workers = opt.workers;
    config.dump_path = opt.dump_path;

    const FrameSampler sampler(state.joint, det, source, mode);
    const CoincidenceAccumulator acc = accumulate(sampler, config);
    const CorrelationResult<double> result = estimate_g2(acc);

    const std::string frames_line =
        "frames = " + std::to_string(acc.n_frames());
    write_matrix_csv(ctx.file("coincidences.csv").string(),
                     acc.counts().cast<double>(),
                     ctx.csv_comments(
                         {frames_line,
                          "raw coincidence counts C_ij (events) accumulated "
                          "over all frames; row = signal pixel i, column = "
                          "idler pixel j"}));
    write_matrix_csv(ctx.file("g2.csv").string(), result.g2,
                     ctx.csv_comments(
                         {frames_line,
                          "normalized correlation G2_ij = C_ij / sum(C) "
                          "(dimensionless, sums to 1)"}));

    if (opt.tagging) {
        const std::pair<Tag, const char*> tags[] = {
            {Tag::pair, "tagged_pair.csv"},
            {Tag::cross, "tagged_cross.csv"},
            {Tag::photon_noise, "tagged_photon_noise.csv"},
            {Tag::noise_noise, "tagged_noise_noise.csv"}};
        for (const auto& [tag, name] : tags)
            write_matrix_csv(ctx.file(name).string(),
                             acc.tagged(tag).cast<double>(),
                             ctx.csv_comments(
                                 {frames_line,
                                  "ground-truth tagged coincidence counts "
                                  "(events) for this contribution"}));
    }

    const Eigen::MatrixXd counts = acc.counts().cast<double>();
    if (state.geometry) {
        const AnnularGeometry& geom = *state.geometry;
        const Eigen::VectorXd reduced =
            reduce_by_labels(counts, geom.bin_labels(), geom.n_bins());
        CsvWriter red(ctx.file("reduced.csv").string());
        for (const auto& line : ctx.csv_comments(
                 {frames_line,
                  "coincidence counts summed over pixel pairs with fixed "
                  "angular-bin difference delta"}))
            red.comment(line);
        red.header({"delta_bin", "delta_theta_deg", "counts"});
        for (Eigen::Index d = 0; d < reduced.size(); ++d)
            red.row({double(d), double(d) * geom.bin_width_deg(), reduced(d)});
    } else if (counts.rows() == counts.cols()) {
        const Eigen::VectorXd reduced = diagonal_reduce(counts);
        CsvWriter red(ctx.file("reduced.csv").string());
        for (const auto& line : ctx.csv_comments(
                 {frames_line,
                  "coincidence counts summed over cells with fixed index "
                  "difference delta = (i - j) mod D"}))
            red.comment(line);
        red.header({"delta", "counts"});
        for (Eigen::Index d = 0; d < reduced.size(); ++d)
            red.row({double(d), reduced(d)});
    }

    ctx.manifest.emplace_back("frames", std::to_string(acc.n_frames()));
    ctx.manifest.emplace_back("mean_events_per_frame_a",
                              format_double(acc.events_per_frame_a()));
    if (!opt.dump_path.empty())
        ctx.manifest.emplace_back("frame_dump", opt.dump_path);
    ctx.finish();
}

void cmd_replicate(const std::string& figure, const Options& opt,
                   const std::string& resolved_config) {
    RunContext ctx = make_context(opt, "replicate " + figure, resolved_config);
    if (figure == "fig3") {
        ExampleStateSpec spec;
        spec.dimension = opt.dimension;
        spec.correlation = opt.correlation;
        const std::vector<double> grid =
            parse_grid(opt.mu_grid.empty() ? "0.05:50:40:log" : opt.mu_grid);
        const VisibilitySweep sweep = replicate_fig3(
            parse_number_list(opt.p_n_list), opt.p_d, spec, grid);

        CsvWriter vis(ctx.file("fig3_visibility.csv").string());
        for (const auto& line : ctx.csv_comments(
                 {"columns: p_n = noise probability per pixel per frame; mu = "
                  "mean pairs per frame; pd_mu = detected pair flux p_d*mu; "
                  "visibility_* = peak-vs-background contrast (dimensionless)"}))
            vis.comment(line);
        vis.header({"p_n", "mu", "pd_mu", "visibility_exact",
                    "visibility_quadratic"});
        for (const auto& row : sweep.curve)
            vis.row({row.p_n, row.mu, row.pd_mu, row.v_exact, row.v_quadratic});

        CsvWriter opts_csv(ctx.file("fig3_optima.csv").string());
        for (const auto& line : ctx.csv_comments(
                 {"per-noise-level optimum: exact maximizer of the visibility "
                  "curve vs the closed-form approximation"}))
            opts_csv.comment(line);
        opts_csv.header({"p_n", "mu_opt_exact", "v_max", "mu_opt_approx"});
        for (const auto& row : sweep.optima)
            opts_csv.row({row.p_n, row.mu_opt_exact, row.v_max, row.mu_opt_approx});

        CsvWriter dec(ctx.file("fig3_decomposition.csv").string());
        for (const auto& line : ctx.csv_comments(
                 {"per-term unnormalized coincidence probability at the peak "
                  "cell (g2_peak), at the same cell of the uncorrelated "
                  "background state (background_peak), and total mass over "
                  "all cells (g2_mass)"}))
            dec.comment(line);
        dec.header({"p_n", "mu", "term", "g2_peak", "background_peak",
                    "g2_mass"});
        for (const auto& row : sweep.decomposition)
            dec.row({format_double(row.p_n), format_double(row.mu), row.term,
                     format_double(row.g2_peak), format_double(row.background_peak),
                     format_double(row.g2_mass)});
        ctx.finish();
        return;
    }

    // fig4
    const AnnularGeometry geom = build_annulus(opt.inner, opt.outer, opt.bin_width);
    const DetectorModel<double> det = make_detector(opt);
    const std::vector<double> grid = parse_grid(
        opt.mu_grid.empty() ? "0,0.5,1,2,3,4,5,6,8,10,12,16,20,25,30"
                            : opt.mu_grid);
    const long long frames = opt.frames < 0 ? 2000 : opt.frames;
    const LoadSweep sweep =
        replicate_fig4(geom, det, grid, frames, opt.seed, opt.workers);

    CsvWriter vis(ctx.file("fig4_visibility.csv").string());
    for (const auto& line : ctx.csv_comments(
             {"frames per point = " + std::to_string(frames),
              "columns: mu = mean pairs per frame; mean_events = measured "
              "detected events per frame on the array; visibility = "
              "(peak - background)/(peak + background) of the "
              "multiplicity-normalized angular correlation; peak_value and "
              "background_level are that curve's opposed-bin value and "
              "off-peak mean (events per bin pair)"}))
        vis.comment(line);
    vis.header({"mu", "mean_events", "visibility", "peak_value",
                "background_level"});
    for (const auto& point : sweep.points)
        vis.row({point.mu, point.mean_events, point.visibility,
                 point.peak_value, point.background_level});

    CsvWriter curves(ctx.file("fig4_curves.csv").string());
    for (const auto& line : ctx.csv_comments(
             {"raw reduced coincidence counts per angular-bin difference; "
              "one row per mu, columns d<k> = counts at delta_bin k (" +
              format_double(geom.bin_width_deg()) + " deg per bin)"}))
        curves.comment(line);
    std::vector<std::string> names{"mu"};
    for (int b = 0; b < geom.n_bins(); ++b)
        names.push_back("d" + std::to_string(b));
    curves.header(names);
    for (Eigen::Index r = 0; r < sweep.curves.rows(); ++r) {
        std::vector<double> row{grid[std::size_t(r)]};
        for (Eigen::Index c = 0; c < sweep.curves.cols(); ++c)
            row.push_back(sweep.curves(r, c));
        curves.row(row);
    }
    ctx.manifest.emplace_back("frames_per_point", std::to_string(frames));
    ctx.finish();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photon-pair coincidence analysis: analytic correlation "
                 "model and Monte Carlo detector-array simulator"};
    app.option_defaults()->always_capture_default();
    Options opt;

    app.set_config("--config", "", "read options from an INI config file");
    app.config_formatter(std::make_shared<SectionedConfig>());

    app.add_option("--seed", opt.seed, "random seed (64-bit)");
    app.add_option("--frames", opt.frames,
                   "frames to simulate (-1 = command default)");
    app.add_option("--out", opt.out_dir, "output directory");
    app.add_flag("--tagging", opt.tagging,
                 "record ground-truth contribution tags");
    app.add_option("--array-mode", opt.array_mode,
                   "detector layout: dual | single")
        ->check(CLI::IsMember({"dual", "single"}));
    app.add_option("--workers", opt.workers,
                   "worker threads (0 = hardware default; PAIRCORR_THREADS caps)");
    app.add_option("--dump", opt.dump_path,
                   "write a binary frame dump to this path (forces 1 worker)");

    app.add_option("--state.kind", opt.state_kind,
                   "two-photon state: example | annulus | matrix")
        ->check(CLI::IsMember({"example", "annulus", "matrix"}));
    app.add_option("--state.dimension", opt.dimension,
                   "mode count D of the example state")
        ->check(CLI::PositiveNumber);
    app.add_option("--state.correlation", opt.correlation,
                   "diagonal weight c of the example state (0..1)");
    app.add_option("--state.inner", opt.inner, "annulus inner radius (pixels)");
    app.add_option("--state.outer", opt.outer, "annulus outer radius (pixels)");
    app.add_option("--state.bin-width", opt.bin_width,
                   "annulus angular bin width (degrees)");
    app.add_option("--state.matrix", opt.matrix_path,
                   "CSV file with the joint probability matrix");

    app.add_option("--detector.p-d", opt.p_d, "detection efficiency (0..1)");
    app.add_option("--detector.p-n", opt.p_n,
                   "noise-event probability per pixel per frame");
    app.add_option("--detector.exposure", opt.exposure,
                   "exposure label resolved through the exposure table");
    app.add_option("--detector.exposure-table", opt.exposure_table,
                   "comma list of label=p_n pairs");

    app.add_option("--source.mu", opt.mu, "mean photon pairs per frame");

    app.add_option("--sweep.mu", opt.mu_grid,
                   "mu grid: comma list or lo:hi:n[:log] (empty = default)");
    app.add_option("--sweep.p-n", opt.p_n_list,
                   "comma list of noise levels for fig3 curves");

    CLI::App* analytic = app.add_subcommand(
        "analytic", "sweep the analytic correlation model over mu");
    CLI::App* mc = app.add_subcommand(
        "mc", "run the Monte Carlo detector-array simulation");
    CLI::App* replicate = app.add_subcommand(
        "replicate", "rebuild a reference figure dataset");
    std::string figure;
    replicate->add_option("figure", figure, "which dataset: fig3 | fig4")
        ->required()
        ->configurable(false)
        ->check(CLI::IsMember({"fig3", "fig4"}));
    CLI::App* dump_config = app.add_subcommand(
        "dump-config", "print the resolved configuration and exit");
    for (CLI::App* sub : {analytic, mc, replicate, dump_config})
        sub->fallthrough(true);
    app.require_subcommand(0, 1);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        const std::string resolved = app.config_to_str(true, false);
        if (dump_config->parsed()) {
            std::fputs(app.config_to_str(true, true).c_str(), stdout);
            return 0;
        }
        if (analytic->parsed()) {
            cmd_analytic(opt, resolved);
        } else if (mc->parsed()) {
            cmd_mc(opt, resolved);
        } else if (replicate->parsed()) {
            cmd_replicate(figure, opt, resolved);
        } else {
            std::fputs(app.help().c_str(), stderr);
            std::fputs("error: expected a command\n", stderr);
            return 2;
        }
    } catch (const io_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return 4;
    } catch (const model_error& e) {
        std::fprintf(stderr, "model error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
    return 0;
}
