#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

// End-to-end checks against the installed command-line binary: exit codes,
// file layout, config round-tripping and rerun determinism.

namespace fs = std::filesystem;

namespace {

const std::string cli = PAIRCORR_CLI_PATH;

int run(const std::string& args) {
    const std::string cmd = cli + " " + args;
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

int run_quiet(const std::string& args) {
    return run(args + " > /dev/null 2>&1");
}

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "paircorr_cli_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(bool(in));
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::vector<std::string> data_lines(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(bool(in));
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line[0] != '#') lines.push_back(line);
    return lines;
}

std::vector<double> split_csv(const std::string& line) {
    std::vector<double> cells;
    std::istringstream in(line);
    std::string cell;
    while (std::getline(in, cell, ',')) cells.push_back(std::stod(cell));
    return cells;
}

}  // namespace

TEST_CASE("exit codes: help, missing command, usage errors") {
    CHECK(run_quiet("--help") == 0);
    CHECK(run_quiet("") == 2);
    CHECK(run_quiet("--nonsense-flag") == 2);
    CHECK(run_quiet("replicate fig9") == 2);
    CHECK(run_quiet("mc --array-mode diagonal") == 2);
}

TEST_CASE("analytic: sweep and decomposition files with header-first CSVs") {
    const fs::path dir = scratch("analytic");
    CHECK(run_quiet("analytic --state.kind example --state.dimension 10 "
                    "--sweep.mu 0.5,1,2 --out " + dir.string()) == 0);

    const auto rows = data_lines(dir / "analytic_sweep.csv");
    REQUIRE(rows.size() == 4);  // header + one row per grid point
    CHECK(rows[0] == "mu,detected_events,visibility_exact,"
                     "visibility_quadratic,mu_opt_approx,mu_opt_exact");
    for (std::size_t k = 1; k < rows.size(); ++k)
        CHECK(split_csv(rows[k]).size() == 6);

    for (int k = 0; k < 3; ++k) {
        const auto dec = data_lines(dir / ("decomposition_" + std::to_string(k) + ".csv"));
        REQUIRE(dec.size() == 5);
        CHECK(dec[0] == "term,g2_peak,background_peak");
        CHECK(dec[1].rfind("pair,", 0) == 0);
        CHECK(dec[4].rfind("noise_noise,", 0) == 0);
    }

    // manifest names the command and every written file exists
    const std::string manifest = slurp(dir / "manifest.txt");
    CHECK(manifest.find("command = analytic") != std::string::npos);
    const auto pos = manifest.find("outputs = ");
    REQUIRE(pos != std::string::npos);
    std::string outputs = manifest.substr(pos + 10);
    outputs = outputs.substr(0, outputs.find('\n'));
    std::istringstream in(outputs);
    std::string name;
    int listed = 0;
    while (std::getline(in, name, ';')) {
        CHECK(fs::exists(dir / name));
        ++listed;
    }
    CHECK(listed == 4);  // sweep + 3 decompositions (manifest itself excluded)
}

TEST_CASE("dump-config round-trips byte-identically and accepts overrides") {
    const fs::path dir = scratch("config");
    const std::string flags =
        "--state.kind annulus --state.inner 24 --state.outer 28 "
        "--state.bin-width 2 --detector.p-d 0.5 --detector.p-n 0.0094 "
        "--seed 5 --array-mode single";
    const fs::path cfg1 = dir / "cfg1.ini", cfg2 = dir / "cfg2.ini",
                   cfg3 = dir / "cfg3.ini";

    CHECK(run("dump-config " + flags + " > " + cfg1.string()) == 0);
    CHECK(run("dump-config --config " + cfg1.string() + " > " + cfg2.string()) == 0);
    CHECK(slurp(cfg1) == slurp(cfg2));

    const std::string text = slurp(cfg1);
    CHECK(text.find("[state]") != std::string::npos);
    CHECK(text.find("[detector]") != std::string::npos);
    CHECK(text.find("kind=\"annulus\"") != std::string::npos);

    // a flag given next to --config wins over the file value
    CHECK(run("dump-config --config " + cfg1.string() +
              " --detector.p-n 0.5 > " + cfg3.string()) == 0);
    CHECK(slurp(cfg3).find("p-n=0.5") != std::string::npos);
    CHECK(slurp(cfg3).find("p-n=0.0094") == std::string::npos);

    // the dumped file drives a real command
    CHECK(run_quiet("analytic --config " + cfg1.string() + " --sweep.mu 1,2 "
                    "--out " + (dir / "run").string()) == 0);
}

TEST_CASE("mc: identical reruns are byte-identical; workers only affect comments") {
    const fs::path dir = scratch("determinism");
    const std::string base =
        "mc --state.kind example --state.dimension 10 --source.mu 0.5 "
        "--detector.p-d 0.7 --detector.p-n 0.01 --frames 300 ";
    const std::string cmd = base + "--seed 42 --workers 3 --out " + dir.string();

    CHECK(run_quiet(cmd) == 0);
    const std::string first = slurp(dir / "coincidences.csv");
    const std::string first_g2 = slurp(dir / "g2.csv");
    CHECK(run_quiet(cmd) == 0);
    CHECK(slurp(dir / "coincidences.csv") == first);
    CHECK(slurp(dir / "g2.csv") == first_g2);

    const fs::path dir1 = scratch("determinism_w1");
    CHECK(run_quiet(base + "--seed 42 --workers 1 --out " + dir1.string()) == 0);
    CHECK(data_lines(dir1 / "coincidences.csv") ==
          data_lines(dir / "coincidences.csv"));

    // different seed, different counts
    const fs::path dir2 = scratch("determinism_seed");
    CHECK(run_quiet(base + "--workers 3 --seed 43 --out " + dir2.string()) == 0);
    CHECK(data_lines(dir2 / "coincidences.csv") !=
          data_lines(dir / "coincidences.csv"));
}

TEST_CASE("mc: tagging splits counts; noise tags vanish at p_n = 0") {
    const fs::path dir = scratch("tagging");
    CHECK(run_quiet("mc --state.kind example --state.dimension 8 "
                    "--source.mu 0.4 --detector.p-d 0.8 --detector.p-n 0 "
                    "--frames 250 --seed 9 --tagging --out " + dir.string()) == 0);

    double pair_sum = 0;
    for (const auto& line : data_lines(dir / "tagged_pair.csv"))
        for (double v : split_csv(line)) pair_sum += v;
    CHECK(pair_sum > 0);

    for (const char* name : {"tagged_photon_noise.csv", "tagged_noise_noise.csv"})
        for (const auto& line : data_lines(dir / name))
            for (double v : split_csv(line)) CHECK(v == 0.0);
}

TEST_CASE("mc: annular run writes a 180-point reduced curve") {
    const fs::path dir = scratch("annulus");
    CHECK(run_quiet("mc --state.kind annulus --state.inner 24 --state.outer 28 "
                    "--state.bin-width 2 --array-mode single "
                    "--detector.p-d 0.5 --detector.p-n 0.0094 --source.mu 6 "
                    "--frames 120 --seed 3 --out " + dir.string()) == 0);

    const auto rows = data_lines(dir / "reduced.csv");
    REQUIRE(rows.size() == 181);
    CHECK(rows[0] == "delta_bin,delta_theta_deg,counts");
    double total = 0;
    for (std::size_t k = 1; k < rows.size(); ++k) {
        const auto cells = split_csv(rows[k]);
        REQUIRE(cells.size() == 3);
        CHECK(cells[0] == double(k - 1));
        CHECK(cells[1] == 2.0 * double(k - 1));
        total += cells[2];
    }
    CHECK(total > 0);
}

TEST_CASE("matrix input: unnormalized file is a model error (exit 3)") {
    const fs::path dir = scratch("matrix");
    {
        std::ofstream bad(dir / "bad.csv");
        bad << "# deliberately sums to 0.9\n0.4 0.3\n0.1 0.1\n";
    }
    const fs::path err = dir / "stderr.txt";
    CHECK(run("analytic --state.kind matrix --state.matrix " +
              (dir / "bad.csv").string() + " --out " + (dir / "o").string() +
              " > /dev/null 2> " + err.string()) == 3);
    CHECK(slurp(err).find("not normalized") != std::string::npos);

    {
        std::ofstream good(dir / "good.csv");
        good << "0.4 0.3\n0.1 0.2\n";
    }
    CHECK(run_quiet("analytic --state.kind matrix --state.matrix " +
                    (dir / "good.csv").string() + " --sweep.mu 1 --out " +
                    (dir / "o2").string()) == 0);
}

TEST_CASE("unwritable output directory is an io error (exit 4)") {
    CHECK(run_quiet("analytic --sweep.mu 1 --out /dev/null/sub") == 4);
}

TEST_CASE("replicate fig3: three CSVs with expected row counts") {
    const fs::path dir = scratch("fig3");
    CHECK(run_quiet("replicate fig3 --sweep.p-n 0.01,0.1 --sweep.mu 0.5,1,2 "
                    "--out " + dir.string()) == 0);
    CHECK(data_lines(dir / "fig3_visibility.csv").size() == 1 + 2 * 3);
    CHECK(data_lines(dir / "fig3_optima.csv").size() == 1 + 2);
    CHECK(data_lines(dir / "fig3_decomposition.csv").size() == 1 + 2 * 12);
}

TEST_CASE("replicate fig4: visibility table row per flux, curve per flux") {
    const fs::path dir = scratch("fig4");
    CHECK(run_quiet("replicate fig4 --sweep.mu 0,4 --frames 40 --seed 2 "
                    "--detector.p-n 0.0094 --out " + dir.string()) == 0);

    const auto vis = data_lines(dir / "fig4_visibility.csv");
    REQUIRE(vis.size() == 3);
    CHECK(vis[0] == "mu,mean_events,visibility,peak_value,background_level");
    CHECK(split_csv(vis[1])[0] == 0.0);
    CHECK(split_csv(vis[2])[0] == 4.0);

    const auto curves = data_lines(dir / "fig4_curves.csv");
    REQUIRE(curves.size() == 3);
    CHECK(split_csv(curves[1]).size() == 181);  // mu + 180 bins
    const std::string manifest = slurp(dir / "manifest.txt");
    CHECK(manifest.find("command = replicate fig4") != std::string::npos);
    CHECK(manifest.find("frames_per_point = 40") != std::string::npos);
}
