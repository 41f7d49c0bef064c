// unmix: command-line front end.
//
//   unmix unmix      --endmembers M.csv --input y.csv|cube --algorithm nsgm --output dir
//   unmix benchmark  --spec experiment.json --output dir
//   unmix spectra    --output M.csv
//   unmix synth-cube --output cube.f64 --width 16 --height 16 --snr 30
//
// Exit status: 0 success, 1 input or configuration error, 2 numerical failure.

#include <cmath>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "unmix/experiments.hpp"
#include "unmix/io.hpp"
#include "unmix/manifest.hpp"
#include "unmix/solvers.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;

// Input problems detected by the CLI itself.
struct UsageError : unmix::Error {
    using unmix::Error::Error;
};

struct UnmixOptions {
    std::string endmembers;
    std::string input;
    std::string algorithm = "nsgm";
    std::string output;
    std::optional<double> epsilon;
    std::optional<double> delta;
    std::optional<double> exponent_n;
    std::optional<double> tol;
    std::optional<int> max_iters;
    std::uint64_t seed = 0;
    std::string init = "uniform";
};

struct BenchmarkOptions {
    std::string spec;
    std::string output;
};

struct SpectraOptions {
    std::string output;
    int bands = 224;
    int random = 0;
    std::uint64_t seed = 0;
};

struct SynthCubeOptions {
    std::string output;
    std::string endmembers;
    int width = 16;
    int height = 16;
    std::string snr = "30";
    std::uint64_t seed = 0;
    std::string dtype = "f64";
};

std::vector<std::string> endmember_names(const unmix::CsvMatrix& csv) {
    if (!csv.header.empty()) return csv.header;
    std::vector<std::string> names;
    for (unmix::Index r = 0; r < csv.values.cols(); ++r) names.push_back("em" + std::to_string(r + 1));
    return names;
}

double parse_snr(const std::string& text) {
    if (text == "inf" || text == "+inf") return unmix::kNoiseFree;
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw UsageError("--snr must be a number or 'inf', got '" + text + "'");
}

void prepare_output_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw UsageError("cannot create output directory '" + dir.string() + "'");
}

unmix::SolverConfig solver_config(const UnmixOptions& o) {
    unmix::SolverConfig c;
    c.algorithm = unmix::parse_algorithm(o.algorithm);
    c.epsilon = o.epsilon;
    if (o.delta) c.delta = *o.delta;
    if (o.exponent_n) c.exponent_n = *o.exponent_n;
    if (o.tol) c.tol_kkt = *o.tol;
    if (o.max_iters) c.max_iters = *o.max_iters;
    c.validate();
    return c;
}

void write_manifest(const fs::path& dir, unmix::RunManifest manifest) {
    manifest.finished_at = unmix::utc_timestamp();
    unmix::write_file(dir / unmix::kManifestFileName, manifest.to_json());
}

int run_unmix(const UnmixOptions& o) {
    unmix::RunManifest manifest;
    manifest.command = "unmix";
    manifest.version = std::string(unmix::library_version());
    manifest.started_at = unmix::utc_timestamp();
    manifest.seed = o.seed;

    const unmix::SolverConfig config = solver_config(o);
    if (o.init != "uniform" && o.init != "random") throw UsageError("--init must be 'uniform' or 'random'");
    const unmix::CsvMatrix csv = unmix::read_csv_matrix(o.endmembers);
    const unmix::EndmemberMatrix m = [&] {
        try {
            return unmix::EndmemberMatrix(csv.values);
        } catch (const unmix::Error& e) {
            throw unmix::ParseError(o.endmembers, 0, 0, e.what());
        }
    }();
    const std::vector<std::string> names = endmember_names(csv);
    const fs::path out_dir = o.output;

    json cfg = {{"solver", json::parse(unmix::solver_config_json(config))},
                {"endmembers", o.endmembers},
                {"input", o.input},
                {"init", o.init}};
    manifest.config = cfg.dump();
    manifest.input_digests[o.endmembers] = unmix::file_sha256(o.endmembers);

    if (unmix::looks_like_cube(o.input)) {
        const unmix::CubeFile cube = unmix::read_cube(o.input);
        const fs::path payload = fs::path(o.input).extension() == ".json"
                                     ? fs::path(o.input).replace_extension()
                                     : fs::path(o.input);
        manifest.input_digests[payload.string()] = unmix::file_sha256(payload);
        manifest.input_digests[unmix::cube_sidecar_path(payload).string()] =
            unmix::file_sha256(unmix::cube_sidecar_path(payload));
        if (o.init != "uniform") throw UsageError("cubes are always unmixed from the uniform start");
        prepare_output_dir(out_dir);
        const unmix::AbundanceMaps maps = unmix::unmix_cube(cube.cube, m, config);
        unmix::write_file(out_dir / "abundances.csv", unmix::format_map_csv(maps, names));
        manifest.outputs.push_back("abundances.csv");
        for (unmix::Index r = 0; r < maps.endmembers; ++r) {
            const std::string file = "map_" + std::to_string(r + 1) + "_" + names[r] + ".pgm";
            unmix::write_pgm(out_dir / file, maps, r);
            manifest.outputs.push_back(file);
        }
        write_manifest(out_dir, manifest);
        if (maps.failures > 0)
            std::cerr << "warning: " << maps.failures << " pixel(s) failed and are written as 0 / nan\n";
        if (maps.unconverged > 0)
            std::cerr << "warning: " << maps.unconverged << " pixel(s) stopped at the iteration limit\n";
        return kExitOk;
    }

    const std::vector<unmix::Pixel> pixels = unmix::read_pixel_csv(o.input, m.bands());
    manifest.input_digests[o.input] = unmix::file_sha256(o.input);
    prepare_output_dir(out_dir);

    std::vector<unmix::Vector> estimates;
    std::vector<unmix::SolverTrace> traces;
    int unconverged = 0;
    for (std::size_t p = 0; p < pixels.size(); ++p) {
        const unmix::Vector init =
            o.init == "uniform"
                ? unmix::AbundanceVector::uniform(m.endmembers()).values()
                : unmix::random_simplex_point(m.endmembers(), unmix::derive_seed(o.seed, p)).values();
        unmix::Solution sol = unmix::solve(pixels[p], m, init, config);
        if (sol.trace.status == unmix::SolverStatus::max_iters) ++unconverged;
        estimates.push_back(std::move(sol.abundances));
        traces.push_back(std::move(sol.trace));
    }
    unmix::write_file(out_dir / "abundances.csv", unmix::format_abundance_csv(estimates, names));
    manifest.outputs.push_back("abundances.csv");
    if (traces.size() == 1) {
        unmix::write_file(out_dir / "trace.csv", unmix::format_trace_csv(traces.front()));
        manifest.outputs.push_back("trace.csv");
    }
    write_manifest(out_dir, manifest);
    if (unconverged > 0) {
        std::cerr << "error: " << unconverged << " of " << pixels.size()
                  << " pixel(s) did not converge within " << config.max_iters << " iterations\n";
        return kExitNumerical;
    }
    return kExitOk;
}

int run_benchmark(const BenchmarkOptions& o) {
    unmix::RunManifest manifest;
    manifest.command = "benchmark";
    manifest.version = std::string(unmix::library_version());
    manifest.started_at = unmix::utc_timestamp();

    const unmix::ExperimentDocument doc = unmix::read_experiment_spec(o.spec);
    manifest.seed = doc.spec.seed;
    manifest.config = doc.canonical_json;
    manifest.input_digests[o.spec] = unmix::file_sha256(o.spec);
    for (const fs::path& input : doc.inputs) manifest.input_digests[input.string()] = unmix::file_sha256(input);

    const fs::path out_dir = o.output;
    prepare_output_dir(out_dir);
    const unmix::MonteCarloReport report = unmix::run_monte_carlo(doc.spec);
    unmix::write_file(out_dir / "report.csv", unmix::format_report_csv(report));
    unmix::write_file(out_dir / "report.json", unmix::format_report_json(report));
    manifest.outputs = {"report.csv", "report.json"};
    write_manifest(out_dir, manifest);
    return kExitOk;
}

int run_spectra(const SpectraOptions& o) {
    if (o.random > 0) {
        const unmix::EndmemberMatrix m = unmix::smooth_random_spectra(o.bands, o.random, o.seed);
        std::vector<std::string> names;
        for (int r = 0; r < o.random; ++r) names.push_back("em" + std::to_string(r + 1));
        unmix::write_file(o.output, unmix::format_csv_matrix(m.data(), names));
    } else {
        const unmix::EndmemberMatrix m = unmix::substitute_library_spectra(o.bands);
        unmix::write_file(o.output, unmix::format_csv_matrix(m.data(), unmix::substitute_library_names()));
    }
    return kExitOk;
}

int run_synth_cube(const SynthCubeOptions& o) {
    std::vector<std::string> names = unmix::substitute_library_names();
    std::optional<unmix::EndmemberMatrix> m;
    if (o.endmembers.empty()) {
        m = unmix::substitute_library_spectra();
    } else {
        const unmix::CsvMatrix csv = unmix::read_csv_matrix(o.endmembers);
        m = unmix::EndmemberMatrix(csv.values);
        names = endmember_names(csv);
    }
    if (o.dtype != "f32" && o.dtype != "f64") throw UsageError("--dtype must be 'f32' or 'f64'");
    const unmix::SyntheticCube synth = unmix::synthesize_cube(*m, o.width, o.height, parse_snr(o.snr), o.seed);
    unmix::write_cube(o.output, synth.cube, o.dtype == "f32" ? unmix::SampleType::f32 : unmix::SampleType::f64);
    unmix::write_file(o.output + ".truth.csv", unmix::format_map_csv(synth.truth, names));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scaled-gradient spectral unmixing"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(unmix::library_version()));

    UnmixOptions u;
    auto* unmix_cmd = app.add_subcommand("unmix", "Unmix a pixel CSV or an image cube");
    unmix_cmd->add_option("--endmembers", u.endmembers, "Endmember CSV, L rows by R columns")->required();
    unmix_cmd->add_option("--input", u.input, "Pixel CSV (one pixel per column) or cube payload/sidecar")->required();
    unmix_cmd->add_option("--algorithm", u.algorithm, "nsgm, nsgm-fixed, sgm, isra, fcls or expmult")
        ->capture_default_str();
    unmix_cmd->add_option("--output", u.output, "Output directory")->required();
    unmix_cmd->add_option("--epsilon", u.epsilon, "Split offset (default: adaptive)");
    unmix_cmd->add_option("--delta", u.delta, "FCLS penalty weight");
    unmix_cmd->add_option("--exponent-n", u.exponent_n, "Exponent of the multiplicative variant");
    unmix_cmd->add_option("--tol", u.tol, "KKT tolerance");
    unmix_cmd->add_option("--max-iters", u.max_iters, "Iteration limit");
    unmix_cmd->add_option("--seed", u.seed, "Seed for --init random");
    unmix_cmd->add_option("--init", u.init, "Starting point for pixel CSVs: uniform or random")
        ->capture_default_str();

    BenchmarkOptions b;
    auto* bench_cmd = app.add_subcommand("benchmark", "Run a Monte Carlo experiment spec");
    bench_cmd->add_option("--spec", b.spec, "Experiment spec (JSON)")->required();
    bench_cmd->add_option("--output", b.output, "Output directory")->required();

    SpectraOptions s;
    auto* spectra_cmd = app.add_subcommand("spectra", "Write the substitute library or random spectra as CSV");
    spectra_cmd->add_option("--output", s.output, "CSV path")->required();
    spectra_cmd->add_option("--bands", s.bands, "Band count")->capture_default_str();
    spectra_cmd->add_option("--random", s.random, "Emit this many random smooth spectra instead");
    spectra_cmd->add_option("--seed", s.seed, "Seed for --random");

    SynthCubeOptions c;
    auto* cube_cmd = app.add_subcommand("synth-cube", "Write a synthetic cube with known abundances");
    cube_cmd->add_option("--output", c.output, "Payload path; sidecar and truth CSV are written beside it")
        ->required();
    cube_cmd->add_option("--endmembers", c.endmembers, "Endmember CSV (default: substitute library)");
    cube_cmd->add_option("--width", c.width)->capture_default_str();
    cube_cmd->add_option("--height", c.height)->capture_default_str();
    cube_cmd->add_option("--snr", c.snr, "SNR in dB, or inf")->capture_default_str();
    cube_cmd->add_option("--seed", c.seed);
    cube_cmd->add_option("--dtype", c.dtype, "f32 or f64")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInput;
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e) == 0 ? kExitOk : kExitInput;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*unmix_cmd) return run_unmix(u);
        if (*bench_cmd) return run_benchmark(b);
        if (*spectra_cmd) return run_spectra(s);
        if (*cube_cmd) return run_synth_cube(c);
    } catch (const unmix::SolverError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const unmix::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    }
    return kExitInput;
}
