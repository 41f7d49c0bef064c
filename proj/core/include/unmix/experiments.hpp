#pragma once

// Synthetic mixtures, Monte Carlo comparison of solvers, and pixel-by-pixel
// unmixing of image cubes.

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "unmix/model.hpp"
#include "unmix/solvers.hpp"

namespace unmix {

// Spectra ----------------------------------------------------------------

/// Three smooth reflectance spectra on `bands` channels spanning 0.4-2.5 um,
/// shaped like construction concrete, green grass and micaceous loam
/// (columns in that order). Deterministic; ships as data/substitute_endmembers.csv.
EndmemberMatrix substitute_library_spectra(Index bands = 224);

std::vector<std::string> substitute_library_names();

/// `count` random smooth spectra, each a baseline plus Gaussian bumps, with
/// reflectances clipped to [0.01, 1].
EndmemberMatrix smooth_random_spectra(Index bands, Index count, std::uint64_t seed);

// Random streams -----------------------------------------------------------

/// Seed of an independent stream identified by (master, a, b, c).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                          std::uint64_t c = 0);

/// Uniform draw on the open simplex (normalized exponentials).
AbundanceVector random_simplex_point(Index size, std::uint64_t seed);

// Synthesis --------------------------------------------------------------

/// Noise-free sentinel for synthesize_pixel.
inline constexpr double kNoiseFree = std::numeric_limits<double>::infinity();

struct SyntheticPixel {
    Pixel pixel;
    NoiseModel noise;
};

/// y = M a + e with e ~ N(0, sigma^2 I) and 10 log10(||M a||^2 / (L sigma^2)) = snr_db.
SyntheticPixel synthesize_pixel(const EndmemberMatrix& m, const AbundanceVector& alpha_true,
                                double snr_db, std::uint64_t seed);

double noise_sigma_for_snr(const EndmemberMatrix& m, const AbundanceVector& alpha_true,
                           double snr_db);

// Monte Carlo ------------------------------------------------------------

enum class InitPolicy { uniform, random_simplex };

struct SolverEntry {
    std::string name;
    SolverConfig config;
};

struct ExperimentSpec {
    EndmemberMatrix endmembers;
    AbundanceVector alpha_true;
    std::vector<double> snr_db;
    int runs = 100;
    std::vector<SolverEntry> solvers;
    std::uint64_t seed = 0;
    InitPolicy init = InitPolicy::random_simplex;

    void validate() const;
};

struct CellStats {
    Vector mean;
    Vector variance;  // unbiased; zero for a single run
    double mean_cost = 0.0;
    double mean_iterations = 0.0;
    double mean_sum_violation = 0.0;
    int successes = 0;
    int failures = 0;
    int max_iter_runs = 0;
    std::vector<Vector> estimates;  // successful runs, in run order
};

struct MonteCarloReport {
    std::vector<std::string> solvers;
    std::vector<double> snr_db;
    Index components = 0;
    int runs = 0;
    std::vector<std::vector<CellStats>> cells;  // [solver][snr]

    const CellStats& cell(std::size_t solver, std::size_t snr) const {
        return cells.at(solver).at(snr);
    }
};

/// Every (snr, run) pair draws its noise and starting point from its own
/// stream, shared by all solvers so that they are compared on identical data.
/// Results do not depend on `threads`.
MonteCarloReport run_monte_carlo(const ExperimentSpec& spec, int threads = 0);

struct ViolationTable {
    std::vector<std::string> solvers;
    std::vector<double> snr_db;
    std::vector<std::vector<double>> mean_violation;  // [solver][snr] of mean |sum(a) - 1|
};

/// Requires NSGM and at least one of SGM or FCLS among the solvers.
ViolationTable compare_constraint_violation(const ExperimentSpec& spec, int threads = 0);

// Cubes ------------------------------------------------------------------

/// Band-sequential cube: value(x, y, b) = data[b * width * height + y * width + x].
struct Cube {
    Index width = 0;
    Index height = 0;
    Index bands = 0;
    std::vector<double> data;

    Vector pixel(Index x, Index y) const;
    void validate() const;
};

/// Per-endmember abundance maps, stored map-major like Cube. Pixels whose
/// solve failed hold NaN.
struct AbundanceMaps {
    Index width = 0;
    Index height = 0;
    Index endmembers = 0;
    std::vector<double> data;
    int failures = 0;
    int unconverged = 0;

    double at(Index r, Index x, Index y) const {
        return data[static_cast<std::size_t>((r * height + y) * width + x)];
    }
    Vector pixel(Index x, Index y) const;
};

/// Largest tolerated share of failed pixels before unmix_cube aborts.
inline constexpr double kMaxFailedPixelFraction = 0.01;

/// Solves every pixel independently from the uniform starting point.
AbundanceMaps unmix_cube(const Cube& cube, const EndmemberMatrix& m, const SolverConfig& config,
                         int threads = 0);

/// Cube whose pixels are M a(x, y) plus noise at `snr_db`, with a(x, y) drawn
/// uniformly on the simplex. Ground truth is returned alongside.
struct SyntheticCube {
    Cube cube;
    AbundanceMaps truth;
};
SyntheticCube synthesize_cube(const EndmemberMatrix& m, Index width, Index height, double snr_db,
                              std::uint64_t seed);

// Threads ----------------------------------------------------------------

/// UNMIX_THREADS if set (positive integer), otherwise the hardware concurrency.
int configured_threads();

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = configured_threads()).
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace unmix
