#include "unmix/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <random>
#include <string>
#include <thread>

namespace unmix {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream tags for the two draws made per Monte Carlo run.
constexpr std::uint64_t kNoiseStream = 0;
constexpr std::uint64_t kInitStream = 1;

struct RunOutcome {
    bool failed = true;
    Vector estimate;
    double cost = 0.0;
    int iterations = 0;
    SolverStatus status = SolverStatus::max_iters;
};

CellStats summarize(const std::vector<RunOutcome>& runs, Index components) {
    CellStats cell;
    cell.mean = Vector::Zero(components);
    cell.variance = Vector::Zero(components);
    for (const RunOutcome& run : runs) {
        if (run.failed) {
            ++cell.failures;
            continue;
        }
        ++cell.successes;
        cell.estimates.push_back(run.estimate);
        cell.mean += run.estimate;
        cell.mean_cost += run.cost;
        cell.mean_iterations += run.iterations;
        cell.mean_sum_violation += std::abs(run.estimate.sum() - 1.0);
        if (run.status == SolverStatus::max_iters) ++cell.max_iter_runs;
    }
    if (cell.successes == 0) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        cell.mean.setConstant(nan);
        cell.variance.setConstant(nan);
        cell.mean_cost = cell.mean_iterations = cell.mean_sum_violation = nan;
        return cell;
    }
    const double n = cell.successes;
    cell.mean /= n;
    cell.mean_cost /= n;
    cell.mean_iterations /= n;
    cell.mean_sum_violation /= n;
    if (cell.successes > 1) {
        for (const Vector& estimate : cell.estimates)
            cell.variance.array() += (estimate - cell.mean).array().square();
        cell.variance /= n - 1.0;
    }
    return cell;
}

}  // namespace

// Random streams -----------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                          std::uint64_t c) {
    std::uint64_t h = splitmix64(master);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    return splitmix64(h ^ c);
}

AbundanceVector random_simplex_point(Index size, std::uint64_t seed) {
    if (size < 1) throw DomainError("simplex dimension must be >= 1");
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> draw(1.0);
    Vector w(size);
    for (Index i = 0; i < size; ++i) {
        // Strictly positive so multiplicative solvers can move every component.
        do {
            w[i] = draw(rng);
        } while (!(w[i] > 0.0));
    }
    return AbundanceVector::normalized(w);
}

// Synthesis --------------------------------------------------------------

double noise_sigma_for_snr(const EndmemberMatrix& m, const AbundanceVector& alpha_true,
                           double snr_db) {
    if (alpha_true.size() != m.endmembers())
        throw DimensionError("true abundances", m.endmembers(), alpha_true.size());
    if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity())
        throw DomainError("SNR must be a number or +inf");
    const double signal = (m.data() * alpha_true.values()).squaredNorm();
    if (!(signal > 0.0)) throw DomainError("clean signal M a is zero; SNR is undefined");
    if (snr_db == kNoiseFree) return 0.0;
    return std::sqrt(signal / (static_cast<double>(m.bands()) * std::pow(10.0, snr_db / 10.0)));
}

SyntheticPixel synthesize_pixel(const EndmemberMatrix& m, const AbundanceVector& alpha_true,
                                double snr_db, std::uint64_t seed) {
    NoiseModel noise{noise_sigma_for_snr(m, alpha_true, snr_db), seed};
    noise.validate();
    Vector y = m.data() * alpha_true.values();
    if (noise.sigma > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, noise.sigma);
        for (Index b = 0; b < y.size(); ++b) y[b] += gauss(rng);
    }
    return {Pixel(std::move(y)), noise};
}

// Monte Carlo ------------------------------------------------------------

void ExperimentSpec::validate() const {
    if (alpha_true.size() != endmembers.endmembers())
        throw DimensionError("alpha_true", endmembers.endmembers(), alpha_true.size());
    if (snr_db.empty()) throw DomainError("snr_db grid is empty");
    for (double snr : snr_db)
        if (std::isnan(snr) || snr == -std::numeric_limits<double>::infinity())
            throw DomainError("snr_db entries must be numbers or +inf");
    if (runs < 1) throw DomainError("runs must be >= 1");
    if (solvers.empty()) throw DomainError("no solvers listed");
    for (std::size_t i = 0; i < solvers.size(); ++i) {
        if (solvers[i].name.empty()) throw DomainError("solver name is empty");
        for (std::size_t j = 0; j < i; ++j)
            if (solvers[j].name == solvers[i].name)
                throw DomainError("duplicate solver name '" + solvers[i].name + "'");
        solvers[i].config.validate();
    }
}

MonteCarloReport run_monte_carlo(const ExperimentSpec& spec, int threads) {
    spec.validate();
    const std::size_t n_solvers = spec.solvers.size();
    const std::size_t n_snr = spec.snr_db.size();
    const std::size_t n_runs = static_cast<std::size_t>(spec.runs);
    const Index components = spec.endmembers.endmembers();

    // outcomes[solver][snr][run]; each task writes only its own slots.
    std::vector<std::vector<std::vector<RunOutcome>>> outcomes(
        n_solvers, std::vector<std::vector<RunOutcome>>(n_snr, std::vector<RunOutcome>(n_runs)));

    parallel_for(n_snr * n_runs, threads, [&](std::size_t task) {
        const std::size_t k = task / n_runs;
        const std::size_t j = task % n_runs;
        const SyntheticPixel sample =
            synthesize_pixel(spec.endmembers, spec.alpha_true, spec.snr_db[k],
                             derive_seed(spec.seed, k, j, kNoiseStream));
        const AbundanceVector init =
            spec.init == InitPolicy::uniform
                ? AbundanceVector::uniform(components)
                : random_simplex_point(components, derive_seed(spec.seed, k, j, kInitStream));
        for (std::size_t s = 0; s < n_solvers; ++s) {
            RunOutcome& out = outcomes[s][k][j];
            try {
                Solution sol = solve(sample.pixel, spec.endmembers, init.values(),
                                     spec.solvers[s].config);
                out.failed = !sol.abundances.allFinite();
                out.cost = sol.trace.records.back().cost;
                out.iterations = sol.trace.iterations();
                out.status = sol.trace.status;
                out.estimate = std::move(sol.abundances);
            } catch (const Error&) {
                out.failed = true;
            }
        }
    });

    MonteCarloReport report;
    report.snr_db = spec.snr_db;
    report.components = components;
    report.runs = spec.runs;
    for (std::size_t s = 0; s < n_solvers; ++s) {
        report.solvers.push_back(spec.solvers[s].name);
        std::vector<CellStats> row;
        for (std::size_t k = 0; k < n_snr; ++k) row.push_back(summarize(outcomes[s][k], components));
        report.cells.push_back(std::move(row));
    }
    return report;
}

ViolationTable compare_constraint_violation(const ExperimentSpec& spec, int threads) {
    bool has_nsgm = false;
    bool has_reference = false;
    for (const SolverEntry& entry : spec.solvers) {
        const Algorithm a = entry.config.algorithm;
        has_nsgm |= a == Algorithm::nsgm || a == Algorithm::nsgm_fixed_step;
        has_reference |= a == Algorithm::sgm || a == Algorithm::fcls_penalized;
    }
    if (!has_nsgm || !has_reference)
        throw DomainError("constraint comparison needs NSGM and one of SGM or FCLS");

    const MonteCarloReport report = run_monte_carlo(spec, threads);
    ViolationTable table;
    table.solvers = report.solvers;
    table.snr_db = report.snr_db;
    for (const auto& row : report.cells) {
        std::vector<double> values;
        for (const CellStats& cell : row) values.push_back(cell.mean_sum_violation);
        table.mean_violation.push_back(std::move(values));
    }
    return table;
}

// Cubes ------------------------------------------------------------------

void Cube::validate() const {
    if (width < 1 || height < 1 || bands < 1) throw DomainError("cube dimensions must be >= 1");
    const auto expected = static_cast<std::size_t>(width * height * bands);
    if (data.size() != expected)
        throw DimensionError("cube payload", static_cast<std::ptrdiff_t>(expected),
                             static_cast<std::ptrdiff_t>(data.size()));
}

Vector Cube::pixel(Index x, Index y) const {
    if (x < 0 || x >= width || y < 0 || y >= height) throw DomainError("pixel outside the cube");
    Vector v(bands);
    const Index plane = width * height;
    for (Index b = 0; b < bands; ++b) v[b] = data[static_cast<std::size_t>(b * plane + y * width + x)];
    return v;
}

Vector AbundanceMaps::pixel(Index x, Index y) const {
    if (x < 0 || x >= width || y < 0 || y >= height) throw DomainError("pixel outside the maps");
    Vector v(endmembers);
    for (Index r = 0; r < endmembers; ++r) v[r] = at(r, x, y);
    return v;
}

AbundanceMaps unmix_cube(const Cube& cube, const EndmemberMatrix& m, const SolverConfig& config,
                         int threads) {
    cube.validate();
    config.validate();
    if (cube.bands != m.bands()) throw DimensionError("cube bands", m.bands(), cube.bands);

    AbundanceMaps maps;
    maps.width = cube.width;
    maps.height = cube.height;
    maps.endmembers = m.endmembers();
    const Index plane = cube.width * cube.height;
    maps.data.assign(static_cast<std::size_t>(plane * maps.endmembers),
                     std::numeric_limits<double>::quiet_NaN());

    const Vector init = AbundanceVector::uniform(m.endmembers()).values();
    std::atomic<int> failures{0};
    std::atomic<int> unconverged{0};
    parallel_for(static_cast<std::size_t>(plane), threads, [&](std::size_t p) {
        const Index x = static_cast<Index>(p) % cube.width;
        const Index y = static_cast<Index>(p) / cube.width;
        try {
            const Solution sol = solve(Pixel(cube.pixel(x, y)), m, init, config);
            if (!sol.abundances.allFinite()) {
                ++failures;
                return;
            }
            if (sol.trace.status == SolverStatus::max_iters) ++unconverged;
            for (Index r = 0; r < maps.endmembers; ++r)
                maps.data[static_cast<std::size_t>(r * plane) + p] = sol.abundances[r];
        } catch (const Error&) {
            ++failures;
        }
    });
    maps.failures = failures;
    maps.unconverged = unconverged;
    if (static_cast<double>(maps.failures) > kMaxFailedPixelFraction * static_cast<double>(plane))
        throw SolverError(std::to_string(maps.failures) + " of " + std::to_string(plane) +
                              " pixels failed to unmix",
                          Vector());
    return maps;
}

SyntheticCube synthesize_cube(const EndmemberMatrix& m, Index width, Index height, double snr_db,
                              std::uint64_t seed) {
    if (width < 1 || height < 1) throw DomainError("cube dimensions must be >= 1");
    SyntheticCube out;
    Cube& cube = out.cube;
    AbundanceMaps& truth = out.truth;
    cube.width = truth.width = width;
    cube.height = truth.height = height;
    cube.bands = m.bands();
    truth.endmembers = m.endmembers();
    const Index plane = width * height;
    cube.data.resize(static_cast<std::size_t>(plane * cube.bands));
    truth.data.resize(static_cast<std::size_t>(plane * truth.endmembers));
    for (Index p = 0; p < plane; ++p) {
        const auto pu = static_cast<std::uint64_t>(p);
        const AbundanceVector alpha = random_simplex_point(m.endmembers(), derive_seed(seed, pu, kInitStream));
        const SyntheticPixel sample = synthesize_pixel(m, alpha, snr_db, derive_seed(seed, pu, kNoiseStream));
        for (Index r = 0; r < truth.endmembers; ++r)
            truth.data[static_cast<std::size_t>(r * plane + p)] = alpha[r];
        for (Index b = 0; b < cube.bands; ++b)
            cube.data[static_cast<std::size_t>(b * plane + p)] = sample.pixel.values()[b];
    }
    return out;
}

// Threads ----------------------------------------------------------------

int configured_threads() {
    if (const char* env = std::getenv("UNMIX_THREADS"); env != nullptr && *env != '\0') {
        char* end = nullptr;
        const long value = std::strtol(env, &end, 10);
        if (*end != '\0' || value < 1 || value > 4096)
            throw DomainError(std::string("UNMIX_THREADS must be a positive integer, got '") + env +
                              "'");
        return static_cast<int>(value);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
    if (threads < 0) throw DomainError("thread count must be >= 0");
    const int workers = static_cast<int>(
        std::min<std::size_t>(count, static_cast<std::size_t>(threads == 0 ? configured_threads() : threads)));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < count;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                next = count;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace unmix
