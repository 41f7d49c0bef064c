// Acceptance suite. Prints one PASS/FAIL line per criterion.
//
//   unmix_acceptance                 run every criterion
//   unmix_acceptance --criterion 3   run one
//
// Exit status is 0 only if every selected criterion passes.

#include <algorithm>
#include <array>
#include <cfloat>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "oracles/oracles.hpp"
#include "support/instances.hpp"
#include "unmix/experiments.hpp"
#include "unmix/io.hpp"
#include "unmix/line_search.hpp"
#include "unmix/model.hpp"
#include "unmix/solvers.hpp"

namespace fs = std::filesystem;
using namespace unmix;
using testing_support::Rng;

namespace {

// Tolerances and budgets, one block per criterion.
namespace tol {
constexpr double flux_sum = 1e-12;                 // 1
constexpr int flux_iterations = 1000;              // 1
constexpr int flux_instances = 50;                 // 1
constexpr double flux_seconds = 5.0;               // 1
constexpr double oracle_inf_norm = 1e-4;           // 3
constexpr double oracle_relative_cost = 1e-8;      // 3
constexpr double oracle_seconds = 30.0;            // 3
constexpr double noiseless_inf_norm = 1e-6;        // 4
constexpr double noiseless_seconds = 1.0;          // 4
constexpr double table_factor = 3.0;               // 5
constexpr double table_seconds = 120.0;            // 5
constexpr double agreement = 0.02;                 // 6
constexpr double nsgm_violation = 1e-12;           // 7
constexpr double acceleration_share = 0.8;         // 8
constexpr double isra_match = 1e-14;               // 8
constexpr double gradient_relative = 1e-5;         // 9
constexpr double step_rounding = 8.0 * DBL_EPSILON;  // 10, relative to max a
}  // namespace tol

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool non_increasing(const SolverTrace& trace) {
    for (std::size_t k = 1; k < trace.records.size(); ++k)
        if (trace.records[k].cost > trace.records[k - 1].cost) return false;
    return true;
}

SolverConfig config_for(Algorithm a) {
    SolverConfig c;
    c.algorithm = a;
    return c;
}

// 1 --------------------------------------------------------------------------
Outcome flux_exactness() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(101);
    SolverConfig config = config_for(Algorithm::nsgm);
    config.max_iters = 20;
    config.tol_kkt = 1e-300;
    config.tol_step = 1e-300;

    long checked = 0;
    int instances = 0;
    double worst_sum = 0.0;
    double most_negative = 0.0;
    while (instances < tol::flux_instances || checked < tol::flux_iterations) {
        const Index r = rng.integer(3, 6);
        const double snr = std::array<double, 3>{10.0, 20.0, kNoiseFree}[instances % 3];
        const auto inst = testing_support::random_instance(rng, 50, r, snr, instances % 2 == 1);
        const AbundanceVector init = random_simplex_point(r, rng.bits());
        const SimplexSolution sol = nsgm_solve(inst.y, inst.m, init, config);
        for (std::size_t k = 1; k < sol.trace.records.size(); ++k) {
            const Vector& a = sol.trace.records[k].iterate;
            worst_sum = std::max(worst_sum, std::abs(a.sum() - 1.0));
            most_negative = std::min(most_negative, a.minCoeff());
            ++checked;
        }
        ++instances;
    }
    const double elapsed = seconds_since(start);
    return {worst_sum <= tol::flux_sum && most_negative >= 0.0 && elapsed < tol::flux_seconds,
            std::to_string(checked) + " iterates over " + std::to_string(instances) +
                " instances, max |sum-1|=" + fmt(worst_sum) + ", min a=" + fmt(most_negative) +
                ", " + fmt(elapsed) + " s"};
}

// 2 --------------------------------------------------------------------------
Outcome monotone_descent() {
    Rng rng(202);
    int traces = 0;
    int violations = 0;
    const EndmemberMatrix library = substitute_library_spectra();
    const AbundanceVector table_alpha(Vector{{0.3, 0.6, 0.1}});
    for (int t = 0; t < 200; ++t) {
        const bool random_problem = t % 2 == 0;
        const double snr = std::array<double, 5>{-10.0, 0.0, 10.0, 20.0, kNoiseFree}[t % 5];
        std::optional<testing_support::Instance> inst;
        if (random_problem) {
            inst = testing_support::random_instance(rng, 50, rng.integer(3, 6), snr, t % 4 == 0);
        } else {
            const SyntheticPixel sample = synthesize_pixel(library, table_alpha, snr, rng.bits());
            inst = testing_support::Instance{library, table_alpha, sample.pixel};
        }
        const Index r = inst->m.endmembers();
        const AbundanceVector init = random_simplex_point(r, rng.bits());
        for (Algorithm a : {Algorithm::nsgm, Algorithm::sgm}) {
            try {
                const Solution sol = solve(inst->y, inst->m, init.values(), config_for(a));
                ++traces;
                if (!non_increasing(sol.trace)) ++violations;
            } catch (const DomainError&) {
                // SGM rejects data with a negative component of M^T y.
            }
        }
    }
    return {violations == 0 && traces > 300,
            std::to_string(traces) + " Armijo traces, " + std::to_string(violations) + " with a cost increase"};
}

// 3 --------------------------------------------------------------------------
Outcome oracle_equivalence() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(303);
    double worst_err = 0.0;
    double worst_rel = 0.0;
    int failures = 0;
    for (int t = 0; t < 100; ++t) {
        const Index r = rng.integer(3, 6);
        const double snr = std::array<double, 3>{10.0, 20.0, kNoiseFree}[t % 3];
        const auto inst = testing_support::random_instance(rng, 50, r, snr, t % 2 == 1);
        const SimplexSolution sol = nsgm_solve(inst.y, inst.m, AbundanceVector::uniform(r), config_for(Algorithm::nsgm));
        const oracle::QpSolution ref = oracle::simplex_qp(inst.m.data(), inst.y.values());

        const double err = (sol.abundances.values() - ref.alpha).cwiseAbs().maxCoeff();
        const double cost = least_squares_cost(inst.y, inst.m, sol.abundances.values());
        // Relative to J*, or to J(0) = ||y||^2 / 2 when the optimum fits exactly.
        const double scale = 0.5 * inst.y.values().squaredNorm();
        const double denom = ref.cost > 1e-10 * scale ? ref.cost : scale;
        const double rel = std::abs(cost - ref.cost) / denom;
        worst_err = std::max(worst_err, err);
        worst_rel = std::max(worst_rel, rel);
        if (err > tol::oracle_inf_norm || rel > tol::oracle_relative_cost) ++failures;
    }
    const double elapsed = seconds_since(start);
    return {failures == 0 && elapsed < tol::oracle_seconds,
            "worst inf-norm error " + fmt(worst_err) + ", worst relative cost gap " + fmt(worst_rel) +
                ", " + std::to_string(failures) + " of 100 outside tolerance, " + fmt(elapsed) + " s"};
}

// 4 --------------------------------------------------------------------------
Outcome noiseless_recovery() {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(404);
    double worst = 0.0;
    double worst_condition = 0.0;
    for (int t = 0; t < 20; ++t) {
        const Index r = rng.integer(3, 6);
        const auto inst = testing_support::random_instance(rng, 50, r, kNoiseFree, false);
        const double cond = oracle::lambda_max(inst.m.gram()) /
                            Eigen::SelfAdjointEigenSolver<Matrix>(inst.m.gram()).eigenvalues().minCoeff();
        worst_condition = std::max(worst_condition, cond);
        const SimplexSolution sol = nsgm_solve(inst.y, inst.m, AbundanceVector::uniform(r), config_for(Algorithm::nsgm));
        worst = std::max(worst, (sol.abundances.values() - inst.alpha_true.values()).cwiseAbs().maxCoeff());
    }
    const double elapsed = seconds_since(start);
    return {worst < tol::noiseless_inf_norm && elapsed < tol::noiseless_seconds,
            "20 interior instances (cond(M^T M) <= " + fmt(worst_condition) + "), worst inf-norm error " +
                fmt(worst) + ", " + fmt(elapsed) + " s"};
}

// 5 --------------------------------------------------------------------------
ExperimentSpec table_spec(std::vector<SolverEntry> solvers, std::vector<double> snr, std::uint64_t seed) {
    return ExperimentSpec{substitute_library_spectra(), AbundanceVector(Vector{{0.3, 0.6, 0.1}}),
                          std::move(snr), 100, std::move(solvers), seed, InitPolicy::random_simplex};
}

Outcome table_reproduction() {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<double> snr{-10.0, 0.0, 10.0, 20.0};
    const std::vector<double> reference{5.8e-2, 8.2e-3, 1.0e-3, 1.0e-4};
    const MonteCarloReport report =
        run_monte_carlo(table_spec({{"NSGM", config_for(Algorithm::nsgm)}}, snr, 20260101));
    bool pass = true;
    std::string detail = "Var(a1) vs reference:";
    for (std::size_t k = 0; k < snr.size(); ++k) {
        const CellStats& cell = report.cell(0, k);
        const double ratio = cell.variance[0] / reference[k];
        pass = pass && cell.failures == 0 && ratio <= tol::table_factor && ratio >= 1.0 / tol::table_factor;
        detail += " " + fmt(snr[k]) + " dB " + fmt(cell.variance[0]) + "/" + fmt(reference[k]) + " (x" + fmt(ratio) + ")";
    }
    const double elapsed = seconds_since(start);
    return {pass && elapsed < tol::table_seconds, detail + ", " + fmt(elapsed) + " s"};
}

// 6 --------------------------------------------------------------------------
Outcome solver_agreement() {
    const std::vector<SolverEntry> solvers{{"NSGM", config_for(Algorithm::nsgm)},
                                           {"SGM", config_for(Algorithm::sgm)},
                                           {"ISRA", config_for(Algorithm::isra)},
                                           {"FCLS", config_for(Algorithm::fcls_penalized)}};
    const MonteCarloReport report = run_monte_carlo(table_spec(solvers, {10.0, 20.0}, 606));
    double worst = 0.0;
    int failures = 0;
    for (std::size_t k = 0; k < report.snr_db.size(); ++k) {
        for (std::size_t i = 0; i < solvers.size(); ++i) {
            failures += report.cell(i, k).failures;
            for (std::size_t j = i + 1; j < solvers.size(); ++j)
                worst = std::max(worst, (report.cell(i, k).mean - report.cell(j, k).mean).cwiseAbs().maxCoeff());
        }
    }
    return {worst <= tol::agreement && failures == 0,
            "largest pairwise gap between mean estimates at 10 and 20 dB: " + fmt(worst) + ", failed runs " +
                std::to_string(failures)};
}

// 7 --------------------------------------------------------------------------
Outcome fcls_suboptimality() {
    const EndmemberMatrix library = substitute_library_spectra();
    const AbundanceVector alpha(Vector{{0.3, 0.6, 0.1}});
    const std::vector<double> deltas{1e-1, 1e-2, 1e-3};
    Rng rng(707);
    int bad_instances = 0;
    double worst_nsgm = 0.0;
    std::vector<double> mean(deltas.size(), 0.0);
    const int instances = 20;
    for (int t = 0; t < instances; ++t) {
        const double snr = std::array<double, 4>{-10.0, 0.0, 10.0, 20.0}[t % 4];
        const Pixel y = synthesize_pixel(library, alpha, snr, rng.bits()).pixel;
        const AbundanceVector init = AbundanceVector::uniform(3);
        std::vector<double> violation;
        for (double d : deltas) {
            SolverConfig c = config_for(Algorithm::fcls_penalized);
            c.delta = d;
            const Solution sol = fcls_penalized_solve(y, library, init.values(), d, c);
            violation.push_back(std::abs(sol.abundances.sum() - 1.0));
        }
        bool ok = violation[0] > 0.0;
        for (std::size_t i = 1; i < violation.size(); ++i) ok = ok && violation[i] > 0.0 && violation[i] < violation[i - 1];
        if (!ok) ++bad_instances;
        for (std::size_t i = 0; i < violation.size(); ++i) mean[i] += violation[i] / instances;

        const SimplexSolution ns = nsgm_solve(y, library, init, config_for(Algorithm::nsgm));
        for (const IterationRecord& rec : ns.trace.records)
            worst_nsgm = std::max(worst_nsgm, std::abs(rec.iterate.sum() - 1.0));
    }
    return {bad_instances == 0 && worst_nsgm <= tol::nsgm_violation,
            "mean FCLS |sum-1| at delta 1e-1/1e-2/1e-3: " + fmt(mean[0]) + "/" + fmt(mean[1]) + "/" + fmt(mean[2]) +
                ", instances not strictly decreasing " + std::to_string(bad_instances) + " of " +
                std::to_string(instances) + ", NSGM max |sum-1| " + fmt(worst_nsgm)};
}

// 8 --------------------------------------------------------------------------
// Plain ISRA written out independently of the library's iteration.
std::vector<Vector> reference_isra(const EndmemberMatrix& m, const Pixel& y, Vector alpha, int iterations) {
    const Vector mty = m.data().transpose() * y.values();
    std::vector<Vector> path{alpha};
    for (int k = 0; k < iterations; ++k) {
        const Vector g = mty - m.gram() * alpha;
        const double eps = 1e-12 * (1.0 + g.cwiseAbs().maxCoeff());
        const Vector u = mty.array() + eps;
        const Vector v = (m.gram() * alpha).array() + eps;
        alpha = alpha.cwiseProduct(u.cwiseQuotient(v));
        path.push_back(alpha);
    }
    return path;
}

Outcome exponent_acceleration() {
    Rng rng(808);
    int wins = 0;
    int n2_converged = 0;
    double worst_isra_gap = 0.0;
    const int trials = 50;
    for (int t = 0; t < trials; ++t) {
        const Index r = rng.integer(3, 6);
        const auto inst = testing_support::random_instance(rng, 50, r, kNoiseFree, false);
        const Vector init = AbundanceVector::uniform(r).values();
        SolverConfig c = config_for(Algorithm::exponent_mult);
        c.exponent_n = 1.0;
        const Solution n1 = exponent_mult_solve(inst.y, inst.m, init, 1.0, c);
        c.exponent_n = 2.0;
        const Solution n2 = exponent_mult_solve(inst.y, inst.m, init, 2.0, c);
        const bool n2_ok = n2.trace.status == SolverStatus::converged_kkt;
        n2_converged += n2_ok;
        if (n2_ok && n2.trace.iterations() < n1.trace.iterations()) ++wins;

        const Solution isra = isra_solve(inst.y, inst.m, init, config_for(Algorithm::isra));
        const std::vector<Vector> reference = reference_isra(inst.m, inst.y, init, n1.trace.iterations());
        for (std::size_t k = 0; k < n1.trace.records.size(); ++k) {
            worst_isra_gap = std::max(worst_isra_gap,
                                      (n1.trace.records[k].iterate - reference[k]).cwiseAbs().maxCoeff());
            if (k < isra.trace.records.size())
                worst_isra_gap = std::max(worst_isra_gap,
                                          (n1.trace.records[k].iterate - isra.trace.records[k].iterate).cwiseAbs().maxCoeff());
        }
    }
    const double share = static_cast<double>(wins) / trials;
    return {share >= tol::acceleration_share && worst_isra_gap <= tol::isra_match,
            "n=2 faster than n=1 in " + std::to_string(wins) + " of " + std::to_string(trials) + " trials (" +
                std::to_string(n2_converged) + " n=2 runs reached the KKT tolerance), n=1 vs ISRA max gap " +
                fmt(worst_isra_gap)};
}

// 9 --------------------------------------------------------------------------
Outcome gradient_correctness() {
    Rng rng(909);
    double worst = 0.0;
    for (int t = 0; t < 50; ++t) {
        const Index l = rng.integer(5, 60);
        const Index r = rng.integer(1, std::min<int>(8, static_cast<int>(l)));
        const EndmemberMatrix m(rng.uniform_matrix(l, r));
        const Pixel y(rng.uniform_vector(l, -0.5, 2.0));
        const Vector alpha = rng.uniform_vector(r, 0.0, 1.5);
        const Vector analytic = negative_gradient(y, m, alpha);
        const Vector numeric = -oracle::central_difference_gradient(
            [&](const Vector& a) { return least_squares_cost(y, m, a); }, alpha);
        const double scale = std::max(analytic.cwiseAbs().maxCoeff(), 1e-300);
        worst = std::max(worst, (analytic - numeric).cwiseAbs().maxCoeff() / scale);
    }
    return {worst <= tol::gradient_relative, "50 instances, worst relative error " + fmt(worst)};
}

// 10 -------------------------------------------------------------------------
Outcome max_step_tightness() {
    Rng rng(1010);
    double min_gamma = std::numeric_limits<double>::infinity();
    double worst_zero = 0.0;
    double most_negative = 0.0;
    int bad = 0;
    for (int t = 0; t < 100; ++t) {
        const Index r = rng.integer(2, 8);
        Vector alpha = rng.uniform_vector(r, 0.01, 1.0);
        GradientSplit split;
        if (t % 2 == 0) {
            split.u_part = rng.uniform_vector(r, 0.01, 2.0);
            split.v_part = rng.uniform_vector(r, 0.01, 2.0);
            const int j = rng.integer(0, static_cast<int>(r) - 1);
            split.u_part[j] = rng.uniform(0.0, 0.99) * split.v_part[j];  // at least one U < V
        } else {
            const AbundanceVector a = AbundanceVector::normalized(alpha);
            alpha = a.values();
            split = nsgm_split(rng.normal_vector(r), a, 1e-12);
        }
        const double gamma = max_step(alpha, split);
        min_gamma = std::min(min_gamma, gamma);
        const Vector stepped =
            alpha.array() + gamma * alpha.array() * (split.u_part - split.v_part).array() / split.v_part.array();
        const double scale = alpha.cwiseAbs().maxCoeff();
        const double smallest = stepped.minCoeff();
        worst_zero = std::max(worst_zero, std::abs(smallest) / scale);
        most_negative = std::min(most_negative, smallest / scale);
        if (!(gamma > 1.0) || std::abs(smallest) > tol::step_rounding * scale ||
            smallest < -tol::step_rounding * scale)
            ++bad;
    }
    return {bad == 0, "min gamma_max - 1 = " + fmt(min_gamma - 1.0) + ", max |smallest component| / max a at gamma_max " +
                          fmt(worst_zero) + ", most negative " + fmt(most_negative) + ", " + std::to_string(bad) +
                          " of 100 violations"};
}

// 11 -------------------------------------------------------------------------
Outcome cli_determinism() {
    const fs::path dir = fs::temp_directory_path() / ("unmix_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file(dir / "endmembers.csv",
               format_csv_matrix(substitute_library_spectra().data(), substitute_library_names()));
    write_file(dir / "spec.json", R"({
  "endmembers": {"source": "csv", "path": "endmembers.csv"},
  "alpha_true": [0.3, 0.6, 0.1],
  "snr_db": [-10, 0, 10, 20, "inf"],
  "runs": 30,
  "seed": 1111,
  "solvers": [
    {"name": "NSGM", "algorithm": "nsgm"},
    {"name": "SGM", "algorithm": "sgm"},
    {"name": "ISRA", "algorithm": "isra"}
  ]
})");
    std::vector<std::string> reports;
    for (const char* threads : {"1", "4", "4"}) {
        const fs::path out = dir / ("out" + std::to_string(reports.size()));
        const std::string cmd = std::string("UNMIX_THREADS=") + threads + " '" + UNMIX_CLI_PATH +
                                "' benchmark --spec '" + (dir / "spec.json").string() + "' --output '" +
                                out.string() + "'";
        if (std::system(cmd.c_str()) != 0) {
            fs::remove_all(dir);
            return {false, "CLI invocation failed: " + cmd};
        }
        reports.push_back(read_file(out / "report.csv"));
    }
    fs::remove_all(dir);
    const bool same = reports[0] == reports[1] && reports[1] == reports[2] && !reports[0].empty();
    return {same, "3 invocations (UNMIX_THREADS=1,4,4), report.csv " + std::to_string(reports[0].size()) +
                      " bytes, " + (same ? "byte-identical" : "DIFFERENT")};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all{
        {1, "flux exactness", flux_exactness},
        {2, "monotone descent", monotone_descent},
        {3, "oracle equivalence", oracle_equivalence},
        {4, "noiseless recovery", noiseless_recovery},
        {5, "NSGM variance order of magnitude", table_reproduction},
        {6, "high-SNR solver agreement", solver_agreement},
        {7, "FCLS suboptimality", fcls_suboptimality},
        {8, "exponent acceleration", exponent_acceleration},
        {9, "gradient correctness", gradient_correctness},
        {10, "max-step tightness", max_step_tightness},
        {11, "CLI determinism", cli_determinism},
    };
    return all;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--criterion" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        } else {
            std::cerr << "usage: " << argv[0] << " [--criterion N]\n";
            return 2;
        }
    }
    bool all_pass = true;
    bool ran = false;
    for (const Criterion& c : criteria()) {
        if (only != 0 && c.id != only) continue;
        ran = true;
        Outcome outcome;
        try {
            outcome = c.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        all_pass = all_pass && outcome.pass;
        std::cout << "criterion " << c.id << " (" << c.name << "): " << (outcome.pass ? "PASS" : "FAIL") << "  "
                  << outcome.detail << std::endl;
    }
    if (!ran) {
        std::cerr << "no criterion " << only << "\n";
        return 2;
    }
    return all_pass ? 0 : 1;
}
