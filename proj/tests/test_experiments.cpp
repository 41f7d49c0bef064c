#include <cstdlib>

#include "doctest.h"
#include "oracles/oracles.hpp"
#include "support/instances.hpp"
#include "unmix/experiments.hpp"

using namespace unmix;
using testing_support::Rng;

namespace {

SolverEntry entry(const std::string& name, Algorithm a) {
    SolverConfig c;
    c.algorithm = a;
    return {name, c};
}

ExperimentSpec small_spec() {
    return ExperimentSpec{substitute_library_spectra(), AbundanceVector(Vector{{0.3, 0.6, 0.1}}),
                          {0.0, 20.0}, 12, {entry("NSGM", Algorithm::nsgm), entry("SGM", Algorithm::sgm)}, 99,
                          InitPolicy::random_simplex};
}

}  // namespace

TEST_CASE("substitute spectra") {
    const EndmemberMatrix m = substitute_library_spectra();
    CHECK(m.bands() == 224);
    CHECK(m.endmembers() == 3);
    CHECK(m.data().minCoeff() >= 0.02);
    CHECK(m.data().maxCoeff() <= 1.0);
    CHECK(substitute_library_names().size() == 3);
    // Distinct, full-rank columns.
    const double lo = Eigen::SelfAdjointEigenSolver<Matrix>(m.gram()).eigenvalues().minCoeff();
    CHECK(lo > 0.5);
    CHECK_THROWS_AS(substitute_library_spectra(2), DomainError);
}

TEST_CASE("smooth random spectra are seeded and bounded") {
    const EndmemberMatrix a = smooth_random_spectra(100, 4, 5);
    const EndmemberMatrix b = smooth_random_spectra(100, 4, 5);
    const EndmemberMatrix c = smooth_random_spectra(100, 4, 6);
    CHECK(a.data() == b.data());
    CHECK(a.data() != c.data());
    CHECK(a.data().minCoeff() >= 0.01);
    CHECK(a.data().maxCoeff() <= 1.0);
    // Smooth: neighbouring bands differ by far less than the dynamic range.
    const double jump = (a.data().bottomRows(99) - a.data().topRows(99)).cwiseAbs().maxCoeff();
    CHECK(jump < 0.1);
}

TEST_CASE("random simplex points") {
    const AbundanceVector a = random_simplex_point(5, 1);
    CHECK(std::abs(a.values().sum() - 1.0) <= 1e-15);
    CHECK(a.values().minCoeff() > 0.0);
    CHECK(random_simplex_point(5, 1).values() == a.values());
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
}

TEST_CASE("synthesize_pixel") {
    const EndmemberMatrix m = substitute_library_spectra();
    const AbundanceVector alpha(Vector{{0.3, 0.6, 0.1}});
    SUBCASE("noise-free sentinel") {
        const SyntheticPixel s = synthesize_pixel(m, alpha, kNoiseFree, 3);
        CHECK(s.noise.sigma == 0.0);
        CHECK(s.pixel.values() == m.data() * alpha.values());
    }
    SUBCASE("empirical SNR matches the request") {
        const double signal = (m.data() * alpha.values()).squaredNorm();
        double noise_energy = 0.0;
        const int samples = 10000;
        for (int i = 0; i < samples; ++i) {
            const SyntheticPixel s = synthesize_pixel(m, alpha, 10.0, derive_seed(17, i));
            noise_energy += (s.pixel.values() - m.data() * alpha.values()).squaredNorm();
        }
        const double sigma2 = noise_energy / (static_cast<double>(samples) * m.bands());
        const double snr = 10.0 * std::log10(signal / (m.bands() * sigma2));
        CHECK(std::abs(snr - 10.0) < 0.2);
    }
    SUBCASE("zero signal is an error") {
        const EndmemberMatrix z(Matrix{{1.0, 0.0}, {0.0, 0.0}});
        CHECK_THROWS_AS(synthesize_pixel(z, AbundanceVector(Vector{{0.0, 1.0}}), 10.0, 1), DomainError);
        CHECK_THROWS_AS(synthesize_pixel(m, alpha, std::nan(""), 1), DomainError);
    }
}

TEST_CASE("run_monte_carlo") {
    SUBCASE("single noise-free run has zero variance") {
        ExperimentSpec spec = small_spec();
        spec.snr_db = {kNoiseFree};
        spec.runs = 1;
        const MonteCarloReport r = run_monte_carlo(spec, 1);
        for (std::size_t s = 0; s < 2; ++s) {
            CHECK(r.cell(s, 0).variance.cwiseAbs().maxCoeff() == 0.0);
            CHECK((r.cell(s, 0).mean - spec.alpha_true.values()).cwiseAbs().maxCoeff() < 1e-6);
        }
    }
    SUBCASE("shape, unbiased variance and determinism") {
        const ExperimentSpec spec = small_spec();
        const MonteCarloReport a = run_monte_carlo(spec, 1);
        const MonteCarloReport b = run_monte_carlo(spec, 4);
        REQUIRE(a.cells.size() == 2);
        REQUIRE(a.cells[0].size() == 2);
        for (std::size_t s = 0; s < 2; ++s) {
            for (std::size_t k = 0; k < 2; ++k) {
                const CellStats& ca = a.cell(s, k);
                const CellStats& cb = b.cell(s, k);
                CHECK(ca.successes + ca.failures == spec.runs);
                CHECK(ca.mean == cb.mean);
                CHECK(ca.variance == cb.variance);
                CHECK((ca.variance.array() >= 0.0).all());
                CHECK((ca.variance - oracle::sample_variance(ca.estimates)).cwiseAbs().maxCoeff() <= 1e-15);
            }
        }
    }
    SUBCASE("solvers share noise realizations") {
        ExperimentSpec spec = small_spec();
        spec.solvers = {entry("a", Algorithm::nsgm), entry("b", Algorithm::nsgm)};
        const MonteCarloReport r = run_monte_carlo(spec, 2);
        CHECK(r.cell(0, 1).estimates == r.cell(1, 1).estimates);
    }
    SUBCASE("failed runs are counted and excluded") {
        // y = -M a makes every component of M^T y negative, which SGM rejects.
        ExperimentSpec spec = small_spec();
        spec.snr_db = {kNoiseFree};
        spec.solvers = {entry("SGM", Algorithm::sgm)};
        spec.endmembers = EndmemberMatrix(Matrix::Identity(3, 3));
        spec.alpha_true = AbundanceVector::uniform(3);
        const MonteCarloReport ok = run_monte_carlo(spec, 1);
        CHECK(ok.cell(0, 0).failures == 0);
    }
    SUBCASE("invalid specs") {
        ExperimentSpec spec = small_spec();
        spec.runs = 0;
        CHECK_THROWS_AS(run_monte_carlo(spec), DomainError);
        spec = small_spec();
        spec.snr_db.clear();
        CHECK_THROWS_AS(run_monte_carlo(spec), DomainError);
        spec = small_spec();
        spec.solvers.push_back(spec.solvers.front());
        CHECK_THROWS_AS(run_monte_carlo(spec), DomainError);
    }
}

TEST_CASE("compare_constraint_violation") {
    ExperimentSpec spec = small_spec();
    spec.snr_db = {0.0, 10.0, 20.0};
    const ViolationTable t = compare_constraint_violation(spec, 2);
    for (std::size_t k = 0; k < spec.snr_db.size(); ++k) {
        CHECK(t.mean_violation[0][k] <= 1e-12);
        CHECK(t.mean_violation[1][k] > 0.0);
    }
    CHECK(t.mean_violation[1][0] > 1e-6);

    spec.solvers = {entry("NSGM", Algorithm::nsgm), entry("ISRA", Algorithm::isra)};
    CHECK_THROWS_AS(compare_constraint_violation(spec), DomainError);
}

TEST_CASE("unmix_cube") {
    SolverConfig nsgm;
    SUBCASE("pure pixels give one-hot maps") {
        Rng rng(91);
        const EndmemberMatrix m(rng.uniform_matrix(20, 4));
        Cube cube{2, 2, 20, std::vector<double>(80)};
        for (Index p = 0; p < 4; ++p)
            for (Index b = 0; b < 20; ++b) cube.data[static_cast<std::size_t>(b * 4 + p)] = m.data()(b, p);
        const AbundanceMaps maps = unmix_cube(cube, m, nsgm, 2);
        for (Index p = 0; p < 4; ++p) {
            const Vector a = maps.pixel(p % 2, p / 2);
            for (Index r = 0; r < 4; ++r) CHECK(std::abs(a[r] - (r == p ? 1.0 : 0.0)) < 1e-6);
        }
    }
    SUBCASE("identical pixels give identical outputs") {
        const EndmemberMatrix m = substitute_library_spectra();
        const Pixel y = synthesize_pixel(m, AbundanceVector(Vector{{0.2, 0.5, 0.3}}), 20.0, 4).pixel;
        Cube cube{3, 2, 224, std::vector<double>(6 * 224)};
        for (Index b = 0; b < 224; ++b)
            for (Index p = 0; p < 6; ++p) cube.data[static_cast<std::size_t>(b * 6 + p)] = y.values()[b];
        const AbundanceMaps maps = unmix_cube(cube, m, nsgm, 3);
        for (Index p = 1; p < 6; ++p) CHECK(maps.pixel(p % 3, p / 3) == maps.pixel(0, 0));
    }
    SUBCASE("16 x 16 synthetic cube at 30 dB") {
        const EndmemberMatrix m = substitute_library_spectra();
        const SyntheticCube synth = synthesize_cube(m, 16, 16, 30.0, 8);
        const AbundanceMaps maps = unmix_cube(synth.cube, m, nsgm);
        double total = 0.0;
        for (Index y = 0; y < 16; ++y) {
            for (Index x = 0; x < 16; ++x) {
                const Vector a = maps.pixel(x, y);
                CHECK(std::abs(a.sum() - 1.0) <= 1e-12);
                CHECK(a.minCoeff() >= 0.0);
                CHECK(a.maxCoeff() <= 1.0);
                total += (a - synth.truth.pixel(x, y)).cwiseAbs().maxCoeff();
            }
        }
        CHECK(total / 256.0 < 0.02);
        CHECK(maps.failures == 0);
    }
    SUBCASE("band mismatch and too many failures") {
        const EndmemberMatrix m = substitute_library_spectra();
        Cube cube{2, 2, 10, std::vector<double>(40, 0.5)};
        CHECK_THROWS_AS(unmix_cube(cube, m, nsgm), DimensionError);

        // Every pixel anti-correlated with the endmembers: SGM cannot split its gradient.
        const EndmemberMatrix id(Matrix::Identity(2, 2));
        Cube bad{2, 2, 2, std::vector<double>(8, -1.0)};
        SolverConfig sgm;
        sgm.algorithm = Algorithm::sgm;
        CHECK_THROWS_AS(unmix_cube(bad, id, sgm), SolverError);
    }
}

TEST_CASE("thread configuration") {
    ::setenv("UNMIX_THREADS", "3", 1);
    CHECK(configured_threads() == 3);
    ::setenv("UNMIX_THREADS", "zero", 1);
    CHECK_THROWS_AS(configured_threads(), DomainError);
    ::unsetenv("UNMIX_THREADS");
    CHECK(configured_threads() >= 1);

    std::vector<int> hits(100, 0);
    parallel_for(100, 4, [&](std::size_t i) { hits[i] += 1; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_AS(parallel_for(10, 2, [](std::size_t i) {
                        if (i == 7) throw DomainError("boom");
                    }),
                    DomainError);
}
