#pragma once

// Scaled-gradient solvers for least-squares unmixing under positivity
// (SGM, ISRA, exponent multiplicative) and positivity plus sum-to-one
// (NSGM) constraints, plus the penalized reading of FCLS.
//
// Every method writes the negative gradient as the difference U - V of two
// positive vectors and scales it by a / V:
//
//     a_r <- a_r + gamma * a_r * (U_r - V_r) / V_r
//
// gamma is either chosen by the Armijo rule inside ]0, gamma_max[, where
// gamma_max keeps every component non-negative, or fixed at 1 (the purely
// multiplicative form a_r <- a_r U_r / V_r).

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "unmix/line_search.hpp"
#include "unmix/model.hpp"

namespace unmix {

struct GradientSplit {
    Vector u_part;
    Vector v_part;
};

enum class Algorithm {
    sgm,
    isra,
    nsgm,
    nsgm_fixed_step,
    exponent_mult,
    fcls_penalized,
};

std::string_view to_string(Algorithm algorithm);
/// Accepts the CLI names: nsgm, nsgm-fixed, sgm, isra, expmult, fcls.
Algorithm parse_algorithm(std::string_view name);

/// Returned when no component restricts the step.
inline constexpr double kUnrestrictedStepCap = 1e6;

struct SolverConfig {
    Algorithm algorithm = Algorithm::nsgm;
    /// Split offset. Unset means 1e-12 * (1 + max |neg_grad|), re-evaluated every iteration.
    std::optional<double> epsilon;
    double exponent_n = 2.0;
    double delta = 1e-3;
    double tol_kkt = 1e-8;
    double tol_step = 1e-12;
    int max_iters = 10000;
    /// `lipschitz` is overwritten per problem unless `lipschitz_override` is set.
    ArmijoParams armijo;
    std::optional<double> lipschitz_override;

    void validate() const;
};

enum class SolverStatus { converged_kkt, converged_step, max_iters };

std::string_view to_string(SolverStatus status);

struct IterationRecord {
    Vector iterate;
    double cost = 0.0;
    double step = 0.0;        // 0 for the initial record
    double gamma_max = 0.0;   // 0 for the initial record
    double max_complementarity = 0.0;
    double component_sum = 0.0;
};

/// records[0] is the starting point; records[k] the k-th iterate.
struct SolverTrace {
    std::vector<IterationRecord> records;
    SolverStatus status = SolverStatus::max_iters;
    /// Armijo backtracks summed over the run.
    long backtracks = 0;

    int iterations() const noexcept {
        return records.empty() ? 0 : static_cast<int>(records.size()) - 1;
    }
};

struct Solution {
    Vector abundances;
    SolverTrace trace;
};

struct SimplexSolution {
    AbundanceVector abundances;
    SolverTrace trace;
};

// Splits -----------------------------------------------------------------

/// U = M^T y + eps, V = M^T M a + eps. Requires M^T y >= 0 and a >= 0.
GradientSplit sgm_split_quadratic(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha,
                                  double epsilon);

/// Split of the centered negative gradient on the simplex:
///   U_r = g_r - min g + eps,   V_r = sum_l a_l g_l - min g + eps   (same for all r).
GradientSplit nsgm_split(const Vector& neg_grad, const AbundanceVector& alpha, double epsilon);

/// 1e-12 * (1 + max |neg_grad|).
double default_epsilon(const Vector& neg_grad);

// Step bounds ------------------------------------------------------------

/// min over components with U_r < V_r of 1 / (1 - U_r / V_r); always > 1.
double max_step(const Vector& alpha, const GradientSplit& split);

/// min over components with U_r < V_r of 1 / (1 - (U_r / V_r)^n).
double exponent_max_step(const GradientSplit& split, double n);

/// One NSGM update with a step shared by all components. Requires
/// 0 <= gamma < max_step for the split of (neg_grad, alpha).
AbundanceVector nsgm_step(const AbundanceVector& alpha, const Vector& neg_grad, double gamma,
                          double epsilon);

// Solvers ----------------------------------------------------------------

/// Positivity and sum-to-one. Uses config.algorithm == nsgm_fixed_step to
/// select gamma = 1 instead of the Armijo rule.
SimplexSolution nsgm_solve(const Pixel& y, const EndmemberMatrix& m, const AbundanceVector& init,
                           const SolverConfig& config);

/// Positivity only, Armijo-stepped.
Solution sgm_solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
                   const SolverConfig& config);

/// Positivity only, a <- a * (M^T y) / (M^T M a).
Solution isra_solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
                    const SolverConfig& config);

/// a <- a * (U / V)^n with the ISRA split. No convergence guarantee for n > 1.
Solution exponent_mult_solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
                             double n, const SolverConfig& config);

/// Minimizes ||y - M a||^2 + (sum(a) - 1)^2 / (2 delta^2) over a >= 0 by running
/// positivity-only SGM on the augmented system N = [w M; 1^T], s = [w y; 1]
/// with w = sqrt(2) delta, whose least-squares cost is w^2 / 2 times the above.
///
/// The augmented Hessian has condition number ~ R / (w^2 lambda_min(M^T M)),
/// so the run is warm-started through weights 1, 0.1, 0.01, ... down to w,
/// each stage limited to config.max_iters iterations. The trace concatenates
/// the stages and reports the penalized cost at the final delta; its status is
/// that of the last stage.
Solution fcls_penalized_solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
                              double delta, const SolverConfig& config);

/// Penalized cost minimized by fcls_penalized_solve.
double fcls_penalized_cost(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha,
                           double delta);

/// Dispatches on config.algorithm. NSGM variants require `init` on the simplex.
Solution solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
               const SolverConfig& config);

/// True for algorithms whose iterates are constrained to the simplex.
bool enforces_sum_to_one(Algorithm algorithm);

/// True for algorithms whose recorded cost sequence is non-increasing
/// (single-stage Armijo methods: SGM and NSGM).
bool has_monotone_trace(Algorithm algorithm);

}  // namespace unmix
