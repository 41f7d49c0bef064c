#include "unmix/solvers.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <string>

namespace unmix {

namespace {

// Least-squares data with the products every iteration needs.
struct QuadraticProblem {
    QuadraticProblem(const Pixel& pixel, const EndmemberMatrix& endmembers)
        : y(pixel), m(endmembers), mty(endmembers.data().transpose() * pixel.values()) {}

    double cost(const Vector& alpha) const {
        return 0.5 * (y.values() - m.data() * alpha).squaredNorm();
    }
    Vector neg_grad(const Vector& alpha) const { return mty - m.gram() * alpha; }

    const Pixel& y;
    const EndmemberMatrix& m;
    Vector mty;
};

void require_finite(const Vector& v, const char* what) {
    if (!v.allFinite()) throw DomainError(std::string(what) + " has non-finite entries");
}

void require_nonnegative_data(const Vector& mty) {
    for (Index r = 0; r < mty.size(); ++r) {
        if (mty[r] < 0.0)
            throw DomainError("M^T y has a negative component (" + std::to_string(r) +
                              "); the positive gradient split needs non-negative data");
    }
}

void require_strictly_positive(const Vector& init, const char* what) {
    require_finite(init, what);
    for (Index r = 0; r < init.size(); ++r) {
        if (!(init[r] > 0.0))
            throw DomainError(std::string(what) + " component " + std::to_string(r) +
                              " is not strictly positive; multiplicative updates cannot move a "
                              "zero component. Add a small mass and renormalize.");
    }
}

double epsilon_for(const SolverConfig& config, const Vector& neg_grad) {
    return config.epsilon ? *config.epsilon : default_epsilon(neg_grad);
}

bool kkt_converged(const KKTReport& kkt, double tol) {
    return kkt.max_complementarity < tol && kkt.stationarity_residual < tol;
}

// The Armijo rule can only fail at rounding level once the demanded decrease
// is below the precision of the cost itself.
bool decrease_below_rounding(double slope, double initial_step, double sigma, double cost) {
    const double demanded = sigma * initial_step * std::abs(slope);
    return demanded <= 64.0 * DBL_EPSILON * std::max(std::abs(cost), DBL_MIN);
}

enum class StepRule { armijo, unit };

struct PositivityRunOptions {
    StepRule rule = StepRule::armijo;
    double exponent_n = 1.0;
    double lipschitz = 1.0;
    double tol_kkt = 1e-8;
    bool record_start = true;
};

// Scaled-gradient iteration under a >= 0 with the ISRA split.
Vector run_positivity(const QuadraticProblem& problem, Vector alpha, const SolverConfig& config,
                      const PositivityRunOptions& options, const CostFunction& reported_cost,
                      SolverTrace& trace) {
    const auto cost = [&](const Vector& a) { return problem.cost(a); };
    ArmijoParams armijo = config.armijo;
    armijo.lipschitz = options.lipschitz;

    Vector g = problem.neg_grad(alpha);
    double current_cost = problem.cost(alpha);
    KKTReport kkt = kkt_report_from_gradient(alpha, -g, ConstraintSet::nonnegative);
    if (options.record_start)
        trace.records.push_back({alpha, reported_cost(alpha), 0.0, 0.0, kkt.max_complementarity,
                                 alpha.sum()});

    for (int k = 0;; ++k) {
        if (kkt_converged(kkt, options.tol_kkt)) {
            trace.status = SolverStatus::converged_kkt;
            break;
        }
        if (k == config.max_iters) {
            trace.status = SolverStatus::max_iters;
            break;
        }

        const double eps = epsilon_for(config, g);
        GradientSplit split{problem.mty.array() + eps,
                            (problem.m.gram() * alpha).array() + eps};
        const Vector ratio = split.u_part.cwiseQuotient(split.v_part);

        Vector next;
        double step = 1.0;
        double gamma_max = 0.0;
        if (options.rule == StepRule::unit) {
            gamma_max = exponent_max_step(split, options.exponent_n);
            next = options.exponent_n == 1.0
                       ? Vector(alpha.cwiseProduct(ratio))
                       : Vector(alpha.array() * ratio.array().pow(options.exponent_n));
            current_cost = problem.cost(next);
        } else {
            gamma_max = max_step(alpha, split);
            const Vector direction = alpha.cwiseProduct(ratio.array().matrix() -
                                                        Vector::Ones(alpha.size()));
            const double slope = -g.dot(direction);
            if (!(slope < 0.0)) {
                trace.status = SolverStatus::converged_step;
                break;
            }
            try {
                const LineSearchResult ls =
                    armijo_search(cost, -g, alpha, direction, armijo, gamma_max, current_cost);
                step = ls.step;
                trace.backtracks += ls.backtracks;
                current_cost = ls.new_cost;
            } catch (const LineSearchError& e) {
                const double seed = std::min(-slope / (armijo.lipschitz * direction.squaredNorm()),
                                             kInteriorFraction * gamma_max);
                if (decrease_below_rounding(slope, seed, armijo.sigma, current_cost)) {
                    trace.status = SolverStatus::converged_step;
                    break;
                }
                throw SolverError(e.what(), alpha);
            }
            next = alpha + step * direction;
        }
        if (!next.allFinite()) throw SolverError("iterate became non-finite", alpha);

        const double change = (next - alpha).cwiseAbs().maxCoeff();
        alpha = std::move(next);
        g = problem.neg_grad(alpha);
        kkt = kkt_report_from_gradient(alpha, -g, ConstraintSet::nonnegative);
        trace.records.push_back({alpha, reported_cost(alpha), step, gamma_max,
                                 kkt.max_complementarity, alpha.sum()});
        if (change < config.tol_step) {
            trace.status = kkt_converged(kkt, options.tol_kkt) ? SolverStatus::converged_kkt
                                                               : SolverStatus::converged_step;
            break;
        }
    }
    return alpha;
}

Solution positivity_solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
                          const SolverConfig& config, StepRule rule, double n) {
    config.validate();
    Vector alpha = init;
    check_dimensions(y, m, alpha);
    require_strictly_positive(alpha, "initial point");
    const QuadraticProblem problem(y, m);
    require_nonnegative_data(problem.mty);

    PositivityRunOptions options;
    options.rule = rule;
    options.exponent_n = n;
    options.tol_kkt = config.tol_kkt;
    if (rule == StepRule::armijo)
        options.lipschitz = config.lipschitz_override.value_or(lipschitz_estimate(m));

    Solution solution;
    const auto reported = [&](const Vector& a) { return problem.cost(a); };
    solution.abundances =
        run_positivity(problem, std::move(alpha), config, options, reported, solution.trace);
    return solution;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::sgm: return "sgm";
        case Algorithm::isra: return "isra";
        case Algorithm::nsgm: return "nsgm";
        case Algorithm::nsgm_fixed_step: return "nsgm-fixed";
        case Algorithm::exponent_mult: return "expmult";
        case Algorithm::fcls_penalized: return "fcls";
    }
    return "unknown";
}

Algorithm parse_algorithm(std::string_view name) {
    for (Algorithm a : {Algorithm::sgm, Algorithm::isra, Algorithm::nsgm,
                        Algorithm::nsgm_fixed_step, Algorithm::exponent_mult,
                        Algorithm::fcls_penalized}) {
        if (to_string(a) == name) return a;
    }
    throw DomainError("unknown algorithm '" + std::string(name) +
                      "' (expected nsgm, nsgm-fixed, sgm, isra, expmult or fcls)");
}

std::string_view to_string(SolverStatus status) {
    switch (status) {
        case SolverStatus::converged_kkt: return "converged_kkt";
        case SolverStatus::converged_step: return "converged_step";
        case SolverStatus::max_iters: return "max_iters";
    }
    return "unknown";
}

void SolverConfig::validate() const {
    if (epsilon && !(*epsilon > 0.0 && std::isfinite(*epsilon)))
        throw DomainError("epsilon must be finite and > 0");
    if (!(exponent_n > 0.0) || !std::isfinite(exponent_n))
        throw DomainError("exponent n must be finite and > 0");
    if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("delta must be finite and > 0");
    if (!(tol_kkt > 0.0)) throw DomainError("tol_kkt must be > 0");
    if (!(tol_step > 0.0)) throw DomainError("tol_step must be > 0");
    if (max_iters < 1) throw DomainError("max_iters must be >= 1");
    ArmijoParams probe = armijo;
    if (lipschitz_override) probe.lipschitz = *lipschitz_override;
    probe.validate();
}

bool enforces_sum_to_one(Algorithm algorithm) {
    return algorithm == Algorithm::nsgm || algorithm == Algorithm::nsgm_fixed_step;
}

bool has_monotone_trace(Algorithm algorithm) {
    return algorithm == Algorithm::nsgm || algorithm == Algorithm::sgm;
}

double default_epsilon(const Vector& neg_grad) {
    return 1e-12 * (1.0 + neg_grad.cwiseAbs().maxCoeff());
}

GradientSplit sgm_split_quadratic(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha,
                                  double epsilon) {
    check_dimensions(y, m, alpha);
    if (!(epsilon >= 0.0)) throw DomainError("epsilon must be >= 0");
    if ((alpha.array() < 0.0).any()) throw DomainError("split needs a non-negative point");
    const Vector mty = m.data().transpose() * y.values();
    require_nonnegative_data(mty);
    return {mty.array() + epsilon, (m.gram() * alpha).array() + epsilon};
}

GradientSplit nsgm_split(const Vector& neg_grad, const AbundanceVector& alpha, double epsilon) {
    if (neg_grad.size() != alpha.size())
        throw DimensionError("gradient length", alpha.size(), neg_grad.size());
    require_finite(neg_grad, "gradient");
    if (!(epsilon >= 0.0)) throw DomainError("epsilon must be >= 0");
    // First index wins on ties; only the value enters the formulas.
    const double lowest = neg_grad.minCoeff();
    const double weighted = alpha.values().dot(neg_grad);
    GradientSplit split;
    split.u_part = neg_grad.array() - lowest + epsilon;
    split.v_part = Vector::Constant(neg_grad.size(), weighted - lowest + epsilon);
    // weighted >= lowest holds exactly for convex weights but rounding can
    // leave it a few ulps below.
    split.v_part = split.v_part.cwiseMax(epsilon);
    return split;
}

double max_step(const Vector& alpha, const GradientSplit& split) {
    if (split.u_part.size() != alpha.size() || split.v_part.size() != alpha.size())
        throw DimensionError("split length", alpha.size(), split.u_part.size());
    return exponent_max_step(split, 1.0);
}

double exponent_max_step(const GradientSplit& split, double n) {
    if (split.u_part.size() != split.v_part.size())
        throw DimensionError("split V length", split.u_part.size(), split.v_part.size());
    require_finite(split.u_part, "split U");
    require_finite(split.v_part, "split V");
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("exponent n must be > 0");
    double bound = kUnrestrictedStepCap;
    for (Index r = 0; r < split.u_part.size(); ++r) {
        const double u = split.u_part[r];
        const double v = split.v_part[r];
        if (!(v > 0.0) || u < 0.0) throw DomainError("split parts must be positive");
        if (u < v) {
            const double ratio = n == 1.0 ? u / v : std::pow(u / v, n);
            bound = std::min(bound, 1.0 / (1.0 - ratio));
        }
    }
    return bound;
}

AbundanceVector nsgm_step(const AbundanceVector& alpha, const Vector& neg_grad, double gamma,
                          double epsilon) {
    const GradientSplit split = nsgm_split(neg_grad, alpha, epsilon);
    const double bound = max_step(alpha.values(), split);
    if (!(gamma >= 0.0)) throw DomainError("step must be >= 0");
    if (gamma >= bound)
        throw DomainError("step " + std::to_string(gamma) + " reaches gamma_max " +
                          std::to_string(bound) + " and would break positivity");
    const Vector ratio = split.u_part.cwiseQuotient(split.v_part);
    Vector next = alpha.values().array() * (1.0 + gamma * (ratio.array() - 1.0));
    return AbundanceVector::normalized(next);
}

SimplexSolution nsgm_solve(const Pixel& y, const EndmemberMatrix& m, const AbundanceVector& init,
                           const SolverConfig& config) {
    config.validate();
    check_dimensions(y, m, init.values());
    require_strictly_positive(init.values(), "initial abundance vector");

    const QuadraticProblem problem(y, m);
    const bool fixed_step = config.algorithm == Algorithm::nsgm_fixed_step;
    ArmijoParams armijo = config.armijo;
    if (!fixed_step)
        armijo.lipschitz = config.lipschitz_override.value_or(simplex_lipschitz_estimate(m));
    // Trial points are scored after renormalization so that the accepted cost
    // is exactly the cost of the stored iterate.
    const auto cost = [&](const Vector& a) { return problem.cost(a / a.sum()); };

    AbundanceVector alpha = init;
    Vector g = problem.neg_grad(alpha.values());
    double current_cost = problem.cost(alpha.values());
    KKTReport kkt = kkt_report_from_gradient(alpha.values(), -g, ConstraintSet::simplex);

    SolverTrace trace;
    trace.records.push_back({alpha.values(), current_cost, 0.0, 0.0, kkt.max_complementarity,
                             alpha.values().sum()});

    for (int k = 0;; ++k) {
        if (kkt_converged(kkt, config.tol_kkt)) {
            trace.status = SolverStatus::converged_kkt;
            break;
        }
        if (k == config.max_iters) {
            trace.status = SolverStatus::max_iters;
            break;
        }

        const double eps = epsilon_for(config, g);
        const GradientSplit split = nsgm_split(g, alpha, eps);
        const double gamma_max = max_step(alpha.values(), split);
        const Vector direction = alpha.values().cwiseProduct(
            split.u_part.cwiseQuotient(split.v_part) - Vector::Ones(alpha.size()));
        const double slope = -g.dot(direction);
        if (!(slope < 0.0)) {
            // Zero direction: stationary on the simplex.
            trace.status = SolverStatus::converged_step;
            break;
        }

        double step = 1.0;
        if (!fixed_step) {
            try {
                const LineSearchResult ls = armijo_search(cost, -g, alpha.values(), direction,
                                                          armijo, gamma_max, current_cost);
                step = ls.step;
                trace.backtracks += ls.backtracks;
            } catch (const LineSearchError& e) {
                const double seed = std::min(-slope / (armijo.lipschitz * direction.squaredNorm()),
                                             kInteriorFraction * gamma_max);
                if (decrease_below_rounding(slope, seed, armijo.sigma, current_cost)) {
                    trace.status = SolverStatus::converged_step;
                    break;
                }
                throw SolverError(e.what(), alpha.values());
            }
        }

        AbundanceVector next = AbundanceVector::normalized(alpha.values() + step * direction);
        const double change = (next.values() - alpha.values()).cwiseAbs().maxCoeff();
        alpha = std::move(next);
        g = problem.neg_grad(alpha.values());
        current_cost = problem.cost(alpha.values());
        kkt = kkt_report_from_gradient(alpha.values(), -g, ConstraintSet::simplex);
        trace.records.push_back({alpha.values(), current_cost, step, gamma_max,
                                 kkt.max_complementarity, alpha.values().sum()});
        if (change < config.tol_step) {
            trace.status = kkt_converged(kkt, config.tol_kkt) ? SolverStatus::converged_kkt
                                                              : SolverStatus::converged_step;
            break;
        }
    }
    return {std::move(alpha), std::move(trace)};
}

Solution sgm_solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
                   const SolverConfig& config) {
    return positivity_solve(y, m, init, config, StepRule::armijo, 1.0);
}

Solution isra_solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
                    const SolverConfig& config) {
    return positivity_solve(y, m, init, config, StepRule::unit, 1.0);
}

Solution exponent_mult_solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
                             double n, const SolverConfig& config) {
    if (!(n > 0.0) || !std::isfinite(n)) throw DomainError("exponent n must be finite and > 0");
    return positivity_solve(y, m, init, config, StepRule::unit, n);
}

double fcls_penalized_cost(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha,
                           double delta) {
    const double violation = alpha.sum() - 1.0;
    return 2.0 * least_squares_cost(y, m, alpha) + violation * violation / (2.0 * delta * delta);
}

Solution fcls_penalized_solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
                              double delta, const SolverConfig& config) {
    config.validate();
    if (!(delta > 0.0) || !std::isfinite(delta)) throw DomainError("delta must be finite and > 0");
    Vector alpha = init;
    check_dimensions(y, m, alpha);
    require_strictly_positive(alpha, "initial point");
    require_nonnegative_data(m.data().transpose() * y.values());

    // ||y - M a||^2 + (sum(a) - 1)^2 / (2 delta^2) is twice the least-squares
    // cost of the system augmented with weight sqrt(2) delta.
    const double weight = std::sqrt(2.0) * delta;
    std::vector<double> stages;
    for (double d = 1.0; d > weight * (1.0 + 1e-9); d *= 0.1) stages.push_back(d);
    stages.push_back(weight);

    const Index bands = m.bands();
    const Index count = m.endmembers();
    const auto reported = [&](const Vector& a) { return fcls_penalized_cost(y, m, a, delta); };

    Solution solution;
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const double d = stages[i];
        Matrix n(bands + 1, count);
        n.topRows(bands) = d * m.data();
        n.row(bands).setOnes();
        Vector s(bands + 1);
        s.head(bands) = d * y.values();
        s[bands] = 1.0;
        const EndmemberMatrix augmented(std::move(n));
        const Pixel target(std::move(s));
        const QuadraticProblem problem(target, augmented);

        PositivityRunOptions options;
        options.rule = StepRule::armijo;
        // At weight d the augmented cost is d^2 times the half-scaled penalized cost.
        options.tol_kkt = config.tol_kkt * d * d;
        options.lipschitz = config.lipschitz_override.value_or(lipschitz_estimate(augmented));
        options.record_start = i == 0;
        alpha = run_positivity(problem, std::move(alpha), config, options, reported,
                               solution.trace);
    }
    solution.abundances = std::move(alpha);
    return solution;
}

Solution solve(const Pixel& y, const EndmemberMatrix& m, const Vector& init,
               const SolverConfig& config) {
    switch (config.algorithm) {
        case Algorithm::nsgm:
        case Algorithm::nsgm_fixed_step: {
            SimplexSolution s = nsgm_solve(y, m, AbundanceVector(init), config);
            return {s.abundances.values(), std::move(s.trace)};
        }
        case Algorithm::sgm: return sgm_solve(y, m, init, config);
        case Algorithm::isra: return isra_solve(y, m, init, config);
        case Algorithm::exponent_mult:
            return exponent_mult_solve(y, m, init, config.exponent_n, config);
        case Algorithm::fcls_penalized:
            return fcls_penalized_solve(y, m, init, config.delta, config);
    }
    throw DomainError("unknown algorithm");
}

}  // namespace unmix
