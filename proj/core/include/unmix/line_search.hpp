#pragma once

// Armijo backtracking along a feasible direction, seeded by a Lipschitz
// bound on the gradient and capped by the positivity-preserving step.

#include <functional>

#include "unmix/model.hpp"

namespace unmix {

struct ArmijoParams {
    double beta = 0.5;        // backtracking factor
    double sigma = 0.25;      // sufficient-decrease coefficient
    double lipschitz = 1.0;   // bound on the gradient's Lipschitz constant
    int max_backtracks = 50;

    void validate() const;
};

struct LineSearchResult {
    double step = 0.0;
    int backtracks = 0;
    double new_cost = 0.0;
    double initial_step = 0.0;
};

/// Fraction of gamma_max the first trial step may reach. Keeps iterates interior.
inline constexpr double kInteriorFraction = 0.99;

using CostFunction = std::function<double(const Vector&)>;

/// Upper estimate of the largest eigenvalue of M^T M (power iteration, x1.1 safety).
double lipschitz_estimate(const EndmemberMatrix& m, int iterations = 100);

/// Same, for M^T M restricted to the zero-sum subspace {d : sum(d) = 0}.
/// Bounds the curvature seen by directions that stay on the simplex.
double simplex_lipschitz_estimate(const EndmemberMatrix& m, int iterations = 100);

/// Power iteration on a symmetric positive semidefinite matrix.
double lipschitz_estimate(const Matrix& gram, int iterations, bool zero_sum_subspace);

/// Largest step in {s, beta s, beta^2 s, ...} with s = min(s_k, 0.99 gamma_max),
/// s_k = -g^T p / (L ||p||^2), satisfying f(x + step p) - f(x) <= sigma step g^T p.
/// `cost_at_point` may be passed to save one evaluation of `cost`.
LineSearchResult armijo_search(const CostFunction& cost, const Vector& grad_at_point,
                               const Vector& point, const Vector& direction,
                               const ArmijoParams& params, double gamma_max);
LineSearchResult armijo_search(const CostFunction& cost, const Vector& grad_at_point,
                               const Vector& point, const Vector& direction,
                               const ArmijoParams& params, double gamma_max,
                               double cost_at_point);

}  // namespace unmix
