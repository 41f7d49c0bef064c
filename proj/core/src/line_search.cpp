#include "unmix/line_search.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace unmix {

namespace {

constexpr double kLipschitzSafety = 1.1;

Vector start_vector(Index n, bool zero_sum) {
    Vector v(n);
    if (!zero_sum) {
        v.setOnes();
        return v;
    }
    // Generic deterministic start; a ramp or constant could be orthogonal to
    // the leading eigenvector for symmetric instances.
    for (Index i = 0; i < n; ++i) v[i] = std::cos(1.0 + 2.0 * static_cast<double>(i));
    v.array() -= v.mean();
    return v;
}

}  // namespace

void ArmijoParams::validate() const {
    if (!(beta > 0.0 && beta < 1.0)) throw DomainError("Armijo beta must lie in (0, 1)");
    if (!(sigma > 0.0 && sigma < 0.5)) throw DomainError("Armijo sigma must lie in (0, 1/2)");
    if (!(lipschitz > 0.0) || !std::isfinite(lipschitz))
        throw DomainError("Lipschitz constant must be finite and > 0");
    if (max_backtracks < 1) throw DomainError("max_backtracks must be >= 1");
}

double lipschitz_estimate(const Matrix& gram, int iterations, bool zero_sum_subspace) {
    if (iterations < 1) throw DomainError("power iteration count must be >= 1");
    if (gram.rows() != gram.cols() || gram.rows() < 1)
        throw DomainError("Lipschitz estimate needs a non-empty square operator");
    if (!gram.allFinite()) throw DomainError("operator has non-finite entries");
    if (gram.cwiseAbs().maxCoeff() == 0.0)
        throw DomainError("zero operator: every endmember column is zero");

    const Index n = gram.rows();
    if (zero_sum_subspace && n == 1) return lipschitz_estimate(gram, iterations, false);

    auto apply = [&](const Vector& v) -> Vector {
        if (!zero_sum_subspace) return gram * v;
        Vector w = v;
        w.array() -= w.mean();
        w = gram * w;
        w.array() -= w.mean();
        return w;
    };

    Vector v = start_vector(n, zero_sum_subspace);
    v.normalize();
    double rayleigh = 0.0;
    for (int k = 0; k < iterations; ++k) {
        Vector w = apply(v);
        rayleigh = v.dot(w);
        const double norm = w.norm();
        if (norm == 0.0) break;
        v = w / norm;
    }
    rayleigh = std::max(rayleigh, v.dot(apply(v)));
    if (!(rayleigh > 0.0)) {
        // Curvature vanishes on the subspace; fall back to the full operator.
        if (zero_sum_subspace) return lipschitz_estimate(gram, iterations, false);
        throw DomainError("power iteration found no positive curvature");
    }
    return kLipschitzSafety * rayleigh;
}

double lipschitz_estimate(const EndmemberMatrix& m, int iterations) {
    return lipschitz_estimate(m.gram(), iterations, false);
}

double simplex_lipschitz_estimate(const EndmemberMatrix& m, int iterations) {
    return lipschitz_estimate(m.gram(), iterations, true);
}

LineSearchResult armijo_search(const CostFunction& cost, const Vector& grad_at_point,
                               const Vector& point, const Vector& direction,
                               const ArmijoParams& params, double gamma_max) {
    return armijo_search(cost, grad_at_point, point, direction, params, gamma_max, cost(point));
}

LineSearchResult armijo_search(const CostFunction& cost, const Vector& grad_at_point,
                               const Vector& point, const Vector& direction,
                               const ArmijoParams& params, double gamma_max,
                               double cost_at_point) {
    params.validate();
    if (grad_at_point.size() != point.size())
        throw DimensionError("gradient length", point.size(), grad_at_point.size());
    if (direction.size() != point.size())
        throw DimensionError("direction length", point.size(), direction.size());
    if (!(gamma_max > 0.0)) throw DomainError("gamma_max must be > 0");

    const double slope = grad_at_point.dot(direction);
    if (!(slope < 0.0))
        throw DomainError("not a descent direction (g^T p = " + std::to_string(slope) + ")");

    const double seed = -slope / (params.lipschitz * direction.squaredNorm());
    LineSearchResult result;
    result.initial_step = std::min(seed, kInteriorFraction * gamma_max);

    double step = result.initial_step;
    Vector best = point;
    double best_cost = cost_at_point;
    for (int backtracks = 0; backtracks <= params.max_backtracks; ++backtracks) {
        const Vector trial = point + step * direction;
        const double value = cost(trial);
        if (std::isfinite(value) && value - cost_at_point <= params.sigma * step * slope) {
            result.step = step;
            result.backtracks = backtracks;
            result.new_cost = value;
            return result;
        }
        if (std::isfinite(value) && value < best_cost) {
            best = trial;
            best_cost = value;
        }
        step *= params.beta;
    }
    throw LineSearchError("Armijo rule not satisfied after " +
                              std::to_string(params.max_backtracks) +
                              " backtracks; cost and gradient are likely inconsistent",
                          std::move(best), best_cost);
}

}  // namespace unmix
