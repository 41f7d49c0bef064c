#include "unmix/model.hpp"

#include <cmath>
#include <string>

namespace unmix {

namespace {

constexpr double kNegativeTolerance = 1e-12;
constexpr double kSimplexSumTolerance = 1e-6;

bool all_finite(const Eigen::Ref<const Matrix>& x) { return x.allFinite(); }

}  // namespace

EndmemberMatrix::EndmemberMatrix(Matrix data) : data_(std::move(data)) {
    if (data_.cols() < 1) throw DomainError("endmember matrix needs at least one column");
    if (data_.rows() < data_.cols())
        throw DomainError("endmember matrix must have at least as many bands (" +
                          std::to_string(data_.rows()) + ") as endmembers (" +
                          std::to_string(data_.cols()) + ")");
    if (!all_finite(data_)) throw DomainError("endmember matrix has non-finite entries");
    if ((data_.array() < 0.0).any())
        throw DomainError("endmember matrix has negative entries");
    gram_ = data_.transpose() * data_;
}

Pixel::Pixel(Vector values) : values_(std::move(values)) {
    if (values_.size() < 1) throw DomainError("pixel has no bands");
    if (!values_.allFinite()) throw DomainError("pixel has non-finite values");
}

AbundanceVector::AbundanceVector(Vector values, Trusted) : values_(std::move(values)) {}

AbundanceVector::AbundanceVector(Vector values, double sum_tolerance)
    : values_(std::move(values)) {
    if (values_.size() < 1) throw DomainError("abundance vector is empty");
    if (!values_.allFinite()) throw DomainError("abundance vector has non-finite entries");
    for (Index r = 0; r < values_.size(); ++r) {
        if (values_[r] < 0.0)
            throw InfeasibleError("abundance component " + std::to_string(r) +
                                  " is negative (" + std::to_string(values_[r]) + ")");
    }
    const double sum = values_.sum();
    if (std::abs(sum - 1.0) > sum_tolerance)
        throw InfeasibleError("abundances sum to " + std::to_string(sum) + ", not 1");
    values_ /= sum;
}

AbundanceVector AbundanceVector::normalized(const Vector& weights) {
    if (weights.size() < 1) throw DomainError("abundance vector is empty");
    if (!weights.allFinite() || (weights.array() < 0.0).any())
        throw DomainError("weights must be finite and non-negative");
    const double sum = weights.sum();
    if (!(sum > 0.0)) throw DomainError("weights sum to zero");
    return AbundanceVector(Vector(weights / sum), Trusted{});
}

AbundanceVector AbundanceVector::uniform(Index size) {
    if (size < 1) throw DomainError("abundance vector is empty");
    return AbundanceVector(Vector::Constant(size, 1.0 / static_cast<double>(size)), Trusted{});
}

void NoiseModel::validate() const {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw DomainError("noise sigma must be finite and >= 0");
}

void check_dimensions(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha) {
    if (y.bands() != m.bands()) throw DimensionError("pixel band count", m.bands(), y.bands());
    if (alpha.size() != m.endmembers())
        throw DimensionError("abundance vector length", m.endmembers(), alpha.size());
}

double least_squares_cost(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha) {
    check_dimensions(y, m, alpha);
    return 0.5 * (y.values() - m.data() * alpha).squaredNorm();
}

Vector negative_gradient(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha) {
    check_dimensions(y, m, alpha);
    return m.data().transpose() * (y.values() - m.data() * alpha);
}

KKTReport kkt_report_from_gradient(const Vector& alpha, const Vector& gradient,
                                   ConstraintSet constraints) {
    if (gradient.size() != alpha.size())
        throw DimensionError("gradient length", alpha.size(), gradient.size());
    if (!alpha.allFinite() || !gradient.allFinite())
        throw DomainError("KKT audit needs finite point and gradient");

    double negativity = 0.0;
    for (Index r = 0; r < alpha.size(); ++r) {
        if (alpha[r] < -kNegativeTolerance)
            throw InfeasibleError("positivity constraint violated at component " +
                                  std::to_string(r) + " (" + std::to_string(alpha[r]) + ")");
        negativity = std::max(negativity, -alpha[r]);
    }

    KKTReport report;
    Vector g = gradient;
    double sum_violation = 0.0;
    if (constraints == ConstraintSet::simplex) {
        sum_violation = std::abs(alpha.sum() - 1.0);
        if (sum_violation > kSimplexSumTolerance)
            throw InfeasibleError("sum-to-one constraint violated (sum = " +
                                  std::to_string(alpha.sum()) + ")");
        // Reduced gradient through a = u / sum(u).
        g.array() -= alpha.dot(gradient);
    }

    report.multipliers = g;
    report.complementarity = alpha.cwiseProduct(g);
    report.max_complementarity = report.complementarity.cwiseAbs().maxCoeff();
    for (Index r = 0; r < alpha.size(); ++r) {
        if (alpha[r] > kBoundaryTolerance)
            report.stationarity_residual = std::max(report.stationarity_residual, std::abs(g[r]));
    }
    report.feasibility_violation = std::max(negativity, sum_violation);
    return report;
}

KKTReport kkt_report(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha,
                     ConstraintSet constraints) {
    const Vector gradient = -negative_gradient(y, m, alpha);
    return kkt_report_from_gradient(alpha, gradient, constraints);
}

}  // namespace unmix
