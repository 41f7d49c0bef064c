#pragma once

// Linear mixing model y = M a + e, the least-squares cost and its gradient,
// and first-order optimality diagnostics shared by every solver.

#include <cstdint>

#include <Eigen/Core>

#include "unmix/error.hpp"

namespace unmix {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// L x R matrix whose columns are endmember spectra. Entries are finite and
/// non-negative, and there are at least as many bands as endmembers.
class EndmemberMatrix {
public:
    explicit EndmemberMatrix(Matrix data);

    const Matrix& data() const noexcept { return data_; }
    Index bands() const noexcept { return data_.rows(); }
    Index endmembers() const noexcept { return data_.cols(); }

    /// M^T M, computed once at construction.
    const Matrix& gram() const noexcept { return gram_; }

private:
    Matrix data_;
    Matrix gram_;
};

/// Observed spectrum, one finite value per band.
class Pixel {
public:
    explicit Pixel(Vector values);

    const Vector& values() const noexcept { return values_; }
    Index bands() const noexcept { return values_.size(); }

private:
    Vector values_;
};

/// Point of the probability simplex. Construction rejects negative or
/// non-finite components and renormalizes so the sum is 1 to rounding.
class AbundanceVector {
public:
    /// Accepts vectors whose sum is within `sum_tolerance` of 1.
    explicit AbundanceVector(Vector values, double sum_tolerance = 1e-6);

    /// Scales an arbitrary non-negative vector with positive sum onto the simplex.
    static AbundanceVector normalized(const Vector& weights);
    static AbundanceVector uniform(Index size);

    const Vector& values() const noexcept { return values_; }
    Index size() const noexcept { return values_.size(); }
    double operator[](Index i) const { return values_[i]; }

private:
    struct Trusted {};
    AbundanceVector(Vector values, Trusted);

    Vector values_;
};

/// i.i.d. zero-mean Gaussian noise with standard deviation `sigma`.
struct NoiseModel {
    double sigma = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class ConstraintSet {
    nonnegative,  ///< a >= 0
    simplex,      ///< a >= 0 and sum(a) = 1
};

/// First-order optimality audit of a candidate point.
struct KKTReport {
    /// Lagrange multiplier estimates for the positivity constraints.
    Vector multipliers;
    /// a_r * g_r, where g is the (centered, on the simplex) gradient.
    Vector complementarity;
    double max_complementarity = 0.0;
    /// max |g_r| over components with a_r above the boundary tolerance.
    double stationarity_residual = 0.0;
    /// Largest violation of a >= 0 and, on the simplex, of sum(a) = 1.
    double feasibility_violation = 0.0;
};

/// Components at or below this value count as active constraints.
inline constexpr double kBoundaryTolerance = 1e-9;

/// J(a) = 1/2 ||y - M a||^2.
double least_squares_cost(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha);

/// -grad J(a) = M^T (y - M a).
Vector negative_gradient(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha);

KKTReport kkt_report(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha,
                     ConstraintSet constraints);

/// Same audit from a precomputed gradient (not negated) of any cost.
KKTReport kkt_report_from_gradient(const Vector& alpha, const Vector& gradient,
                                   ConstraintSet constraints);

/// Throws DimensionError unless y has M.bands() entries and alpha has M.endmembers().
void check_dimensions(const Pixel& y, const EndmemberMatrix& m, const Vector& alpha);

}  // namespace unmix
