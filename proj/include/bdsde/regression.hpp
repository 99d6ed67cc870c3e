#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace bdsde {

/// Polynomial basis in a standardized state. States outside the truncation
/// quantiles are clamped to the boundary before the basis is evaluated.
struct RegressionBasis {
    int degree = 3;
    double lower_quantile = 0.01;
    double upper_quantile = 0.99;
};

/// Least-squares projector onto the basis evaluated at a fixed set of states.
/// Fitting is done once per state cross-section; project() can then be called
/// for any number of target vectors, which is how the solver reuses one
/// factorization across all B-paths.
class Regressor {
public:
    Regressor() = default;
    Regressor(std::span<const double> states, const RegressionBasis& basis);

    /// Degree actually used after rank reduction; 0 for degenerate states.
    int degree() const { return degree_; }
    int requested_degree() const { return requested_; }
    bool degenerate() const { return degree_ == 0; }
    std::size_t size() const { return n_; }

    /// Fitted values of targets at the states. Writes into fitted (same length).
    void project(std::span<const double> targets, std::span<double> fitted) const;

    /// Coefficients in the standardized monomial basis (1, u, u^2, ...), where
    /// u = (clamp(x) - center) / scale.
    Eigen::VectorXd coefficients(std::span<const double> targets) const;

    /// Evaluates a coefficient vector at an arbitrary state.
    double evaluate(const Eigen::VectorXd& coefficients, double state) const;

    double center() const { return center_; }
    double scale() const { return scale_; }
    double lower_clamp() const { return lo_; }
    double upper_clamp() const { return hi_; }

private:
    double standardize(double x) const;

    std::size_t n_ = 0;
    int requested_ = 0;
    int degree_ = 0;
    double center_ = 0.0;
    double scale_ = 1.0;
    double lo_ = 0.0;
    double hi_ = 0.0;
    Eigen::MatrixXd q_; // orthonormal basis of the design column space, n x (degree + 1)
    Eigen::MatrixXd r_; // upper triangular factor
};

struct RegressionFit {
    Eigen::VectorXd coefficients;
    std::vector<double> fitted;
    int degree = 0;
};

/// One-shot least-squares projection of targets on the basis at states.
RegressionFit regress_conditional(std::span<const double> targets, std::span<const double> states,
                                  const RegressionBasis& basis);

} // namespace bdsde
