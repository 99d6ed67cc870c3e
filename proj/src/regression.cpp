#include "bdsde/regression.hpp"

#include "bdsde/error.hpp"
#include "bdsde/stats.hpp"

#include <algorithm>
#include <cmath>

namespace bdsde {

namespace {

double quantile(std::vector<double> sorted_copy, double q) {
    if (q <= 0.0) {
        return *std::min_element(sorted_copy.begin(), sorted_copy.end());
    }
    if (q >= 1.0) {
        return *std::max_element(sorted_copy.begin(), sorted_copy.end());
    }
    const auto k = static_cast<std::size_t>(q * static_cast<double>(sorted_copy.size() - 1));
    std::nth_element(sorted_copy.begin(), sorted_copy.begin() + static_cast<std::ptrdiff_t>(k),
                     sorted_copy.end());
    return sorted_copy[k];
}

bool all_equal(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

} // namespace

Regressor::Regressor(std::span<const double> states, const RegressionBasis& basis)
    : n_(states.size()), requested_(std::max(basis.degree, 0)) {
    if (states.empty()) {
        throw PreconditionError("regression needs at least one state");
    }
    if (!(basis.lower_quantile >= 0.0 && basis.upper_quantile <= 1.0 &&
          basis.lower_quantile < basis.upper_quantile)) {
        throw ConfigError("truncation quantiles must satisfy 0 <= lower < upper <= 1");
    }
    const double smin = *std::min_element(states.begin(), states.end());
    const double smax = *std::max_element(states.begin(), states.end());
    if (requested_ == 0 || smin == smax) {
        degree_ = 0;
        lo_ = smin;
        hi_ = smax;
        return;
    }
    std::vector<double> copy(states.begin(), states.end());
    lo_ = quantile(copy, basis.lower_quantile);
    hi_ = quantile(copy, basis.upper_quantile);
    if (!(hi_ > lo_)) {
        degree_ = 0;
        return;
    }
    std::vector<double> clamped(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        clamped[i] = std::clamp(states[i], lo_, hi_);
    }
    const MeanSe m = mean_se(clamped);
    center_ = m.mean;
    scale_ = m.se * std::sqrt(static_cast<double>(n_));
    if (!(scale_ > 0.0)) {
        degree_ = 0;
        return;
    }
    const auto rows = static_cast<std::ptrdiff_t>(n_);
    // Too few distinct states for the requested degree lowers the rank; drop
    // degrees until the design has full column rank.
    int degree = requested_;
    while (degree > 0) {
        Eigen::MatrixXd design(rows, degree + 1);
        for (std::ptrdiff_t i = 0; i < rows; ++i) {
            const double u = (clamped[static_cast<std::size_t>(i)] - center_) / scale_;
            double p = 1.0;
            for (int k = 0; k <= degree; ++k) {
                design(i, k) = p;
                p *= u;
            }
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        qr.setThreshold(1e-10);
        if (qr.rank() == degree + 1) {
            Eigen::HouseholderQR<Eigen::MatrixXd> plain(design);
            q_ = plain.householderQ() * Eigen::MatrixXd::Identity(rows, degree + 1);
            r_ = plain.matrixQR().topRows(degree + 1).triangularView<Eigen::Upper>();
            break;
        }
        --degree;
    }
    degree_ = degree;
}

double Regressor::standardize(double x) const {
    return (std::clamp(x, lo_, hi_) - center_) / scale_;
}

void Regressor::project(std::span<const double> targets, std::span<double> fitted) const {
    if (targets.size() != n_ || fitted.size() != n_) {
        throw PreconditionError("regression targets must match the fitted states");
    }
    if (all_equal(targets)) {
        std::fill(fitted.begin(), fitted.end(), targets[0]);
        return;
    }
    if (degree_ == 0) {
        std::fill(fitted.begin(), fitted.end(), shifted_mean(targets));
        return;
    }
    const Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<std::ptrdiff_t>(n_));
    const Eigen::VectorXd proj = q_.transpose() * y;
    Eigen::Map<Eigen::VectorXd> out(fitted.data(), static_cast<std::ptrdiff_t>(n_));
    out.noalias() = q_ * proj;
}

Eigen::VectorXd Regressor::coefficients(std::span<const double> targets) const {
    if (targets.size() != n_) {
        throw PreconditionError("regression targets must match the fitted states");
    }
    if (degree_ == 0 || all_equal(targets)) {
        Eigen::VectorXd c = Eigen::VectorXd::Zero(std::max(degree_, 0) + 1);
        c(0) = shifted_mean(targets);
        return c;
    }
    const Eigen::Map<const Eigen::VectorXd> y(targets.data(), static_cast<std::ptrdiff_t>(n_));
    const Eigen::VectorXd proj = q_.transpose() * y;
    return r_.triangularView<Eigen::Upper>().solve(proj);
}

double Regressor::evaluate(const Eigen::VectorXd& coefficients, double state) const {
    if (degree_ == 0) {
        return coefficients(0);
    }
    const double u = standardize(state);
    double acc = 0.0;
    for (std::ptrdiff_t k = coefficients.size() - 1; k >= 0; --k) {
        acc = acc * u + coefficients(k);
    }
    return acc;
}

RegressionFit regress_conditional(std::span<const double> targets, std::span<const double> states,
                                  const RegressionBasis& basis) {
    if (targets.size() != states.size()) {
        throw PreconditionError("targets and states must have equal length");
    }
    const Regressor reg(states, basis);
    RegressionFit fit;
    fit.degree = reg.degree();
    fit.fitted.resize(targets.size());
    reg.project(targets, fit.fitted);
    fit.coefficients = reg.coefficients(targets);
    return fit;
}

} // namespace bdsde
