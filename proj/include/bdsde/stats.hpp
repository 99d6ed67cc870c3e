#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace bdsde {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean computed as v[0] + mean(v - v[0]); returns a constant input exactly.
inline double shifted_mean(std::span<const double> v) {
    if (v.empty()) {
        return 0.0;
    }
    const double ref = v[0];
    double acc = 0.0;
    for (double x : v) {
        acc += x - ref;
    }
    return ref + acc / static_cast<double>(v.size());
}

/// Sample mean and standard error of the mean (n - 1 denominator).
inline MeanSe mean_se(std::span<const double> v) {
    MeanSe out;
    out.mean = shifted_mean(v);
    if (v.size() < 2) {
        return out;
    }
    double ss = 0.0;
    for (double x : v) {
        ss += (x - out.mean) * (x - out.mean);
    }
    const double n = static_cast<double>(v.size());
    out.se = std::sqrt(ss / (n - 1.0) / n);
    return out;
}

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

/// Ordinary least-squares fit y = intercept + slope * x.
inline LineFit fit_line(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    double mx = 0.0;
    double my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    LineFit fit;
    fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = (sxx > 0.0 && syy > 0.0) ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

} // namespace bdsde

namespace bdsde {

/// Pools per-B-path estimates that share one set of W-paths. The W-sampling
/// error is common to every B-path and does not average out across them, so
/// the pooled variance is the between-path variance of the mean plus the mean
/// within-path variance.
inline MeanSe pool(std::span<const double> means, std::span<const double> ses) {
    MeanSe between = mean_se(means);
    double within = 0.0;
    for (double s : ses) {
        within += s * s;
    }
    if (!ses.empty()) {
        within /= static_cast<double>(ses.size());
    }
    return {between.mean, std::sqrt(between.se * between.se + within)};
}

} // namespace bdsde
