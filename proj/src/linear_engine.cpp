#include "bdsde/linear_engine.hpp"

#include "bdsde/error.hpp"
#include "bdsde/parallel.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <string>

namespace bdsde {

LinearBDSDESpec LinearBDSDESpec::constant(const TimeGrid& grid, double a, double b, double c,
                                          double forcing) {
    const std::size_t n = grid.steps() + 1;
    LinearBDSDESpec spec;
    spec.a.assign(n, a);
    spec.b.assign(n, b);
    spec.c.assign(n, c);
    spec.forcing.assign(n, forcing);
    spec.V.assign(n, 0.0);
    spec.bound_f = std::max(std::abs(a), std::abs(b));
    spec.bound_g = std::abs(c);
    return spec;
}

double LinearBDSDESpec::beta_T() const {
    double beta = 0.0;
    for (std::size_t i = 0; i + 1 < V.size(); ++i) {
        beta += std::max(V[i + 1] - V[i], 0.0);
    }
    return beta;
}

std::vector<double> terminal_values(const TerminalFamily& family, double x,
                                    const DriverPaths& paths) {
    if (family.form == TerminalForm::ForwardComposite) {
        throw PreconditionError("forward-composite terminals need forward paths; pass h(X_T) "
                                "values directly");
    }
    const std::size_t m = paths.w_count();
    std::vector<double> out(m);
    if (family.form == TerminalForm::Deterministic) {
        const double v = family(x, 0.0);
        out.assign(m, v);
        return out;
    }
    for (std::size_t w = 0; w < m; ++w) {
        out[w] = family(x, paths.dW.row(static_cast<std::ptrdiff_t>(w)).sum());
    }
    return out;
}

namespace {

void validate(const LinearBDSDESpec& spec, const DriverPaths& paths, std::size_t t_index,
              std::size_t s_index) {
    const std::size_t n = paths.steps() + 1;
    auto check_len = [n](const std::vector<double>& v, const char* name) {
        if (v.size() != n) {
            throw PreconditionError(std::string("linear spec field '") + name +
                                    "' needs one value per node");
        }
    };
    check_len(spec.a, "a");
    check_len(spec.b, "b");
    check_len(spec.c, "c");
    check_len(spec.forcing, "forcing");
    check_len(spec.V, "V");
    if (t_index > s_index || s_index >= n) {
        throw PreconditionError("need t_index <= s_index <= N");
    }
    const double tol = 1e-12;
    for (std::size_t i = 0; i < n; ++i) {
        if (std::abs(spec.a[i]) > spec.bound_f + tol || std::abs(spec.b[i]) > spec.bound_f + tol) {
            std::ostringstream os;
            os << "|a| or |b| exceeds bound " << spec.bound_f << " at node " << i;
            throw ConfigError(os.str());
        }
        if (std::abs(spec.c[i]) > spec.bound_g + tol) {
            std::ostringstream os;
            os << "|c| exceeds bound " << spec.bound_g << " at node " << i;
            throw ConfigError(os.str());
        }
    }
}

// Exponent pieces of Q^t_s. The W-part is read at left nodes, the B-part at
// right nodes (backward Ito). The compensator of each stochastic part uses the
// same node as its integrand so each one-step factor has unit mean.
double w_step(const LinearBDSDESpec& spec, const DriverPaths& paths, std::size_t w, std::size_t i) {
    const double b = spec.b[i];
    return b * paths.dW(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(i)) -
           0.5 * b * b * paths.grid.dt(i);
}

double b_step(const std::vector<double>& c, const DriverPaths& paths, std::size_t bp,
              std::size_t i) {
    const double ci = c[i + 1];
    return ci * paths.dB(static_cast<std::ptrdiff_t>(bp), static_cast<std::ptrdiff_t>(i)) -
           0.5 * ci * ci * paths.grid.dt(i);
}

} // namespace

QFactor q_factor(const LinearBDSDESpec& spec, const DriverPaths& paths, std::size_t t_index,
                 std::size_t s_index) {
    validate(spec, paths, t_index, s_index);
    const std::size_t mw = paths.w_count();
    const std::size_t mb = paths.b_count();
    std::vector<double> we(mw, 0.0);
    std::vector<double> be(mb, 0.0);
    double drift = 0.0;
    for (std::size_t i = t_index; i < s_index; ++i) {
        drift += spec.a[i] * paths.grid.dt(i);
    }
    for (std::size_t w = 0; w < mw; ++w) {
        for (std::size_t i = t_index; i < s_index; ++i) {
            we[w] += w_step(spec, paths, w, i);
        }
    }
    for (std::size_t b = 0; b < mb; ++b) {
        for (std::size_t i = t_index; i < s_index; ++i) {
            be[b] += b_step(spec.c, paths, b, i);
        }
    }
    QFactor q{t_index, s_index, Eigen::MatrixXd(mb, mw)};
    const auto mb_i = static_cast<std::ptrdiff_t>(mb);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t b = 0; b < mb_i; ++b) {
        for (std::size_t w = 0; w < mw; ++w) {
            q.values(b, static_cast<std::ptrdiff_t>(w)) =
                std::exp(we[w] + be[static_cast<std::size_t>(b)] + drift);
        }
    }
    return q;
}

QBoundReport q_conditional_bounds_check(const LinearBDSDESpec& spec, const DriverPaths& paths,
                                        std::size_t t_index, std::size_t s_index) {
    const QFactor q = q_factor(spec, paths, t_index, s_index);
    const std::size_t mb = paths.b_count();
    const double elapsed = paths.grid.node(s_index) - paths.grid.node(t_index);
    QBoundReport r;
    r.lower = std::exp(-(spec.bound_f + spec.bound_g) * elapsed);
    r.upper = std::exp((spec.bound_f + spec.bound_g) * elapsed);
    r.estimates.resize(mb);
    r.se.resize(mb);
    std::size_t inside = 0;
    std::vector<double> row(paths.w_count());
    for (std::size_t b = 0; b < mb; ++b) {
        for (std::size_t w = 0; w < row.size(); ++w) {
            row[w] = q.values(static_cast<std::ptrdiff_t>(b), static_cast<std::ptrdiff_t>(w));
        }
        const MeanSe s = mean_se(row);
        r.estimates[b] = s.mean;
        r.se[b] = s.se;
        if (s.mean >= r.lower - 3.0 * s.se && s.mean <= r.upper + 3.0 * s.se) {
            ++inside;
        }
    }
    r.inside_fraction = static_cast<double>(inside) / static_cast<double>(mb);
    r.pooled = pool(r.estimates, r.se);
    return r;
}

LinearSolution explicit_linear_solution(const LinearBDSDESpec& spec, const DriverPaths& paths,
                                        std::size_t t_index) {
    const std::size_t n = paths.steps();
    validate(spec, paths, t_index, n);
    const std::size_t mw = paths.w_count();
    const std::size_t mb = paths.b_count();
    if (spec.terminal_values.size() != mw) {
        throw PreconditionError("linear spec needs one terminal value per W-path");
    }
    for (std::size_t w = 0; w < mw; ++w) {
        if (!std::isfinite(spec.terminal_values[w])) {
            throw NonFiniteError("non-finite terminal value on W-path " + std::to_string(w), -1,
                                 static_cast<std::ptrdiff_t>(w),
                                 static_cast<std::ptrdiff_t>(n));
        }
    }
    bool path_terms = false;
    for (std::size_t i = t_index; i < n; ++i) {
        if (spec.V[i + 1] != spec.V[i] || spec.forcing[i] != 0.0) {
            path_terms = true;
        }
    }
    // Cumulative exponents from t: column k holds the sum over [t, t + k).
    const std::size_t len = n - t_index + 1;
    Eigen::MatrixXd we = Eigen::MatrixXd::Zero(static_cast<std::ptrdiff_t>(mw),
                                               static_cast<std::ptrdiff_t>(len));
    Eigen::MatrixXd be = Eigen::MatrixXd::Zero(static_cast<std::ptrdiff_t>(mb),
                                               static_cast<std::ptrdiff_t>(len));
    std::vector<double> drift(len, 0.0);
    for (std::size_t k = 1; k < len; ++k) {
        const std::size_t i = t_index + k - 1;
        drift[k] = drift[k - 1] + spec.a[i] * paths.grid.dt(i);
        for (std::size_t w = 0; w < mw; ++w) {
            we(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(k)) =
                we(static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(k - 1)) +
                w_step(spec, paths, w, i);
        }
        for (std::size_t b = 0; b < mb; ++b) {
            be(static_cast<std::ptrdiff_t>(b), static_cast<std::ptrdiff_t>(k)) =
                be(static_cast<std::ptrdiff_t>(b), static_cast<std::ptrdiff_t>(k - 1)) +
                b_step(spec.c, paths, b, i);
        }
    }
    LinearSolution sol;
    sol.per_b.resize(mb);
    sol.per_b_se.resize(mb);
    const auto last = static_cast<std::ptrdiff_t>(len - 1);
    const auto mb_i = static_cast<std::ptrdiff_t>(mb);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t b = 0; b < mb_i; ++b) {
        std::vector<double> contrib(mw);
        for (std::size_t w = 0; w < mw; ++w) {
            const auto wi = static_cast<std::ptrdiff_t>(w);
            double v = 0.0;
            if (path_terms) {
                for (std::size_t k = 0; k + 1 < len; ++k) {
                    const std::size_t i = t_index + k;
                    const auto ki = static_cast<std::ptrdiff_t>(k);
                    const double q = std::exp(we(wi, ki) + be(b, ki) + drift[k]);
                    v += q * (spec.forcing[i] * paths.grid.dt(i) - (spec.V[i + 1] - spec.V[i]));
                }
            }
            const double q_end = std::exp(we(wi, last) + be(b, last) + drift[len - 1]);
            contrib[w] = q_end * spec.terminal_values[w] + v;
        }
        const MeanSe s = mean_se(contrib);
        sol.per_b[static_cast<std::size_t>(b)] = s.mean;
        sol.per_b_se[static_cast<std::size_t>(b)] = s.se;
    }
    sol.pooled = pool(sol.per_b, sol.per_b_se);
    return sol;
}

std::vector<double> bounding_envelope(double x, int sign, const NoiseLoadingSpec& loading,
                                      const AssumptionCard& card, const DriverPaths& paths,
                                      const ScalarFn& h, std::optional<double> eps0,
                                      std::size_t t_index) {
    if (!loading.spatially_constant) {
        throw PreconditionError("envelope needs a spatially constant loading a(s)");
    }
    const std::size_t n = paths.steps();
    if (t_index > n) {
        throw PreconditionError("t_index beyond the last node");
    }
    const double e0 = eps0.value_or(card.eps / 2.0);
    if (!(e0 > 0.0 && e0 < card.eps)) {
        throw ConfigError("eps0 must lie in (0, eps)");
    }
    std::vector<double> a(n + 1);
    for (std::size_t i = 0; i <= n; ++i) {
        a[i] = loading(paths.grid.node(i), 0.0);
    }
    const double s = sign >= 0 ? 1.0 : -1.0;
    const double deterministic =
        s * card.C_f * (paths.grid.horizon() - paths.grid.node(t_index));
    const double scale = h(x) * e0;
    std::vector<double> out(paths.b_count());
    for (std::size_t b = 0; b < out.size(); ++b) {
        double e = deterministic;
        for (std::size_t i = t_index; i < n; ++i) {
            e += b_step(a, paths, b, i);
        }
        out[b] = scale * std::exp(e);
    }
    return out;
}

} // namespace bdsde
