#include "bdsde/lsmc.hpp"

#include "bdsde/error.hpp"
#include "bdsde/parallel.hpp"

#include <cmath>
#include <sstream>

namespace bdsde {

ForwardPaths euler_forward(const DriverPaths& paths, const ForwardSpec& fwd, std::size_t t_index,
                           double x) {
    const std::size_t n = paths.steps();
    if (t_index > n) {
        throw PreconditionError("forward start node beyond the grid");
    }
    const auto mw = static_cast<std::ptrdiff_t>(paths.w_count());
    ForwardPaths out{t_index, x, Eigen::MatrixXd(mw, static_cast<std::ptrdiff_t>(n + 1))};
    for (std::size_t i = 0; i <= t_index; ++i) {
        out.X.col(static_cast<std::ptrdiff_t>(i)).setConstant(x);
    }
    std::vector<std::ptrdiff_t> bad_node(static_cast<std::size_t>(mw), -1);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t w = 0; w < mw; ++w) {
        double state = x;
        for (std::size_t i = t_index; i < n; ++i) {
            const auto ii = static_cast<std::ptrdiff_t>(i);
            state = state + fwd.b(state) * paths.grid.dt(i) + fwd.sigma(state) * paths.dW(w, ii);
            out.X(w, ii + 1) = state;
            if (!std::isfinite(state)) {
                bad_node[static_cast<std::size_t>(w)] = ii + 1;
                break;
            }
        }
    }
    // First offending path in index order, independent of scheduling.
    for (std::ptrdiff_t w = 0; w < mw; ++w) {
        const std::ptrdiff_t node = bad_node[static_cast<std::size_t>(w)];
        if (node >= 0) {
            std::ostringstream os;
            os << "non-finite forward state on W-path " << w << " at node " << node;
            throw NonFiniteError(os.str(), -1, w, node);
        }
    }
    return out;
}

std::vector<double> BackwardSolution::y_at(std::size_t node) const {
    std::vector<double> v(b_count());
    for (std::size_t b = 0; b < v.size(); ++b) {
        v[b] = y_mean(static_cast<std::ptrdiff_t>(b), static_cast<std::ptrdiff_t>(node));
    }
    return v;
}

std::vector<double> BackwardSolution::y_se_at(std::size_t node) const {
    std::vector<double> v(b_count());
    for (std::size_t b = 0; b < v.size(); ++b) {
        v[b] = y_se(static_cast<std::ptrdiff_t>(b), static_cast<std::ptrdiff_t>(node));
    }
    return v;
}

namespace {

void audit_or_throw(const DriverPaths& paths, const BdsdeProblem& problem,
                    const SchemeConfig& scheme) {
    if (!problem.card) {
        return;
    }
    AuditTarget target{&problem.driver, &problem.loading, &problem.terminal,
                       problem.forward ? &*problem.forward : nullptr};
    ProbeBox box;
    box.horizon = paths.grid.horizon();
    const AuditReport report =
        audit_assumptions(target, *problem.card, scheme.audit_probes, paths.rng, box);
    if (!report.passed()) {
        std::string msg = "assumption audit failed:";
        for (const auto& e : report.entries) {
            if (!e.passed) {
                std::ostringstream os;
                os << " " << e.assumption << " (worst " << e.worst << " vs " << e.declared;
                if (!e.detail.empty()) {
                    os << ", " << e.detail;
                }
                os << ")";
                msg += os.str();
            }
        }
        throw ConfigError(msg);
    }
}

double sample_sd(std::span<const double> v) {
    return mean_se(v).se * std::sqrt(static_cast<double>(v.size()));
}

struct PathFailure {
    std::ptrdiff_t w = -1;
    std::ptrdiff_t node = -1;
};

} // namespace

BackwardSolution solve_bdsde_lsmc(const DriverPaths& paths, const BdsdeProblem& problem,
                                  const SchemeConfig& scheme) {
    const std::size_t n = paths.steps();
    const std::size_t mw = paths.w_count();
    const std::size_t mb = paths.b_count();
    const std::size_t t0 = problem.t_index;
    if (t0 > n) {
        throw PreconditionError("start node beyond the grid");
    }
    if (problem.terminal.form == TerminalForm::ForwardComposite && !problem.forward) {
        throw PreconditionError("forward-composite terminal needs a forward spec");
    }
    audit_or_throw(paths, problem, scheme);

    BackwardSolution sol;
    sol.t_index = t0;
    if (problem.card && problem.card->claims.lipschitz_f && n > 0 &&
        paths.grid.dt(0) * problem.card->C_f >= 1.0) {
        sol.warnings.emplace_back("step size >= 1/C_f: explicit scheme may be unstable");
    }

    // Regression states per node and terminal values per W-path.
    const bool forward = problem.forward.has_value();
    Eigen::MatrixXd states;
    std::vector<double> terminal(mw);
    if (forward) {
        ForwardPaths fp = euler_forward(paths, *problem.forward, t0, problem.x);
        for (std::size_t w = 0; w < mw; ++w) {
            terminal[w] = problem.forward->h(fp.X(static_cast<std::ptrdiff_t>(w),
                                                  static_cast<std::ptrdiff_t>(n)));
        }
        states = std::move(fp.X);
    } else if (problem.terminal.form == TerminalForm::Composite) {
        states = paths.w_value_matrix();
        for (std::size_t w = 0; w < mw; ++w) {
            terminal[w] = problem.terminal(problem.x, states(static_cast<std::ptrdiff_t>(w),
                                                             static_cast<std::ptrdiff_t>(n)));
        }
    } else {
        terminal.assign(mw, problem.terminal(problem.x, 0.0));
    }
    for (std::size_t w = 0; w < mw; ++w) {
        if (!std::isfinite(terminal[w])) {
            throw NonFiniteError("non-finite terminal value on W-path " + std::to_string(w), -1,
                                 static_cast<std::ptrdiff_t>(w), static_cast<std::ptrdiff_t>(n));
        }
    }
    const bool has_states = states.size() > 0;

    std::vector<Regressor> regressors(n);
    sol.degree_used.assign(n + 1, -1);
    {
        const std::vector<double> zeros(mw, 0.0);
        for (std::size_t i = t0; i < n; ++i) {
            if (has_states) {
                const auto col = states.col(static_cast<std::ptrdiff_t>(i));
                regressors[i] = Regressor(std::span<const double>(col.data(), mw), scheme.basis);
            } else {
                regressors[i] = Regressor(zeros, scheme.basis);
            }
            sol.degree_used[i] = regressors[i].degree();
            if (!regressors[i].degenerate() &&
                regressors[i].degree() < regressors[i].requested_degree()) {
                std::ostringstream os;
                os << "regression degree reduced to " << regressors[i].degree() << " at node " << i;
                sol.warnings.push_back(os.str());
            }
        }
    }

    // Loading values a(t_i, X_i) are W-only, so precompute them once.
    const bool loading_active = !problem.loading.is_zero;
    const bool loading_varies = loading_active && !problem.loading.spatially_constant && has_states;
    std::vector<double> a_scalar(n + 1, 0.0);
    Eigen::MatrixXd a_matrix;
    if (loading_active) {
        for (std::size_t i = 0; i <= n; ++i) {
            a_scalar[i] = problem.loading(paths.grid.node(i), 0.0);
        }
        if (loading_varies) {
            a_matrix.resize(static_cast<std::ptrdiff_t>(mw), static_cast<std::ptrdiff_t>(n + 1));
            for (std::size_t i = t0; i <= n; ++i) {
                for (std::size_t w = 0; w < mw; ++w) {
                    const auto wi = static_cast<std::ptrdiff_t>(w);
                    const auto ii = static_cast<std::ptrdiff_t>(i);
                    a_matrix(wi, ii) = problem.loading(paths.grid.node(i), states(wi, ii));
                }
            }
        }
    }

    const auto nodes = static_cast<std::ptrdiff_t>(n + 1);
    const auto mb_i = static_cast<std::ptrdiff_t>(mb);
    sol.y_mean = Eigen::MatrixXd::Zero(mb_i, nodes);
    sol.y_se = Eigen::MatrixXd::Zero(mb_i, nodes);
    sol.z_mean = Eigen::MatrixXd::Zero(mb_i, nodes - 1);
    sol.z_se = Eigen::MatrixXd::Zero(mb_i, nodes - 1);
    if (scheme.keep_paths) {
        sol.Y.resize(mb);
        sol.Z.resize(mb);
    }
    const bool f_reads_state = forward;
    std::vector<PathFailure> failures(mb);

#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::ptrdiff_t b = 0; b < mb_i; ++b) {
        std::vector<double> y_next(terminal);
        std::vector<double> p_next(terminal);
        std::vector<double> target(mw);
        std::vector<double> y_tilde(mw);
        std::vector<double> z_target(mw);
        std::vector<double> z(mw);
        std::vector<double> y(mw);
        std::vector<double> p(mw);
        Eigen::MatrixXd* Yb = nullptr;
        Eigen::MatrixXd* Zb = nullptr;
        if (scheme.keep_paths) {
            sol.Y[static_cast<std::size_t>(b)].resize(static_cast<std::ptrdiff_t>(mw), nodes);
            sol.Z[static_cast<std::size_t>(b)] =
                Eigen::MatrixXd::Zero(static_cast<std::ptrdiff_t>(mw), nodes - 1);
            Yb = &sol.Y[static_cast<std::size_t>(b)];
            Zb = &sol.Z[static_cast<std::size_t>(b)];
            Yb->col(nodes - 1) = Eigen::Map<const Eigen::VectorXd>(terminal.data(),
                                                                    static_cast<std::ptrdiff_t>(mw));
        }
        {
            const MeanSe s = mean_se(terminal);
            sol.y_mean(b, nodes - 1) = s.mean;
            sol.y_se(b, nodes - 1) = s.se;
        }
        PathFailure& failure = failures[static_cast<std::size_t>(b)];
        for (std::size_t step = n; step-- > t0 && failure.node < 0;) {
            const auto ii = static_cast<std::ptrdiff_t>(step);
            const double dt = paths.grid.dt(step);
            const double t = paths.grid.node(step);
            const double db = paths.dB(b, ii);
            for (std::size_t w = 0; w < mw; ++w) {
                double g = 0.0;
                if (loading_active) {
                    const double a = loading_varies ? a_matrix(static_cast<std::ptrdiff_t>(w), ii + 1)
                                                    : a_scalar[step + 1];
                    g = a * y_next[w] * db;
                    const double gp = a * p_next[w] * db;
                    p[w] = p_next[w] + gp;
                } else {
                    p[w] = p_next[w];
                }
                target[w] = y_next[w] + g;
            }
            const Regressor& reg = regressors[step];
            reg.project(target, y_tilde);
            for (std::size_t w = 0; w < mw; ++w) {
                z_target[w] = (target[w] - y_tilde[w]) * paths.dW(static_cast<std::ptrdiff_t>(w), ii);
            }
            reg.project(z_target, z);
            for (std::size_t w = 0; w < mw; ++w) {
                z[w] /= dt;
                const double x = f_reads_state ? states(static_cast<std::ptrdiff_t>(w), ii) : 0.0;
                const double drift = problem.driver(t, x, y_tilde[w], z[w]) * dt;
                y[w] = y_tilde[w] + drift;
                p[w] += drift;
                if (!std::isfinite(y[w]) || !std::isfinite(z[w])) {
                    failure = {static_cast<std::ptrdiff_t>(w), ii};
                    break;
                }
            }
            if (failure.node >= 0) {
                break;
            }
            const MeanSe ys = mean_se(y);
            sol.y_mean(b, ii) = ys.mean;
            sol.y_se(b, ii) = sample_sd(p) / std::sqrt(static_cast<double>(mw));
            sol.z_mean(b, ii) = mean_se(z).mean;
            sol.z_se(b, ii) = sample_sd(z_target) / dt / std::sqrt(static_cast<double>(mw));
            if (Yb != nullptr) {
                Yb->col(ii) = Eigen::Map<const Eigen::VectorXd>(y.data(),
                                                               static_cast<std::ptrdiff_t>(mw));
                Zb->col(ii) = Eigen::Map<const Eigen::VectorXd>(z.data(),
                                                               static_cast<std::ptrdiff_t>(mw));
            }
            y_next.swap(y);
            p_next.swap(p);
        }
        if (failure.node < 0) {
            for (std::size_t i = 0; i < t0; ++i) {
                const auto ci = static_cast<std::ptrdiff_t>(i);
                sol.y_mean(b, ci) = sol.y_mean(b, static_cast<std::ptrdiff_t>(t0));
                sol.y_se(b, ci) = sol.y_se(b, static_cast<std::ptrdiff_t>(t0));
                if (Yb != nullptr) {
                    Yb->col(ci) = Yb->col(static_cast<std::ptrdiff_t>(t0));
                }
            }
        }
    }
    for (std::size_t b = 0; b < mb; ++b) {
        if (failures[b].node >= 0) {
            std::ostringstream os;
            os << "non-finite Y/Z on B-path " << b << ", W-path " << failures[b].w << " at node "
               << failures[b].node;
            throw NonFiniteError(os.str(), static_cast<std::ptrdiff_t>(b), failures[b].w,
                                 failures[b].node);
        }
    }

    sol.y_pooled.resize(n + 1);
    sol.z_pooled.resize(n);
    std::vector<double> means(mb);
    std::vector<double> ses(mb);
    for (std::size_t i = 0; i <= n; ++i) {
        for (std::size_t b = 0; b < mb; ++b) {
            means[b] = sol.y_mean(static_cast<std::ptrdiff_t>(b), static_cast<std::ptrdiff_t>(i));
            ses[b] = sol.y_se(static_cast<std::ptrdiff_t>(b), static_cast<std::ptrdiff_t>(i));
        }
        sol.y_pooled[i] = pool(means, ses);
        if (i < n) {
            for (std::size_t b = 0; b < mb; ++b) {
                means[b] = sol.z_mean(static_cast<std::ptrdiff_t>(b), static_cast<std::ptrdiff_t>(i));
                ses[b] = sol.z_se(static_cast<std::ptrdiff_t>(b), static_cast<std::ptrdiff_t>(i));
            }
            sol.z_pooled[i] = pool(means, ses);
        }
    }
    return sol;
}

FieldReport spde_field(const std::vector<std::size_t>& t_indices, const std::vector<double>& xs,
                       const BdsdeProblem& problem, const SchemeConfig& scheme,
                       const DriverPaths& paths) {
    if (!problem.forward) {
        throw PreconditionError("field evaluation needs a forward spec");
    }
    if (!problem.forward->h) {
        throw PreconditionError("field evaluation needs a terminal function h");
    }
    FieldReport report;
    report.t_indices = t_indices;
    report.xs = xs;
    report.h_monotone = problem.forward->h_monotone;
    SchemeConfig cfg = scheme;
    cfg.keep_paths = false;
    for (const std::size_t t : t_indices) {
        for (const double x : xs) {
            BdsdeProblem p = problem;
            p.t_index = t;
            p.x = x;
            // One audit per field is enough; the data does not change with (t, x).
            if (!(t == t_indices.front() && x == xs.front())) {
                p.card.reset();
            }
            const BackwardSolution sol = solve_bdsde_lsmc(paths, p, cfg);
            FieldPoint pt;
            pt.t_index = t;
            pt.x = x;
            pt.per_b = sol.y_at(t);
            pt.per_b_se = sol.y_se_at(t);
            pt.pooled = sol.y_pooled[t];
            report.points.push_back(std::move(pt));
        }
    }
    return report;
}

} // namespace bdsde
