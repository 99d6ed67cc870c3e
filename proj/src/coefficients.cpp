#include "bdsde/coefficients.hpp"

#include "bdsde/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace bdsde {

std::vector<std::string> AssumptionCard::validate() const {
    std::vector<std::string> errors;
    if (!(C_f > 0.0)) {
        errors.emplace_back("C_f must be > 0");
    }
    if (!(C_g > 0.0)) {
        errors.emplace_back("C_g must be > 0");
    }
    if (!(alpha_g > 0.0 && alpha_g < 1.0)) {
        errors.emplace_back("alpha_g must lie in (0, 1)");
    }
    if (!(eps_1 > 0.0)) {
        errors.emplace_back("eps_1 must be > 0");
    }
    if (C_0 < 0.0) {
        errors.emplace_back("C_0 must be >= 0");
    }
    if (claims.negative_moment) {
        const double bound = std::min((1.0 - 2.0 * C_1) / 2.0, 0.0);
        if (!(beta < bound)) {
            std::ostringstream os;
            os << "beta must be < min((1 - 2 C_1)/2, 0) = " << bound;
            errors.push_back(os.str());
        }
    }
    if (claims.envelope_terminal && !(eps > 0.0 && R_0 > 0.0)) {
        errors.emplace_back("eps and R_0 must be > 0");
    }
    if (claims.holder_terminal && !(delta_R > 0.0 && C_R > 0.0)) {
        errors.emplace_back("delta_R and C_R must be > 0");
    }
    if (claims.forward_growth && !(c_1 > 0.0)) {
        errors.emplace_back("c_1 must be > 0");
    }
    if (claims.terminal_growth && !(c_2 > 0.0 && gamma > 0.0)) {
        errors.emplace_back("c_2 and gamma must be > 0");
    }
    return errors;
}

// Drivers -------------------------------------------------------------------

DriverSpec zero_driver() {
    return {"zero", [](double, double, double, double) { return 0.0; }, false};
}

DriverSpec arctan_driver() {
    return {"arctan",
            [](double, double, double y, double z) {
                return y + std::atan(y) * (1.0 + std::sin(z));
            },
            false};
}

DriverSpec linear_driver(double lambda, double mu) {
    std::ostringstream name;
    name << "linear(" << lambda << "," << mu << ")";
    return {name.str(),
            [lambda, mu](double, double, double y, double z) { return lambda * y + mu * z; },
            false};
}

DriverSpec envelope_driver(double f0_abs, double lipschitz, int sign) {
    const double s = sign >= 0 ? 1.0 : -1.0;
    return {sign >= 0 ? "envelope_upper" : "envelope_lower",
            [f0_abs, lipschitz, s](double, double, double y, double z) {
                return s * (f0_abs + lipschitz * (std::abs(y) + std::abs(z)));
            },
            false};
}

DriverSpec shifted_driver(const DriverSpec& base, double shift) {
    auto f = base.f;
    return {base.name + "+shift",
            [f, shift](double t, double x, double y, double z) { return f(t, x, y, z) + shift; },
            base.depends_on_x};
}

// Loadings ------------------------------------------------------------------

NoiseLoadingSpec zero_loading() {
    return {"zero", [](double, double) { return 0.0; }, true, true};
}

NoiseLoadingSpec constant_loading(double a) {
    std::ostringstream name;
    name << "constant(" << a << ")";
    return {name.str(), [a](double, double) { return a; }, true, a == 0.0};
}

// Terminals -----------------------------------------------------------------

namespace {
ScalarFn identity_fn() {
    return [](double x) { return x; };
}
} // namespace

TerminalFamily identity_terminal() {
    return {"identity", TerminalForm::Deterministic, [](double x, double) { return x; },
            Monotone::Increasing, identity_fn()};
}

TerminalFamily cubic_terminal() {
    return {"cubic", TerminalForm::Deterministic, [](double x, double) { return x * x * x; },
            Monotone::Increasing, [](double x) { return x * x * x; }};
}

TerminalFamily shift_terminal(double c) {
    std::ostringstream name;
    name << "shift(" << c << ")";
    return {name.str(), TerminalForm::Deterministic, [c](double x, double) { return x + c; },
            Monotone::Increasing, identity_fn()};
}

TerminalFamily constant_terminal(double c) {
    std::ostringstream name;
    name << "constant(" << c << ")";
    return {name.str(), TerminalForm::Deterministic, [c](double, double) { return c; },
            Monotone::None, identity_fn()};
}

TerminalFamily brownian_shift_terminal() {
    return {"brownian_shift", TerminalForm::Composite,
            [](double x, double w) { return x + w; }, Monotone::Increasing, identity_fn()};
}

TerminalFamily forward_terminal(const ForwardSpec& fwd) {
    auto h = fwd.h;
    return {"forward(" + fwd.name + ")", TerminalForm::ForwardComposite,
            [h](double x, double) { return h(x); }, fwd.h_monotone, h};
}

// Forward specs -------------------------------------------------------------

ForwardSpec still_forward(ScalarFn h) {
    return {"still", [](double) { return 0.0; }, [](double) { return 0.0; }, std::move(h),
            Monotone::None};
}

ForwardSpec additive_forward(double mu, double sigma, ScalarFn h) {
    std::ostringstream name;
    name << "additive(" << mu << "," << sigma << ")";
    return {name.str(), [mu](double) { return mu; }, [sigma](double) { return sigma; },
            std::move(h), Monotone::None};
}

ForwardSpec geometric_forward(double mu, double sigma, ScalarFn h) {
    std::ostringstream name;
    name << "geometric(" << mu << "," << sigma << ")";
    return {name.str(), [mu](double x) { return mu * x; }, [sigma](double x) { return sigma * x; },
            std::move(h), Monotone::None};
}

// Catalog -------------------------------------------------------------------

namespace {

AssumptionCard pure_card(double c_f) {
    AssumptionCard card;
    card.C_f = c_f;
    card.C_g = 1.0;
    card.alpha_g = 0.5;
    card.C_0 = 0.1;
    card.C_1 = 0.1;
    card.eps_1 = 1.0;
    card.R_0 = 1.0;
    card.eps = 0.9;
    card.beta = -0.25;
    card.claims.bounded_f0 = true;
    card.claims.sign_f = true;
    card.claims.monotone_terminal = true;
    card.claims.holder_terminal = true;
    card.claims.envelope_terminal = true;
    card.claims.negative_moment = true;
    return card;
}

std::map<std::string, Preset> make_catalog() {
    std::map<std::string, Preset> cat;
    auto add = [&cat](Preset p) { cat.emplace(p.name, std::move(p)); };

    add({"zero", zero_driver(), zero_loading(), identity_terminal(), std::nullopt, pure_card(1.0)});
    add({"paper_arctan", arctan_driver(), constant_loading(0.3), identity_terminal(), std::nullopt,
         pure_card(3.0)});
    add({"identity_terminal", zero_driver(), zero_loading(), identity_terminal(), std::nullopt,
         pure_card(1.0)});
    {
        AssumptionCard card = pure_card(1.0);
        card.C_R = 1.0e4; // |x^3 - y^3|^2 <= (3 R^2)^2 |x - y|^2 on the probe box
        card.eps = 0.9;   // x^3 / h(x) with h = x^3
        add({"cubic_terminal", zero_driver(), zero_loading(), cubic_terminal(), std::nullopt, card});
    }
    add({"shift_terminal", zero_driver(), zero_loading(), shift_terminal(1.0), std::nullopt,
         [] {
             AssumptionCard card = pure_card(1.0);
             card.R_0 = 20.0; // (x + 1) / x > 0.9 needs |x| >= 10
             return card;
         }()});
    add({"constant_loading", zero_driver(), constant_loading(0.3), identity_terminal(),
         std::nullopt, pure_card(1.0)});
    {
        AssumptionCard card = pure_card(0.5);
        card.claims = Claims{};
        card.claims.bounded_f0 = true;
        card.claims.sign_f = false;
        add({"linear_decay", linear_driver(-0.5, 0.0), constant_loading(0.3), constant_terminal(1.0),
             std::nullopt, card});
    }
    {
        AssumptionCard card = pure_card(0.5);
        card.claims.sign_f = false;
        card.claims.negative_moment = false;
        add({"linear_mixed", linear_driver(-0.5, 0.2), constant_loading(0.3), identity_terminal(),
             std::nullopt, card});
    }
    {
        AssumptionCard card;
        card.claims = Claims{};
        auto fwd = additive_forward(0.0, std::sqrt(2.0), [](double x) { return x * x; });
        fwd.name = "heat";
        add({"heat", zero_driver(), zero_loading(), forward_terminal(fwd), fwd, card});
    }
    {
        AssumptionCard card;
        card.claims = Claims{};
        card.claims.forward_growth = true;
        card.claims.terminal_growth = true;
        card.c_1 = 0.25;
        card.c_2 = 1.0;
        card.gamma = 1.0;
        auto fwd = geometric_forward(0.05, 0.2, [](double x) { return x; });
        fwd.name = "gbm";
        fwd.h_monotone = Monotone::Increasing;
        add({"gbm", zero_driver(), zero_loading(), forward_terminal(fwd), fwd, card});
    }
    {
        AssumptionCard card;
        card.claims = Claims{};
        auto fwd = additive_forward(0.0, 1.0, [](double x) { return x; });
        fwd.name = "brownian";
        fwd.h_monotone = Monotone::Increasing;
        add({"brownian_loaded", zero_driver(), constant_loading(0.2), forward_terminal(fwd), fwd,
             card});
    }
    {
        AssumptionCard card;
        card.claims = Claims{};
        auto fwd = additive_forward(0.0, 1.0, [](double x) { return x * x * x; });
        fwd.name = "brownian_cubic";
        fwd.h_monotone = Monotone::Increasing;
        add({"brownian_cubic", zero_driver(), zero_loading(), forward_terminal(fwd), fwd, card});
    }
    return cat;
}

} // namespace

const std::map<std::string, Preset>& builtin_catalog() {
    static const std::map<std::string, Preset> catalog = make_catalog();
    return catalog;
}

const Preset& lookup_preset(const std::string& name) {
    const auto& cat = builtin_catalog();
    const auto it = cat.find(name);
    if (it == cat.end()) {
        std::string known;
        for (const auto& [key, _] : cat) {
            known += (known.empty() ? "" : ", ") + key;
        }
        throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
    }
    return it->second;
}

// Audit ---------------------------------------------------------------------

bool AuditReport::passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const AuditEntry& e) { return e.passed; });
}

const AuditEntry* AuditReport::find(const std::string& assumption) const {
    for (const auto& e : entries) {
        if (e.assumption == assumption) {
            return &e;
        }
    }
    return nullptr;
}

namespace {

// Auxiliary stream ids for probe draws.
constexpr std::uint32_t kProbeStream = 2;

class Prober {
public:
    Prober(const RngSpec& rng, std::uint32_t check) : rng_(rng), check_(check) {}

    double uniform(std::size_t probe, std::uint32_t slot, double lo, double hi) const {
        const double u = rng_.uniform(kProbeStream, (static_cast<std::uint64_t>(check_) << 40) | probe,
                                      slot);
        return lo + (hi - lo) * u;
    }

    /// Perturbation magnitude spread log-uniformly over [1e-5, 1].
    double scale(std::size_t probe, std::uint32_t slot) const {
        return std::pow(10.0, uniform(probe, slot, -5.0, 0.0));
    }

private:
    RngSpec rng_;
    std::uint32_t check_;
};

bool finite(double v) { return std::isfinite(v); }

// Maps u in (-1, 1) to a magnitude in [0.5, 1) with the sign of u, so steps never vanish.
double signed_unit(double u) { return std::copysign(0.5 + 0.5 * std::abs(u), u); }

// Probe ratios that hit a declared constant exactly can overshoot it by rounding.
bool within(double worst, double declared) { return worst <= declared * (1.0 + 1e-7); }

AuditEntry audit_lipschitz_f(const DriverSpec& f, const AssumptionCard& card, std::size_t n,
                             const RngSpec& rng, const ProbeBox& box) {
    AuditEntry e{"H1_f", 0.0, card.C_f, true, 0, ""};
    const Prober p(rng, 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = p.uniform(i, 0, 0.0, box.horizon);
        const double x = p.uniform(i, 1, -box.x_range, box.x_range);
        const double y = p.uniform(i, 2, -box.y_range, box.y_range);
        const double z = p.uniform(i, 3, -box.z_range, box.z_range);
        const double s = p.scale(i, 4);
        // Thirds of the probes move y only, z only, or both.
        const std::size_t mode = i % 3;
        const double dy = mode == 1 ? 0.0 : s * signed_unit(p.uniform(i, 5, -1.0, 1.0));
        const double dz = mode == 0 ? 0.0 : s * signed_unit(p.uniform(i, 6, -1.0, 1.0));
        const double y1 = y + dy;
        const double z1 = z + dz;
        const double f0 = f(t, x, y, z);
        const double f1 = f(t, x, y1, z1);
        if (!finite(f0) || !finite(f1)) {
            ++e.non_finite;
            continue;
        }
        const double denom = std::abs(y1 - y) + std::abs(z1 - z);
        if (denom > 0.0) {
            e.worst = std::max(e.worst, std::abs(f1 - f0) / denom);
        }
    }
    e.passed = e.non_finite == 0 && within(e.worst, card.C_f);
    return e;
}

void audit_loading(const NoiseLoadingSpec& a, const AssumptionCard& card, std::size_t n,
                   const RngSpec& rng, const ProbeBox& box, AuditReport& report) {
    const Prober p(rng, 2);
    double sup_a = 0.0;
    std::size_t bad = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = p.uniform(i, 0, 0.0, box.horizon);
        const double x = a.spatially_constant ? 0.0 : p.uniform(i, 1, -box.x_range, box.x_range);
        const double v = a(t, x);
        if (!finite(v)) {
            ++bad;
            continue;
        }
        sup_a = std::max(sup_a, std::abs(v));
    }
    if (card.claims.lipschitz_g) {
        // |a y - a y'|^2 = a^2 |y - y'|^2 <= C_g |y - y'|^2 + alpha_g |z - z'|^2
        const double ratio = sup_a * sup_a / card.C_g;
        report.entries.push_back({"H1_g", ratio, 1.0, bad == 0 && within(ratio, 1.0), bad, ""});
    }
    if (card.claims.linear_g) {
        report.entries.push_back(
            {"H2_g", sup_a, card.C_g / 2.0, bad == 0 && sup_a < card.C_g / 2.0, bad, ""});
    }
}

AuditEntry audit_bounded_f0(const DriverSpec& f, const AssumptionCard& card, std::size_t n,
                            const RngSpec& rng, const ProbeBox& box) {
    AuditEntry e{"H2_f", 0.0, card.C_0, true, 0, ""};
    const Prober p(rng, 3);
    constexpr int kSteps = 64;
    const std::size_t xs = std::max<std::size_t>(1, n / kSteps);
    for (std::size_t i = 0; i < xs; ++i) {
        const double x = f.depends_on_x ? p.uniform(i, 0, -box.x_range, box.x_range) : 0.0;
        double integral = 0.0;
        for (int k = 0; k < kSteps; ++k) {
            const double t = box.horizon * k / kSteps;
            const double v = f(t, x, 0.0, 0.0);
            if (!finite(v)) {
                ++e.non_finite;
                continue;
            }
            integral += std::abs(v) * box.horizon / kSteps;
        }
        e.worst = std::max(e.worst, integral);
    }
    e.passed = e.non_finite == 0 && within(e.worst, card.C_0);
    return e;
}

AuditEntry audit_sign_f(const DriverSpec& f, const AssumptionCard& card, std::size_t n,
                        const RngSpec& rng, const ProbeBox& box) {
    // worst = sup of -y f / z^2 over |y| <= eps_1; a probe with z = 0 and y f < 0
    // makes the hypothesis fail outright.
    AuditEntry e{"H2'_f", 0.0, card.C_1, true, 0, ""};
    const Prober p(rng, 4);
    for (std::size_t i = 0; i < n; ++i) {
        const double t = p.uniform(i, 0, 0.0, box.horizon);
        const double x = p.uniform(i, 1, -box.x_range, box.x_range);
        const double y = p.uniform(i, 2, -card.eps_1, card.eps_1);
        const double z = p.uniform(i, 3, -box.z_range, box.z_range);
        const double v = y * f(t, x, y, z);
        if (!finite(v)) {
            ++e.non_finite;
            continue;
        }
        if (z == 0.0) {
            if (v < 0.0) {
                e.worst = std::numeric_limits<double>::infinity();
            }
            continue;
        }
        e.worst = std::max(e.worst, -v / (z * z));
    }
    e.passed = e.non_finite == 0 && within(e.worst, card.C_1);
    return e;
}

void audit_terminal(const TerminalFamily& xi, const AssumptionCard& card, std::size_t n,
                    const RngSpec& rng, const ProbeBox& box, AuditReport& report) {
    const Prober p(rng, 5);
    const bool random_w = xi.form == TerminalForm::Composite;
    auto w_of = [&](std::size_t i) {
        return random_w ? std::sqrt(box.horizon) * p.uniform(i, 7, -3.0, 3.0) : 0.0;
    };
    if (card.claims.monotone_terminal) {
        AuditEntry e{"H1_xi", 0.0, 0.0, true, 0, ""};
        if (xi.monotone == Monotone::None) {
            e.passed = false;
            e.detail = "terminal family is not flagged monotone";
        } else {
            const double dir = xi.monotone == Monotone::Increasing ? 1.0 : -1.0;
            std::size_t violations = 0;
            for (std::size_t i = 0; i < n; ++i) {
                const double x = p.uniform(i, 0, -box.x_range, box.x_range);
                const double dx = p.scale(i, 1);
                const double w = w_of(i);
                const double a = xi(x, w);
                const double b = xi(x + dx, w);
                if (!finite(a) || !finite(b)) {
                    ++e.non_finite;
                    continue;
                }
                if (!(dir * (b - a) > 0.0)) {
                    ++violations;
                }
            }
            e.worst = static_cast<double>(violations);
            e.passed = violations == 0 && e.non_finite == 0;
        }
        report.entries.push_back(e);
    }
    if (card.claims.holder_terminal) {
        AuditEntry e{"H2_xi", 0.0, 1.0, true, 0, ""};
        for (std::size_t i = 0; i < n; ++i) {
            const double x = p.uniform(i, 2, -box.x_range, box.x_range);
            const double y = p.uniform(i, 3, -box.x_range, box.x_range);
            const double w = w_of(i);
            const double d = xi(x, w) - xi(y, w);
            if (!finite(d)) {
                ++e.non_finite;
                continue;
            }
            const double bound = card.C_R * std::pow(std::abs(x - y), 1.0 + card.delta_R);
            if (bound > 0.0) {
                e.worst = std::max(e.worst, d * d / bound);
            }
        }
        e.passed = e.non_finite == 0 && within(e.worst, 1.0);
        report.entries.push_back(e);
    }
    if (card.claims.envelope_terminal) {
        AuditEntry e{"H3_xi", std::numeric_limits<double>::infinity(), card.eps, true, 0, ""};
        if (!xi.h) {
            e.passed = false;
            e.detail = "terminal family has no growth function h";
        } else {
            for (std::size_t i = 0; i < n; ++i) {
                const double mag = p.uniform(i, 4, card.R_0, card.R_0 + 4.0 * box.x_range);
                const double x = p.uniform(i, 5, 0.0, 1.0) < 0.5 ? -mag : mag;
                const double r = xi(x, w_of(i)) / xi.h(x);
                if (!finite(r)) {
                    ++e.non_finite;
                    continue;
                }
                e.worst = std::min(e.worst, r);
            }
            e.passed = e.non_finite == 0 && e.worst > card.eps;
        }
        report.entries.push_back(e);
    }
    if (card.claims.negative_moment) {
        // liminf E|xi(x)|^{4 beta} = 0: the moment must shrink as |x| grows.
        auto moment = [&](double x) {
            double acc = 0.0;
            for (std::size_t i = 0; i < 64; ++i) {
                acc += std::pow(std::abs(xi(x, w_of(i))), 4.0 * card.beta);
            }
            return acc / 64.0;
        };
        const double far = moment(16.0 * box.x_range) + moment(-16.0 * box.x_range);
        const double near = moment(4.0 * box.x_range) + moment(-4.0 * box.x_range);
        AuditEntry e{"H3'_xi", far, near, finite(far) && far < near, 0, ""};
        report.entries.push_back(e);
    }
}

void audit_forward(const ForwardSpec& fwd, const AssumptionCard& card, std::size_t n,
                   const RngSpec& rng, const ProbeBox& box, AuditReport& report) {
    const Prober p(rng, 6);
    if (card.claims.forward_growth) {
        AuditEntry e{"C2_sigma_b", 0.0, card.c_1, true, 0, ""};
        for (std::size_t i = 0; i < n; ++i) {
            const double x = p.uniform(i, 0, -box.x_range, box.x_range);
            const double v = std::abs(fwd.b(x)) + std::abs(fwd.sigma(x));
            if (!finite(v)) {
                ++e.non_finite;
                continue;
            }
            if (x == 0.0) {
                if (v > 0.0) {
                    e.worst = std::numeric_limits<double>::infinity();
                }
                continue;
            }
            e.worst = std::max(e.worst, v / std::abs(x));
        }
        e.passed = e.non_finite == 0 && within(e.worst, card.c_1);
        report.entries.push_back(e);
    }
    if (card.claims.terminal_growth) {
        AuditEntry e{"C3_h", std::numeric_limits<double>::infinity(), card.c_2, true, 0, ""};
        for (std::size_t i = 0; i < n; ++i) {
            const double x = p.uniform(i, 1, -box.x_range, box.x_range);
            if (x == 0.0) {
                continue;
            }
            const double r = std::abs(fwd.h(x)) / std::pow(std::abs(x), card.gamma);
            if (!finite(r)) {
                ++e.non_finite;
                continue;
            }
            e.worst = std::min(e.worst, r);
        }
        e.passed = e.non_finite == 0 && e.worst >= card.c_2 * (1.0 - 1e-12);
        report.entries.push_back(e);
    }
}

} // namespace

AuditReport audit_assumptions(const AuditTarget& target, const AssumptionCard& card,
                              std::size_t probe_count, const RngSpec& rng, const ProbeBox& box) {
    if (probe_count < 1) {
        throw PreconditionError("probe_count must be >= 1");
    }
    AuditReport report;
    for (const auto& msg : card.validate()) {
        report.entries.push_back({"card", 0.0, 0.0, false, 0, msg});
    }
    if (target.driver != nullptr) {
        if (card.claims.lipschitz_f) {
            report.entries.push_back(audit_lipschitz_f(*target.driver, card, probe_count, rng, box));
        }
        if (card.claims.bounded_f0) {
            report.entries.push_back(audit_bounded_f0(*target.driver, card, probe_count, rng, box));
        }
        if (card.claims.sign_f) {
            report.entries.push_back(audit_sign_f(*target.driver, card, probe_count, rng, box));
        }
    }
    if (target.loading != nullptr) {
        audit_loading(*target.loading, card, probe_count, rng, box, report);
    }
    if (target.terminal != nullptr) {
        audit_terminal(*target.terminal, card, probe_count, rng, box, report);
    }
    if (target.forward != nullptr) {
        audit_forward(*target.forward, card, probe_count, rng, box, report);
    }
    return report;
}

} // namespace bdsde
