#pragma once

#include "bdsde/drivers.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bdsde {

/// Which hypotheses a problem instance claims. The audit only checks claimed
/// ones.
struct Claims {
    bool lipschitz_f = true;        // H1_f
    bool lipschitz_g = true;        // H1_g
    bool bounded_f0 = false;        // H2_f
    bool linear_g = true;           // H2_g
    bool sign_f = false;            // H2'_f
    bool monotone_terminal = false; // H1_xi
    bool holder_terminal = false;   // H2_xi
    bool envelope_terminal = false; // H3_xi
    bool negative_moment = false;   // H3'_xi
    bool forward_growth = false;    // C2_{sigma,b}
    bool terminal_growth = false;   // C3_h
};

/// Declared assumption constants. These are user input; audit_assumptions can
/// falsify them but never infers them.
struct AssumptionCard {
    double C_f = 1.0;
    double C_g = 1.0;
    double alpha_g = 0.5;
    double C_0 = 0.0;
    double C_1 = 0.1;
    double eps_1 = 1.0;
    double delta_R = 1.0;
    double C_R = 1.0;
    double R_0 = 1.0;
    double eps = 0.5;
    double beta = -0.25;
    double c_1 = 1.0;
    double c_2 = 1.0;
    double gamma = 1.0;
    Claims claims;

    /// All violated invariants, empty when the card is consistent.
    std::vector<std::string> validate() const;
};

using DriverFn = std::function<double(double t, double x, double y, double z)>;
using LoadingFn = std::function<double(double t, double x)>;
using ScalarFn = std::function<double(double x)>;
using TerminalFn = std::function<double(double x, double w_T)>;

/// Driver f(t, x, y, z). x is the forward state, or 0 for a pure BDSDE.
struct DriverSpec {
    std::string name;
    DriverFn f;
    bool depends_on_x = false;

    double operator()(double t, double x, double y, double z) const { return f(t, x, y, z); }
};

/// Backward-noise loading a(t, x) with g(t, x, y) = a(t, x) * y.
struct NoiseLoadingSpec {
    std::string name;
    LoadingFn a;
    bool spatially_constant = true;
    /// True when a is identically zero; lets solvers skip the backward term.
    bool is_zero = false;

    double operator()(double t, double x) const { return a(t, x); }
};

enum class TerminalForm {
    Deterministic,   // xi(x) = psi(x)
    Composite,       // xi(x) = psi(x, W_T)
    ForwardComposite // xi(x) = h(X_T^{t,x})
};

enum class Monotone { None, Increasing, Decreasing };

/// Terminal family x -> xi(x). There is deliberately no way to read B: the
/// terminal sigma-field is generated by W alone.
struct TerminalFamily {
    std::string name;
    TerminalForm form = TerminalForm::Deterministic;
    TerminalFn psi;
    Monotone monotone = Monotone::None;
    /// Growth function of H3_xi.
    ScalarFn h;

    double operator()(double x, double w_T) const { return psi(x, w_T); }
};

/// Forward coefficients b, sigma and terminal function h of the coupled system.
struct ForwardSpec {
    std::string name;
    ScalarFn b;
    ScalarFn sigma;
    ScalarFn h;
    Monotone h_monotone = Monotone::None;
};

/// One named bundle of problem data from the catalog.
struct Preset {
    std::string name;
    DriverSpec driver;
    NoiseLoadingSpec loading;
    TerminalFamily terminal;
    std::optional<ForwardSpec> forward;
    AssumptionCard card;
};

DriverSpec zero_driver();
/// f = y + arctan(y) * (1 + sin z).
DriverSpec arctan_driver();
/// f = lambda * y + mu * z.
DriverSpec linear_driver(double lambda, double mu);
/// f = sign * (|f0| + C (|y| + |z|)), the envelope drivers used in the sandwich.
DriverSpec envelope_driver(double f0_abs, double lipschitz, int sign);
/// f(t, x, y, z) + shift.
DriverSpec shifted_driver(const DriverSpec& base, double shift);

NoiseLoadingSpec zero_loading();
NoiseLoadingSpec constant_loading(double a);

TerminalFamily identity_terminal();
TerminalFamily cubic_terminal();
TerminalFamily shift_terminal(double c);
TerminalFamily constant_terminal(double c);
/// xi(x) = x + W_T.
TerminalFamily brownian_shift_terminal();
/// Reads h(X_T) from the forward leg.
TerminalFamily forward_terminal(const ForwardSpec& fwd);

ForwardSpec still_forward(ScalarFn h);
ForwardSpec additive_forward(double mu, double sigma, ScalarFn h);
ForwardSpec geometric_forward(double mu, double sigma, ScalarFn h);

/// Built-in presets keyed by name.
const std::map<std::string, Preset>& builtin_catalog();
/// Throws ConfigError naming the known presets when absent.
const Preset& lookup_preset(const std::string& name);

struct ProbeBox {
    double horizon = 1.0;
    double x_range = 5.0;
    double y_range = 5.0;
    double z_range = 5.0;
};

struct AuditEntry {
    std::string assumption;
    double worst = 0.0;    // worst observed ratio or value
    double declared = 0.0; // declared constant it is compared against
    bool passed = true;
    std::size_t non_finite = 0;
    std::string detail;
};

struct AuditReport {
    std::vector<AuditEntry> entries;
    bool passed() const;
    const AuditEntry* find(const std::string& assumption) const;
};

/// Specs bundle under audit. Missing pieces skip their checks.
struct AuditTarget {
    const DriverSpec* driver = nullptr;
    const NoiseLoadingSpec* loading = nullptr;
    const TerminalFamily* terminal = nullptr;
    const ForwardSpec* forward = nullptr;
};

/// Samples each claimed hypothesis at probe_count random points and reports
/// the worst observed ratio against the declared constant.
AuditReport audit_assumptions(const AuditTarget& target, const AssumptionCard& card,
                              std::size_t probe_count, const RngSpec& rng,
                              const ProbeBox& box = {});

} // namespace bdsde
