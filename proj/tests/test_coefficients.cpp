#include "doctest.h"

#include "bdsde/coefficients.hpp"
#include "bdsde/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace bdsde;

TEST_CASE("catalog lookups") {
    const Preset& arctan = lookup_preset("paper_arctan");
    CHECK(arctan.driver(0.0, 0.0, 0.0, 0.0) == 0.0);
    CHECK(arctan.card.C_f == 3.0);

    const Preset& zero = lookup_preset("zero");
    CHECK(zero.driver(0.3, 1.0, 2.0, -1.0) == 0.0);
    CHECK(zero.loading(0.5, 0.0) == 0.0);
    CHECK(zero.loading.is_zero);

    const Preset& id = lookup_preset("identity_terminal");
    CHECK(id.terminal(1.7, 0.0) == 1.7);
    CHECK(id.terminal.monotone == Monotone::Increasing);

    CHECK_THROWS_AS(lookup_preset("nope"), ConfigError);
}

TEST_CASE("catalog covers the required families") {
    const auto& cat = builtin_catalog();
    for (const char* name : {"zero", "paper_arctan", "linear_decay", "linear_mixed",
                             "constant_loading", "identity_terminal", "cubic_terminal",
                             "shift_terminal", "heat", "gbm"}) {
        CHECK_MESSAGE(cat.count(name) == 1, name);
    }
    CHECK(cubic_terminal()(2.0, 0.0) == 8.0);
    CHECK(shift_terminal(1.5)(1.0, 0.0) == 2.5);
    CHECK(linear_driver(-0.5, 0.2)(0.0, 0.0, 2.0, 1.0) == doctest::Approx(-0.8));
}

TEST_CASE("every preset passes its own audit with 1e5 probes") {
    for (const auto& [name, p] : builtin_catalog()) {
        AuditTarget target{&p.driver, &p.loading, &p.terminal, p.forward ? &*p.forward : nullptr};
        const AuditReport r = audit_assumptions(target, p.card, 100000, RngSpec{31});
        for (const auto& e : r.entries) {
            CHECK_MESSAGE(e.passed, name << ": " << e.assumption << " worst " << e.worst
                                         << " declared " << e.declared << " " << e.detail);
        }
    }
}

TEST_CASE("linear driver audit reports its exact Lipschitz constant") {
    const DriverSpec f = linear_driver(-0.7, 0.0);
    AssumptionCard card;
    card.C_f = 0.7;
    card.claims = Claims{};
    card.claims.lipschitz_f = true;
    const AuditReport r = audit_assumptions({&f}, card, 20000, RngSpec{3});
    REQUIRE(r.find("H1_f") != nullptr);
    CHECK(r.passed());
    CHECK(r.find("H1_f")->worst == doctest::Approx(0.7).epsilon(1e-7));
}

TEST_CASE("arctan driver fails an understated Lipschitz constant") {
    // Oracle: dense grid of finite-difference partials of f.
    const DriverSpec f = arctan_driver();
    double sup = 0.0;
    const double h = 1e-6;
    for (int i = -200; i <= 200; ++i) {
        for (int j = -200; j <= 200; ++j) {
            const double y = 5.0 * i / 200.0;
            const double z = 5.0 * j / 200.0;
            const double fy = (f(0, 0, y + h, z) - f(0, 0, y - h, z)) / (2 * h);
            const double fz = (f(0, 0, y, z + h) - f(0, 0, y, z - h)) / (2 * h);
            sup = std::max({sup, std::abs(fy), std::abs(fz)});
        }
    }
    REQUIRE(sup > 2.0);

    AssumptionCard card = lookup_preset("paper_arctan").card;
    card.C_f = 2.0;
    const AuditReport r = audit_assumptions({&f}, card, 100000, RngSpec{9});
    const AuditEntry* e = r.find("H1_f");
    REQUIRE(e != nullptr);
    CHECK_FALSE(e->passed);
    CHECK(e->worst > 2.0);
    CHECK(e->worst <= 3.0 + 1e-9);
}

TEST_CASE("loading bound a < C_g / 2") {
    const NoiseLoadingSpec a = constant_loading(0.3);
    AssumptionCard card;
    card.C_g = 1.0;
    card.claims = Claims{};
    card.claims.linear_g = true;
    AuditReport r = audit_assumptions({nullptr, &a}, card, 1000, RngSpec{1});
    CHECK(r.passed());
    CHECK(r.find("H2_g")->worst == doctest::Approx(0.3));

    const NoiseLoadingSpec big = constant_loading(0.6);
    r = audit_assumptions({nullptr, &big}, card, 1000, RngSpec{1});
    CHECK_FALSE(r.passed());
}

TEST_CASE("card invariants") {
    AssumptionCard card;
    CHECK(card.validate().empty());
    card.alpha_g = 1.0;
    card.C_f = 0.0;
    CHECK(card.validate().size() == 2);

    AssumptionCard neg;
    neg.claims.negative_moment = true;
    neg.C_1 = 0.1;
    neg.beta = 0.0;
    CHECK(neg.validate().size() == 1);
    neg.beta = -0.01;
    CHECK(neg.validate().empty());
}

TEST_CASE("audit flags non-finite evaluations") {
    const DriverSpec f{"bad", [](double, double, double y, double) { return std::log(y); }, false};
    AssumptionCard card;
    card.claims = Claims{};
    card.claims.lipschitz_f = true;
    const AuditReport r = audit_assumptions({&f}, card, 1000, RngSpec{2});
    CHECK_FALSE(r.passed());
    CHECK(r.find("H1_f")->non_finite > 0);
}

TEST_CASE("terminal families are monotone on probes") {
    for (const auto& fam : {identity_terminal(), cubic_terminal(), shift_terminal(2.0)}) {
        double prev = fam(-5.0, 0.0);
        for (int i = 1; i <= 1000; ++i) {
            const double x = -5.0 + 10.0 * i / 1000.0;
            const double v = fam(x, 0.0);
            CHECK(v > prev);
            prev = v;
        }
    }
    AssumptionCard card;
    card.claims = Claims{};
    card.claims.monotone_terminal = true;
    const TerminalFamily flat = constant_terminal(1.0);
    CHECK_FALSE(audit_assumptions({nullptr, nullptr, &flat}, card, 100, RngSpec{1}).passed());
}

TEST_CASE("sign condition H2'_f for the arctan driver") {
    const DriverSpec f = arctan_driver();
    AssumptionCard card = lookup_preset("paper_arctan").card;
    const AuditReport r = audit_assumptions({&f}, card, 50000, RngSpec{6});
    CHECK(r.find("H2'_f")->passed);
    // y f(y, z) >= 0 everywhere, so the worst ratio never exceeds 0.
    CHECK(r.find("H2'_f")->worst <= 0.0);

    const DriverSpec neg = linear_driver(-1.0, 0.0);
    const AuditReport bad = audit_assumptions({&neg}, card, 5000, RngSpec{6});
    CHECK_FALSE(bad.find("H2'_f")->passed);
}

TEST_CASE("forward growth audit") {
    const Preset& gbm = lookup_preset("gbm");
    AuditReport r = audit_assumptions({nullptr, nullptr, nullptr, &*gbm.forward}, gbm.card, 5000,
                                      RngSpec{8});
    CHECK(r.passed());
    CHECK(r.find("C2_sigma_b")->worst == doctest::Approx(0.25));

    const Preset& heat = lookup_preset("heat");
    AssumptionCard claims_growth = heat.card;
    claims_growth.claims.forward_growth = true;
    r = audit_assumptions({nullptr, nullptr, nullptr, &*heat.forward}, claims_growth, 5000,
                          RngSpec{8});
    CHECK_FALSE(r.passed());
}
