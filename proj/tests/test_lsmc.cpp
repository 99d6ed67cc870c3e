#include "doctest.h"

#include "bdsde/error.hpp"
#include "bdsde/linear_engine.hpp"
#include "bdsde/lsmc.hpp"
#include "bdsde/parallel.hpp"

#include <cmath>
#include <cstring>

using namespace bdsde;

namespace {

BdsdeProblem pure(DriverSpec f, NoiseLoadingSpec a, TerminalFamily xi, double x = 0.0) {
    return {std::move(f), std::move(a), std::move(xi), std::nullopt, x, 0, std::nullopt};
}

BdsdeProblem coupled(DriverSpec f, NoiseLoadingSpec a, const ForwardSpec& fwd, double x) {
    return {std::move(f), std::move(a), forward_terminal(fwd), fwd, x, 0, std::nullopt};
}

DriverPaths paths(std::size_t mw, std::size_t mb, std::uint64_t seed = 42, long long n = 32) {
    return sample_driver_paths(make_grid(1.0, n), mw, mb, RngSpec{seed});
}

} // namespace

TEST_CASE("euler_forward") {
    const DriverPaths p = paths(2048, 1);
    const ForwardPaths still = euler_forward(p, still_forward([](double x) { return x; }), 0, 1.3);
    CHECK((still.X.array() == 1.3).all());

    const ForwardPaths growth =
        euler_forward(p, geometric_forward(1.0, 0.0, [](double x) { return x; }), 0, 2.0);
    CHECK(growth.X.col(32).minCoeff() ==
          doctest::Approx(2.0 * std::pow(1.0 + 1.0 / 32.0, 32)).epsilon(1e-13));
    CHECK(std::pow(1.0 + 1.0 / 32.0, 32) == doctest::Approx(2.6770).epsilon(1e-4));

    const ForwardPaths late =
        euler_forward(p, geometric_forward(1.0, 0.0, [](double x) { return x; }), 16, 2.0);
    CHECK((late.X.leftCols(17).array() == 2.0).all());
}

TEST_CASE("euler_forward GBM mean") {
    const DriverPaths p = paths(8192, 1, 5);
    const ForwardPaths gbm =
        euler_forward(p, geometric_forward(0.05, 0.2, [](double x) { return x; }), 0, 1.0);
    std::vector<double> xt(gbm.X.col(32).data(), gbm.X.col(32).data() + 8192);
    const MeanSe s = mean_se(xt);
    CHECK(std::abs(s.mean - std::exp(0.05)) <= 3.0 * s.se);
}

TEST_CASE("euler_forward reports the first non-finite state") {
    const DriverPaths p = paths(16, 1);
    ForwardSpec blowup{"blowup", [](double x) { return x * x * 1e200; }, [](double) { return 0.0; },
                       [](double x) { return x; }};
    try {
        euler_forward(p, blowup, 0, 10.0);
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(e.w_path() == 0);
        CHECK(e.node() >= 1);
    }
}

TEST_CASE("constant terminal gives constant solution and vanishing Z") {
    const DriverPaths p = paths(2048, 4);
    const auto sol = solve_bdsde_lsmc(p, pure(zero_driver(), zero_loading(), constant_terminal(2.5)));
    for (const auto& y : sol.Y) {
        CHECK((y.array() == 2.5).all());
    }
    for (std::size_t i = 0; i < 32; ++i) {
        CHECK(std::abs(sol.z_pooled[i].mean) <= 3.0 * sol.z_pooled[i].se + 1e-15);
    }

    // With a forward state as regressor Z is estimated from data.
    auto fwd = geometric_forward(0.05, 0.2, [](double) { return 1.0; });
    const auto sol2 = solve_bdsde_lsmc(p, coupled(zero_driver(), zero_loading(), fwd, 1.0));
    for (std::size_t i = 0; i < 32; ++i) {
        CHECK(std::abs(sol2.z_pooled[i].mean) <= 3.0 * sol2.z_pooled[i].se + 1e-15);
    }
}

TEST_CASE("terminal values are stored exactly") {
    const DriverPaths p = paths(512, 3);
    auto fwd = additive_forward(0.0, 1.0, [](double x) { return std::sin(x) + x; });
    const auto sol = solve_bdsde_lsmc(p, coupled(arctan_driver(), constant_loading(0.2), fwd, 0.3));
    const ForwardPaths fp = euler_forward(p, fwd, 0, 0.3);
    for (const auto& y : sol.Y) {
        for (std::ptrdiff_t w = 0; w < 512; ++w) {
            CHECK(y(w, 32) == std::sin(fp.X(w, 32)) + fp.X(w, 32));
        }
        CHECK(y.allFinite());
    }
}

TEST_CASE("LSMC agrees with the explicit linear formula") {
    const DriverPaths p = paths(8192, 64);
    const auto sol = solve_bdsde_lsmc(
        p, pure(linear_driver(-0.5, 0.0), constant_loading(0.3), constant_terminal(1.0)));
    auto spec = LinearBDSDESpec::constant(p.grid, -0.5, 0.0, 0.3);
    spec.terminal_values.assign(8192, 1.0);
    const LinearSolution lin = explicit_linear_solution(spec, p, 0);
    const double combined = std::hypot(sol.y_pooled[0].se, lin.pooled.se);
    CHECK(std::abs(sol.y_pooled[0].mean - lin.pooled.mean) <= std::max(3.0 * combined, 0.02));
}

TEST_CASE("arctan driver is consistent under refinement") {
    const DriverPaths fine = paths(1024, 64, 42, 64);
    const DriverPaths coarse = coarsen(fine, 2);
    const auto problem = pure(arctan_driver(), constant_loading(0.3), identity_terminal(), 0.0);
    const auto a = solve_bdsde_lsmc(coarse, problem);
    const auto b = solve_bdsde_lsmc(fine, problem);
    CHECK(std::abs(a.y_pooled[0].mean) < 1e-12);
    const double combined = std::hypot(a.y_pooled[0].se, b.y_pooled[0].se);
    CHECK(std::abs(a.y_pooled[0].mean - b.y_pooled[0].mean) <= 3.0 * combined + 1e-12);
}

TEST_CASE("first-order refinement on the linear test set") {
    int violations = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const DriverPaths fine = paths(64, 64, 1000 + seed, 64);
        const auto problem =
            pure(linear_driver(-0.5, 0.0), constant_loading(0.3), constant_terminal(1.0));
        const double y64 = solve_bdsde_lsmc(fine, problem).y_pooled[0].mean;
        const double y32 = solve_bdsde_lsmc(coarsen(fine, 2), problem).y_pooled[0].mean;
        const double y16 = solve_bdsde_lsmc(coarsen(fine, 4), problem).y_pooled[0].mean;
        if (!(std::abs(y16 - y64) > std::abs(y32 - y64))) {
            ++violations;
        }
    }
    CHECK(violations <= 1);
}

TEST_CASE("Y at node i never reads B increments before t_i") {
    DriverPaths p = paths(1024, 8);
    const auto problem = pure(arctan_driver(), constant_loading(0.3), cubic_terminal(), 0.7);
    const auto ref = solve_bdsde_lsmc(p, problem);
    const std::size_t cut = 12;
    for (std::ptrdiff_t j = 0; j < static_cast<std::ptrdiff_t>(cut); ++j) {
        p.dB.col(j).setConstant(3.0);
    }
    const auto mutated = solve_bdsde_lsmc(p, problem);
    for (std::size_t b = 0; b < 8; ++b) {
        for (std::size_t i = cut; i <= 32; ++i) {
            const auto ref_col = ref.Y[b].col(static_cast<std::ptrdiff_t>(i));
            const auto mut_col = mutated.Y[b].col(static_cast<std::ptrdiff_t>(i));
            CHECK(std::memcmp(ref_col.data(), mut_col.data(), sizeof(double) * 1024) == 0);
        }
    }
}

TEST_CASE("solver output does not depend on thread count") {
    const DriverPaths p = paths(2048, 8);
    auto fwd = geometric_forward(0.05, 0.2, [](double x) { return x; });
    const auto problem = coupled(arctan_driver(), constant_loading(0.2), fwd, 1.0);
    set_thread_count(1);
    const auto one = solve_bdsde_lsmc(p, problem);
    set_thread_count(3);
    const auto three = solve_bdsde_lsmc(p, problem);
    set_thread_count(0);
    for (std::size_t b = 0; b < 8; ++b) {
        CHECK(one.Y[b] == three.Y[b]);
        CHECK(one.Z[b] == three.Z[b]);
    }
}

TEST_CASE("audit failure aborts before simulation") {
    const DriverPaths p = paths(64, 2);
    auto problem = pure(arctan_driver(), constant_loading(0.3), identity_terminal());
    AssumptionCard card = lookup_preset("paper_arctan").card;
    card.C_f = 2.0;
    problem.card = card;
    CHECK_THROWS_AS(solve_bdsde_lsmc(p, problem), ConfigError);
    problem.card->C_f = 3.0;
    CHECK_NOTHROW(solve_bdsde_lsmc(p, problem));
}

TEST_CASE("solver reports non-finite values with their location") {
    const DriverPaths p = paths(64, 2);
    DriverSpec bad{"bad", [](double t, double, double, double) { return t < 0.5 ? NAN : 0.0; },
                   false};
    try {
        solve_bdsde_lsmc(p, pure(bad, zero_loading(), identity_terminal(), 1.0));
        FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
        CHECK(e.b_path() == 0);
        CHECK(e.node() == 15);
    }
}

TEST_CASE("field: heat kernel second moment") {
    const DriverPaths p = paths(8192, 4, 21);
    const Preset& heat = lookup_preset("heat");
    BdsdeProblem problem{heat.driver, heat.loading, heat.terminal, heat.forward, 0.0, 0, heat.card};
    const FieldReport f = spde_field({0, 16}, {0.0, 1.0}, problem, SchemeConfig{}, p);
    CHECK(std::abs(f.at(0, 0).pooled.mean - 2.0) <= 3.0 * f.at(0, 0).pooled.se);
    CHECK(std::abs(f.at(1, 1).pooled.mean - 2.0) <= 3.0 * f.at(1, 1).pooled.se);
}
