#include <doctest.h>

#include <cmath>
#include <random>

#include "fracctl/errors.hpp"
#include "fracctl/nonlocal.hpp"
#include "fracctl/specfun.hpp"

using namespace fracctl;

namespace {

ProblemSpec demo_problem() {
    return {SpectralModel::dirichlet_laplacian(8), 0.75, NonlocalSpec{{0.2, 0.1}, {0.3, 0.6}, 1.0},
            Nonlinearity::demo_sine(8), ProblemSpec::uniform_gains(8, 1.0)};
}

ModeVector demo_control() {
    ModeVector w(8, 0.0);
    w[0] = 1.0;
    w[1] = 0.5;
    w[2] = -0.3;
    return w;
}

ProblemSpec single_mode(double lambda, double alpha, NonlocalSpec nl) {
    return {SpectralModel({lambda}), alpha, std::move(nl), Nonlinearity::none(), {1.0}};
}

/// w int_0^t S(t - s) ds for a single mode
double forced_response(double alpha, double lambda, double w, double t) {
    return w * std::pow(t, alpha) * mittag_leffler(alpha, alpha + 1.0, -lambda * std::pow(t, alpha));
}

/// u(t) for constant forcing w, nonlocal data (c, t_k), from the scalar formulas
double single_mode_exact(double alpha, double lambda, double w, const NonlocalSpec& nl, double t) {
    double q = 0.0, rhs = 0.0;
    for (std::size_t k = 0; k < nl.size(); ++k) {
        q += nl.c[k] * mittag_leffler(alpha, 1.0, -lambda * std::pow(nl.t[k], alpha));
        rhs += nl.c[k] * forced_response(alpha, lambda, w, nl.t[k]);
    }
    const double u0 = rhs / (1.0 - q);
    return mittag_leffler(alpha, 1.0, -lambda * std::pow(t, alpha)) * u0 + forced_response(alpha, lambda, w, t);
}

double sup_diff(const std::vector<ModeVector>& a, const std::vector<ModeVector>& b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        for (std::size_t m = 0; m < a[j].size(); ++m) d = std::max(d, std::abs(a[j][m] - b[j][m]));
    }
    return d;
}

std::vector<ModeVector> random_nodes(std::mt19937_64& rng, std::size_t size, std::size_t nm) {
    std::uniform_real_distribution<double> ud(-1.0, 1.0);
    std::vector<ModeVector> g(size, ModeVector(nm));
    for (auto& x : g) {
        for (double& v : x) v = ud(rng);
    }
    return g;
}

}  // namespace

TEST_CASE("NonlocalSpec and ProblemSpec validation") {
    CHECK_NOTHROW(NonlocalSpec({0.2}, {0.5}, 1.0).validate());
    CHECK_THROWS_AS(NonlocalSpec({0.2, 0.1}, {0.5}, 1.0).validate(), UsageError);
    CHECK_THROWS_AS(NonlocalSpec({0.2, 0.1}, {0.5, 0.4}, 1.0).validate(), UsageError);
    CHECK_THROWS_AS(NonlocalSpec({0.2}, {0.0}, 1.0).validate(), UsageError);
    CHECK_THROWS_AS(NonlocalSpec({0.2}, {1.5}, 1.0).validate(), UsageError);
    CHECK_THROWS_AS(NonlocalSpec({}, {}, 0.0).validate(), UsageError);

    auto p = demo_problem();
    CHECK_NOTHROW(p.validate());
    p.alpha = 1.2;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = demo_problem();
    p.gains.pop_back();
    CHECK_THROWS_AS(p.validate(), UsageError);
}

TEST_CASE("H1 admissibility") {
    const auto m = SpectralModel::dirichlet_laplacian(8);
    const auto ok = check_H1(m, 0.75, NonlocalSpec{{0.2, 0.1}, {0.3, 0.6}, 1.0});
    CHECK(ok.admissible);
    CHECK(ok.m_t == 1.0);
    CHECK(ok.sum_abs_c == doctest::Approx(0.3));
    CHECK(ok.margin == doctest::Approx(0.7));

    const NonlocalSpec bad{{1.5}, {0.5}, 1.0};
    CHECK_FALSE(check_H1(m, 0.4, bad).admissible);
    try {
        build_O(m, 0.4, bad);
        FAIL("expected InadmissibleError");
    } catch (const InadmissibleError& e) {
        CHECK(e.margin() == doctest::Approx(-0.5));
    }
    // negative weights count through |c_k|
    CHECK_FALSE(check_H1(m, 0.5, NonlocalSpec{{0.6, -0.6}, {0.2, 0.4}, 1.0}).admissible);
    // empty condition: u(0) = 0
    const auto none = build_O(m, 0.5, NonlocalSpec{{}, {}, 1.0});
    for (double o : none.o) CHECK(o == 1.0);
}

TEST_CASE("nonlocal inverse: Neumann summation vs closed form on random admissible specs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t nm = 1 + rng() % 10;
        const double alpha = 0.1 + 0.9 * u01(rng);
        const double a = 0.5 + 2.0 * u01(rng);
        const std::size_t nk = 1 + rng() % 4;
        NonlocalSpec nl{{}, {}, a};
        double t = 0.0;
        for (std::size_t k = 0; k < nk; ++k) {
            t += (a - t) * (0.05 + 0.5 * u01(rng));
            nl.t.push_back(t);
            nl.c.push_back(u01(rng) - 0.5);
        }
        // rescale so that sum |c_k| stays below 1 with a random margin
        double s = 0.0;
        for (double c : nl.c) s += std::abs(c);
        const double target = 0.99 * u01(rng);
        for (double& c : nl.c) c *= target / s;

        const auto model = SpectralModel::dirichlet_laplacian(nm);
        const auto inv = build_O(model, alpha, nl);
        const auto closed = build_O_closed_form(model, alpha, nl);
        double max_o = 0.0;
        for (std::size_t n = 0; n < nm; ++n) {
            INFO("trial " << trial << " mode " << n);
            CHECK(std::abs(inv.o[n] - closed[n]) <= 1e-10);
            max_o = std::max(max_o, std::abs(inv.o[n]));
        }
        CHECK(max_o <= inv.bound * (1 + 1e-14));
        CHECK(inv.bound == doctest::Approx(1.0 / (1.0 - target)).epsilon(1e-12));
    }
}

TEST_CASE("green_apply against the scalar formula") {
    const auto p = demo_problem();
    const ModeVector w{1.0, -0.5, 0.25, 2.0, 0.0, 1.0, -1.0, 0.3};
    const auto o = build_O_closed_form(p.model, p.alpha, p.nonlocal);
    for (auto [t, s] : {std::pair{0.9, 0.1}, {0.2, 0.25}, {0.5, 0.4}, {0.0, 0.7}, {1.0, 0.45}}) {
        const auto got = green_apply(p, t, s, w);
        for (std::size_t n = 0; n < 8; ++n) {
            const double l = p.model.lambda(n), a = p.alpha;
            auto S = [&](double tau) {
                return std::pow(tau, a - 1) * mittag_leffler(a, a, -l * std::pow(tau, a));
            };
            double want = s < t ? S(t - s) : 0.0;
            const double Tt = mittag_leffler(a, 1.0, -l * std::pow(t, a));
            for (std::size_t k = 0; k < 2; ++k) {
                if (s < p.nonlocal.t[k]) want += p.nonlocal.c[k] * Tt * o[n] * S(p.nonlocal.t[k] - s);
            }
            INFO("t = " << t << ", s = " << s << ", mode " << n);
            CHECK(got[n] == doctest::Approx(want * w[n]).epsilon(1e-12));
        }
    }
    CHECK_THROWS_AS(green_apply(p, 0.5, 0.5, w), DomainError);
    CHECK_THROWS_AS(green_apply(p, 0.9, 0.3, w), DomainError);
    CHECK_THROWS_AS(green_apply(p, 1.2, 0.3, w), DomainError);
}

TEST_CASE("green bound is finite and attained inside the horizon") {
    const auto gb = green_bound(demo_problem());
    CHECK(std::isfinite(gb.n_const));
    CHECK(gb.n_const > 0.0);
    CHECK(gb.s_at < gb.t_at);
    CHECK(gb.t_at <= 1.0);
    // the weighted kernel stays bounded as the sampling is refined
    CHECK(green_bound(demo_problem(), 400).n_const < 2.0 * gb.n_const);
}

TEST_CASE("zero data gives the zero solution") {
    auto p = demo_problem();
    p.f = Nonlinearity::none();
    const TimeGrid g(1.0, 64);
    const auto sol = solve_mild(p, g, ControlSignal::zeros(g, 8));
    for (const auto& x : sol.trajectory.states) {
        for (double v : x) CHECK(v == 0.0);
    }
    CHECK(sol.report.iterations == 1);
    const auto vr = verify_mild(p, sol.trajectory, ControlSignal::zeros(g, 8));
    CHECK(vr.mild_residual == 0.0);
    CHECK(vr.nonlocal_residual == 0.0);
}

TEST_CASE("single-mode constant forcing against the closed form") {
    const double alpha = 0.75, lambda = 2.0, w = 1.3;
    SUBCASE("u(0) = 0") {
        const auto p = single_mode(lambda, alpha, NonlocalSpec{{}, {}, 1.0});
        std::vector<double> err;
        for (int n : {128, 256, 512, 1024}) {
            const TimeGrid g(1.0, n);
            const auto sol = solve_mild(p, g, ControlSignal::constant(g, {w}));
            double e = 0.0;
            for (std::size_t j = 0; j < g.size(); ++j) {
                e = std::max(e, std::abs(sol.trajectory.states[j][0] - forced_response(alpha, lambda, w, g.node(j))));
            }
            err.push_back(e);
        }
        CHECK(err.back() <= 1e-3);
        for (std::size_t i = 1; i < err.size(); ++i) CHECK(std::log2(err[i - 1] / err[i]) >= 0.9);
    }
    SUBCASE("nonlocal data, off-grid t_k") {
        const NonlocalSpec nl{{0.3, -0.2}, {0.37, 0.81}, 1.0};
        const auto p = single_mode(lambda, alpha, nl);
        const TimeGrid g(1.0, 1024);
        const auto sol = solve_mild(p, g, ControlSignal::constant(g, {w}));
        double e = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            e = std::max(e, std::abs(sol.trajectory.states[j][0] - single_mode_exact(alpha, lambda, w, nl, g.node(j))));
        }
        CHECK(e <= 1e-3);
        CHECK(sol.report.nonlocal_residual <= 1e-8);
    }
    SUBCASE("alpha = 1 reduces to the exponential") {
        const auto p = single_mode(lambda, 1.0, NonlocalSpec{{0.5}, {1.0}, 1.0});
        const TimeGrid g(1.0, 512);
        const auto sol = solve_mild(p, g, ControlSignal::constant(g, {w}));
        const double u0 = 0.5 * w * (1 - std::exp(-lambda)) / lambda / (1 - 0.5 * std::exp(-lambda));
        for (std::size_t j = 0; j < g.size(); j += 64) {
            const double t = g.node(j);
            const double want = std::exp(-lambda * t) * u0 + w * (1 - std::exp(-lambda * t)) / lambda;
            CHECK(std::abs(sol.trajectory.states[j][0] - want) <= 1e-5);
        }
    }
}

TEST_CASE("linear runs meet the nonlocal condition to 1e-8") {
    auto p = demo_problem();
    p.f = Nonlinearity::none();
    for (int n : {100, 256, 512}) {
        const TimeGrid g(1.0, n);
        const auto sol = solve_mild(p, g, ControlSignal::constant(g, demo_control()));
        CHECK(sol.report.nonlocal_residual <= 1e-8);
    }
}

TEST_CASE("semilinear demo: Picard convergence and nonlocal residual") {
    const auto p = demo_problem();
    const TimeGrid g(1.0, 512);
    const auto v = ControlSignal::constant(g, demo_control());
    const auto sol = solve_mild(p, g, v);
    CHECK(sol.report.nonlocal_residual <= 1e-6);
    CHECK(sol.report.final_residual <= tol::picard_tol);
    CHECK(sol.report.contraction_estimate > 0.0);
    CHECK(sol.report.contraction_estimate < 1.0);
    // the iteration count is consistent with the observed contraction
    const double est = sol.report.contraction_estimate;
    const double h0 = sol.report.residual_history.front();
    CHECK(sol.report.iterations <= std::ceil(std::log(tol::picard_tol / h0) / std::log(est)) + 2);
    CHECK(sol.report.control_bound_psi == doctest::Approx(norm(demo_control())));

    const auto vr = verify_mild(p, sol.trajectory, v);
    CHECK(vr.mild_residual <= tol::verify_residual);
    CHECK(vr.nonlocal_residual <= tol::verify_residual);
    CHECK(vr.consistency_residual <= 1e-7);
}

TEST_CASE("Green map and two-step map agree") {
    const auto p = demo_problem();
    std::mt19937_64 rng(3);
    for (int n : {40, 97}) {
        const TimeGrid g(1.0, n);
        const MildSolver s(p, g);
        const auto x = random_nodes(rng, g.size(), 8);
        CHECK(sup_diff(s.green_map(x), s.two_step_map(x)) <= 1e-12);
    }
}

TEST_CASE("Green map against a direct assembly from the singular rules") {
    const auto p = demo_problem();
    const TimeGrid g(1.0, 50);
    const MildSolver s(p, g);
    std::mt19937_64 rng(8);
    const auto x = random_nodes(rng, g.size(), 8);
    const auto got = s.green_map(x);
    const auto o = build_O_closed_form(p.model, p.alpha, p.nonlocal);
    for (std::size_t m = 0; m < 8; ++m) {
        const double l = p.model.lambda(m), a = p.alpha;
        const auto H = [&](double tau) { return mittag_leffler(a, a, -l * std::pow(tau, a)); };
        std::vector<double> gm(g.size());
        for (std::size_t j = 0; j < g.size(); ++j) gm[j] = x[j][m];
        double rhs = 0.0;
        for (std::size_t k = 0; k < 2; ++k) {
            const double tk = p.nonlocal.t[k];
            rhs += p.nonlocal.c[k] * build_singular_rule(g, a, tk, tk).apply(gm, H);
        }
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double t = g.node(i);
            double want = mittag_leffler(a, 1.0, -l * std::pow(t, a)) * o[m] * rhs;
            if (i > 0) want += build_singular_rule(g, a, t, t).apply(gm, H);
            CHECK(got[i][m] == doctest::Approx(want).epsilon(1e-11).scale(1.0));
        }
    }
}

TEST_CASE("mode matrix and endpoint weights reproduce the Green map") {
    const auto p = demo_problem();
    const TimeGrid g(1.0, 30);
    const MildSolver s(p, g);
    std::mt19937_64 rng(21);
    const auto x = random_nodes(rng, g.size(), 8);
    const auto u = s.green_map(x);
    const std::size_t size = g.size();
    for (std::size_t m : {0u, 5u}) {
        const auto mat = s.mode_matrix(m);
        const auto w = s.endpoint_weights(m);
        for (std::size_t i = 0; i < size; ++i) {
            double v = 0.0;
            for (std::size_t j = 0; j < size; ++j) v += mat[i * size + j] * x[j][m];
            CHECK(v == doctest::Approx(u[i][m]).epsilon(1e-13).scale(1.0));
        }
        double e = 0.0;
        for (std::size_t j = 0; j < size; ++j) e += w[j] * x[j][m];
        CHECK(e == doctest::Approx(u.back()[m]).epsilon(1e-13).scale(1.0));
    }
}

TEST_CASE("linear solution is linear in the control") {
    auto p = demo_problem();
    p.f = Nonlinearity::none();
    const TimeGrid g(1.0, 128);
    std::mt19937_64 rng(4);
    const ControlSignal v1{g, random_nodes(rng, g.size(), 8)};
    const ControlSignal v2{g, random_nodes(rng, g.size(), 8)};
    ControlSignal v3{g, v1.values};
    for (std::size_t j = 0; j < g.size(); ++j) {
        for (std::size_t m = 0; m < 8; ++m) v3.values[j][m] = 2.0 * v1.values[j][m] - 3.0 * v2.values[j][m];
    }
    const SolveOptions opt{1e-13, 200, 1.0, GreenForm::full_horizon};
    const auto u1 = solve_mild(p, g, v1, opt).trajectory.states;
    const auto u2 = solve_mild(p, g, v2, opt).trajectory.states;
    const auto u3 = solve_mild(p, g, v3, opt).trajectory.states;
    double d = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
        for (std::size_t m = 0; m < 8; ++m) d = std::max(d, std::abs(u3[j][m] - 2.0 * u1[j][m] + 3.0 * u2[j][m]));
    }
    CHECK(d <= 1e-10);
}

TEST_CASE("truncated form does not reproduce the nonlocal condition") {
    auto p = demo_problem();
    p.f = Nonlinearity::none();
    const TimeGrid g(1.0, 256);
    const auto v = ControlSignal::constant(g, demo_control());
    const auto full = solve_mild(p, g, v);
    const auto trunc = solve_mild(p, g, v, SolveOptions{tol::picard_tol, 200, 1.0, GreenForm::truncated_to_t});
    CHECK(full.report.nonlocal_residual <= 1e-8);
    CHECK(trunc.report.nonlocal_residual > 1e-3);
    // both forms share the value at t = a
    for (std::size_t m = 0; m < 8; ++m) {
        CHECK(trunc.trajectory.states.back()[m] == doctest::Approx(full.trajectory.states.back()[m]).epsilon(1e-12));
    }
    const MildSolver s(p, g);
    CHECK_THROWS_AS(s.solve(std::vector<ModeVector>(g.size(), ModeVector(8, 0.0)),
                            SolveOptions{tol::picard_tol, 200, 1.0, GreenForm::truncated_to_t}),
                    UsageError);
}

TEST_CASE("Picard non-convergence is reported") {
    auto p = demo_problem();
    const TimeGrid g(1.0, 64);
    try {
        solve_mild(p, g, ControlSignal::constant(g, demo_control()), SolveOptions{1e-14, 3, 1.0, GreenForm::full_horizon});
        FAIL("expected NonConvergenceError");
    } catch (const NonConvergenceError& e) {
        CHECK(e.iterations() == 3);
        CHECK(e.last_difference() > 1e-14);
    }
    // a growing nonlinearity f(u) = 5 u overwhelms the contraction
    p.f = Nonlinearity::polynomial({0.0, 5.0}, 8);
    CHECK_THROWS_AS(solve_mild(p, g, ControlSignal::constant(g, demo_control())), NonConvergenceError);
}

TEST_CASE("verify_mild") {
    const auto p = demo_problem();
    const auto v0 = ControlSignal::constant(TimeGrid(1.0, 128), demo_control());
    const auto coarse = solve_mild(p, v0.grid, v0);
    const auto r_coarse = verify_mild(p, coarse.trajectory, v0);

    const TimeGrid fine(1.0, 512);
    const auto v1 = ControlSignal::constant(fine, demo_control());
    const auto sol = solve_mild(p, fine, v1);
    const auto r = verify_mild(p, sol.trajectory, v1);
    CHECK(r.mild_residual < r_coarse.mild_residual);
    CHECK(r.mild_residual <= tol::verify_residual);
    CHECK(r.node_residuals.size() == fine.size());
    for (std::size_t m = 0; m < 8; ++m) {
        CHECK(r.endpoint[m] == doctest::Approx(sol.trajectory.states.back()[m]).epsilon(1e-9).scale(1.0));
    }

    // perturbed trajectory is rejected
    auto bad = sol.trajectory;
    for (std::size_t j = fine.size() / 2; j < fine.size(); ++j) bad.states[j][0] += 1e-2;
    CHECK(verify_mild(p, bad, v1).mild_residual >= 1e-3);
    // a trajectory of the wrong control is rejected
    CHECK(verify_mild(p, sol.trajectory, ControlSignal::zeros(fine, 8)).mild_residual > 1e-2);

    CHECK_THROWS_AS(verify_mild(p, sol.trajectory, v0), UsageError);
    auto nan = sol.trajectory;
    nan.states[3][2] = NAN;
    CHECK_THROWS_AS(verify_mild(p, nan, v1), UsageError);
}
