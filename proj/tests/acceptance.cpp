/// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any criterion fails.

#include <sys/wait.h>
#include <unistd.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fracctl/constants.hpp"
#include "fracctl/control.hpp"
#include "fracctl/fraccalc.hpp"
#include "fracctl/nonlocal.hpp"
#include "fracctl/specfun.hpp"
#include "fracctl/spectral.hpp"
#include "oracles/mpfr_mittag_leffler.hpp"

namespace fs = std::filesystem;
using namespace fracctl;

namespace {

int failures = 0;

void report(int id, const std::string& title, bool pass, const std::string& detail, double seconds) {
    std::printf("%s  AC%-2d %s: %s [%.1f s]\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str(), seconds);
    std::fflush(stdout);
    if (!pass) ++failures;
}

void note(const std::string& text) {
    std::printf("        note: %s\n", text.c_str());
    std::fflush(stdout);
}

std::string sci(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", x);
    return buf;
}

template <class F>
void criterion(int id, const std::string& title, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    bool pass = false;
    std::string detail;
    try {
        pass = body(detail);
    } catch (const std::exception& e) {
        pass = false;
        detail += std::string(" exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, title, pass, detail, s);
}

double min_order(const std::vector<double>& err) {
    double m = INFINITY;
    for (std::size_t i = 1; i < err.size(); ++i) m = std::min(m, std::log2(err[i - 1] / err[i]));
    return m;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + sci(v[i]);
    return s;
}

ProblemSpec demo_problem() {
    return {SpectralModel::dirichlet_laplacian(8), 0.75, NonlocalSpec{{0.2, 0.1}, {0.3, 0.6}, 1.0},
            Nonlinearity::demo_sine(8), ProblemSpec::uniform_gains(8, 1.0)};
}

ModeVector demo_control() { return {1.0, 0.5, -0.3, 0.0, 0.0, 0.0, 0.0, 0.0}; }

// -------------------------------------------------------------------------------------------

bool ac1(std::string& d) {
    double e_exp = 0, e_cos = 0, e_12 = 0;
    for (int i = 0; i < 200; ++i) {
        const double z = -20.0 + 25.0 * i / 199.0;
        e_exp = std::max(e_exp, std::abs(mittag_leffler(1, 1, z) - std::exp(z)));
    }
    for (int i = 0; i < 200; ++i) {
        const double z = 10.0 * i / 199.0;
        e_cos = std::max(e_cos, std::abs(mittag_leffler(2, 1, -z * z) - std::cos(z)));
    }
    for (int i = 0; i < 200; ++i) {
        const double z = -20.0 + 25.0 * (i + 0.5) / 200.0;
        const double want = std::expm1(z) / z;
        e_12 = std::max(e_12, std::abs(mittag_leffler(1, 2, z) - want) / std::max(1.0, std::abs(want)));
    }
    std::mt19937_64 rng(7031);
    std::uniform_real_distribution<double> u01(0.0, 1.0), ub(0.05, 2.5), uz(-5.0, 5.0);
    double worst = 0.0;
    int cases = 0, overflow = 0;
    for (; cases < 1000; ++cases) {
        const double a = 1.0 - u01(rng);  // (0, 1]
        const double b = ub(rng), z = uz(rng);
        const auto want = oracle::mittag_leffler_mp(a, b, z, 300);
        if (!want) {
            d = "oracle failed at a=" + sci(a);
            return false;
        }
        const double w = static_cast<double>(*want);
        const double got = mittag_leffler(a, b, z);
        if (!std::isfinite(w)) {
            // beyond the double range on both sides counts as agreement
            ++overflow;
            if (!(std::isinf(got) && (got > 0) == (w > 0))) worst = INFINITY;
            continue;
        }
        worst = std::max(worst, std::abs(got - w) / std::max(std::abs(w), tol::ml_absolute_floor));
    }
    d = "exp " + sci(e_exp) + ", cos " + sci(e_cos) + ", E_{1,2} " + sci(e_12) + " (tol 1e-12); " +
        std::to_string(cases) + " random cases worst rel " + sci(worst) + " (tol 1e-9; " +
        std::to_string(overflow) + " beyond double range, matched as +inf)";
    return e_exp <= 1e-12 && e_cos <= 1e-12 && e_12 <= 1e-12 && worst <= 1e-9;
}

bool ac2(std::string& d) {
    double worst = 0.0;
    for (double a : {0.1, 0.3, 0.5, 0.75, 0.99}) {
        for (int n : {1, 2, 3, 16, 128, 1024}) {
            for (double c : {-3.5, 1.0, 7.0, 1e3}) {
                const TimeGrid g(2.0, n);
                const auto dv = caputo_derivative(a, SampledFn::from(g, [c](double) { return c; }));
                for (double v : dv.values) worst = std::max(worst, std::abs(v));
            }
        }
    }
    d = "max |D^a c| over nodes " + sci(worst) + " (tol 1e-14)";
    return worst <= 1e-14;
}

bool ac3(std::string& d) {
    bool ok = true;
    for (auto [a, b] : {std::pair{0.25, 0.5}, {0.5, 0.5}, {0.75, 0.25}, {0.3, 0.9}}) {
        std::vector<double> err;
        for (int n : {128, 256, 512, 1024}) {
            const TimeGrid g(1.0, n);
            const auto lhs = rl_integral(a, rl_integral(b, SampledFn::from(g, [](double t) { return t; })));
            double e = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) {
                const double t = g.node(i);
                e = std::max(e, std::abs(lhs.values[i] - std::pow(t, 1 + a + b) / std::tgamma(2 + a + b)));
            }
            err.push_back(e);
        }
        double min_ratio = INFINITY;
        for (std::size_t i = 1; i < err.size(); ++i) min_ratio = std::min(min_ratio, err[i - 1] / err[i]);
        ok = ok && min_ratio >= 1.8;
        d += "(" + sci(a) + "," + sci(b) + ") min ratio " + sci(min_ratio) + "; ";
    }
    d += "tol ratio >= 1.8";
    return ok;
}

bool ac4(std::string& d) {
    const SpectralModel model({1.0, 2.0, 3.0, 4.0});
    std::vector<double> res;
    for (int n : {128, 256, 512, 1024}) {
        res.push_back(check_solution_operator_identity(model, 0.75, ModeVector(4, 1.0), TimeGrid(1.0, n)).sup_residual);
    }
    const double order = min_order(res);
    d = "lambda=(1,2,3,4), alpha=0.75: residuals n=128..1024 " + join(res) + ", at 512 " + sci(res[2]) +
        " (tol 1e-3), min order " + sci(order) + " (tol 0.9)";
    std::vector<double> dir;
    for (int n : {512, 1024}) {
        dir.push_back(check_solution_operator_identity(SpectralModel::dirichlet_laplacian(4), 0.75, ModeVector(4, 1.0),
                                                       TimeGrid(1.0, n))
                          .sup_residual);
    }
    note("Dirichlet truncation lambda=(1,4,9,16): residual " + sci(dir[0]) + " at 512, " + sci(dir[1]) +
         " at 1024 (start-up error grows like lambda^2 h^(2 alpha))");
    return res[2] <= 1e-3 && order >= 0.9;
}

bool ac5(std::string& d) {
    boost::math::quadrature::tanh_sinh<double> q;
    double worst = 0.0;
    const auto model = SpectralModel::dirichlet_laplacian(4);
    for (double a : {0.5, 0.75}) {
        for (double nu : {1.0, 2.0, 5.0}) {
            double T = 1.0;
            while (std::pow(T, a - 1) * std::exp(-nu * T) / (nu * std::tgamma(a)) > 1e-10) T *= 1.5;
            const auto r = resolvent(model, a, nu, ModeVector(4, 1.0));
            for (std::size_t m = 0; m < 4; ++m) {
                const double l = model.lambda(m);
                auto f = [&](double t) {
                    return std::exp(-nu * t) * std::pow(t, a - 1) * mittag_leffler(a, a, -l * std::pow(t, a));
                };
                const double got = q.integrate(f, 0.0, T, 1e-12);
                worst = std::max(worst, std::abs(got - r[m]) / r[m]);
            }
        }
    }
    d = "Dirichlet(4), nu in {1,2,5}, alpha in {0.5,0.75}: worst per-mode rel " + sci(worst) + " (tol 1e-4)";
    return worst <= 1e-4;
}

bool ac6(std::string& d) {
    std::mt19937_64 rng(6006);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double worst = 0.0, worst_bound_ratio = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t nm = 1 + rng() % 10;
        const double alpha = 0.1 + 0.9 * u01(rng);
        const double a = 0.5 + 2.0 * u01(rng);
        const std::size_t nk = 1 + rng() % 4;
        NonlocalSpec nl{{}, {}, a};
        double t = 0.0, s = 0.0;
        for (std::size_t k = 0; k < nk; ++k) {
            t += (a - t) * (0.05 + 0.5 * u01(rng));
            nl.t.push_back(t);
            nl.c.push_back(u01(rng) - 0.5);
            s += std::abs(nl.c.back());
        }
        const double target = 0.99 * u01(rng);
        for (double& c : nl.c) c *= target / s;
        const auto model = SpectralModel::dirichlet_laplacian(nm);
        const auto inv = build_O(model, alpha, nl);
        const auto closed = build_O_closed_form(model, alpha, nl);
        for (std::size_t n = 0; n < nm; ++n) {
            worst = std::max(worst, std::abs(inv.o[n] - closed[n]));
            worst_bound_ratio = std::max(worst_bound_ratio, std::abs(inv.o[n]) / inv.bound);
        }
    }
    d = "50 random specs: Neumann vs closed form " + sci(worst) + " (tol 1e-10), max |o_n| / bound " +
        sci(worst_bound_ratio) + " (must be <= 1)";
    return worst <= 1e-10 && worst_bound_ratio <= 1.0;
}

bool ac7(std::string& d) {
    const double alpha = 0.75, lambda = 2.0, w = 1.0;
    const ProblemSpec p{SpectralModel({lambda}), alpha, NonlocalSpec{{}, {}, 1.0}, Nonlinearity::none(), {1.0}};
    std::vector<double> err;
    for (int n : {128, 256, 512, 1024}) {
        const TimeGrid g(1.0, n);
        const auto sol = solve_mild(p, g, ControlSignal::constant(g, {w}));
        double e = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
            const double t = g.node(j);
            const double want = w * std::pow(t, alpha) * mittag_leffler(alpha, alpha + 1, -lambda * std::pow(t, alpha));
            e = std::max(e, std::abs(sol.trajectory.states[j][0] - want));
        }
        err.push_back(e);
    }
    const double order = min_order(err);
    d = "lambda=2, alpha=0.75: sup errors n=128..1024 " + join(err) + " (tol 1e-3 at 1024), min order " + sci(order) +
        " (tol 0.9)";
    return err.back() <= 1e-3 && order >= 0.9;
}

bool ac8(std::string& d) {
    double lin = 0.0;
    {
        auto p = demo_problem();
        p.f = Nonlinearity::none();
        for (int n : {128, 512}) {
            const TimeGrid g(1.0, n);
            lin = std::max(lin, solve_mild(p, g, ControlSignal::constant(g, demo_control())).report.nonlocal_residual);
        }
        const ProblemSpec one{SpectralModel({2.0}), 0.6, NonlocalSpec{{0.3, -0.2}, {0.37, 0.81}, 1.0},
                              Nonlinearity::none(), {1.0}};
        const TimeGrid g(1.0, 300);
        lin = std::max(lin, solve_mild(one, g, ControlSignal::constant(g, {1.3})).report.nonlocal_residual);
    }
    const TimeGrid g(1.0, 512);
    const auto sol = solve_mild(demo_problem(), g, ControlSignal::constant(g, demo_control()));
    const double semi = sol.report.nonlocal_residual;
    d = "linear runs " + sci(lin) + " (tol 1e-8); semilinear demo N=8, alpha=0.75, n=512: " + sci(semi) +
        " (tol 1e-6) after " + std::to_string(sol.report.iterations) + " Picard iterations";
    return lin <= 1e-8 && semi <= 1e-6;
}

bool ac9(std::string& d) {
    auto p = demo_problem();
    p.f = Nonlinearity::polynomial({0.0, -1.0}, 8);
    const double beta = 1.0;
    const TimeGrid g(1.0, 256);
    const auto mu = ControlSignal::constant(g, demo_control());
    bool ok = true;
    for (int n : {4, 8, 16, 32}) {
        const auto un = regularized_W(p, mu, n);
        const auto up = regularized_W(p, mu, 2 * n);
        std::vector<ModeVector> diff = up.trajectory.states;
        for (std::size_t j = 0; j < diff.size(); ++j) {
            for (std::size_t m = 0; m < 8; ++m) diff[j][m] -= un.trajectory.states[j][m];
        }
        const double lhs = std::pow(l2_norm(g, diff), 2);
        const double q = std::max(un.q, up.q);
        const double env = 4 * q * q / (beta * n);
        ok = ok && lhs <= env;
        d += "n=" + std::to_string(n) + ": " + sci(lhs) + " <= " + sci(env) + "; ";
    }
    d += "f(u) = -u, beta = 1, p = 2n";
    return ok;
}

bool ac10(std::string& d) {
    bool law_ok = true;
    double worst = 0.0;
    for (double alpha : {0.75, 1.0}) {
        const ProblemSpec p{SpectralModel({2.0}), alpha, NonlocalSpec{{0.3}, {0.5}, 1.0}, Nonlinearity::none(), {1.0}};
        const TimeGrid g(1.0, 256);
        for (double xi : {1.0, -2.5}) {
            for (double rho : {1.0, 1e-2, 1e-4}) {
                const auto r = steer(p, g, {xi}, rho);
                const double want = rho * std::abs(xi) / (rho + r.gramian[0]);
                worst = std::max(worst, std::abs(r.endpoint_error - want) / want);
            }
        }
    }
    law_ok = worst <= 1e-6;

    auto lin = demo_problem();
    lin.f = Nonlinearity::none();
    const std::vector<Target> targets{{"mode1", {1, 0, 0, 0, 0, 0, 0, 0}}, {"mix", {0.5, -0.2, 0.1, 0, 0, 0, 0, 0}}};
    const std::vector<double> rhos{1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5};
    const auto rows = reachability_experiment(lin, TimeGrid(1.0, 256), targets, rhos);
    bool sweep_ok = true;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (i % rhos.size() != 0) sweep_ok = sweep_ok && rows[i].endpoint_error < rows[i - 1].endpoint_error;
    }

    ModeVector target(8, 0.0);
    target[0] = 0.5;
    target[1] = -0.2;
    const auto semi = steer(demo_problem(), TimeGrid(1.0, 512), target, 1e-5);
    d = "single-mode law worst rel " + sci(worst) + " (tol 1e-6); sweep over 5 decades " +
        (sweep_ok ? "strictly decreasing" : "NOT monotone") + "; semilinear demo error at rho=1e-5 " +
        sci(semi.endpoint_error) + " (tol 1e-2, " + std::to_string(semi.outer_iterations) + " outer iterations)";
    return law_ok && sweep_ok && semi.endpoint_error <= 1e-2;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FRACCTL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool ac11(std::string& d) {
    const fs::path dir = fs::temp_directory_path() / ("fracctl_accept_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const fs::path cfg = fs::path(FRACCTL_CONFIG_DIR);
    const auto a = dir / "a.csv", b = dir / "b.csv";
    const int ca = run_cli("simulate --config " + (cfg / "fractional_heat_demo.conf").string() + " --out " + a.string());
    const int cb = run_cli("simulate --config " + (cfg / "fractional_heat_demo.conf").string() + " --out " + b.string());
    const bool same = ca == 0 && cb == 0 && !slurp(a).empty() && slurp(a) == slurp(b) &&
                      slurp(a.string() + ".report") == slurp(b.string() + ".report");
    const int c3 = run_cli("simulate --config " + (cfg / "inadmissible.conf").string() + " --out " + (dir / "x.csv").string());
    std::error_code ec;
    fs::remove_all(dir, ec);
    d = std::string("demo simulate twice: ") + (same ? "byte-identical" : "DIFFERENT or failed") +
        "; H1-violating config exit code " + std::to_string(c3) + " (want 3)";
    return same && c3 == 3;
}

}  // namespace

int main() {
    criterion(1, "Mittag-Leffler identities and oracle", ac1);
    criterion(2, "Caputo derivative of constants", ac2);
    criterion(3, "fractional semigroup law", ac3);
    criterion(4, "solution-operator identity", ac4);
    criterion(5, "Laplace transform of S_alpha vs resolvent", ac5);
    criterion(6, "nonlocal inverse: Neumann vs closed form and bound", ac6);
    criterion(7, "single-mode mild solution vs closed form", ac7);
    criterion(8, "nonlocal condition residual", ac8);
    criterion(9, "regularized scheme envelope", ac9);
    criterion(10, "steering law, reachability sweep, semilinear steering", ac10);
    criterion(11, "CLI determinism and H1 exit code", ac11);
    std::printf("%d of 11 criteria passed\n", 11 - failures);
    return failures == 0 ? 0 : 1;
}
