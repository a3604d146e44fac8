#include "fracctl/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "fracctl/errors.hpp"
#include "fracctl/io.hpp"

namespace fracctl {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return std::string(s);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    std::ostringstream os;
    os << "config: " << key << " = '" << value << "': expected " << expected;
    throw UsageError(os.str());
}

double to_double(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        bad_value(key, raw, "a finite number");
    }
    return v;
}

long to_int(const std::string& key, const std::string& raw) {
    const std::string s = trim(raw);
    long v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad_value(key, raw, "an integer");
    return v;
}

std::vector<double> to_list(const std::string& key, const std::string& raw) {
    std::vector<double> out;
    if (trim(raw).empty()) return out;
    std::stringstream ss(raw);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
    if (!raw.empty() && raw.back() == ',') bad_value(key, raw, "a comma-separated list");
    return out;
}

std::string join(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + io::format_double(v[i]);
    return out;
}

TargetSpec parse_target(const std::string& id, const std::string& key, const std::string& raw) {
    TargetSpec t;
    t.id = id;
    const std::string s = trim(raw);
    if (s == "zero") {
        t.kind = TargetSpec::Kind::zero;
    } else if (s == "parabola") {
        t.kind = TargetSpec::Kind::parabola;
    } else if (s.rfind("mode:", 0) == 0) {
        const long k = to_int(key, s.substr(5));
        if (k < 1) bad_value(key, raw, "mode:k with k >= 1");
        t.kind = TargetSpec::Kind::mode;
        t.mode = static_cast<std::size_t>(k);
    } else {
        t.kind = TargetSpec::Kind::list;
        t.values = to_list(key, raw);
        if (t.values.empty()) bad_value(key, raw, "a coefficient list, zero, mode:k or parabola");
    }
    return t;
}

std::string target_text(const TargetSpec& t) {
    switch (t.kind) {
        case TargetSpec::Kind::zero: return "zero";
        case TargetSpec::Kind::parabola: return "parabola";
        case TargetSpec::Kind::mode: return "mode:" + std::to_string(t.mode);
        case TargetSpec::Kind::list: return join(t.values);
    }
    return {};
}

using Handler = void (*)(RunConfig&, const std::string& key, const std::string& value);

const std::map<std::string, std::map<std::string, Handler>>& handlers() {
    static const std::map<std::string, std::map<std::string, Handler>> table{
        {"model",
         {
             {"eigenvalues", [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.eigenvalues = trim(v);
                  if (c.eigenvalues != "dirichlet_squares" && c.eigenvalues != "list") {
                      bad_value(k, v, "dirichlet_squares or list");
                  }
              }},
             {"n_modes", [](RunConfig& c, const std::string& k, const std::string& v) {
                  const long n = to_int(k, v);
                  if (n < 1) bad_value(k, v, "a positive integer");
                  c.n_modes = static_cast<std::size_t>(n);
              }},
             {"lambdas", [](RunConfig& c, const std::string& k, const std::string& v) { c.lambdas = to_list(k, v); }},
         }},
        {"problem",
         {
             {"alpha", [](RunConfig& c, const std::string& k, const std::string& v) { c.alpha = to_double(k, v); }},
             {"horizon", [](RunConfig& c, const std::string& k, const std::string& v) { c.horizon = to_double(k, v); }},
             {"nonlocal_c", [](RunConfig& c, const std::string& k, const std::string& v) { c.nonlocal_c = to_list(k, v); }},
             {"nonlocal_t", [](RunConfig& c, const std::string& k, const std::string& v) { c.nonlocal_t = to_list(k, v); }},
             {"kappa", [](RunConfig& c, const std::string& k, const std::string& v) { c.kappa = to_double(k, v); }},
             {"nonlinearity", [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.nonlinearity = trim(v);
                  if (c.nonlinearity != "none" && c.nonlinearity != "demo_sin" && c.nonlinearity != "custom") {
                      bad_value(k, v, "none, demo_sin or custom");
                  }
              }},
             {"nonlinearity_coeffs", [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.nonlinearity_coeffs = to_list(k, v);
              }},
             {"control", [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.control = trim(v);
                  if (c.control != "zero" && c.control != "constant") bad_value(k, v, "zero or constant");
              }},
             {"control_coeffs", [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.control_coeffs = to_list(k, v);
              }},
         }},
        {"grid",
         {
             {"n_steps", [](RunConfig& c, const std::string& k, const std::string& v) {
                  const long n = to_int(k, v);
                  if (n < 1 || n > 1'000'000) bad_value(k, v, "an integer in [1, 1000000]");
                  c.n_steps = static_cast<int>(n);
              }},
         }},
        {"solver",
         {
             {"tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.tol = to_double(k, v); }},
             {"max_iter", [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.max_iter = static_cast<int>(to_int(k, v));
              }},
             {"damping", [](RunConfig& c, const std::string& k, const std::string& v) { c.damping = to_double(k, v); }},
             {"verify_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.verify_tol = to_double(k, v); }},
             {"steer_tol", [](RunConfig& c, const std::string& k, const std::string& v) { c.steer_tol = to_double(k, v); }},
             {"steer_max_iter", [](RunConfig& c, const std::string& k, const std::string& v) {
                  c.steer_max_iter = static_cast<int>(to_int(k, v));
              }},
         }},
        {"experiment",
         {
             {"rhos", [](RunConfig& c, const std::string& k, const std::string& v) { c.rhos = to_list(k, v); }},
         }},
    };
    return table;
}

void validate(RunConfig& c) {
    if (c.eigenvalues == "list") {
        if (c.lambdas.empty()) throw UsageError("config: eigenvalues = list needs [model] lambdas");
        c.n_modes = c.lambdas.size();
    } else if (!c.lambdas.empty()) {
        throw UsageError("config: [model] lambdas is only allowed with eigenvalues = list");
    }
    if (c.nonlinearity == "custom") {
        if (c.nonlinearity_coeffs.empty()) throw UsageError("config: nonlinearity = custom needs nonlinearity_coeffs");
    } else if (!c.nonlinearity_coeffs.empty()) {
        throw UsageError("config: nonlinearity_coeffs is only allowed with nonlinearity = custom");
    }
    if (c.control == "constant") {
        if (c.control_coeffs.empty()) throw UsageError("config: control = constant needs control_coeffs");
        if (c.control_coeffs.size() > c.n_modes) throw UsageError("config: control_coeffs has more entries than modes");
    } else if (!c.control_coeffs.empty()) {
        throw UsageError("config: control_coeffs is only allowed with control = constant");
    }
    if (!(c.tol > 0.0) || c.max_iter < 1 || !(c.damping > 0.0 && c.damping <= 1.0) || !(c.verify_tol > 0.0) ||
        !(c.steer_tol > 0.0) || c.steer_max_iter < 1) {
        throw UsageError("config: [solver] needs tol > 0, max_iter >= 1, damping in (0, 1], verify_tol > 0, "
                         "steer_tol > 0, steer_max_iter >= 1");
    }
    for (std::size_t i = 0; i < c.rhos.size(); ++i) {
        if (!(c.rhos[i] > 0.0) || (i > 0 && !(c.rhos[i] < c.rhos[i - 1]))) {
            throw UsageError("config: rhos must be positive and strictly decreasing");
        }
    }
    for (const auto& t : c.targets) {
        if (t.kind == TargetSpec::Kind::mode && t.mode > c.n_modes) {
            throw UsageError("config: target_" + t.id + " names a mode beyond n_modes");
        }
        if (t.kind == TargetSpec::Kind::list && t.values.size() > c.n_modes) {
            throw UsageError("config: target_" + t.id + " has more entries than modes");
        }
    }
    c.warnings.clear();
    if (c.kappa == 0.0) c.warnings.push_back("kappa = 0: the control has no authority");
    // re-validate the model and problem invariants
    make_problem(c).validate();
}

}  // namespace

ModeVector TargetSpec::resolve(std::size_t n_modes) const {
    ModeVector out(n_modes, 0.0);
    switch (kind) {
        case Kind::zero: break;
        case Kind::mode:
            if (mode < 1 || mode > n_modes) throw UsageError("target " + id + ": mode index out of range");
            out[mode - 1] = 1.0;
            break;
        case Kind::parabola: {
            // int_0^pi x (pi - x) sin(n x) dx = 4 / n^3 for odd n
            const double scale = std::sqrt(2.0 / std::numbers::pi) * 4.0 / (std::numbers::pi * std::numbers::pi);
            for (std::size_t n = 1; n <= n_modes; n += 2) out[n - 1] = scale * 4.0 / std::pow(static_cast<double>(n), 3);
            break;
        }
        case Kind::list:
            if (values.size() > n_modes) throw UsageError("target " + id + ": more entries than modes");
            std::copy(values.begin(), values.end(), out.begin());
            break;
    }
    return out;
}

bool RunConfig::operator==(const RunConfig& o) const {
    return eigenvalues == o.eigenvalues && n_modes == o.n_modes && lambdas == o.lambdas && alpha == o.alpha &&
           horizon == o.horizon && nonlocal_c == o.nonlocal_c && nonlocal_t == o.nonlocal_t && kappa == o.kappa &&
           nonlinearity == o.nonlinearity && nonlinearity_coeffs == o.nonlinearity_coeffs && control == o.control &&
           control_coeffs == o.control_coeffs && n_steps == o.n_steps && tol == o.tol && max_iter == o.max_iter &&
           damping == o.damping && verify_tol == o.verify_tol && steer_tol == o.steer_tol &&
           steer_max_iter == o.steer_max_iter && rhos == o.rhos && targets == o.targets;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        std::ostringstream os;
        os << origin << ": line " << e.line() << ": " << e.message();
        throw UsageError(os.str());
    }
    RunConfig cfg;
    for (const auto& [section, body] : tree) {
        if (!body.data().empty()) throw UsageError(origin + ": key '" + section + "' outside a section");
        const auto sec = handlers().find(section);
        if (sec == handlers().end()) throw UsageError(origin + ": unknown section [" + section + "]");
        for (const auto& [key, node] : body) {
            const std::string value = node.get_value<std::string>();
            const std::string qualified = section + "." + key;
            if (section == "experiment" && key.rfind("target_", 0) == 0 && key.size() > 7) {
                const std::string id = key.substr(7);
                cfg.targets.push_back(parse_target(id, qualified, value));
                continue;
            }
            const auto h = sec->second.find(key);
            if (h == sec->second.end()) throw UsageError(origin + ": unknown key '" + qualified + "'");
            h->second(cfg, qualified, value);
        }
    }
    validate(cfg);
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::string serialize_config(const RunConfig& c) {
    std::ostringstream os;
    auto num = [](double x) { return io::format_double(x); };
    os << "[model]\n";
    os << "eigenvalues = " << c.eigenvalues << '\n';
    if (c.eigenvalues == "list") {
        os << "lambdas = " << join(c.lambdas) << '\n';
    } else {
        os << "n_modes = " << c.n_modes << '\n';
    }
    os << "\n[problem]\n";
    os << "alpha = " << num(c.alpha) << '\n';
    os << "horizon = " << num(c.horizon) << '\n';
    os << "nonlocal_c = " << join(c.nonlocal_c) << '\n';
    os << "nonlocal_t = " << join(c.nonlocal_t) << '\n';
    os << "kappa = " << num(c.kappa) << '\n';
    os << "nonlinearity = " << c.nonlinearity << '\n';
    if (c.nonlinearity == "custom") os << "nonlinearity_coeffs = " << join(c.nonlinearity_coeffs) << '\n';
    os << "control = " << c.control << '\n';
    if (c.control == "constant") os << "control_coeffs = " << join(c.control_coeffs) << '\n';
    os << "\n[grid]\n";
    os << "n_steps = " << c.n_steps << '\n';
    os << "\n[solver]\n";
    os << "tol = " << num(c.tol) << '\n';
    os << "max_iter = " << c.max_iter << '\n';
    os << "damping = " << num(c.damping) << '\n';
    os << "verify_tol = " << num(c.verify_tol) << '\n';
    os << "steer_tol = " << num(c.steer_tol) << '\n';
    os << "steer_max_iter = " << c.steer_max_iter << '\n';
    os << "\n[experiment]\n";
    os << "rhos = " << join(c.rhos) << '\n';
    for (const auto& t : c.targets) os << "target_" << t.id << " = " << target_text(t) << '\n';
    return os.str();
}

SpectralModel make_model(const RunConfig& cfg) {
    if (cfg.eigenvalues == "list") return SpectralModel(cfg.lambdas, "list");
    return SpectralModel::dirichlet_laplacian(cfg.n_modes);
}

ProblemSpec make_problem(const RunConfig& cfg) {
    auto model = make_model(cfg);
    const std::size_t nm = model.n_modes();
    Nonlinearity f = Nonlinearity::none();
    if (cfg.nonlinearity == "demo_sin") f = Nonlinearity::demo_sine(nm);
    if (cfg.nonlinearity == "custom") f = Nonlinearity::polynomial(cfg.nonlinearity_coeffs, nm);
    ProblemSpec p{std::move(model), cfg.alpha, NonlocalSpec{cfg.nonlocal_c, cfg.nonlocal_t, cfg.horizon}, std::move(f),
                  ProblemSpec::uniform_gains(nm, cfg.kappa)};
    return p;
}

TimeGrid make_grid(const RunConfig& cfg) { return TimeGrid(cfg.horizon, cfg.n_steps); }

ControlSignal make_control(const RunConfig& cfg, const TimeGrid& grid) {
    ModeVector w(cfg.n_modes, 0.0);
    if (cfg.control == "constant") std::copy(cfg.control_coeffs.begin(), cfg.control_coeffs.end(), w.begin());
    return ControlSignal::constant(grid, w);
}

SolveOptions make_solve_options(const RunConfig& cfg) {
    return SolveOptions{cfg.tol, cfg.max_iter, cfg.damping, GreenForm::full_horizon};
}

SteerOptions make_steer_options(const RunConfig& cfg) {
    return SteerOptions{cfg.steer_tol, cfg.steer_max_iter, make_solve_options(cfg)};
}

std::vector<Target> make_targets(const RunConfig& cfg) {
    std::vector<Target> out;
    for (const auto& t : cfg.targets) out.push_back({t.id, t.resolve(cfg.n_modes)});
    return out;
}

}  // namespace fracctl
