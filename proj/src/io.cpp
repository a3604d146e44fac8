#include "fracctl/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "fracctl/errors.hpp"

namespace fracctl::io {

namespace {

constexpr const char* k_magic = "# fracctl-trajectory 1";

double parse_double(std::string_view s, std::size_t line) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        std::ostringstream os;
        os << "trajectory line " << line << ": malformed number '" << s << "'";
        throw UsageError(os.str());
    }
    return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) return out;
        start = pos + 1;
    }
}

}  // namespace

std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

void write_trajectory(std::ostream& out, const Trajectory& traj, double alpha) {
    const std::size_t nm = traj.states.empty() ? 0 : traj.states.front().size();
    out << k_magic << '\n';
    out << "# alpha=" << format_double(alpha) << " horizon=" << format_double(traj.grid.horizon())
        << " n_steps=" << traj.grid.size() - 1 << " n_modes=" << nm << '\n';
    out << 't';
    for (std::size_t m = 1; m <= nm; ++m) out << ",u" << m;
    out << '\n';
    for (std::size_t j = 0; j < traj.states.size(); ++j) {
        out << format_double(traj.grid.node(j));
        for (double v : traj.states[j]) out << ',' << format_double(v);
        out << '\n';
    }
}

TrajectoryFile read_trajectory(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next = [&]() {
        if (!std::getline(in, line)) return false;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next()) throw UsageError("trajectory file is empty");
    if (line != k_magic) throw UsageError("trajectory file: missing '# fracctl-trajectory 1' header");
    if (!next() || line.rfind("# ", 0) != 0) throw UsageError("trajectory file: missing metadata line");

    double alpha = NAN, horizon = NAN;
    long n_steps = -1, n_modes = -1;
    {
        std::istringstream meta(line.substr(2));
        std::string kv;
        while (meta >> kv) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw UsageError("trajectory file: malformed metadata '" + kv + "'");
            const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
            if (key == "alpha") alpha = parse_double(value, line_no);
            else if (key == "horizon") horizon = parse_double(value, line_no);
            else if (key == "n_steps") n_steps = std::lround(parse_double(value, line_no));
            else if (key == "n_modes") n_modes = std::lround(parse_double(value, line_no));
            else throw UsageError("trajectory file: unknown metadata key '" + key + "'");
        }
    }
    if (!std::isfinite(alpha) || !(horizon > 0.0) || n_steps < 1 || n_modes < 1) {
        throw UsageError("trajectory file: metadata needs alpha, horizon, n_steps >= 1, n_modes >= 1");
    }
    if (!next()) throw UsageError("trajectory file: missing column header");
    {
        std::string want = "t";
        for (long m = 1; m <= n_modes; ++m) want += ",u" + std::to_string(m);
        if (line != want) throw UsageError("trajectory file: column header does not match n_modes");
    }

    const TimeGrid grid(horizon, static_cast<int>(n_steps));
    TrajectoryFile out{Trajectory::zeros(grid, static_cast<std::size_t>(n_modes)), alpha};
    std::size_t row = 0;
    while (next()) {
        if (line.empty()) continue;
        if (row >= grid.size()) throw UsageError("trajectory file: more rows than n_steps + 1");
        const auto fields = split(line, ',');
        if (fields.size() != static_cast<std::size_t>(n_modes) + 1) {
            std::ostringstream os;
            os << "trajectory line " << line_no << ": expected " << n_modes + 1 << " fields";
            throw UsageError(os.str());
        }
        const double t = parse_double(fields[0], line_no);
        if (std::abs(t - grid.node(row)) > 1e-12 * horizon) {
            std::ostringstream os;
            os << "trajectory line " << line_no << ": time " << t << " is not grid node " << row;
            throw UsageError(os.str());
        }
        for (long m = 0; m < n_modes; ++m) {
            const double v = parse_double(fields[static_cast<std::size_t>(m) + 1], line_no);
            if (!std::isfinite(v)) throw UsageError("trajectory file: non-finite state value");
            out.trajectory.states[row][static_cast<std::size_t>(m)] = v;
        }
        ++row;
    }
    if (row != grid.size()) throw UsageError("trajectory file: fewer rows than n_steps + 1");
    return out;
}

void write_report(std::ostream& out, const ReportEntries& entries) {
    for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
}

void write_reachability(std::ostream& out, const std::vector<ReachabilityRow>& rows) {
    out << "target_id,rho,endpoint_error,control_energy,outer_iterations,stagnant\n";
    for (const auto& r : rows) {
        out << r.target_id << ',' << format_double(r.rho) << ',' << format_double(r.endpoint_error) << ','
            << format_double(r.control_energy) << ',' << r.outer_iterations << ',' << (r.stagnant ? 1 : 0)
            << '\n';
    }
}

}  // namespace fracctl::io
