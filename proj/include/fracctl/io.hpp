#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "fracctl/control.hpp"
#include "fracctl/nonlocal.hpp"

namespace fracctl::io {

/// %.17g, the round-trip representation used in every output file.
std::string format_double(double x);

/// Trajectory file:
///
///   # fracctl-trajectory 1
///   # alpha=<a> horizon=<a> n_steps=<n> n_modes=<N>
///   t,u1,...,uN
///   <t_0>,<u_1(t_0)>,...
void write_trajectory(std::ostream& out, const Trajectory& traj, double alpha);

struct TrajectoryFile {
    Trajectory trajectory;
    double alpha = 0.0;
};

/// Throws UsageError on an empty or malformed file, or on nodes that do not form the
/// uniform grid named in the metadata line.
TrajectoryFile read_trajectory(std::istream& in);

using ReportEntries = std::vector<std::pair<std::string, std::string>>;

/// One `key = value` line per entry, in the given order.
void write_report(std::ostream& out, const ReportEntries& entries);

/// Header `target_id,rho,endpoint_error,control_energy,outer_iterations,stagnant`.
void write_reachability(std::ostream& out, const std::vector<ReachabilityRow>& rows);

}  // namespace fracctl::io
