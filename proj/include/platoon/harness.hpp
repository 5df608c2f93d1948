#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "platoon/certify.hpp"
#include "platoon/dynamics.hpp"

namespace platoon {

/// The three-phase experiment with the published gains: 11 vehicles, 14 m/s start,
/// +4 / -4 m/s^2 pulses on vehicle 0 over [10, 20) s with the macroscopic feed to vehicle 1
/// cut, then speed steps to 30 m/s at 30 s and 20 m/s at 45 s.
[[nodiscard]] Scenario table1_scenario();

/// Scenario from an INI-style file. Sections and keys absent from the file keep their
/// table1_scenario() values; unknown sections or keys are rejected.
[[nodiscard]] Scenario load_scenario(const std::filesystem::path& path);
[[nodiscard]] Scenario parse_scenario(std::istream& in, const std::string& origin = "<stream>");
void write_scenario(const Scenario& s, std::ostream& out);

struct PhaseWindow {
    std::string name;
    double t_begin = 0.0;
    double t_end = 0.0;
    double tolerance = 0.15;
};

[[nodiscard]] std::vector<PhaseWindow> table1_phases();

struct PhaseSettling {
    std::string name;
    double settling_time = 0.0;  // since phase start; 0 if never above tolerance
    bool settled = false;        // envelope below tolerance at the phase's last sample
};

struct Metrics {
    std::vector<double> peak_deviation;  // per vehicle, sup over samples of |deviation|
    double platoon_peak = 0.0;
    std::vector<double> amplification;   // peak(i) / peak(i-1), i >= 1
    double asymptotic_residual = 0.0;    // max_i |deviation_i| at the last sample
    std::vector<PhaseSettling> settling;
    double min_gap = 0.0;                // min over samples and vehicles of -dp
};

/// Max over vehicles of the deviation norm at one sample.
[[nodiscard]] double deviation_envelope(const Sample& s, const Equilibrium& eq);

[[nodiscard]] Metrics compute_metrics(const Trajectory& traj, std::span<const PhaseWindow> phases);

/// True iff the deviation envelope stays below eps on every sample with t >= t_from and its
/// maximum over the second half of that window does not exceed the maximum over the first half.
[[nodiscard]] bool asymptotic_check(const Trajectory& traj, double t_from, double eps);

struct SweepEntry {
    std::size_t n_followers = 0;
    double platoon_peak = 0.0;
    std::vector<double> amplification;
    Metrics metrics;
};

struct SweepReport {
    std::vector<SweepEntry> entries;  // in the order of the requested sizes
    double variation = 0.0;           // (max peak - min peak) / min peak
    double max_variation = 0.05;
    bool gamma_certified = false;     // gamma_tilde < 1
    bool passed = false;              // variation < max_variation and gamma_certified
};

/// Runs the base scenario at each platoon size concurrently. Initial conditions are drawn from
/// the seed stream (seed xor N). Pulses aimed at vehicles beyond N are dropped.
[[nodiscard]] SweepReport string_stability_sweep(const Scenario& base,
                                                 std::span<const std::size_t> sizes,
                                                 double max_variation = 0.05);

/// Column order of the trajectory CSV after the leading "t".
[[nodiscard]] std::vector<std::string> trajectory_columns(std::size_t n_vehicles);

void write_trajectory(const Trajectory& traj, std::ostream& out);
void write_trajectory(const Trajectory& traj, const std::filesystem::path& path);

[[nodiscard]] nlohmann::json certificate_json(const Certificate& c);
void write_certificate(const Certificate& c, std::ostream& out);
/// Writes the key-value report to path and its JSON twin next to it (extension .json).
void write_certificate(const Certificate& c, const std::filesystem::path& path);

[[nodiscard]] nlohmann::json metrics_json(const Metrics& m);
[[nodiscard]] nlohmann::json sweep_json(const SweepReport& r);

/// Converts a trajectory CSV into long format rows "t,vehicle,signal,value".
void trajectory_csv_to_long(std::istream& wide, std::ostream& long_out);

/// Shortest round-trip decimal text of a double.
[[nodiscard]] std::string format_double(double v);

}  // namespace platoon
