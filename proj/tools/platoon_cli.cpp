// Command-line front end: simulate, certify, sweep, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "platoon/certify.hpp"
#include "platoon/harness.hpp"

namespace fs = std::filesystem;
using namespace platoon;

namespace {

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
}

void write_json(const nlohmann::json& j, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
}

int run_simulate(const fs::path& config, const fs::path& out_dir) {
    const auto scenario = load_scenario(config);
    const auto traj = simulate(scenario);
    const auto metrics = compute_metrics(traj, table1_phases());
    const auto cert = certify(scenario.params, scenario.n_followers);

    ensure_dir(out_dir);
    write_trajectory(traj, out_dir / "trajectory.csv");
    write_json(metrics_json(metrics), out_dir / "metrics.json");
    write_certificate(cert, out_dir / "certificate.txt");

    std::printf("vehicles            %zu\n", traj.n_vehicles());
    std::printf("samples             %zu\n", traj.samples.size());
    std::printf("platoon_peak        %.6g\n", metrics.platoon_peak);
    std::printf("asymptotic_residual %.6g\n", metrics.asymptotic_residual);
    std::printf("min_gap             %.6g\n", metrics.min_gap);
    std::printf("gamma_tilde         %.6g (%s)\n", cert.gamma_tilde,
                cert.string_stable ? "string stable" : "not certified");
    std::printf("output              %s\n", out_dir.string().c_str());
    return 0;
}

int run_certify(const fs::path& config, const std::optional<fs::path>& out_dir) {
    const auto scenario = load_scenario(config);
    const auto cert = certify(scenario.params, scenario.n_followers);
    write_certificate(cert, std::cout);
    if (out_dir) {
        ensure_dir(*out_dir);
        write_certificate(cert, *out_dir / "certificate.txt");
    }
    return cert.string_stable ? 0 : 3;
}

int run_sweep(const fs::path& config, const std::vector<std::size_t>& sizes, double max_variation,
              const std::optional<fs::path>& out_dir) {
    const auto scenario = load_scenario(config);
    const auto report = string_stability_sweep(scenario, sizes, max_variation);
    std::printf("%8s %14s %14s\n", "N", "platoon_peak", "max_amplif");
    for (const auto& e : report.entries) {
        double amp = 0.0;
        for (double a : e.amplification) amp = std::max(amp, a);
        std::printf("%8zu %14.6g %14.6g\n", e.n_followers, e.platoon_peak, amp);
    }
    std::printf("variation %.4g (limit %.4g), gamma certified: %s -> %s\n", report.variation,
                report.max_variation, report.gamma_certified ? "yes" : "no",
                report.passed ? "PASS" : "FAIL");
    if (out_dir) {
        ensure_dir(*out_dir);
        write_json(sweep_json(report), *out_dir / "sweep.json");
    }
    return report.passed ? 0 : 3;
}

int run_report(const fs::path& dir, const std::optional<fs::path>& out) {
    const auto src = dir / "trajectory.csv";
    std::ifstream in(src);
    if (!in) throw std::runtime_error("cannot open " + src.string());
    const fs::path target = out.value_or(dir / "long.csv");
    std::ofstream dst(target, std::ios::binary);
    if (!dst) throw std::runtime_error("cannot open " + target.string() + " for writing");
    trajectory_csv_to_long(in, dst);
    std::printf("%s\n", target.string().c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mesoscopic platoon simulator and string-stability certificates"};
    app.require_subcommand(1);

    fs::path sim_config, sim_out = "out";
    auto* sim = app.add_subcommand("simulate", "Run a scenario and write trajectory, metrics, certificate");
    sim->add_option("config", sim_config, "Scenario file")->required()->check(CLI::ExistingFile);
    sim->add_option("--out", sim_out, "Output directory")->capture_default_str();

    fs::path cert_config;
    std::optional<fs::path> cert_out;
    auto* cer = app.add_subcommand("certify", "Print the string-stability certificate");
    cer->add_option("config", cert_config, "Scenario file")->required()->check(CLI::ExistingFile);
    cer->add_option("--out", cert_out, "Also write certificate.txt/.json here");

    fs::path sweep_config;
    std::vector<std::size_t> sizes{5, 11, 21, 41};
    double max_variation = 0.05;
    std::optional<fs::path> sweep_out;
    auto* swp = app.add_subcommand("sweep", "Run the scenario across platoon sizes");
    swp->add_option("config", sweep_config, "Scenario file")->required()->check(CLI::ExistingFile);
    swp->add_option("--sizes", sizes, "Comma-separated follower counts N")
        ->delimiter(',')
        ->capture_default_str();
    swp->add_option("--max-variation", max_variation, "Allowed relative spread of platoon peaks")
        ->capture_default_str();
    swp->add_option("--out", sweep_out, "Write sweep.json here");

    fs::path report_dir;
    std::optional<fs::path> report_out;
    auto* rep = app.add_subcommand("report", "Convert <dir>/trajectory.csv to long format");
    rep->add_option("dir", report_dir, "Directory written by simulate")
        ->required()
        ->check(CLI::ExistingDirectory);
    rep->add_option("--out", report_out, "Output file (default <dir>/long.csv)");

    auto* cfg = app.add_subcommand("config", "Print the default three-phase scenario file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (*sim) return run_simulate(sim_config, sim_out);
        if (*cer) return run_certify(cert_config, cert_out);
        if (*swp) return run_sweep(sweep_config, sizes, max_variation, sweep_out);
        if (*rep) return run_report(report_dir, report_out);
        if (*cfg) {
            write_scenario(table1_scenario(), std::cout);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
