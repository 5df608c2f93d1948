#include "platoon/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace platoon {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

double parse_double(const std::string& text, const std::string& where) {
    double v = 0.0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw std::invalid_argument(where + ": expected a number, got '" + text + "'");
    }
    return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& where) {
    std::uint64_t v = 0;
    const auto* end = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (ec != std::errc() || ptr != end || text.empty()) {
        throw std::invalid_argument(where + ": expected a non-negative integer, got '" + text + "'");
    }
    return v;
}

// Section reader that records every key it consumes so leftovers can be reported.
class Section {
public:
    Section(const pt::ptree* tree, std::string name) : tree_(tree), name_(std::move(name)) {}

    void number(const char* key, double& out) {
        if (auto v = raw(key)) out = parse_double(*v, where(key));
    }
    void count(const char* key, std::size_t& out) {
        if (auto v = raw(key)) out = static_cast<std::size_t>(parse_unsigned(*v, where(key)));
    }
    void seed(const char* key, std::uint64_t& out) {
        if (auto v = raw(key)) out = parse_unsigned(*v, where(key));
    }
    std::optional<std::string> raw(const char* key) {
        seen_.insert(key);
        if (!tree_) return std::nullopt;
        if (auto v = tree_->get_optional<std::string>(pt::ptree::path_type(key, '\0'))) {
            return trim(*v);
        }
        return std::nullopt;
    }
    [[nodiscard]] std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

    void reject_unknown() const {
        if (!tree_) return;
        for (const auto& [key, _] : *tree_) {
            if (!seen_.count(key)) throw std::invalid_argument(where(key) + ": unknown key");
        }
    }

    [[nodiscard]] const pt::ptree* tree() const { return tree_; }

private:
    const pt::ptree* tree_;
    std::string name_;
    std::set<std::string> seen_;
};

std::vector<SpeedSegment> parse_segments(const std::string& text, const std::string& where) {
    std::vector<SpeedSegment> out;
    if (text.empty()) return out;
    for (const auto& item : split(text, ',')) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) {
            throw std::invalid_argument(where + ": expected 'start:speed', got '" + item + "'");
        }
        out.push_back({parse_double(parts[0], where), parse_double(parts[1], where)});
    }
    return out;
}

DisturbancePulse parse_pulse(const std::string& text, const std::string& where) {
    const auto f = split(text, ',');
    if (f.size() < 4 || f.size() > 5) {
        throw std::invalid_argument(
            where + ": expected 'target, t_on, duration, amplitude[, suppress_macro_for]'");
    }
    DisturbancePulse p;
    p.target = static_cast<std::size_t>(parse_unsigned(f[0], where));
    p.t_on = parse_double(f[1], where);
    p.duration = parse_double(f[2], where);
    p.amplitude = parse_double(f[3], where);
    if (f.size() == 5 && f[4] != "-") {
        p.suppress_macro_for = static_cast<std::size_t>(parse_unsigned(f[4], where));
    }
    return p;
}

const std::vector<std::string> kSections = {"platoon", "gains", "macro", "limits",
                                            "schedule", "pulses", "integrator"};

}  // namespace

std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

Scenario table1_scenario() {
    Scenario s;
    s.n_followers = 10;
    s.params.k_dp = 1.0;
    s.params.k_dv = 2.0;
    s.params.upsilon = 0.9;
    s.params.dp_bar = 10.0;
    s.params.weights = MacroWeights{0.5, 0.5, 0.2, 1.0, 1.5, 1.5};
    s.schedule.v_initial = 14.0;
    s.schedule.segments = {{30.0, 30.0}, {45.0, 20.0}};
    s.schedule.gain = 2.0;
    s.pulses = {{0, 10.0, 5.0, 4.0, 1}, {0, 15.0, 5.0, -4.0, 1}};
    s.limits = Limits{36.0, 4.0, 0.0};
    s.h = 0.01;
    s.t_end = 60.0;
    s.output_interval = 0.1;
    s.seed = 20200820;
    s.ic_radius = {2.0, 1.0};
    return s;
}

Scenario parse_scenario(std::istream& in, const std::string& origin) {
    pt::ptree tree;
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw std::invalid_argument(origin + ": " + e.message() + " (line " +
                                    std::to_string(e.line()) + ")");
    }
    for (const auto& [name, _] : tree) {
        if (std::find(kSections.begin(), kSections.end(), name) == kSections.end()) {
            throw std::invalid_argument(origin + ": unknown section [" + name + "]");
        }
    }
    auto section = [&](const std::string& name) {
        const auto child = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
        return Section(child ? &*child : nullptr, name);
    };

    Scenario s = table1_scenario();
    try {
        auto platoon = section("platoon");
        platoon.count("n_followers", s.n_followers);
        platoon.seed("seed", s.seed);
        platoon.number("ic_radius_dp", s.ic_radius.dp);
        platoon.number("ic_radius_dv", s.ic_radius.dv);
        platoon.reject_unknown();

        auto gains = section("gains");
        gains.number("k_dp", s.params.k_dp);
        gains.number("k_dv", s.params.k_dv);
        gains.number("upsilon", s.params.upsilon);
        gains.number("dp_bar", s.params.dp_bar);
        gains.reject_unknown();

        auto macro = section("macro");
        auto& w = s.params.weights;
        macro.number("lambda1", w.lambda1);
        macro.number("lambda2", w.lambda2);
        macro.number("a", w.a);
        macro.number("b", w.b);
        macro.number("gamma_dp", w.gamma_dp);
        macro.number("gamma_dv", w.gamma_dv);
        macro.reject_unknown();

        auto limits = section("limits");
        limits.number("v_max", s.limits.v_max);
        limits.number("a_max", s.limits.a_max);
        limits.number("v_min_open", s.limits.v_min_open);
        limits.reject_unknown();

        auto schedule = section("schedule");
        schedule.number("v_initial", s.schedule.v_initial);
        schedule.number("gain", s.schedule.gain);
        if (auto seg = schedule.raw("segments")) {
            s.schedule.segments = parse_segments(*seg, schedule.where("segments"));
        }
        schedule.reject_unknown();

        // Any [pulses] section replaces the default pulses; every key is one pulse.
        auto pulses = section("pulses");
        if (pulses.tree()) {
            s.pulses.clear();
            for (const auto& [key, value] : *pulses.tree()) {
                s.pulses.push_back(parse_pulse(trim(value.data()), pulses.where(key)));
            }
        }

        auto integrator = section("integrator");
        integrator.number("h", s.h);
        integrator.number("t_end", s.t_end);
        integrator.number("output_interval", s.output_interval);
        integrator.reject_unknown();

        s.validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(origin + ": " + e.what());
    }
    return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file " + path.string());
    return parse_scenario(in, path.string());
}

void write_scenario(const Scenario& s, std::ostream& out) {
    const auto f = format_double;
    const auto& w = s.params.weights;
    out << "[platoon]\n"
        << "n_followers = " << s.n_followers << "\n"
        << "seed = " << s.seed << "\n"
        << "ic_radius_dp = " << f(s.ic_radius.dp) << "\n"
        << "ic_radius_dv = " << f(s.ic_radius.dv) << "\n\n"
        << "[gains]\n"
        << "k_dp = " << f(s.params.k_dp) << "\n"
        << "k_dv = " << f(s.params.k_dv) << "\n"
        << "upsilon = " << f(s.params.upsilon) << "\n"
        << "dp_bar = " << f(s.params.dp_bar) << "\n\n"
        << "[macro]\n"
        << "lambda1 = " << f(w.lambda1) << "\n"
        << "lambda2 = " << f(w.lambda2) << "\n"
        << "a = " << f(w.a) << "\n"
        << "b = " << f(w.b) << "\n"
        << "gamma_dp = " << f(w.gamma_dp) << "\n"
        << "gamma_dv = " << f(w.gamma_dv) << "\n\n"
        << "[limits]\n"
        << "v_max = " << f(s.limits.v_max) << "\n"
        << "a_max = " << f(s.limits.a_max) << "\n"
        << "v_min_open = " << f(s.limits.v_min_open) << "\n\n"
        << "[schedule]\n"
        << "v_initial = " << f(s.schedule.v_initial) << "\n"
        << "gain = " << f(s.schedule.gain) << "\n"
        << "segments = ";
    for (std::size_t k = 0; k < s.schedule.segments.size(); ++k) {
        if (k) out << ", ";
        out << f(s.schedule.segments[k].start) << ":" << f(s.schedule.segments[k].v_bar);
    }
    out << "\n\n[pulses]\n";
    for (std::size_t k = 0; k < s.pulses.size(); ++k) {
        const auto& p = s.pulses[k];
        out << "pulse" << k << " = " << p.target << ", " << f(p.t_on) << ", " << f(p.duration) << ", "
            << f(p.amplitude);
        if (p.suppress_macro_for) out << ", " << *p.suppress_macro_for;
        out << "\n";
    }
    out << "\n[integrator]\n"
        << "h = " << f(s.h) << "\n"
        << "t_end = " << f(s.t_end) << "\n"
        << "output_interval = " << f(s.output_interval) << "\n";
}

std::vector<PhaseWindow> table1_phases() {
    return {{"phase1", 0.0, 10.0, 0.15}, {"phase2", 10.0, 30.0, 0.15}, {"phase3", 30.0, 60.0, 0.15}};
}

double deviation_envelope(const Sample& s, const Equilibrium& eq) {
    double m = 0.0;
    for (const auto& v : s.vehicles) m = std::max(m, deviation_norm(v.extended(), eq));
    return m;
}

Metrics compute_metrics(const Trajectory& traj, std::span<const PhaseWindow> phases) {
    Metrics m;
    if (traj.samples.empty()) return m;
    const auto eq = traj.params.equilibrium();
    const std::size_t n = traj.n_vehicles();
    m.peak_deviation.assign(n, 0.0);
    m.min_gap = std::numeric_limits<double>::infinity();

    std::vector<double> envelope;
    envelope.reserve(traj.samples.size());
    for (const auto& s : traj.samples) {
        double e = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dev = deviation_norm(s.vehicles[i].extended(), eq);
            m.peak_deviation[i] = std::max(m.peak_deviation[i], dev);
            m.min_gap = std::min(m.min_gap, -s.vehicles[i].dp);
            e = std::max(e, dev);
        }
        envelope.push_back(e);
    }
    m.platoon_peak = *std::max_element(m.peak_deviation.begin(), m.peak_deviation.end());
    for (std::size_t i = 1; i < n; ++i) {
        const double prev = m.peak_deviation[i - 1];
        const double cur = m.peak_deviation[i];
        // An undisturbed pair behind an undisturbed pair does not amplify anything.
        m.amplification.push_back(prev > 0.0  ? cur / prev
                                  : cur > 0.0 ? std::numeric_limits<double>::infinity()
                                              : 0.0);
    }
    m.asymptotic_residual = envelope.back();

    for (const auto& ph : phases) {
        PhaseSettling st{ph.name, 0.0, false};
        double last_value = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < traj.samples.size(); ++k) {
            const double t = traj.samples[k].t;
            if (t < ph.t_begin || t > ph.t_end) continue;
            if (envelope[k] > ph.tolerance) st.settling_time = t - ph.t_begin;
            last_value = envelope[k];
        }
        st.settled = last_value <= ph.tolerance;
        m.settling.push_back(st);
    }
    return m;
}

bool asymptotic_check(const Trajectory& traj, double t_from, double eps) {
    if (traj.samples.empty()) return false;
    const auto eq = traj.params.equilibrium();
    std::vector<double> window;
    for (const auto& s : traj.samples) {
        if (s.t >= t_from) window.push_back(deviation_envelope(s, eq));
    }
    if (window.empty()) return false;
    if (*std::max_element(window.begin(), window.end()) >= eps) return false;
    const auto mid = window.begin() + static_cast<std::ptrdiff_t>(window.size() / 2);
    const double early = *std::max_element(window.begin(), std::max(mid, window.begin() + 1));
    const double late = *std::max_element(mid, window.end());
    return late <= early + 1e-12;
}

SweepReport string_stability_sweep(const Scenario& base, std::span<const std::size_t> sizes,
                                   double max_variation) {
    if (sizes.empty()) throw std::invalid_argument("sweep: sizes must be nonempty");
    const auto phases = table1_phases();

    std::vector<std::future<SweepEntry>> jobs;
    jobs.reserve(sizes.size());
    for (const std::size_t n : sizes) {
        Scenario s = base;
        s.n_followers = n;
        s.initial_state.reset();
        std::erase_if(s.pulses, [n](const DisturbancePulse& p) { return p.target > n; });
        jobs.push_back(std::async(std::launch::async, [s = std::move(s), &phases]() {
            SweepEntry e;
            e.n_followers = s.n_followers;
            try {
                e.metrics = compute_metrics(simulate(s), phases);
            } catch (const std::exception& ex) {
                throw std::runtime_error("sweep N=" + std::to_string(s.n_followers) + ": " +
                                         ex.what());
            }
            e.platoon_peak = e.metrics.platoon_peak;
            e.amplification = e.metrics.amplification;
            return e;
        }));
    }

    SweepReport r;
    r.max_variation = max_variation;
    for (auto& j : jobs) r.entries.push_back(j.get());
    const auto [lo, hi] = std::minmax_element(
        r.entries.begin(), r.entries.end(),
        [](const SweepEntry& a, const SweepEntry& b) { return a.platoon_peak < b.platoon_peak; });
    r.variation = lo->platoon_peak > 0.0 ? (hi->platoon_peak - lo->platoon_peak) / lo->platoon_peak
                                         : 0.0;
    r.gamma_certified = iss_gain(base.params).string_stable;
    r.passed = r.variation < max_variation && r.gamma_certified;
    return r;
}

std::vector<std::string> trajectory_columns(std::size_t n_vehicles) {
    static const char* kSignals[] = {"p", "v", "u_ctrl", "u_app", "dp", "dv", "rho1", "rho2"};
    std::vector<std::string> cols;
    cols.reserve(8 * n_vehicles);
    for (std::size_t i = 0; i < n_vehicles; ++i) {
        for (const char* sig : kSignals) cols.push_back(std::string(sig) + "_" + std::to_string(i));
    }
    return cols;
}

void write_trajectory(const Trajectory& traj, std::ostream& out) {
    out << "t";
    for (const auto& c : trajectory_columns(traj.n_vehicles())) out << ',' << c;
    out << '\n';
    for (const auto& s : traj.samples) {
        out << format_double(s.t);
        for (const auto& v : s.vehicles) {
            for (double x : {v.p, v.v, v.u_ctrl, v.u_app, v.dp, v.dv, v.rho1, v.rho2}) {
                out << ',' << format_double(x);
            }
        }
        out << '\n';
    }
}

void write_trajectory(const Trajectory& traj, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_trajectory(traj, out);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json certificate_json(const Certificate& c) {
    auto finite_or_null = [](double v) -> nlohmann::json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    nlohmann::json j;
    j["alpha_lo"] = c.alpha_lo;
    j["alpha_hi"] = c.alpha_hi;
    j["alpha"] = c.alpha;
    j["d"] = c.d;
    j["upsilon"] = c.upsilon;
    j["gamma_tilde"] = c.gamma_tilde;
    j["string_stable"] = c.string_stable;
    j["recursive_bound_factor"] = finite_or_null(c.recursive_bound_factor);
    j["k_tilde"] = c.k_tilde;
    j["k_tilde_alternate"] = c.k_tilde_alternate;
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < c.S.rows(); ++i) {
        rows.emplace_back(c.S.row(i).begin(), c.S.row(i).end());
    }
    j["S"] = rows;
    j["D"] = std::vector<double>(c.D.begin(), c.D.end());
    j["d_ratio"] = c.d_ratio;
    j["pd_margin"] = c.pd_margin;
    j["m_matrix_found"] = c.m_matrix_found;
    j["exact"] = {{"alpha_lo", c.exact.alpha_lo},
                  {"alpha_hi", c.exact.alpha_hi},
                  {"alpha", c.exact.alpha},
                  {"alpha_displayed_sym", c.exact.alpha_displayed_sym},
                  {"gamma_tilde", finite_or_null(c.exact.gamma_tilde)}};
    return j;
}

void write_certificate(const Certificate& c, std::ostream& out) {
    const auto f = format_double;
    auto list = [&](const auto& values) {
        std::string s;
        for (double v : values) s += (s.empty() ? "" : ",") + f(v);
        return s;
    };
    out << "alpha_lo=" << f(c.alpha_lo) << '\n'
        << "alpha_hi=" << f(c.alpha_hi) << '\n'
        << "alpha=" << f(c.alpha) << '\n'
        << "d=" << f(c.d) << '\n'
        << "upsilon=" << f(c.upsilon) << '\n'
        << "gamma_tilde=" << f(c.gamma_tilde) << '\n'
        << "string_stable=" << (c.string_stable ? "true" : "false") << '\n'
        << "recursive_bound_factor=" << f(c.recursive_bound_factor) << '\n'
        << "k_tilde=" << list(c.k_tilde) << '\n'
        << "k_tilde_alternate=" << list(c.k_tilde_alternate) << '\n'
        << "S_size=" << c.S.rows() << '\n'
        << "D=" << list(c.D) << '\n'
        << "d_ratio=" << f(c.d_ratio) << '\n'
        << "pd_margin=" << f(c.pd_margin) << '\n'
        << "m_matrix_found=" << (c.m_matrix_found ? "true" : "false") << '\n'
        << "exact.alpha_lo=" << f(c.exact.alpha_lo) << '\n'
        << "exact.alpha_hi=" << f(c.exact.alpha_hi) << '\n'
        << "exact.alpha=" << f(c.exact.alpha) << '\n'
        << "exact.alpha_displayed_sym=" << f(c.exact.alpha_displayed_sym) << '\n'
        << "exact.gamma_tilde=" << f(c.exact.gamma_tilde) << '\n';
}

void write_certificate(const Certificate& c, const std::filesystem::path& path) {
    {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
        write_certificate(c, out);
        if (!out) throw std::runtime_error("write failed: " + path.string());
    }
    auto json_path = path;
    json_path.replace_extension(".json");
    std::ofstream out(json_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + json_path.string() + " for writing");
    out << certificate_json(c).dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed: " + json_path.string());
}

nlohmann::json metrics_json(const Metrics& m) {
    nlohmann::json j;
    j["peak_deviation"] = m.peak_deviation;
    j["platoon_peak"] = m.platoon_peak;
    nlohmann::json amp = nlohmann::json::array();
    for (double a : m.amplification) amp.push_back(std::isfinite(a) ? nlohmann::json(a) : nlohmann::json(nullptr));
    j["amplification"] = amp;
    j["asymptotic_residual"] = m.asymptotic_residual;
    j["min_gap"] = m.min_gap;
    for (const auto& s : m.settling) {
        j["settling"][s.name] = {{"settling_time", s.settling_time}, {"settled", s.settled}};
    }
    return j;
}

nlohmann::json sweep_json(const SweepReport& r) {
    nlohmann::json j;
    for (const auto& e : r.entries) {
        j["entries"].push_back({{"n_followers", e.n_followers},
                                {"platoon_peak", e.platoon_peak},
                                {"metrics", metrics_json(e.metrics)}});
    }
    j["variation"] = r.variation;
    j["max_variation"] = r.max_variation;
    j["gamma_certified"] = r.gamma_certified;
    j["passed"] = r.passed;
    return j;
}

void trajectory_csv_to_long(std::istream& wide, std::ostream& long_out) {
    std::string line;
    if (!std::getline(wide, line)) throw std::invalid_argument("trajectory csv: missing header");
    const auto header = split(line, ',');
    if (header.empty() || header[0] != "t") {
        throw std::invalid_argument("trajectory csv: first column must be 't'");
    }
    struct Column {
        std::string vehicle;
        std::string signal;
    };
    std::vector<Column> cols;
    for (std::size_t k = 1; k < header.size(); ++k) {
        const auto pos = header[k].rfind('_');
        if (pos == std::string::npos) {
            throw std::invalid_argument("trajectory csv: malformed column '" + header[k] + "'");
        }
        cols.push_back({header[k].substr(pos + 1), header[k].substr(0, pos)});
    }
    long_out << "t,vehicle,signal,value\n";
    std::size_t row = 1;
    while (std::getline(wide, line)) {
        ++row;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != header.size()) {
            throw std::invalid_argument("trajectory csv: row " + std::to_string(row) + " has " +
                                        std::to_string(fields.size()) + " fields, expected " +
                                        std::to_string(header.size()));
        }
        for (std::size_t k = 1; k < fields.size(); ++k) {
            long_out << fields[0] << ',' << cols[k - 1].vehicle << ',' << cols[k - 1].signal << ','
                     << fields[k] << '\n';
        }
    }
}

}  // namespace platoon
