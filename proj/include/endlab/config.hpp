#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "endlab/envelopes.hpp"
#include "endlab/heat.hpp"

namespace endlab {

/// Flat `key = value` configuration with dotted keys. Blank lines and lines
/// starting with '#' are ignored.
class Config {
public:
    static Config parse(std::string_view text, const std::string& origin = "<config>") {
        Config c;
        std::size_t line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t nl = std::min(text.find('\n', pos), text.size());
            std::string_view line = text.substr(pos, nl - pos);
            pos = nl + 1;
            ++line_no;
            line = trim(line);
            if (line.empty() || line.front() == '#') continue;
            const std::size_t eq = line.find('=');
            const std::string where = origin + ":" + std::to_string(line_no);
            if (eq == std::string_view::npos) throw Error(Errc::config_invalid, where + ": expected 'key = value'");
            const std::string key(trim(line.substr(0, eq)));
            const std::string value(trim(line.substr(eq + 1)));
            if (!valid_key(key)) throw Error(Errc::config_invalid, where + ": malformed key '" + key + "'");
            if (c.kv_.count(key)) throw Error(Errc::config_invalid, key + ": duplicate key (" + where + ")");
            c.kv_[key] = value;
        }
        return c;
    }

    static Config load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error(Errc::config_invalid, "cannot read config file " + path.string());
        std::ostringstream os;
        os << in.rdbuf();
        return parse(os.str(), path.string());
    }

    /// Sets or replaces a key; used for command-line overrides.
    void set(const std::string& key, const std::string& value) {
        if (!valid_key(key)) throw Error(Errc::config_invalid, "malformed key '" + key + "'");
        kv_[key] = value;
    }

    void erase(const std::string& key) { kv_.erase(key); }

    bool has(const std::string& key) const { return kv_.count(key) != 0; }

    const std::map<std::string, std::string>& entries() const { return kv_; }

    std::string get_string(const std::string& key) const {
        auto it = kv_.find(key);
        if (it == kv_.end()) throw Error(Errc::config_invalid, key + ": missing");
        return it->second;
    }
    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? get_string(key) : fallback;
    }

    double get_double(const std::string& key) const {
        const std::string s = get_string(key);
        double v = 0.0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || !std::isfinite(v))
            throw Error(Errc::config_invalid, key + ": expected a number, got '" + s + "'");
        return v;
    }
    double get_double(const std::string& key, double fallback) const { return has(key) ? get_double(key) : fallback; }

    long get_int(const std::string& key) const {
        const std::string s = get_string(key);
        long v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size())
            throw Error(Errc::config_invalid, key + ": expected an integer, got '" + s + "'");
        return v;
    }
    long get_int(const std::string& key, long fallback) const { return has(key) ? get_int(key) : fallback; }

    bool get_bool(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string s = get_string(key);
        if (s == "true" || s == "yes" || s == "1") return true;
        if (s == "false" || s == "no" || s == "0") return false;
        throw Error(Errc::config_invalid, key + ": expected true/false, got '" + s + "'");
    }

    /// Comma-separated list; empty entries are dropped.
    std::vector<std::string> get_list(const std::string& key) const {
        std::vector<std::string> out;
        if (!has(key)) return out;
        const std::string s = get_string(key);
        std::size_t pos = 0;
        while (pos <= s.size()) {
            const std::size_t comma = std::min(s.find(',', pos), s.size());
            auto item = trim(std::string_view(s).substr(pos, comma - pos));
            if (!item.empty()) out.emplace_back(item);
            pos = comma + 1;
        }
        return out;
    }

    /// Sorted numeric indices n appearing as `<prefix>.<n>.*`.
    std::vector<long> indices(const std::string& prefix) const {
        std::set<long> out;
        const std::string p = prefix + ".";
        for (const auto& [k, v] : kv_) {
            if (k.rfind(p, 0) != 0) continue;
            const std::size_t dot = k.find('.', p.size());
            const std::string idx = k.substr(p.size(), dot - p.size());
            long n = 0;
            auto [ptr, ec] = std::from_chars(idx.data(), idx.data() + idx.size(), n);
            if (ec != std::errc() || ptr != idx.data() + idx.size() || n < 1)
                throw Error(Errc::config_invalid, k + ": index must be a positive integer");
            out.insert(n);
        }
        return {out.begin(), out.end()};
    }

    std::string to_text() const {
        std::ostringstream os;
        for (const auto& [k, v] : kv_) os << k << " = " << v << "\n";
        return os.str();
    }

private:
    static std::string_view trim(std::string_view s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string_view::npos) return {};
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    }
    static bool valid_key(const std::string& k) {
        if (k.empty() || k.front() == '.' || k.back() == '.' || k.find("..") != std::string::npos) return false;
        return std::all_of(k.begin(), k.end(),
                           [](char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '.' || ch == '_'; });
    }

    std::map<std::string, std::string> kv_;
};

/// Geometric grid from min to max with `per_decade` points per factor of ten.
struct GeometricGrid {
    double min = 0.0;
    double max = 0.0;
    double per_decade = 0.0;

    std::vector<double> points() const {
        if (min == max) return {min};
        const auto k = std::max<long>(1, std::lround(per_decade * std::log10(max / min)));
        std::vector<double> out(static_cast<std::size_t>(k) + 1);
        for (long i = 0; i <= k; ++i) out[i] = min * std::pow(max / min, static_cast<double>(i) / k);
        out.back() = max;
        return out;
    }
};

struct EndConfig {
    std::string label;
    std::string kind;  // power_log, m1, m3, oscillating
    double alpha = 2.0;
    double beta = 0.0;
    double scale = 1.0;
    std::string mode = "example1";
    double log_a1 = 8.0;
    long terms = 8;
    std::optional<double> delta;

    VolumeProfile build() const {
        if (kind == "power_log") return VolumeProfile::power_log(alpha, beta, scale);
        if (kind == "m1") return VolumeProfile::m1();
        if (kind == "m3") return VolumeProfile::m3();
        const ScheduleMode m = mode == "example2" ? ScheduleMode::example2 : ScheduleMode::example1;
        return VolumeProfile::oscillating(
            build_schedule(alpha, beta, log_a1, static_cast<std::size_t>(terms), m, delta));
    }
};

struct ScenarioConfig {
    std::string id;
    std::string description;
    std::vector<EndConfig> end_configs;
    std::vector<EndSpec> ends;
    double r_max = 4e3;
    double nodes_per_decade = 32;
    double r_start = 1.0;
    double log_r_max = 1e4;
    TimeOptions time;
    std::optional<GeometricGrid> t_grid;
    std::optional<GeometricGrid> r_grid;
    std::vector<std::string> tasks;
    std::string p_oo_envelope = "auto";
    std::filesystem::path output_dir;
    Config raw;

    MeshOptions mesh_options() const {
        MeshOptions o;
        o.r_max = r_max;
        o.nodes_per_decade = nodes_per_decade;
        o.r_start = r_start;
        return o;
    }
    std::vector<VolumeProfile> profiles() const {
        std::vector<VolumeProfile> out;
        for (const auto& e : ends) out.push_back(e.profile);
        return out;
    }
};

inline const std::vector<std::string>& known_tasks() {
    static const std::vector<std::string> t{"envelope", "p_oo",      "offdiag",  "bottleneck",
                                            "poincare", "harmonic", "open_gap", "schedule"};
    return t;
}

namespace detail {

inline bool known_key(const std::string& k) {
    static const std::set<std::string> fixed{
        "scenario.id",          "scenario.description", "mesh.r_max",          "mesh.nodes_per_decade",
        "mesh.r_start",         "classify.log_r_max",   "time.ratio",          "time.order",
        "time.initial_step",    "grid.t.min",           "grid.t.max",          "grid.t.per_decade",
        "grid.r.min",           "grid.r.max",           "grid.r.per_decade",   "tasks",
        "envelope.p_oo",        "output.dir",           "offdiag.same_end",    "offdiag.regimes_2_1",
        "offdiag.dense_ratio",  "bottleneck.exponent",  "harmonic.probe_r",    "harmonic.doublings",
        "poincare.whitney_fraction", "poincare.random_tests", "gap.k_max",     "schedule.n_lo",
        "schedule.n_hi",        "check.harmonic.min_gap", "check.harmonic.energy_slope",
        "check.harmonic.energy_slope_tol", "check.poincare.whitney_lo", "check.poincare.whitney_hi",
        "check.poincare.indicator_slope", "check.poincare.indicator_slope_tol", "poincare.table"};
    if (fixed.count(k)) return true;
    static const std::set<std::string> end_fields{"label", "kind",  "alpha", "beta", "scale",
                                                  "mode",  "log_a1", "terms", "delta"};
    if (k.rfind("end.", 0) == 0) {
        const auto dot = k.find('.', 4);
        return dot != std::string::npos && end_fields.count(k.substr(dot + 1));
    }
    if (k.rfind("band.", 0) == 0) {
        const std::string suffix = ".max_spread";
        return k.size() > 5 + suffix.size() && k.compare(k.size() - suffix.size(), suffix.size(), suffix) == 0;
    }
    return false;
}

inline std::optional<GeometricGrid> read_grid(const Config& c, const std::string& prefix) {
    const bool any = c.has(prefix + ".min") || c.has(prefix + ".max") || c.has(prefix + ".per_decade");
    if (!any) return std::nullopt;
    GeometricGrid g{c.get_double(prefix + ".min"), c.get_double(prefix + ".max"),
                    c.get_double(prefix + ".per_decade", 8.0)};
    if (!(g.min > 0.0)) throw Error(Errc::config_invalid, prefix + ".min: must be positive");
    if (!(g.max >= g.min)) throw Error(Errc::config_invalid, prefix + ".max: must be >= " + prefix + ".min");
    if (!(g.per_decade > 0.0)) throw Error(Errc::config_invalid, prefix + ".per_decade: must be positive");
    return g;
}

inline bool needs_t_grid(const std::string& task) {
    return task == "envelope" || task == "p_oo" || task == "offdiag" || task == "bottleneck";
}

}  // namespace detail

/// Validates `c` and builds the scenario. Every error names the offending key.
inline ScenarioConfig scenario_from_config(const Config& c) {
    for (const auto& [k, v] : c.entries()) {
        if (!detail::known_key(k)) throw Error(Errc::config_invalid, k + ": unknown key");
    }
    ScenarioConfig s;
    s.raw = c;
    s.id = c.get_string("scenario.id");
    if (s.id.empty() || !std::all_of(s.id.begin(), s.id.end(), [](char ch) {
            return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-';
        }))
        throw Error(Errc::config_invalid, "scenario.id: must be a non-empty [A-Za-z0-9_-] name");
    s.description = c.get_string("scenario.description", "");

    const auto idx = c.indices("end");
    if (idx.empty()) throw Error(Errc::config_invalid, "end: at least one end.<n>.kind is required");
    for (long n : idx) {
        const std::string p = "end." + std::to_string(n) + ".";
        EndConfig e;
        e.kind = c.get_string(p + "kind");
        e.label = c.get_string(p + "label", "E" + std::to_string(n));
        e.alpha = c.get_double(p + "alpha", e.kind == "oscillating" ? 4.0 : 2.0);
        e.beta = c.get_double(p + "beta", e.kind == "oscillating" ? 1.0 : 0.0);
        e.scale = c.get_double(p + "scale", 1.0);
        e.mode = c.get_string(p + "mode", "example1");
        e.log_a1 = c.get_double(p + "log_a1", 8.0);
        e.terms = c.get_int(p + "terms", 8);
        if (c.has(p + "delta")) e.delta = c.get_double(p + "delta");
        if (e.kind != "power_log" && e.kind != "m1" && e.kind != "m3" && e.kind != "oscillating")
            throw Error(Errc::config_invalid, p + "kind: unknown profile kind '" + e.kind + "'");
        if (e.mode != "example1" && e.mode != "example2")
            throw Error(Errc::config_invalid, p + "mode: expected example1 or example2");
        if (e.terms < 1) throw Error(Errc::config_invalid, p + "terms: must be >= 1");
        try {
            s.ends.push_back({e.label, e.build()});
        } catch (const Error& err) {
            throw Error(Errc::config_invalid, p + "kind: " + err.what());
        }
        s.end_configs.push_back(std::move(e));
    }

    s.r_max = c.get_double("mesh.r_max", s.r_max);
    s.nodes_per_decade = c.get_double("mesh.nodes_per_decade", s.nodes_per_decade);
    s.r_start = c.get_double("mesh.r_start", s.r_start);
    if (!(s.r_start > 0.0)) throw Error(Errc::config_invalid, "mesh.r_start: must be positive");
    if (!(s.r_max >= 10.0 * s.r_start)) throw Error(Errc::config_invalid, "mesh.r_max: must be >= 10 * mesh.r_start");
    if (!(s.nodes_per_decade >= 16.0)) throw Error(Errc::config_invalid, "mesh.nodes_per_decade: must be >= 16");
    s.log_r_max = c.get_double("classify.log_r_max", s.log_r_max);
    if (!(s.log_r_max > 1.0)) throw Error(Errc::config_invalid, "classify.log_r_max: must exceed 1");

    s.time.ratio = c.get_double("time.ratio", s.time.ratio);
    s.time.order = static_cast<int>(c.get_int("time.order", s.time.order));
    s.time.initial_step = c.get_double("time.initial_step", s.time.initial_step);
    if (!(s.time.ratio > 1.0)) throw Error(Errc::config_invalid, "time.ratio: must exceed 1");
    if (s.time.order < 1 || s.time.order > 8) throw Error(Errc::config_invalid, "time.order: must lie in [1, 8]");

    s.t_grid = detail::read_grid(c, "grid.t");
    s.r_grid = detail::read_grid(c, "grid.r");

    s.tasks = c.get_list("tasks");
    if (s.tasks.empty()) throw Error(Errc::config_invalid, "tasks: at least one task is required");
    for (const auto& t : s.tasks) {
        if (std::find(known_tasks().begin(), known_tasks().end(), t) == known_tasks().end())
            throw Error(Errc::config_invalid, "tasks: unknown task '" + t + "'");
        if (detail::needs_t_grid(t) && !s.t_grid)
            throw Error(Errc::config_invalid, "grid.t: task '" + t + "' needs a t-grid (grid.t.min, grid.t.max)");
        if (t == "poincare" && !s.r_grid)
            throw Error(Errc::config_invalid, "grid.r: task 'poincare' needs an r-grid (grid.r.min, grid.r.max)");
    }
    if (s.t_grid) {
        const double rim = std::pow(s.r_max / 4.0, 2);
        if (s.t_grid->max > rim * (1 + 1e-12))
            throw Error(Errc::config_invalid, "grid.t.max: exceeds the rim limit (mesh.r_max / 4)^2 = " +
                                                  std::to_string(rim));
    }

    s.p_oo_envelope = c.get_string("envelope.p_oo", s.p_oo_envelope);
    static const std::set<std::string> envs{"auto", "smallest_end", "largest_end", "min_min"};
    if (!envs.count(s.p_oo_envelope))
        throw Error(Errc::config_invalid, "envelope.p_oo: expected auto, smallest_end, largest_end or min_min");

    s.output_dir = c.get_string("output.dir", "out/" + s.id);
    return s;
}

}  // namespace endlab
