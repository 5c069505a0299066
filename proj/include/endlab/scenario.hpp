#pragma once

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "endlab/config.hpp"
#include "endlab/envelopes.hpp"
#include "endlab/heat.hpp"
#include "endlab/report.hpp"
#include "endlab/spectral.hpp"

namespace endlab {

struct BuiltinScenario {
    std::string id;
    std::string text;  // config file contents
};

inline const std::vector<BuiltinScenario>& builtin_scenarios() {
    static const std::vector<BuiltinScenario> list{
        {"rn_sum_2", R"(scenario.id = rn_sum_2
scenario.description = R^2 # R^2: parabolic pair, p(t,o,o) ~ 1/t, Poincare ~ r^2 log r, energy ~ 1/log r_max
end.1.kind = power_log
end.1.alpha = 2
end.2.kind = power_log
end.2.alpha = 2
mesh.r_max = 4000
mesh.nodes_per_decade = 64
grid.t.min = 100
grid.t.max = 1e6
grid.t.per_decade = 4
grid.r.min = 100
grid.r.max = 1e4
grid.r.per_decade = 4
tasks = p_oo, poincare, harmonic
harmonic.doublings = 4
check.harmonic.energy_slope = -1
check.harmonic.energy_slope_tol = 0.15
)"},
        {"rn_sum_3", R"(scenario.id = rn_sum_3
scenario.description = R^3 # R^3: non-parabolic pair, p(t,o,o) ~ t^-3/2, Poincare ~ r^3
end.1.kind = power_log
end.1.alpha = 3
end.2.kind = power_log
end.2.alpha = 3
mesh.r_max = 4000
mesh.nodes_per_decade = 64
grid.t.min = 100
grid.t.max = 1e6
grid.t.per_decade = 4
grid.r.min = 100
grid.r.max = 1e4
grid.r.per_decade = 4
tasks = p_oo, offdiag, poincare
offdiag.same_end = true
check.poincare.indicator_slope = 3
check.poincare.indicator_slope_tol = 0.2
)"},
        {"rn_sum_4", R"(scenario.id = rn_sum_4
scenario.description = R^4 # R^4: p(t,o,o) ~ t^-2, Poincare ~ r^4
end.1.kind = power_log
end.1.alpha = 4
end.2.kind = power_log
end.2.alpha = 4
mesh.r_max = 4000
mesh.nodes_per_decade = 64
grid.t.min = 100
grid.t.max = 1e6
grid.t.per_decade = 4
grid.r.min = 100
grid.r.max = 1e4
grid.r.per_decade = 4
tasks = p_oo, poincare
)"},
        {"parabolic_lex", R"(scenario.id = parabolic_lex
scenario.description = ends (2,0) and (1,0): dominated parabolic pair, p(t,o,o) ~ 1/t and three off-diagonal regimes
end.1.kind = power_log
end.1.alpha = 2
end.2.kind = power_log
end.2.alpha = 1
mesh.r_max = 4000
mesh.nodes_per_decade = 64
grid.t.min = 100
grid.t.max = 1e6
grid.t.per_decade = 4
tasks = p_oo, offdiag
offdiag.regimes_2_1 = true
)"},
        {"osc_example1", R"(scenario.id = osc_example1
scenario.description = plane # oscillating weight (example1): min-min bound against 1/(t (log log t)^2) and 1/(t log t)
end.1.label = M1
end.1.kind = m1
end.2.label = M2
end.2.kind = oscillating
end.2.alpha = 4
end.2.beta = 1
end.2.mode = example1
end.2.log_a1 = 8
end.2.terms = 8
mesh.r_max = 1e8
mesh.nodes_per_decade = 32
tasks = schedule, open_gap
gap.k_max = 3
)"},
        {"osc_example2", R"(scenario.id = osc_example2
scenario.description = oscillating weight (example2) # M3: min-min bound against 1/t and 1/(t log t)
end.1.label = M2
end.1.kind = oscillating
end.1.alpha = 4
end.1.beta = 1
end.1.mode = example2
end.1.delta = 2
end.1.log_a1 = 8
end.1.terms = 8
end.2.label = M3
end.2.kind = m3
mesh.r_max = 1e48
mesh.nodes_per_decade = 16
tasks = schedule, open_gap
gap.k_max = 4
)"},
        {"liouville_r3", R"(scenario.id = liouville_r3
scenario.description = R^3 # R^3: bounded non-constant harmonic function with distinct end limits
end.1.kind = power_log
end.1.alpha = 3
end.2.kind = power_log
end.2.alpha = 3
mesh.r_max = 1000
mesh.nodes_per_decade = 32
tasks = harmonic
harmonic.probe_r = 10
harmonic.doublings = 4
check.harmonic.min_gap = 0.5
)"},
        {"bottleneck_3", R"(scenario.id = bottleneck_3
scenario.description = R^3 # R^3 cross-end decay: p(t,x,y) t^(3/2) decreasing at |x| = |y| = sqrt t
end.1.kind = power_log
end.1.alpha = 3
end.2.kind = power_log
end.2.alpha = 3
mesh.r_max = 4000
mesh.nodes_per_decade = 64
grid.t.min = 100
grid.t.max = 1e6
grid.t.per_decade = 4
tasks = bottleneck
bottleneck.exponent = 1.5
)"},
        {"poincare_table", R"(scenario.id = poincare_table
scenario.description = ends (3,0) (2,1) (2,0) (1,0): Poincare constant set by the second end in lexicographic order
end.1.kind = power_log
end.1.alpha = 3
end.2.kind = power_log
end.2.alpha = 2
end.2.beta = 1
end.3.kind = power_log
end.3.alpha = 2
end.4.kind = power_log
end.4.alpha = 1
mesh.r_max = 1e4
mesh.nodes_per_decade = 32
grid.r.min = 100
grid.r.max = 1e4
grid.r.per_decade = 4
tasks = poincare
poincare.table = true
)"},
    };
    return list;
}

inline Config builtin_config(const std::string& id) {
    for (const auto& b : builtin_scenarios()) {
        if (b.id == id) return Config::parse(b.text, "builtin:" + id);
    }
    throw Error(Errc::config_invalid, "scenario.id: no built-in scenario named '" + id + "'");
}

namespace detail {

/// Lazily built shared state for one scenario run.
class ScenarioContext {
public:
    explicit ScenarioContext(const ScenarioConfig& s) : s_(s) {}

    const ScenarioConfig& config() const { return s_; }

    const ManifoldSpec& spec() {
        if (!spec_) spec_ = ManifoldSpec::make(s_.ends, s_.log_r_max);
        return *spec_;
    }
    const StarMesh& mesh() {
        if (!mesh_) mesh_ = build_mesh(s_.profiles(), s_.mesh_options());
        return *mesh_;
    }
    double band_limit(const std::string& name, double fallback) const {
        return s_.raw.get_double("band." + name + ".max_spread", fallback);
    }

private:
    const ScenarioConfig& s_;
    std::optional<ManifoldSpec> spec_;
    std::optional<StarMesh> mesh_;
};

inline std::function<double(double)> p_oo_envelope(ScenarioContext& ctx, std::string& formula) {
    const auto& s = ctx.spec();
    const auto& g = *ctx.config().t_grid;
    const std::string& want = ctx.config().p_oo_envelope;
    if (want == "auto") {
        auto c = on_diagonal_curve(s, g.min, g.max);
        formula = c.formula;
        return c.eval;
    }
    formula = want;
    if (want == "smallest_end") return [s](double t) { return smallest_end_envelope(s, t); };
    if (want == "largest_end") return [s](double t) { return largest_end_envelope(s, t); };
    return [s](double t) { return min_min_upper(s, t); };
}

inline std::vector<double> eval_all(const std::function<double(double)>& f, std::span<const double> xs) {
    std::vector<double> out;
    for (double x : xs) out.push_back(f(x));
    return out;
}

/// Least-squares slope of y against x.
inline double fit_slope(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline std::size_t count_increases(std::span<const double> v) {
    std::size_t bad = 0;
    for (std::size_t i = 1; i < v.size(); ++i) bad += v[i] >= v[i - 1];
    return bad;
}

inline double value_at(const HeatField& f, std::size_t node) { return f.values[node]; }

// ---------------------------------------------------------------- tasks

inline void task_envelope(ScenarioContext& ctx, Summary& out, const std::filesystem::path& dir) {
    const auto ts = ctx.config().t_grid->points();
    std::string formula;
    const auto env = eval_all(p_oo_envelope(ctx, formula), ts);
    CsvTable csv("t", ts);
    csv.add("envelope", ctx.config().id, env);
    csv.write(dir / "envelope.csv");
    out.files.push_back("envelope.csv");
    out.config["note.envelope.p_oo"] = formula;
}

inline void task_p_oo(ScenarioContext& ctx, Summary& out, const std::filesystem::path& dir) {
    const auto& s = ctx.config();
    const auto ts = s.t_grid->points();
    const auto& m = ctx.mesh();
    const auto p = heat_kernel(m, 0, 0, ts, s.time);
    std::string formula;
    const auto env = eval_all(p_oo_envelope(ctx, formula), ts);
    CsvTable csv("t", ts);
    csv.add("p_oo", s.id, p);
    csv.add("envelope", s.id, env);
    csv.write(dir / "p_oo.csv");
    out.files.push_back("p_oo.csv");
    out.config["note.envelope.p_oo"] = formula;
    out.add_band("p_oo", ratio_fit(p, env, "p_oo/" + formula), ctx.band_limit("p_oo", 10.0));
}

struct Probe {
    std::string label;
    std::function<double(double)> radius;  // of sqrt(t)
};

inline std::vector<Probe> default_probes() {
    return {{"2", [](double) { return 2.0; }},
            {"half", [](double st) { return 0.5 * st; }},
            {"twice", [](double st) { return 2.0 * st; }}};
}

inline std::size_t clipped_node(const StarMesh& m, std::size_t end, double r) {
    const auto& rad = m.ends[end].radius;
    return m.nearest(end, std::clamp(r, rad.front(), rad.back()));
}

inline void task_offdiag(ScenarioContext& ctx, Summary& out, const std::filesystem::path& dir) {
    const auto& s = ctx.config();
    if (s.ends.size() < 2) throw Error(Errc::config_invalid, "tasks: offdiag needs at least two ends");
    const auto& m = ctx.mesh();
    const auto ts = s.t_grid->points();
    const auto probes = default_probes();
    const bool same_end = s.raw.get_bool("offdiag.same_end", false);
    const bool regimes = s.raw.get_bool("offdiag.regimes_2_1", false);
    if (regimes) {
        const auto& e0 = s.end_configs[0];
        const auto& e1 = s.end_configs[1];
        if (e0.kind != "power_log" || e0.alpha != 2 || e0.beta != 0 || e1.kind != "power_log" || e1.alpha != 1 ||
            e1.beta != 0)
            throw Error(Errc::config_invalid, "offdiag.regimes_2_1: needs end.1 = (2,0) and end.2 = (1,0)");
    }

    // p(s,o,o) on a dense grid for the time integral; p(0,o,o) = 1 / m_o.
    const double dense_ratio = s.raw.get_double("offdiag.dense_ratio", 1.02);
    std::vector<double> dense;
    for (double t = 1e-3; t < ts.back(); t *= dense_ratio) dense.push_back(t);
    dense.insert(dense.end(), ts.begin(), ts.end());
    std::sort(dense.begin(), dense.end());
    dense.erase(std::unique(dense.begin(), dense.end()), dense.end());
    const auto p_dense = heat_kernel(m, 0, 0, dense, s.time);
    std::vector<double> p_oo(ts.size()), int_p(ts.size());
    {
        double acc = 0.5 * dense[0] * (1.0 / m.center_mass + p_dense[0]);
        std::size_t k = 0;
        for (std::size_t i = 0; i < dense.size(); ++i) {
            if (i) acc += 0.5 * (dense[i] - dense[i - 1]) * (p_dense[i] + p_dense[i - 1]);
            if (k < ts.size() && dense[i] == ts[k]) {
                p_oo[k] = p_dense[i];
                int_p[k] = acc;
                ++k;
            }
        }
    }

    struct Series {
        std::string id;
        std::size_t y_end;
        std::vector<double> direct, assembled, x_abs, y_abs;
    };
    std::vector<Series> series;
    for (const auto& px : probes) {
        for (std::size_t y_end : same_end ? std::vector<std::size_t>{1, 0} : std::vector<std::size_t>{1}) {
            for (const auto& py : probes) {
                series.push_back({"x_" + px.label + ".y" + std::to_string(y_end + 1) + "_" + py.label, y_end, {}, {}, {}, {}});
            }
        }
    }

    for (std::size_t k = 0; k < ts.size(); ++k) {
        const double t = ts[k], st = std::sqrt(t);
        const std::vector<double> tk{t};
        std::size_t si = 0;
        for (const auto& px : probes) {
            const std::size_t jx = clipped_node(m, 0, px.radius(st));
            const auto field = heat_solve(m, delta_at(m, m.index(0, jx)), tk, BoundaryCondition::neumann, s.time);
            const auto dfield = dirichlet_solve(m, 0, jx, tk, s.time);
            const double Px = exit_probability(m, 0, jx, tk, s.time)[0];
            const double dPx = exit_rate(m, 0, jx, tk, s.time)[0];
            for (std::size_t y_end : same_end ? std::vector<std::size_t>{1, 0} : std::vector<std::size_t>{1}) {
                for (const auto& py : probes) {
                    auto& ser = series[si++];
                    const std::size_t jy = clipped_node(m, y_end, py.radius(st));
                    const double Py = exit_probability(m, y_end, jy, tk, s.time)[0];
                    const double dPy = exit_rate(m, y_end, jy, tk, s.time)[0];
                    const double pD = y_end == 0 ? std::max(0.0, dfield[0].values[m.index(0, jy)]) : 0.0;
                    ser.direct.push_back(field[0].values[m.index(y_end, jy)]);
                    ser.assembled.push_back(offdiag_assemble(pD, p_oo[k], int_p[k], Px, Py, dPx, dPy));
                    ser.x_abs.push_back(m.ends[0].radius[jx]);
                    ser.y_abs.push_back(m.ends[y_end].radius[jy]);
                }
            }
        }
    }

    CsvTable csv("t", ts);
    std::vector<double> all_direct, all_assembled;
    for (const auto& ser : series) {
        csv.add("p_xy", s.id + "." + ser.id, ser.direct);
        csv.add("assembled", s.id + "." + ser.id, ser.assembled);
        all_direct.insert(all_direct.end(), ser.direct.begin(), ser.direct.end());
        all_assembled.insert(all_assembled.end(), ser.assembled.begin(), ser.assembled.end());
    }
    out.add_band("offdiag", ratio_fit(all_direct, all_assembled, "p_xy/assembled"), ctx.band_limit("offdiag", 20.0));

    if (regimes) {
        // One Gaussian constant b for all regimes, chosen to minimize the worst per-regime spread.
        auto per_regime = [&](double b) {
            std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> groups;
            for (const auto& ser : series) {
                if (ser.y_end != 1) continue;
                for (std::size_t k = 0; k < ts.size(); ++k) {
                    const auto rv = offdiag_regimes_2_1(ser.x_abs[k], ser.y_abs[k], ts[k], b);
                    groups[rv.label].first.push_back(ser.direct[k]);
                    groups[rv.label].second.push_back(rv.value);
                }
            }
            return groups;
        };
        auto worst = [&](double log_b) {
            double w = 0.0;
            for (const auto& [label, g] : per_regime(std::exp(log_b))) w = std::max(w, ratio_fit(g.first, g.second).spread);
            return w;
        };
        const auto best = boost::math::tools::brent_find_minima(worst, std::log(1e-3), std::log(10.0), 40);
        const double b = std::exp(best.first);
        out.config["note.offdiag.fitted_b"] = format_double(b);
        for (const auto& [label, g] : per_regime(b)) {
            out.add_band("regime_" + label, ratio_fit(g.first, g.second, "p_xy/regime"),
                         ctx.band_limit("regime_" + label, 20.0));
        }
        for (const auto& ser : series) {
            if (ser.y_end != 1) continue;
            std::vector<double> model;
            for (std::size_t k = 0; k < ts.size(); ++k)
                model.push_back(offdiag_regimes_2_1(ser.x_abs[k], ser.y_abs[k], ts[k], b).value);
            csv.add("regime_model", s.id + "." + ser.id, model);
        }
    }
    csv.write(dir / "offdiag.csv");
    out.files.push_back("offdiag.csv");
}

inline void task_bottleneck(ScenarioContext& ctx, Summary& out, const std::filesystem::path& dir) {
    const auto& s = ctx.config();
    if (s.ends.size() < 2) throw Error(Errc::config_invalid, "tasks: bottleneck needs at least two ends");
    const auto& m = ctx.mesh();
    const auto ts = s.t_grid->points();
    const double expo = s.raw.get_double("bottleneck.exponent", 1.5);
    std::vector<double> p, scaled;
    for (double t : ts) {
        const double st = std::sqrt(t);
        const std::size_t jx = clipped_node(m, 0, st), jy = clipped_node(m, 1, st);
        const std::vector<double> tk{t};
        const auto f = heat_solve(m, delta_at(m, m.index(0, jx)), tk, BoundaryCondition::neumann, s.time);
        p.push_back(f[0].values[m.index(1, jy)]);
        scaled.push_back(p.back() * std::pow(t, expo));
    }
    CsvTable csv("t", ts);
    csv.add("p_xy", s.id, p);
    csv.add("scaled", s.id, scaled);
    csv.write(dir / "bottleneck.csv");
    out.files.push_back("bottleneck.csv");
    out.add_check("bottleneck_increases", static_cast<double>(count_increases(scaled)), 0.0, 0.0);
}

/// Lexicographic table formula for the second end (alpha2, beta2).
inline double poincare_table_formula(double alpha, double beta, double r) {
    const double lr = std::log(r);
    if (alpha > 2.0 || (alpha == 2.0 && beta > 1.0)) return std::pow(r, alpha) * std::pow(lr, beta);
    if (alpha == 2.0 && beta == 1.0) return r * r * lr * std::pow(std::log(lr), 2);
    if (alpha == 2.0) return r * r * lr;
    return r * r;
}

inline void task_poincare(ScenarioContext& ctx, Summary& out, const std::filesystem::path& dir) {
    const auto& s = ctx.config();
    if (s.ends.size() < 2) throw Error(Errc::config_invalid, "tasks: poincare needs at least two ends");
    const auto rs = s.r_grid->points();
    const double frac = s.raw.get_double("poincare.whitney_fraction", 0.25);
    if (!(frac > 0.0 && frac < 0.5)) throw Error(Errc::config_invalid, "poincare.whitney_fraction: must lie in (0, 0.5)");
    auto opts = s.mesh_options();
    opts.r_max = std::max(s.r_max, (1.0 + frac) * rs.back() * 1.01);
    const auto m = build_mesh(s.profiles(), opts);
    const auto curve = poincare_curve(ctx.spec(), rs.front(), rs.back());
    out.config["note.envelope.poincare"] = curve.formula;

    const long n_random = s.raw.get_int("poincare.random_tests", 10);
    std::mt19937_64 rng(20240607);
    std::normal_distribution<double> normal;
    std::vector<double> lam, env, whitney, indicator;
    double worst_rayleigh = 0.0;
    const auto ind = signed_indicator(m);
    for (double r : rs) {
        const auto res = poincare_constant(m, r);
        lam.push_back(res.poincare);
        env.push_back(curve.eval(r));
        whitney.push_back(whitney_shift_check(m, 0, frac * r, r));
        indicator.push_back(rayleigh_quotient(m, ind, r));
        for (long i = 0; i < n_random; ++i) {
            std::vector<double> f(m.size());
            for (auto& x : f) x = normal(rng);
            worst_rayleigh = std::max(worst_rayleigh, rayleigh_quotient(m, f, r) / res.poincare);
        }
    }
    CsvTable csv("r", rs);
    csv.add("poincare", s.id, lam);
    csv.add("envelope", s.id, env);
    csv.add("whitney", s.id, whitney);
    csv.add("indicator", s.id, indicator);

    out.add_band("poincare", ratio_fit(lam, env, "poincare/" + curve.formula), ctx.band_limit("poincare", 10.0));
    out.add_check("poincare_decreases", static_cast<double>(rs.size() - 1 - count_increases(lam)), 0.0, 0.0);
    out.add_check("rayleigh_over_poincare", worst_rayleigh, 0.0, 1.0 + 1e-9);
    const double wlo = s.raw.get_double("check.poincare.whitney_lo", 0.125);
    const double whi = s.raw.get_double("check.poincare.whitney_hi", 8.0);
    out.add_check("whitney_min", *std::min_element(whitney.begin(), whitney.end()), wlo, whi);
    out.add_check("whitney_max", *std::max_element(whitney.begin(), whitney.end()), wlo, whi);
    if (s.raw.has("check.poincare.indicator_slope")) {
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < rs.size(); ++i) {
            lx.push_back(std::log(rs[i]));
            ly.push_back(std::log(indicator[i]));
        }
        const double want = s.raw.get_double("check.poincare.indicator_slope");
        const double tol = s.raw.get_double("check.poincare.indicator_slope_tol", 0.2);
        out.add_check("indicator_slope", fit_slope(lx, ly), want - tol, want + tol);
    }
    if (s.raw.get_bool("poincare.table", false)) {
        std::vector<std::pair<double, double>> pairs;
        for (const auto& e : s.end_configs) {
            if (e.kind != "power_log") throw Error(Errc::config_invalid, "poincare.table: needs power_log ends");
            pairs.emplace_back(e.alpha, e.beta);
        }
        const auto order = lex_order(pairs);
        const auto [a2, b2] = pairs[order[1]];
        std::vector<double> row;
        for (double r : rs) row.push_back(poincare_table_formula(a2, b2, r));
        csv.add("table_row", s.id, row);
        out.records.push_back({"poincare_vs_table_row", ratio_fit(lam, row, "poincare/table_row")});
    }
    csv.write(dir / "poincare.csv");
    out.files.push_back("poincare.csv");
}

inline void task_harmonic(ScenarioContext& ctx, Summary& out, const std::filesystem::path& dir) {
    const auto& s = ctx.config();
    if (s.ends.size() < 2) throw Error(Errc::config_invalid, "tasks: harmonic needs at least two ends");
    const double probe = s.raw.get_double("harmonic.probe_r", 10.0);
    const long doublings = s.raw.get_int("harmonic.doublings", 4);
    if (doublings < 1) throw Error(Errc::config_invalid, "harmonic.doublings: must be >= 1");
    if (!(probe > s.r_start && probe < s.r_max)) throw Error(Errc::config_invalid, "harmonic.probe_r: outside the mesh");
    std::vector<double> rmax, gap, energy;
    std::vector<double> rim(s.ends.size(), 0.0);
    rim[0] = 1.0;
    rim[1] = -1.0;
    for (long k = 0; k <= doublings; ++k) {
        auto o = s.mesh_options();
        o.r_max = s.r_max * std::ldexp(1.0, static_cast<int>(k));
        const auto m = build_mesh(s.profiles(), o);
        const auto h = solve_harmonic(m, rim);
        rmax.push_back(o.r_max);
        gap.push_back(h[m.index(0, m.nearest(0, probe))] - h[m.index(1, m.nearest(1, probe))]);
        energy.push_back(dirichlet_energy(m, h));
    }
    CsvTable csv("r", rmax);
    csv.add("gap", s.id, gap);
    csv.add("energy", s.id, energy);
    csv.write(dir / "harmonic.csv");
    out.files.push_back("harmonic.csv");
    if (s.raw.has("check.harmonic.min_gap")) {
        out.add_check("harmonic_min_gap", *std::min_element(gap.begin(), gap.end()),
                      s.raw.get_double("check.harmonic.min_gap"), INFINITY);
    }
    if (s.raw.has("check.harmonic.energy_slope")) {
        std::vector<double> lx, ly;
        for (std::size_t i = 0; i < rmax.size(); ++i) {
            lx.push_back(std::log(std::log(rmax[i])));
            ly.push_back(std::log(energy[i]));
        }
        const double want = s.raw.get_double("check.harmonic.energy_slope");
        const double tol = s.raw.get_double("check.harmonic.energy_slope_tol", 0.15);
        out.add_check("energy_slope", fit_slope(lx, ly), want - tol, want + tol);
    }
}

inline std::size_t oscillating_end(const ScenarioConfig& s, const std::string& task) {
    for (std::size_t i = 0; i < s.ends.size(); ++i) {
        if (s.ends[i].profile.schedule()) return i;
    }
    throw Error(Errc::config_invalid, "tasks: " + task + " needs an oscillating end");
}

inline void task_open_gap(ScenarioContext& ctx, Summary& out, const std::filesystem::path& dir) {
    const auto& s = ctx.config();
    const std::size_t osc = oscillating_end(s, "open_gap");
    const auto& sched = *s.ends[osc].profile.schedule();
    const long k_max = s.raw.get_int("gap.k_max", static_cast<long>(sched.size()));
    if (k_max < 1 || k_max > static_cast<long>(sched.size()))
        throw Error(Errc::config_invalid, "gap.k_max: must lie in [1, " + std::to_string(sched.size()) + "]");
    const bool ex1 = sched.mode() == ScheduleMode::example1;
    // Windows sqrt t in [c_k, d_k] (example1) or [a_k, b_k] (example2), endpoints probed.
    std::vector<double> log_st;
    for (long k = 0; k < k_max; ++k) {
        const auto& term = sched.terms()[k];
        for (double u : ex1 ? std::vector<double>{term.log_c, term.log_d} : std::vector<double>{term.log_a, term.log_b}) {
            if (log_st.empty() || u > log_st.back()) log_st.push_back(u);
        }
    }
    const double log_rim = std::log(s.r_max / 4.0);
    if (log_st.back() > log_rim)
        throw Error(Errc::config_invalid, "gap.k_max: probe sqrt(t) = e^" + format_double(log_st.back()) +
                                              " exceeds mesh.r_max / 4");
    std::vector<double> ts;
    for (double u : log_st) ts.push_back(std::exp(2.0 * u));
    const auto p = heat_kernel(ctx.mesh(), 0, 0, ts, s.time);
    std::vector<double> env, c1, c2;
    for (double t : ts) {
        env.push_back(min_min_upper(ctx.spec(), t));
        const double lt = std::log(t);
        c1.push_back(ex1 ? 1.0 / (t * std::pow(std::log(lt), 2)) : 1.0 / t);
        c2.push_back(1.0 / (t * lt));
    }
    const std::string n1 = ex1 ? "cand_t_loglog2" : "cand_t";
    CsvTable csv("t", ts);
    csv.add("p_oo", s.id, p);
    csv.add("min_min", s.id, env);
    csv.add(n1, s.id, c1);
    csv.add("cand_t_log", s.id, c2);
    csv.write(dir / "open_gap.csv");
    out.files.push_back("open_gap.csv");
    const auto upper = ratio_fit(p, env, "p_oo/min_min");
    out.add_band("gap_upper", upper, ctx.band_limit("gap_upper", 20.0));
    out.records.push_back({"p_oo_vs_" + n1, ratio_fit(p, c1, "p_oo/" + n1)});
    out.records.push_back({"p_oo_vs_cand_t_log", ratio_fit(p, c2, "p_oo/cand_t_log")});
}

inline void task_schedule(ScenarioContext& ctx, Summary& out, const std::filesystem::path& dir) {
    const auto& s = ctx.config();
    const std::size_t osc = oscillating_end(s, "schedule");
    const auto& prof = s.ends[osc].profile;
    const auto& sched = *prof.schedule();
    const bool ex1 = sched.mode() == ScheduleMode::example1;
    const std::size_t N = sched.size();
    const long n_lo = s.raw.get_int("schedule.n_lo", std::min<long>(5, static_cast<long>(N)));
    const long n_hi = s.raw.get_int("schedule.n_hi", static_cast<long>(N));
    if (n_lo < 1 || n_hi < n_lo || n_hi > static_cast<long>(N) + 1)
        throw Error(Errc::config_invalid, "schedule.n_lo: need 1 <= n_lo <= n_hi <= terms + 1");

    std::vector<double> log_a, h_at_a, per_n;
    for (std::size_t n = 1; n <= N + 1; ++n) {
        log_a.push_back(sched.log_a(n));
        h_at_a.push_back(h2_partial_sums(sched, n));
        per_n.push_back(h_at_a.back() / static_cast<double>(n));
    }
    auto csv = CsvTable::from_log_axis("r", log_a);
    csv.add("log_r", s.id, log_a);
    csv.add("h", s.id, h_at_a);
    csv.add("h_over_n", s.id, per_n);
    csv.write(dir / "schedule.csv");
    out.files.push_back("schedule.csv");

    const double residual = std::max({sched.bc_residual(), sched.ad_residual(), sched.continuity_residual()});
    out.add_check("schedule_residual", residual, 0.0, 1e-10);
    out.add_check("schedule_ordering", sched.ordering_holds() ? 1.0 : 0.0, 1.0, 1.0);

    const std::vector<double> band_n(per_n.begin() + (n_lo - 1), per_n.begin() + n_hi);
    const std::vector<double> ones(band_n.size(), 1.0);
    out.add_band("h_over_n", ratio_fit(band_n, ones, "h(a_n)/n"), ctx.band_limit("h_over_n", 4.0));

    std::vector<double> grid;
    for (double u = sched.log_a(n_lo); u <= sched.log_a(n_hi); u *= 1.001) grid.push_back(u);
    const auto h = h_on_log_grid(prof, grid);
    std::vector<double> growth, model;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        growth.push_back(h[i]);
        model.push_back(ex1 ? grid[i] / std::log(grid[i]) : std::log(grid[i]));
    }
    out.add_band("h_growth", ratio_fit(growth, model, ex1 ? "h/(log r / log log r)" : "h/log log r"),
                 ctx.band_limit("h_growth", 5.0));

    const double log_top = sched.log_a(N + 1) + 1.0;
    const auto w = check_h1_h2(prof, log_top);
    out.add_check("h1_constant", w.h1_ok ? w.h1_constant : INFINITY, 1.0, 1e6);
    out.add_check("h2_constant", w.h2_ok ? w.h2_constant : INFINITY, 0.0, 1e6);
}

}  // namespace detail

/// Runs every task of `s` and writes CSV files plus summary.json into `dir`
/// (default: the configured output.dir). `only` restricts the task list.
inline Summary run_scenario(const ScenarioConfig& s, std::optional<std::filesystem::path> dir = std::nullopt,
                            const std::vector<std::string>& only = {}) {
    const std::filesystem::path out_dir = dir.value_or(s.output_dir);
    std::filesystem::create_directories(out_dir);
    Summary sum;
    sum.scenario = s.id;
    sum.config = s.raw.entries();
    detail::ScenarioContext ctx(s);
    for (const auto& task : s.tasks) {
        if (!only.empty() && std::find(only.begin(), only.end(), task) == only.end()) continue;
        sum.tasks.push_back(task);
        if (task == "envelope") detail::task_envelope(ctx, sum, out_dir);
        else if (task == "p_oo") detail::task_p_oo(ctx, sum, out_dir);
        else if (task == "offdiag") detail::task_offdiag(ctx, sum, out_dir);
        else if (task == "bottleneck") detail::task_bottleneck(ctx, sum, out_dir);
        else if (task == "poincare") detail::task_poincare(ctx, sum, out_dir);
        else if (task == "harmonic") detail::task_harmonic(ctx, sum, out_dir);
        else if (task == "open_gap") detail::task_open_gap(ctx, sum, out_dir);
        else if (task == "schedule") detail::task_schedule(ctx, sum, out_dir);
    }
    for (const auto& f : sum.files) {
        const auto problem = check_csv_schema(read_csv(out_dir / f));
        sum.add_check("schema:" + f, problem.empty() ? 1.0 : 0.0, 1.0, 1.0);
    }
    std::ofstream(out_dir / "summary.json") << sum.to_json().dump(2) << "\n";
    return sum;
}

struct ScenarioOutcome {
    std::optional<Summary> summary;
    std::string error;  // non-empty when the run threw
};

/// Runs scenarios on a pool of worker threads; results keep the input order.
inline std::vector<ScenarioOutcome> run_scenarios(const std::vector<ScenarioConfig>& list, unsigned threads = 0) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(1, list.size())));
    std::vector<ScenarioOutcome> out(list.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < list.size(); i = next++) {
            try {
                out[i].summary = run_scenario(list[i]);
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        }
    };
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    pool.clear();
    return out;
}

}  // namespace endlab
