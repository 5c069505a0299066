// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "dense_oracle.hpp"
#include "endlab/scenario.hpp"

using namespace endlab;
using std::numbers::pi;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        pass = pass && ok;
        if (!detail.empty()) detail += "; ";
        detail += what + (ok ? "" : " [FAIL]");
    }
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

StarMesh ray_mesh(std::vector<VolumeProfile> p, double r_max, double npd, double r_start = 1.0) {
    MeshOptions o;
    o.r_max = r_max;
    o.nodes_per_decade = npd;
    o.r_start = r_start;
    return build_mesh(p, o);
}

std::vector<double> geometric(double a, double b, double ratio) {
    std::vector<double> t;
    for (double x = a; x <= b * (1 + 1e-12); x *= ratio) t.push_back(x);
    return t;
}

double max_rel_error(const std::vector<double>& ts, const std::function<double(std::size_t)>& ratio) {
    double worst = 0;
    for (std::size_t k = 0; k < ts.size(); ++k) worst = std::max(worst, std::abs(ratio(k) - 1.0));
    return worst;
}

Outcome ac1() {
    Outcome v;
    const auto ts = geometric(1, 100, 1.6);
    {
        auto m = ray_mesh({VolumeProfile::power_log(1, 0)}, 200, 64, 0.01);
        const auto p = heat_kernel(m, 0, 0, ts);
        const double e = max_rel_error(ts, [&](std::size_t k) { return p[k] * std::sqrt(pi * ts[k]); });
        v.require(e <= 0.02, "half-line return " + fmt("%.2e", e) + " <= 0.02");

        const std::size_t j = m.nearest(0, 2.0);
        const double x0 = m.ends[0].radius[j] - m.center_radius;
        const auto P = exit_probability(m, 0, j, ts);
        const double ee = max_rel_error(ts, [&](std::size_t k) { return P[k] / std::erfc(x0 / std::sqrt(4 * ts[k])); });
        v.require(ee <= 0.02, "exit erfc " + fmt("%.2e", ee) + " <= 0.02");
    }
    {
        auto m = ray_mesh({VolumeProfile::power_log(2, 0)}, 200, 64, 0.01);
        const auto p = heat_kernel(m, 0, 0, ts);
        const double e = max_rel_error(ts, [&](std::size_t k) { return p[k] * 4 * ts[k]; });
        v.require(e <= 0.05, "plane 1/(4t) " + fmt("%.2e", e) + " <= 0.05");
    }
    {
        auto m = ray_mesh({VolumeProfile::power_log(1, 0), VolumeProfile::power_log(1, 0)}, 1e3, 64, 0.01);
        double worst = 0;
        for (double r : {10.0, 100.0, 1000.0})
            worst = std::max(worst, std::abs(poincare_constant(m, r).poincare / std::pow(2 * r / pi, 2) - 1));
        v.require(worst <= 0.01, "interval (2r/pi)^2 " + fmt("%.2e", worst) + " <= 0.01");
    }
    return v;
}

Outcome ac2() {
    Outcome v;
    std::vector<double> ts;
    for (int i = 0; i < 10; ++i) ts.push_back(0.1 * std::pow(10.0, 0.4 * i));
    const std::vector<std::pair<std::string, StarMesh>> meshes{
        {"m1+line", ray_mesh({VolumeProfile::m1(), VolumeProfile::power_log(1, 0)}, 50, 16)},
        {"r3+r3", ray_mesh({VolumeProfile::power_log(3, 0), VolumeProfile::power_log(3, 0)}, 50, 16)},
        {"r2+line+m3", ray_mesh({VolumeProfile::power_log(2, 0), VolumeProfile::power_log(1, 0), VolumeProfile::m3()},
                                12, 16)},
    };
    for (const auto& [name, m] : meshes) {
        oracle::SpectralEvolution ev(m);
        const auto u0 = delta_at(m, 0);
        const auto fields = heat_solve(m, u0, ts, BoundaryCondition::neumann);
        const auto mass = m.masses();
        double worst = 0;
        for (std::size_t k = 0; k < ts.size(); ++k) {
            const auto ref = ev.evolve(u0, ts[k]);
            double err = 0, nrm = 0;
            for (std::size_t i = 0; i < ref.size(); ++i) {
                err += mass[i] * std::pow(fields[k].values[i] - ref[i], 2);
                nrm += mass[i] * ref[i] * ref[i];
            }
            worst = std::max(worst, std::sqrt(err / nrm));
        }
        v.require(m.size() <= 60 && worst <= 1e-6,
                  name + " (" + std::to_string(m.size()) + " nodes) " + fmt("%.2e", worst) + " <= 1e-6");
    }
    return v;
}

class Runs {
public:
    explicit Runs(const fs::path& root) {
        std::vector<ScenarioConfig> list;
        for (const auto& b : builtin_scenarios()) {
            auto c = builtin_config(b.id);
            c.set("output.dir", (root / b.id).string());
            list.push_back(scenario_from_config(c));
        }
        const auto out = run_scenarios(list);
        for (std::size_t i = 0; i < list.size(); ++i) results_.emplace(list[i].id, out[i]);
    }

    void band(Outcome& v, const std::string& id, const std::string& name, double max_spread) const {
        const auto* s = summary(v, id);
        if (!s) return;
        for (const auto& b : s->bands) {
            if (b.name == name) {
                v.require(b.band.spread <= max_spread,
                          id + " " + name + " spread " + fmt("%.3g", b.band.spread) + " <= " + fmt("%g", max_spread));
                return;
            }
        }
        v.require(false, id + " " + name + " missing");
    }

    void check(Outcome& v, const std::string& id, const std::string& name, double lo, double hi) const {
        const auto* s = summary(v, id);
        if (!s) return;
        for (const auto& c : s->checks) {
            if (c.name == name) {
                v.require(c.value >= lo && c.value <= hi,
                          id + " " + name + " " + fmt("%.4g", c.value) + " in [" + fmt("%g", lo) + ", " + fmt("%g", hi) + "]");
                return;
            }
        }
        v.require(false, id + " " + name + " missing");
    }

    void record(Outcome& v, const std::string& id, const std::string& name) const {
        const auto* s = summary(v, id);
        if (!s) return;
        for (const auto& r : s->records) {
            if (r.name == name) {
                v.require(std::isfinite(r.band.spread), id + " record " + name + " spread " + fmt("%.3g", r.band.spread));
                return;
            }
        }
        v.require(false, id + " record " + name + " missing");
    }

    void schemas(Outcome& v, const std::string& id) const {
        const auto* s = summary(v, id);
        if (!s) return;
        bool ok = true;
        for (const auto& c : s->checks) {
            if (c.name.rfind("schema:", 0) == 0) ok = ok && c.pass;
        }
        v.require(ok, id + " csv schema");
    }

private:
    const Summary* summary(Outcome& v, const std::string& id) const {
        const auto it = results_.find(id);
        if (it == results_.end() || !it->second.summary) {
            v.require(false, id + (it == results_.end() ? " not run" : " error: " + it->second.error));
            return nullptr;
        }
        return &*it->second.summary;
    }

    std::map<std::string, ScenarioOutcome> results_;
};

// Doubling nodes_per_decade moves p(t,o,o) by less than 2%.
void refinement(Outcome& v, const std::string& id) {
    const auto s = scenario_from_config(builtin_config(id));
    const auto ts = s.t_grid->points();
    auto coarse = s.mesh_options(), fine = coarse;
    fine.nodes_per_decade *= 2;
    const auto a = heat_kernel(build_mesh(s.profiles(), coarse), 0, 0, ts, s.time);
    const auto b = heat_kernel(build_mesh(s.profiles(), fine), 0, 0, ts, s.time);
    const double e = max_rel_error(ts, [&](std::size_t k) { return a[k] / b[k]; });
    v.require(e < 0.02, id + " refinement " + fmt("%.2e", e) + " < 0.02");
}

}  // namespace

int main() {
    const auto root = fs::temp_directory_path() / "endlab_acceptance";
    fs::remove_all(root);

    std::vector<std::pair<std::string, std::function<Outcome()>>> criteria;
    criteria.emplace_back("closed-form solver oracles", ac1);
    criteria.emplace_back("dense spectral oracle", ac2);

    std::optional<Runs> runs;
    auto runs_ref = [&]() -> const Runs& {
        if (!runs) runs.emplace(root);
        return *runs;
    };
    criteria.emplace_back("non-parabolic on-diagonal", [&] {
        Outcome v;
        runs_ref().band(v, "rn_sum_3", "p_oo", 10);
        runs_ref().schemas(v, "rn_sum_3");
        refinement(v, "rn_sum_3");
        return v;
    });
    criteria.emplace_back("off-diagonal assembly", [&] {
        Outcome v;
        runs_ref().band(v, "rn_sum_3", "offdiag", 20);
        runs_ref().band(v, "parabolic_lex", "offdiag", 20);
        for (const auto* r : {"regime_both_near", "regime_x_far", "regime_x_near_y_far"})
            runs_ref().band(v, "parabolic_lex", r, 20);
        return v;
    });
    criteria.emplace_back("parabolic on-diagonal", [&] {
        Outcome v;
        runs_ref().band(v, "parabolic_lex", "p_oo", 10);
        runs_ref().schemas(v, "parabolic_lex");
        refinement(v, "parabolic_lex");
        return v;
    });
    criteria.emplace_back("Poincare envelopes", [&] {
        Outcome v;
        runs_ref().band(v, "rn_sum_3", "poincare", 10);
        runs_ref().band(v, "rn_sum_2", "poincare", 10);
        for (const auto* id : {"rn_sum_3", "rn_sum_2"}) {
            runs_ref().check(v, id, "whitney_min", 0.125, 8);
            runs_ref().check(v, id, "whitney_max", 0.125, 8);
        }
        runs_ref().check(v, "rn_sum_3", "indicator_slope", 2.8, 3.2);
        return v;
    });
    criteria.emplace_back("oscillating constructions", [&] {
        Outcome v;
        for (const auto* id : {"osc_example1", "osc_example2"}) {
            runs_ref().check(v, id, "schedule_residual", 0, 1e-10);
            runs_ref().band(v, id, "h_over_n", 4);
            runs_ref().band(v, id, "h_growth", 5);
            runs_ref().check(v, id, "h1_constant", 0, 1e300);
            runs_ref().check(v, id, "h2_constant", 0, 1e300);
        }
        return v;
    });
    criteria.emplace_back("open-gap measurement", [&] {
        Outcome v;
        runs_ref().band(v, "osc_example1", "gap_upper", 20);
        runs_ref().record(v, "osc_example1", "p_oo_vs_cand_t_loglog2");
        runs_ref().record(v, "osc_example1", "p_oo_vs_cand_t_log");
        runs_ref().band(v, "osc_example2", "gap_upper", 20);
        runs_ref().record(v, "osc_example2", "p_oo_vs_cand_t");
        runs_ref().record(v, "osc_example2", "p_oo_vs_cand_t_log");
        return v;
    });
    criteria.emplace_back("Liouville contrast", [&] {
        Outcome v;
        runs_ref().check(v, "liouville_r3", "harmonic_min_gap", 0.5, INFINITY);
        runs_ref().check(v, "rn_sum_2", "energy_slope", -1.15, -0.85);
        return v;
    });
    criteria.emplace_back("bottleneck decay", [&] {
        Outcome v;
        runs_ref().check(v, "bottleneck_3", "bottleneck_increases", 0, 0);
        return v;
    });

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v.require(false, std::string("error: ") + e.what());
        }
        failed += v.pass ? 0 : 1;
        std::printf("AC%zu %s %s: %s\n", i + 1, v.pass ? "PASS" : "FAIL", criteria[i].first.c_str(), v.detail.c_str());
        std::fflush(stdout);
    }
    return failed;
}
