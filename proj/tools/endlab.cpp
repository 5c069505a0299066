// endlab command-line driver. Exit codes: 0 all declared bands met,
// 1 band violation, 2 configuration or solver error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "endlab/scenario.hpp"

namespace fs = std::filesystem;
using namespace endlab;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_band = 1;
constexpr int exit_error = 2;

struct Source {
    std::string config_file;
    std::string scenario;
    std::vector<std::string> sets;
    std::string output;
};

void add_source_options(CLI::App* cmd, Source& src, const std::string& default_scenario = "") {
    src.scenario = default_scenario;
    cmd->add_option("-c,--config", src.config_file, "scenario config file (key = value)")->check(CLI::ExistingFile);
    cmd->add_option("-s,--scenario", src.scenario, "built-in scenario id")->capture_default_str();
    cmd->add_option("--set", src.sets, "override a config key, KEY=VALUE (repeatable)");
    cmd->add_option("-o,--output", src.output, "output directory (overrides output.dir and ENDLAB_OUTPUT_DIR)");
    cmd->allow_extras();
}

/// Unrecognized `--dotted.key value` or `--dotted.key=value` arguments are
/// config overrides.
std::vector<std::pair<std::string, std::string>> extra_overrides(const std::vector<std::string>& extras) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < extras.size(); ++i) {
        const std::string& a = extras[i];
        if (a.rfind("--", 0) != 0) throw Error(Errc::config_invalid, "unexpected argument '" + a + "'");
        const std::string body = a.substr(2);
        const auto eq = body.find('=');
        if (eq != std::string::npos) {
            out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= extras.size()) throw Error(Errc::config_invalid, body + ": missing value");
            out.emplace_back(body, extras[++i]);
        }
    }
    return out;
}

ScenarioConfig load_scenario(const Source& src, const std::vector<std::string>& extras,
                             const std::vector<std::string>& forced_tasks = {}) {
    Config c = !src.config_file.empty() ? Config::load(src.config_file)
                                        : builtin_config(src.scenario.empty() ? "rn_sum_3" : src.scenario);
    for (const auto& kv : src.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw Error(Errc::config_invalid, "--set expects KEY=VALUE, got '" + kv + "'");
        c.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (const auto& [k, v] : extra_overrides(extras)) c.set(k, v);
    if (!forced_tasks.empty()) {
        std::string joined;
        for (const auto& t : forced_tasks) joined += (joined.empty() ? "" : ", ") + t;
        c.set("tasks", joined);
    }
    if (!src.output.empty()) {
        c.set("output.dir", src.output);
    } else if (const char* env = std::getenv("ENDLAB_OUTPUT_DIR"); env && *env) {
        c.set("output.dir", (fs::path(env) / c.get_string("scenario.id", "scenario")).string());
    }
    return scenario_from_config(c);
}

int report_summary(const Summary& s, const fs::path& dir) {
    std::cout << s.text();
    std::cout << s.scenario << (s.passed() ? " PASS" : " FAIL") << " (" << dir.string() << ")\n";
    return s.passed() ? exit_ok : exit_band;
}

int run_one(const ScenarioConfig& s) {
    const auto sum = run_scenario(s);
    return report_summary(sum, s.output_dir);
}

int cmd_schedule(const ScenarioConfig& s) {
    const auto sum = run_scenario(s);
    for (const auto& e : s.ends) {
        const auto* sched = e.profile.schedule();
        if (!sched) continue;
        std::cout << "# end " << e.label << ": " << e.profile.describe() << "\n";
        std::cout << "# k log_a log_b log_c log_d\n";
        for (std::size_t k = 0; k < sched->size(); ++k) {
            const auto& t = sched->terms()[k];
            std::cout << k + 1 << ' ' << format_double(t.log_a) << ' ' << format_double(t.log_b) << ' '
                      << format_double(t.log_c) << ' ' << format_double(t.log_d) << "\n";
        }
    }
    return report_summary(sum, s.output_dir);
}

int cmd_report(const std::string& target, const std::string& numeric, const std::string& envelope, double max_spread) {
    const fs::path p(target);
    if (fs::is_directory(p)) {
        std::ifstream in(p / "summary.json");
        if (!in) throw Error(Errc::config_invalid, "no summary.json in " + p.string());
        const auto j = nlohmann::json::parse(in);
        for (const auto& b : j.at("bands")) {
            std::cout << j.at("scenario").get<std::string>() << " band " << b.at("name").get<std::string>()
                      << " spread " << b.at("spread").get<double>() << " (max " << b.at("max_spread").get<double>()
                      << ") " << (b.at("pass").get<bool>() ? "PASS" : "FAIL") << "\n";
        }
        for (const auto& c : j.at("checks")) {
            std::cout << j.at("scenario").get<std::string>() << " check " << c.at("name").get<std::string>()
                      << " value " << c.at("value").get<double>() << " " << (c.at("pass").get<bool>() ? "PASS" : "FAIL")
                      << "\n";
        }
        for (const auto& r : j.at("records")) {
            std::cout << j.at("scenario").get<std::string>() << " record " << r.at("name").get<std::string>()
                      << " spread " << r.at("spread").get<double>() << "\n";
        }
        return j.at("passed").get<bool>() ? exit_ok : exit_band;
    }
    if (numeric.empty() || envelope.empty())
        throw Error(Errc::config_invalid, "report on a CSV file needs --numeric and --envelope column names");
    const auto d = read_csv(p);
    const auto problem = check_csv_schema(d);
    if (!problem.empty()) throw Error(Errc::config_invalid, p.string() + ": " + problem);
    const auto band = ratio_fit(d.column(numeric), d.column(envelope), numeric + "/" + envelope);
    const bool pass = band.spread <= max_spread;
    std::cout << band.quantity << " min " << format_double(band.min_ratio) << " max " << format_double(band.max_ratio)
              << " spread " << format_double(band.spread) << " n " << band.grid_size << " "
              << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? exit_ok : exit_band;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"endlab: heat kernels and Poincare constants on model manifolds with ends"};
    app.require_subcommand(1);

    Source src_sched, src_env, src_sim, src_poinc;
    auto* sched = app.add_subcommand("schedule", "emit and verify the oscillation schedule of a scenario");
    add_source_options(sched, src_sched, "osc_example1");

    auto* env = app.add_subcommand("envelope", "evaluate the on-diagonal envelope on the t-grid");
    add_source_options(env, src_env);

    auto* sim = app.add_subcommand("simulate", "run the tasks of a scenario (or all built-in scenarios)");
    add_source_options(sim, src_sim);
    bool run_all = false;
    unsigned jobs = 0;
    std::vector<std::string> tasks;
    sim->add_flag("--all", run_all, "run every built-in scenario on a worker pool");
    sim->add_option("-j,--jobs", jobs, "worker threads for --all (default: hardware threads)");
    sim->add_option("--tasks", tasks, "restrict to these tasks")->delimiter(',');

    auto* poinc = app.add_subcommand("poincare", "Poincare constants on the r-grid of a scenario");
    add_source_options(poinc, src_poinc, "rn_sum_3");

    auto* rep = app.add_subcommand("report", "ratio fit between two CSV columns, or print an output summary");
    std::string target, numeric, envelope;
    double max_spread = INFINITY;
    rep->add_option("target", target, "CSV file or scenario output directory")->required();
    rep->add_option("--numeric", numeric, "numeric column header");
    rep->add_option("--envelope", envelope, "envelope column header");
    rep->add_option("--max-spread", max_spread, "declared maximal spread");

    auto* list = app.add_subcommand("list-scenarios", "list built-in scenarios");
    std::string dump;
    list->add_option("--dump", dump, "print the config text of one scenario");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_error;
    }

    try {
        if (*list) {
            if (!dump.empty()) {
                for (const auto& b : builtin_scenarios()) {
                    if (b.id == dump) {
                        std::cout << b.text;
                        return exit_ok;
                    }
                }
                throw Error(Errc::config_invalid, "no built-in scenario named '" + dump + "'");
            }
            for (const auto& b : builtin_scenarios()) {
                const auto c = Config::parse(b.text);
                std::cout << b.id << "  " << c.get_string("scenario.description", "") << "\n";
            }
            return exit_ok;
        }
        if (*rep) return cmd_report(target, numeric, envelope, max_spread);
        if (*sched) return cmd_schedule(load_scenario(src_sched, sched->remaining(), {"schedule"}));
        if (*env) return run_one(load_scenario(src_env, env->remaining(), {"envelope"}));
        if (*poinc) return run_one(load_scenario(src_poinc, poinc->remaining(), {"poincare"}));
        if (*sim) {
            if (!run_all) return run_one(load_scenario(src_sim, sim->remaining(), tasks));
            std::vector<ScenarioConfig> all;
            for (const auto& b : builtin_scenarios()) {
                Source s = src_sim;
                s.scenario = b.id;
                s.config_file.clear();
                if (!s.output.empty()) s.output = (fs::path(s.output) / b.id).string();
                all.push_back(load_scenario(s, sim->remaining(), tasks));
            }
            int code = exit_ok;
            const auto results = run_scenarios(all, jobs);
            for (std::size_t i = 0; i < all.size(); ++i) {
                if (!results[i].error.empty()) {
                    std::cerr << all[i].id << " ERROR " << results[i].error << "\n";
                    code = exit_error;
                    continue;
                }
                const int c = report_summary(*results[i].summary, all[i].output_dir);
                if (code == exit_ok) code = c;
            }
            return code;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_error;
    }
    return exit_error;
}
