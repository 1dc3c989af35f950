#include "orhc/checks.hpp"
#include "orhc/runner.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace orhc;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kNumerical = 2, kCheckFailed = 3 };

struct CommonOptions {
    std::string config;
    std::vector<std::string> overrides;
    std::string out;
    bool quiet = false;
};

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config, "Scenario file (default: the paper-5.1 preset)");
    sub->add_option("--set", o.overrides, "Override a setting, e.g. --set rhc.T_rh=1.5")->take_all();
    sub->add_option("--out", o.out, "Output directory (default: output.dir)");
    sub->add_flag("--quiet", o.quiet, "Suppress progress output");
}

ScenarioConfig resolve_config(const CommonOptions& o) {
    ScenarioConfig cfg = o.config.empty() ? scenario_preset("paper-5.1") : load_scenario(o.config);
    apply_overrides(cfg, o.overrides);
    if (!o.out.empty()) cfg.output.dir = o.out;
    return cfg;
}

int cmd_free(const CommonOptions& o) {
    const auto setup = build_scenario(resolve_config(o));
    const double T = setup->config.rhc.T_infty;
    const auto r = run_free_scenario(*setup, T, setup->config.output.dir);
    if (!o.quiet) {
        std::cout << "free dynamics on [0, " << T << "]: |y(0)| = " << r.trajectory.norms.front()
                  << ", |y(T)| = " << r.trajectory.norms.back() << ", log-slope over [1, T] = " << r.growth.slope
                  << "\n";
    }
    return kOk;
}

int cmd_ocp(const CommonOptions& o) {
    const auto setup = build_scenario(resolve_config(o));
    const auto& c = setup->config;
    const TolerancePair tol = dynamic_tolerance(c.ocp.tolerances, setup->ops.mass_norm(setup->yhat0), c.rhc.T_rh);
    OcpSolveOptions opt;
    opt.max_iter = c.ocp.max_iter;
    opt.keep_trace = true;
    opt.storage = StoragePolicy::endpoints;
    const OcpResult res = solve_ocp(setup->ocp_problem(), 0.0, c.rhc.T_rh, setup->dt, setup->yhat0, tol,
                                    std::nullopt, opt);
    fs::create_directories(c.output.dir);
    const fs::path dir(c.output.dir);
    std::vector<NormSample> hist;
    for (long k = 0; k < res.u_star.grid.nodes(); ++k) {
        NormSample s;
        s.t = res.u_star.grid.t(k);
        s.norm_y = res.y_star.norms[static_cast<std::size_t>(k)];
        s.norm_u = res.u_star.values.row(k).norm();
        hist.push_back(s);
    }
    write_norm_csv(hist, (dir / "ocp_norms.csv").string());
    nlohmann::json j;
    j["scenario"] = config_json(c);
    j["ocp"] = {{"iterations", res.iterations},       {"converged", res.converged},
                {"cost", res.cost},                   {"initial_cost", res.initial_cost},
                {"tol", {res.tol_used.tol1, res.tol_used.tol2}},
                {"residual_G_norm_sq", res.residual_G_norm_sq},
                {"control_l2_sq", l2_norm_sq(res.u_star)}};
    write_json(j, (dir / "ocp_summary.json").string());
    WindowRecord w;
    w.trace = res.trace;
    write_trace_csv({w}, (dir / "ocp_trace.csv").string());
    if (c.output.plots) write_norm_plot("Open-loop optimal window", hist, {}, (dir / "ocp_norms.svg").string());
    if (!o.quiet) {
        std::cout << "OCP on [0, " << c.rhc.T_rh << "]: " << res.iterations << " iterations, "
                  << (res.converged ? "converged" : "NOT converged") << ", cost " << res.initial_cost << " -> "
                  << res.cost << "\n";
    }
    return res.converged ? kOk : kNumerical;
}

int cmd_orhc(const CommonOptions& o) {
    const auto setup = build_scenario(resolve_config(o));
    const auto out = run_orhc_scenario(*setup, setup->config.orhc_config(), setup->config.output.dir,
                                       o.quiet ? nullptr : &std::cerr);
    if (!o.quiet) {
        const auto& r = out.record;
        std::cout << "stopped: " << to_string(r.stopped_reason) << " at t = " << r.concat_times.back()
                  << ", windows = " << r.windows.size() << ", Sqz>=1 = " << r.sqz_violations_total
                  << ", |u|_L2^2 = " << r.control_energy << ", state rate = " << out.fits.state.rate()
                  << ", error rate = " << out.fits.error.rate() << "\n";
    }
    return out.record.stopped_reason == StopReason::ocp_failure ? kNumerical : kOk;
}

int cmd_sweep(const CommonOptions& o) {
    const auto setup = build_scenario(resolve_config(o));
    const auto entries = run_sweep(*setup, setup->config.output.dir, o.quiet ? nullptr : &std::cerr);
    if (!o.quiet) std::cout << sweep_summary_json(entries).dump(2) << "\n";
    return kOk;
}

int cmd_eigs(const CommonOptions& o) {
    ScenarioConfig cfg = resolve_config(o);
    cfg.penalty.kind = PenaltyKind::eig_projection;
    const auto setup = build_scenario(cfg);
    const auto exact = analytic_neumann_spectrum(setup->basis->count());
    fs::create_directories(cfg.output.dir);
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < setup->basis->count(); ++i) {
        const double e = exact[static_cast<std::size_t>(i)];
        const double v = setup->basis->values[i];
        rows.push_back({{"index", i}, {"computed", v}, {"analytic", e},
                        {"relative_deviation", e == 0.0 ? std::abs(v) : std::abs(v - e) / e}});
        if (!o.quiet) std::cout << i << "  " << v << "  " << e << "\n";
    }
    write_json({{"scenario", config_json(cfg)}, {"iterations", setup->basis->iterations}, {"eigenvalues", rows}},
               (fs::path(cfg.output.dir) / "eigs.json").string());
    return kOk;
}

int cmd_check(const CommonOptions& o) {
    const auto setup = build_scenario(resolve_config(o));
    const auto results = run_check_suite(*setup);
    bool ok = true;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : results) {
        ok = ok && r.passed;
        rows.push_back({{"name", r.name}, {"passed", r.passed}, {"value", r.value}, {"threshold", r.threshold},
                        {"detail", r.detail}});
        if (!o.quiet) std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    }
    fs::create_directories(setup->config.output.dir);
    write_json({{"checks", rows}, {"passed", ok}}, (fs::path(setup->config.output.dir) / "check.json").string());
    return ok ? kOk : kCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Output-based receding horizon control of a parabolic system"};
    app.require_subcommand(1);
    CommonOptions opts;
    struct Command {
        const char* name;
        const char* help;
        int (*run)(const CommonOptions&);
    };
    const Command commands[] = {
        {"free", "Uncontrolled dynamics over [0, T_infty]", cmd_free},
        {"ocp", "One finite-horizon optimal control problem from the initial estimate", cmd_ocp},
        {"orhc", "Closed-loop receding horizon control with the observer", cmd_orhc},
        {"sweep", "ORHC over the horizons in sweep.T_rh", cmd_sweep},
        {"eigs", "Neumann eigenvalues against the analytic spectrum", cmd_eigs},
        {"check", "Gradient, duality, time-order and projection checks", cmd_check},
    };
    std::vector<std::pair<CLI::App*, const Command*>> subs;
    for (const auto& c : commands) {
        CLI::App* sub = app.add_subcommand(c.name, c.help);
        add_common(sub, opts);
        subs.emplace_back(sub, &c);
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }
    try {
        for (const auto& [sub, cmd] : subs) {
            if (sub->parsed()) return cmd->run(opts);
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kUsage;
    } catch (const GeometryError& e) {
        std::cerr << "geometry error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerical;
    }
    return kUsage;
}
