#include "orhc/runner.hpp"

#include <atomic>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace orhc {

namespace fs = std::filesystem;

OrhcRunOutput run_orhc_scenario(const ScenarioSetup& setup, const OrhcConfig& cfg, const std::string& out_dir,
                                std::ostream* progress) {
    const auto clock0 = std::chrono::steady_clock::now();
    std::vector<double> window_seconds;
    WindowCallback cb = [&](const WindowRecord& w) {
        window_seconds.push_back(w.seconds);
        if (!progress) return;
        std::ostringstream os;
        os.precision(4);
        os << "window " << w.index << " [" << w.t_in << ", " << w.t_out << "] theta=" << w.theta
           << " iters=" << w.iterations << (w.converged ? "" : " (not converged)") << " |yhat|=" << w.yhat_norm
           << " " << w.seconds << "s\n";
        *progress << os.str() << std::flush;
    };
    OrhcRunOutput out;
    out.record = run_orhc(setup.context(), cfg, setup.y0, setup.yhat0, cb);
    out.fits = compute_decay_fits(out.record.norm_history);
    out.summary = orhc_summary_json(setup, out.record, out.fits);
    out.summary["run"]["effective_config"] = {{"T_rh", cfg.snapped(setup.dt).T_rh},
                                              {"tau", cfg.snapped(setup.dt).tau},
                                              {"T_infty", cfg.snapped(setup.dt).T_infty}};
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock0).count();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        write_norm_csv(out.record.norm_history, (dir / "norms.csv").string());
        write_json(out.summary, (dir / "summary.json").string());
        write_json({{"setup_seconds", setup.setup_seconds}, {"run_seconds", out.seconds},
                    {"window_seconds", window_seconds}},
                   (dir / "timings.json").string());
        if (setup.config.output.plots) {
            std::ostringstream title;
            title << "ORHC, T_rh = " << cfg.T_rh << ", lambda = " << setup.config.observer.lambda;
            write_norm_plot(title.str(), out.record.norm_history, plot_markers(out.record),
                            (dir / "norms.svg").string());
        }
        if (setup.config.output.verbose) write_trace_csv(out.record.windows, (dir / "trace.csv").string());
    }
    return out;
}

FreeRunOutput run_free_scenario(const ScenarioSetup& setup, double T, const std::string& out_dir) {
    FreeRunOutput out;
    IntegratorOptions opt;
    opt.solver = setup.config.plant_solver();
    opt.storage = StoragePolicy::endpoints;
    out.trajectory = run_free(setup.ops, *setup.rc, TimeGrid::make(0.0, T, setup.dt), setup.y0, opt);
    out.history = free_history(out.trajectory);
    std::vector<double> t, v;
    for (const auto& s : out.history) {
        t.push_back(s.t);
        v.push_back(s.norm_y);
    }
    out.growth = fit_log_linear(t, v, std::min(1.0, T / 4.0), T);
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        const fs::path dir(out_dir);
        write_norm_csv(out.history, (dir / "free_norms.csv").string());
        nlohmann::json j;
        j["scenario"] = config_json(setup.config);
        j["T"] = T;
        j["initial_norm"] = out.trajectory.norms.front();
        j["final_norm"] = out.trajectory.norms.back();
        j["growth_fit"] = {{"slope", out.growth.slope}, {"points", out.growth.points}};
        write_json(j, (dir / "free_summary.json").string());
        if (setup.config.output.plots) {
            write_norm_plot("Free dynamics", out.history, {}, (dir / "free_norms.svg").string());
        }
    }
    return out;
}

std::vector<SweepEntry> run_sweep(const ScenarioSetup& setup, const std::string& out_dir, std::ostream* progress) {
    const auto& horizons = setup.config.sweep.T_rh;
    std::vector<SweepEntry> entries(horizons.size());
    std::vector<std::exception_ptr> errors(horizons.size());
    std::atomic<std::size_t> next{0};
    std::mutex io;
    auto worker = [&] {
        for (std::size_t i = next++; i < horizons.size(); i = next++) {
            try {
                OrhcConfig cfg = setup.config.orhc_config();
                cfg.T_rh = horizons[i];
                std::ostringstream name;
                name << "T_rh_" << horizons[i];
                const std::string dir = out_dir.empty() ? "" : (fs::path(out_dir) / name.str()).string();
                entries[i].T_rh = horizons[i];
                entries[i].output = run_orhc_scenario(setup, cfg, dir, nullptr);
                if (progress) {
                    std::lock_guard lock(io);
                    const auto& r = entries[i].output.record;
                    *progress << "T_rh=" << horizons[i] << ": Sqz>=1 = " << r.sqz_violations_total
                              << ", stop = " << to_string(r.stopped_reason) << ", t_end = " << r.concat_times.back()
                              << "\n"
                              << std::flush;
                }
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int workers = std::max(1, std::min<int>(setup.config.sweep.workers, static_cast<int>(horizons.size())));
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    if (!out_dir.empty()) write_json(sweep_summary_json(entries), (fs::path(out_dir) / "sweep.json").string());
    return entries;
}

nlohmann::json sweep_summary_json(const std::vector<SweepEntry>& entries) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& e : entries) {
        const auto& r = e.output.record;
        rows.push_back({{"T_rh", e.T_rh},
                        {"sqz_violations_total", r.sqz_violations_total},
                        {"max_consecutive_violations", r.max_consecutive_violations},
                        {"stopped_reason", to_string(r.stopped_reason)},
                        {"final_time", r.concat_times.back()},
                        {"windows", r.windows.size()},
                        {"control_energy", r.control_energy},
                        {"state_slope", e.output.fits.state.slope},
                        {"final_norm", r.norm_history.empty() ? 0.0 : r.norm_history.back().norm_y}});
    }
    return {{"runs", rows}};
}

}  // namespace orhc
