#include "orhc/orhc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace orhc {

std::string to_string(ConcatRule r) {
    switch (r) {
        case ConcatRule::max_argmin: return "max_argmin";
        case ConcatRule::min_argmin: return "min_argmin";
        case ConcatRule::fixed_tau: return "fixed_tau";
    }
    return "unknown";
}

ConcatRule concat_rule_from_string(const std::string& s) {
    if (s == "max_argmin") return ConcatRule::max_argmin;
    if (s == "min_argmin") return ConcatRule::min_argmin;
    if (s == "fixed_tau") return ConcatRule::fixed_tau;
    throw ConfigError("unknown concatenation rule '" + s + "'");
}

std::string to_string(StopReason r) {
    switch (r) {
        case StopReason::reached_T_infty: return "reached_T_infty";
        case StopReason::squeeze_stop: return "squeeze_stop";
        case StopReason::ocp_failure: return "ocp_failure";
    }
    return "unknown";
}

void OrhcConfig::validate() const {
    auto finite_pos = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!finite_pos(T_rh)) throw ConfigError("T_rh must be positive");
    if (!finite_pos(tau)) throw ConfigError("tau must be positive");
    if (tau > T_rh) throw ConfigError("tau must not exceed T_rh");
    if (!finite_pos(T_infty)) throw ConfigError("T_infty must be positive");
    if (squeeze.consecutive_limit < 1 || squeeze.total_limit < 1) {
        throw ConfigError("squeeze limits must be positive");
    }
    if (max_iter < 1) throw ConfigError("max_iter must be positive");
    tolerances.validate();
}

OrhcConfig OrhcConfig::snapped(double dt) const {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    auto snap = [dt](double v) { return static_cast<double>(std::max(1L, std::lround(v / dt))) * dt; };
    OrhcConfig c = *this;
    c.T_rh = snap(T_rh);
    c.tau = snap(tau);
    c.T_infty = snap(T_infty);
    return c;
}

long select_concatenation_node(const std::vector<double>& norms, long tau_steps, ConcatRule rule) {
    const long last = static_cast<long>(norms.size()) - 1;
    if (tau_steps < 0 || tau_steps > last) throw ConfigError("empty concatenation search window");
    long best = tau_steps;
    if (rule == ConcatRule::fixed_tau) return best;
    for (long k = tau_steps + 1; k <= last; ++k) {
        const double v = norms[static_cast<std::size_t>(k)];
        const double b = norms[static_cast<std::size_t>(best)];
        if (v < b || (v == b && rule == ConcatRule::max_argmin)) best = k;
    }
    return best;
}

double select_concatenation_time(const StateTrajectory& y_star, double t_in, double tau, double T_rh,
                                 ConcatRule rule) {
    const double dt = y_star.grid.dt;
    if (std::abs(y_star.grid.t_start - t_in) > 1e-9 * dt) throw ConfigError("trajectory does not start at t_in");
    const long rh_steps = std::lround(T_rh / dt);
    const long tau_steps = std::lround(tau / dt);
    if (rh_steps > y_star.grid.steps || static_cast<long>(y_star.norms.size()) != y_star.grid.nodes()) {
        throw ConfigError("trajectory does not cover the prediction window");
    }
    if (tau_steps > rh_steps) throw ConfigError("empty concatenation search window");
    const std::vector<double> norms(y_star.norms.begin(), y_star.norms.begin() + rh_steps + 1);
    return y_star.grid.t(select_concatenation_node(norms, tau_steps, rule));
}

namespace {

// Restriction of the previous optimal control to the new window, zero past its end.
ControlTrajectory shifted_guess(const ControlTrajectory& prev, long shift, const TimeGrid& grid) {
    ControlTrajectory u = ControlTrajectory::zeros(grid, prev.dim());
    const long avail = std::min(grid.nodes(), prev.grid.nodes() - shift);
    if (avail > 0) u.values.topRows(avail) = prev.values.middleRows(shift, avail);
    return u;
}

double segment_energy(const Matrix& u, long rows, double dt) {
    double acc = 0.0;
    for (long k = 0; k < rows; ++k) {
        const double w = (k == 0 || k == rows - 1) ? 0.5 : 1.0;
        acc += w * u.row(k).squaredNorm();
    }
    return rows > 1 ? dt * acc : 0.0;
}

}  // namespace

OrhcRunRecord run_orhc(const OrhcContext& ctx, const OrhcConfig& cfg_in, const Vector& y0_true,
                       const Vector& yhat0, const WindowCallback& on_window) {
    if (!ctx.ops || !ctx.rc || !ctx.layout || !ctx.penalty) throw ConfigError("incomplete ORHC context");
    ctx.observer.validate();
    cfg_in.validate();
    const OrhcConfig cfg = cfg_in.snapped(ctx.dt);
    cfg.validate();
    const OperatorSet& ops = *ctx.ops;
    require_size(y0_true.size(), ops.size(), "plant initial state");
    require_size(yhat0.size(), ops.size(), "observer initial state");

    const double dt = ctx.dt;
    const long rh_steps = std::lround(cfg.T_rh / dt);
    const long tau_steps = std::lround(cfg.tau / dt);
    const long end_steps = std::lround(cfg.T_infty / dt);
    const OcpProblem problem{ctx.ops, ctx.rc, ctx.layout, ctx.penalty, ctx.ocp_solver};
    const CnStepper cache_builder(ops, *ctx.rc, dt, ctx.ocp_solver);

    OrhcRunRecord rec;
    rec.concat_times.push_back(0.0);
    rec.plant_snapshots.push_back(y0_true);
    rec.observer_snapshots.push_back(yhat0);

    Vector y = y0_true, yh = yhat0;
    std::optional<ControlTrajectory> previous_u;
    long previous_shift = 0;
    long n_in = 0;
    int consecutive = 0;
    while (n_in < end_steps) {
        const auto clock0 = std::chrono::steady_clock::now();
        const double t_in = static_cast<double>(n_in) * dt;
        const TimeGrid grid{t_in, dt, rh_steps};
        const double yh_norm = ops.mass_norm(yh);
        const TolerancePair tol = dynamic_tolerance(cfg.tolerances, yh_norm, cfg.T_rh);

        const StepMatrixCache cache = cache_builder.build_cache(grid, ctx.cache_limit_bytes);
        OcpSolveOptions opt;
        opt.max_iter = cfg.max_iter;
        opt.keep_trace = ctx.keep_ocp_trace;
        opt.storage = StoragePolicy::endpoints;
        opt.cache = &cache;
        std::optional<ControlTrajectory> guess;
        if (cfg.warm_start && previous_u) guess = shifted_guess(*previous_u, previous_shift, grid);
        OcpResult res = solve_ocp(problem, t_in, cfg.T_rh, dt, yh, tol, guess, opt);

        if (!std::isfinite(res.cost) || !res.u_star.values.allFinite()) {
            rec.stopped_reason = StopReason::ocp_failure;
            break;
        }

        const long kn = select_concatenation_node(res.y_star.norms, tau_steps, cfg.tn_rule);
        const double n0 = res.y_star.norms.front();
        const double n1 = res.y_star.norms[static_cast<std::size_t>(kn)];
        const double theta = n0 > 0.0 ? n1 / n0 : 0.0;
        const bool squeeze_ok = theta < 1.0;

        const TimeGrid adv_grid{t_in, dt, kn};
        ControlTrajectory segment{adv_grid, res.u_star.values.topRows(kn + 1)};
        IntegratorOptions io;
        io.solver = ctx.solver;
        io.storage = StoragePolicy::endpoints;
        io.cache = &cache;
        CoupledTrajectories tr =
            cn_coupled_plant_observer(ops, *ctx.rc, *ctx.layout, ctx.observer, adv_grid, y, yh, segment, io);

        for (long k = 0; k <= kn; ++k) {
            NormSample s;
            s.t = adv_grid.t(k);
            s.norm_y = tr.plant.norms[static_cast<std::size_t>(k)];
            s.norm_err = tr.error_norms[static_cast<std::size_t>(k)];
            s.norm_u = segment.values.row(k).norm();
            s.is_concat_time = k == 0 || k == kn;
            s.squeeze_ok = squeeze_ok;
            rec.norm_history.push_back(s);
        }
        rec.control_energy += segment_energy(segment.values, kn + 1, dt);

        y = tr.plant.final_state();
        yh = tr.observer.final_state();
        if (!y.allFinite() || !yh.allFinite()) throw SolverError("closed-loop state became non-finite", n_in + kn);

        WindowRecord w;
        w.index = static_cast<int>(rec.windows.size());
        w.t_in = t_in;
        w.t_out = adv_grid.t_end();
        w.theta = theta;
        w.squeeze_ok = squeeze_ok;
        w.iterations = res.iterations;
        w.converged = res.converged;
        w.tol = tol;
        w.cost = res.cost;
        w.initial_cost = res.initial_cost;
        w.yhat_norm = yh_norm;
        w.residual_G_norm_sq = res.residual_G_norm_sq;
        w.control_l2_sq = l2_norm_sq(res.u_star);
        w.linear_iterations = res.linear_iterations;
        w.trace = std::move(res.trace);

        n_in += kn;
        rec.concat_times.push_back(static_cast<double>(n_in) * dt);
        rec.theta.push_back(theta);
        rec.plant_snapshots.push_back(y);
        rec.observer_snapshots.push_back(yh);
        rec.linear_iterations += res.linear_iterations;
        if (squeeze_ok) {
            consecutive = 0;
        } else {
            ++consecutive;
            ++rec.sqz_violations_total;
        }
        rec.consecutive_violations = consecutive;
        rec.max_consecutive_violations = std::max(rec.max_consecutive_violations, consecutive);
        if (cfg.warm_start) {
            previous_u = std::move(res.u_star);
            previous_shift = kn;
        }
        w.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock0).count();
        if (on_window) on_window(w);
        rec.windows.push_back(std::move(w));

        if (consecutive >= cfg.squeeze.consecutive_limit || rec.sqz_violations_total >= cfg.squeeze.total_limit) {
            rec.stopped_reason = StopReason::squeeze_stop;
            break;
        }
    }
    return rec;
}

Vector information_initial_guess(const ActuatorSensorLayout& layout, const Vector& y0_true) {
    return project_onto_sensors(layout, y0_true);
}

StateTrajectory run_free(const OperatorSet& ops, const ReactionConvectionAssembler& rc, const TimeGrid& grid,
                         const Vector& y0, const IntegratorOptions& opt) {
    return cn_forward(ops, rc, grid, y0, LoadFunction{}, opt);
}

}  // namespace orhc
