#include "orhc/ocp.hpp"

#include <algorithm>
#include <cmath>

namespace orhc {

void TolerancePolicy::validate() const {
    auto ok = [](double v) { return v > 0.0 && std::isfinite(v); };
    if (!ok(low.tol1) || !ok(low.tol2) || !ok(up.tol1) || !ok(up.tol2)) {
        throw ConfigError("tolerances must be positive and finite");
    }
    if (low.tol1 > up.tol1 || low.tol2 > up.tol2) {
        throw ConfigError("tol_low must not exceed tol_up componentwise");
    }
}

TolerancePair dynamic_tolerance(const TolerancePolicy& policy, double yhat_norm, double T_rh) {
    const double tol = 1e-2 * yhat_norm * yhat_norm / (T_rh + 1.0);
    return {std::max(policy.low.tol1, std::min(policy.up.tol1, tol)),
            std::max(policy.low.tol2, std::min(policy.up.tol2, tol))};
}

namespace {

double trapezoid_inner(const Matrix& a, const Matrix& b, double dt) {
    const Eigen::Index n = a.rows();
    if (n == 0) return 0.0;
    double acc = 0.0;
    for (Eigen::Index k = 0; k < n; ++k) {
        const double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
        acc += w * a.row(k).dot(b.row(k));
    }
    return n > 1 ? dt * acc : 0.0;
}

}  // namespace

double l2_inner(const ControlTrajectory& a, const ControlTrajectory& b) {
    require_size(a.values.rows(), b.values.rows(), "l2_inner");
    require_size(a.values.cols(), b.values.cols(), "l2_inner");
    return trapezoid_inner(a.values, b.values, a.grid.dt);
}

double l2_norm_sq(const ControlTrajectory& a) { return l2_inner(a, a); }

double abb_step(double ss, double sr, double rr, int iteration, double previous) {
    if (!(sr > 0.0) || !std::isfinite(sr)) return previous;
    const double s = (iteration % 2 == 1) ? ss / sr : sr / rr;
    if (!std::isfinite(s)) return previous;
    return std::clamp(s, 1e-8, 1e8);
}

double abb_step(const ControlTrajectory& u_prev, const ControlTrajectory& u_cur, const ControlTrajectory& g_prev,
                const ControlTrajectory& g_cur, int iteration, double previous) {
    const Matrix s = u_cur.values - u_prev.values;
    const Matrix r = g_cur.values - g_prev.values;
    const double dt = u_cur.grid.dt;
    return abb_step(trapezoid_inner(s, s, dt), trapezoid_inner(s, r, dt), trapezoid_inner(r, r, dt), iteration,
                    previous);
}

double evaluate_cost(const PenaltyOperator& q, const StateTrajectory& y, const ControlTrajectory& u) {
    require_size(u.values.rows(), y.grid.nodes(), "evaluate_cost");
    const double dt = y.grid.dt;
    double state = 0.0;
    Vector c_prev = q.apply(y.state(0));
    for (long k = 0; k < y.grid.steps; ++k) {
        const Vector c_next = q.apply(y.state(k + 1));
        state += 0.5 * dt * q.norm_sq(0.5 * (c_prev + c_next));
        c_prev = c_next;
    }
    return state + 0.5 * l2_norm_sq(u);
}

namespace {

/// Reusable forward/adjoint machinery for one window.
class GradientEngine {
public:
    GradientEngine(const OcpProblem& pb, const TimeGrid& grid, const StepMatrixCache* cache,
                   std::size_t cache_limit)
        : pb_(checked(pb)), grid_(grid), stepper_(*pb.ops, *pb.rc, grid.dt, pb.solver) {
        coords_.resize(grid.nodes(), pb.penalty->coordinate_size());
        g_.resize(grid.steps, pb.layout->num_actuators());
        if (cache && cache->covers(grid)) {
            stepper_.attach_cache(cache);
        } else if (cache_limit > 0) {
            own_cache_ = stepper_.build_cache(grid, cache_limit);
            stepper_.attach_cache(&own_cache_);
        }
    }

    struct Evaluation {
        StateTrajectory y;
        StateTrajectory p;
        double cost = 0.0;
    };

    /// Runs the forward and adjoint sweeps and writes G.
    Evaluation evaluate(const Vector& y_in, const ControlTrajectory& u, ControlTrajectory& G,
                        StoragePolicy y_storage, StoragePolicy p_storage) {
        const PenaltyOperator& q = *pb_.penalty;
        const Matrix& fa = pb_.layout->actuator_loads;
        Evaluation ev;
        StepLoad forcing = [&](long k, double, Vector& load) {
            load.noalias() = fa * (0.5 * (u.values.row(k) + u.values.row(k + 1)).transpose());
        };
        ev.y = cn_forward(stepper_, grid_, y_in, forcing, y_storage,
                          [&](long k, const Vector& y) { coords_.row(k) = q.apply(y).transpose(); });

        double state_cost = 0.0;
        for (long k = 0; k < grid_.steps; ++k) {
            const Vector mid = 0.5 * (coords_.row(k) + coords_.row(k + 1)).transpose();
            state_cost += 0.5 * grid_.dt * q.norm_sq(mid);
        }
        ev.cost = state_cost + 0.5 * l2_norm_sq(u);

        StepLoad source = [&](long k, double, Vector& load) {
            mid_ = 0.5 * (coords_.row(k) + coords_.row(k + 1)).transpose();
            load = -q.load_from(mid_);
        };
        const Vector zero = Vector::Zero(y_in.size());
        ev.p = cn_backward_adjoint(stepper_, grid_, zero, source, p_storage,
                                   [&](long k, const Vector& pk, const Vector& pk1) {
                                       g_.row(k) = (fa.transpose() * (0.5 * (pk + pk1))).transpose();
                                   });

        G.grid = grid_;
        G.values.resize(grid_.nodes(), u.values.cols());
        const long K = grid_.steps;
        if (K == 0) {
            G.values = u.values;
            return ev;
        }
        G.values.row(0) = u.values.row(0) - g_.row(0);
        for (long j = 1; j < K; ++j) G.values.row(j) = u.values.row(j) - 0.5 * (g_.row(j - 1) + g_.row(j));
        G.values.row(K) = u.values.row(K) - g_.row(K - 1);
        return ev;
    }

    long linear_iterations() const { return stepper_.solver().total_iterations(); }

private:
    static const OcpProblem& checked(const OcpProblem& pb) {
        if (!pb.ops || !pb.rc || !pb.layout || !pb.penalty) throw ConfigError("incomplete OCP problem");
        return pb;
    }

    const OcpProblem& pb_;
    TimeGrid grid_;
    CnStepper stepper_;
    StepMatrixCache own_cache_;
    Matrix coords_;
    Matrix g_;
    Vector mid_;
};

}  // namespace

GradientResult gradient(const OcpProblem& problem, const TimeGrid& grid, const Vector& y_in,
                        const ControlTrajectory& u) {
    require_size(u.values.rows(), grid.nodes(), "gradient control");
    require_size(u.values.cols(), problem.layout->num_actuators(), "gradient control");
    GradientEngine engine(problem, grid, nullptr, 0);
    GradientResult out;
    auto ev = engine.evaluate(y_in, u, out.G, StoragePolicy::full, StoragePolicy::full);
    out.y = std::move(ev.y);
    out.p = std::move(ev.p);
    out.cost = ev.cost;
    return out;
}

OcpResult solve_ocp(const OcpProblem& problem, double t_in, double T_rh, double dt, const Vector& y_in,
                    const TolerancePair& tol, const std::optional<ControlTrajectory>& u_init,
                    const OcpSolveOptions& opt) {
    if (!(T_rh > 0.0)) throw ConfigError("prediction horizon must be positive");
    if (!(tol.tol1 > 0.0) || !(tol.tol2 > 0.0)) throw ConfigError("OCP tolerances must be positive");
    const TimeGrid grid = TimeGrid::make(t_in, t_in + T_rh, dt);
    const int m = problem.layout->num_actuators();

    ControlTrajectory u = u_init ? *u_init : ControlTrajectory::zeros(grid, m);
    require_size(u.values.rows(), grid.nodes(), "initial control");
    require_size(u.values.cols(), m, "initial control");
    u.grid = grid;

    GradientEngine engine(problem, grid, opt.cache, opt.cache_limit_bytes);
    ControlTrajectory G, G_new, u_new;
    auto ev = engine.evaluate(y_in, u, G, opt.storage, StoragePolicy::discard);

    OcpResult res;
    res.tol_used = tol;
    res.initial_cost = ev.cost;
    double g_sq = l2_norm_sq(G);
    double step = 1.0 / std::max(1.0, std::sqrt(g_sq));
    if (opt.keep_trace) res.trace.push_back({0, g_sq, 0.0, 0.0, 0.0, ev.cost});

    for (int it = 1; it <= opt.max_iter; ++it) {
        u_new.grid = grid;
        u_new.values = u.values - step * G.values;
        auto ev_new = engine.evaluate(y_in, u_new, G_new, opt.storage, StoragePolicy::discard);

        const Matrix s = u_new.values - u.values;
        const Matrix r = G_new.values - G.values;
        const double du = trapezoid_inner(s, s, dt);
        const double dg = trapezoid_inner(r, r, dt);
        const double sr = trapezoid_inner(s, r, dt);
        g_sq = l2_norm_sq(G_new);
        const double used = step;

        std::swap(u, u_new);
        std::swap(G, G_new);
        ev = std::move(ev_new);
        res.iterations = it;
        res.last_du_sq = du;
        res.last_dg_sq = dg;
        if (opt.keep_trace) res.trace.push_back({it, g_sq, du, dg, used, ev.cost});
        if (!std::isfinite(g_sq) || !std::isfinite(ev.cost)) break;

        if (std::max(du, dg) <= tol.tol1 && g_sq <= tol.tol2) {
            res.converged = true;
            break;
        }
        step = abb_step(du, sr, dg, it, step);
    }

    res.u_star = std::move(u);
    res.y_star = std::move(ev.y);
    res.cost = ev.cost;
    res.residual_G_norm_sq = g_sq;
    res.linear_iterations = engine.linear_iterations();
    return res;
}

}  // namespace orhc
