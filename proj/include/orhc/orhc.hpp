#pragma once

#include "orhc/ocp.hpp"

#include <functional>
#include <string>
#include <vector>

namespace orhc {

enum class ConcatRule { max_argmin, min_argmin, fixed_tau };

std::string to_string(ConcatRule r);
ConcatRule concat_rule_from_string(const std::string& s);

struct SqueezeStop {
    int consecutive_limit = 10;
    int total_limit = 50;
};

struct OrhcConfig {
    double T_rh = 2.0;
    double tau = 0.1;
    double T_infty = 4.0;
    ConcatRule tn_rule = ConcatRule::max_argmin;
    SqueezeStop squeeze;
    TolerancePolicy tolerances;
    int max_iter = 2000;
    bool warm_start = false;

    void validate() const;
    /// Rounds T_rh, tau and T_infty to the nearest positive multiples of dt.
    OrhcConfig snapped(double dt) const;
};

/// Picks t_n among the nodes of [t_in + tau, t_in + T_rh] minimizing the norm
/// of the predicted state: the latest minimizer (max_argmin) or the earliest
/// (min_argmin). fixed_tau always takes t_in + tau. Returns the node index
/// relative to the trajectory start.
long select_concatenation_node(const std::vector<double>& norms, long tau_steps, ConcatRule rule);
double select_concatenation_time(const StateTrajectory& y_star, double t_in, double tau, double T_rh,
                                 ConcatRule rule);

enum class StopReason { reached_T_infty, squeeze_stop, ocp_failure };
std::string to_string(StopReason r);

struct NormSample {
    double t = 0.0;
    double norm_y = 0.0;
    double norm_err = 0.0;
    double norm_u = 0.0;  ///< Euclidean norm of the control applied at t
    bool is_concat_time = false;
    bool squeeze_ok = true;
};

struct WindowRecord {
    int index = 0;
    double t_in = 0.0;
    double t_out = 0.0;
    double theta = 0.0;
    bool squeeze_ok = true;
    int iterations = 0;
    bool converged = false;
    TolerancePair tol;
    double cost = 0.0;
    double initial_cost = 0.0;
    double yhat_norm = 0.0;
    double residual_G_norm_sq = 0.0;
    double control_l2_sq = 0.0;  ///< of the optimal control on the whole prediction window
    long linear_iterations = 0;
    double seconds = 0.0;
    std::vector<OcpIterate> trace;  ///< filled when OrhcContext::keep_ocp_trace is set
};

struct OrhcRunRecord {
    std::vector<double> concat_times;  ///< t_0 = 0, t_1, ...
    std::vector<double> theta;         ///< one per window
    int sqz_violations_total = 0;
    int consecutive_violations = 0;
    int max_consecutive_violations = 0;
    std::vector<NormSample> norm_history;
    double control_energy = 0.0;  ///< squared L2 norm of the applied control
    StopReason stopped_reason = StopReason::reached_T_infty;
    std::vector<WindowRecord> windows;
    std::vector<Vector> plant_snapshots;     ///< at each concatenation time
    std::vector<Vector> observer_snapshots;  ///< at each concatenation time
    long linear_iterations = 0;
};

struct OrhcContext {
    const OperatorSet* ops = nullptr;
    const ReactionConvectionAssembler* rc = nullptr;
    const ActuatorSensorLayout* layout = nullptr;
    const PenaltyOperator* penalty = nullptr;
    ObserverConfig observer;
    LinearSolverOptions solver;                           ///< plant and observer advance
    LinearSolverOptions ocp_solver{LinearSolverKind::bicgstab, 1e-11, 1000, true};
    double dt = 4e-4;
    std::size_t cache_limit_bytes = std::size_t{1} << 30;
    bool keep_ocp_trace = false;
};

/// Called after every window.
using WindowCallback = std::function<void(const WindowRecord&)>;

/// Receding horizon loop with a Luenberger observer. The controller sees only the
/// observer state; the true state enters solely through the coupled
/// plant-observer integrator, which feeds the observer the sensor output.
OrhcRunRecord run_orhc(const OrhcContext& ctx, const OrhcConfig& cfg, const Vector& y0_true, const Vector& yhat0,
                       const WindowCallback& on_window = {});

/// yhat_0 = P_{W_S} y_0, built from the measured output at t = 0.
Vector information_initial_guess(const ActuatorSensorLayout& layout, const Vector& y0_true);

/// Uncontrolled dynamics.
StateTrajectory run_free(const OperatorSet& ops, const ReactionConvectionAssembler& rc, const TimeGrid& grid,
                         const Vector& y0, const IntegratorOptions& opt = {});

}  // namespace orhc
