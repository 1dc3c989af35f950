#pragma once

#include "orhc/fem.hpp"
#include "orhc/layout.hpp"
#include "orhc/spectral.hpp"
#include "orhc/timestepper.hpp"

#include <optional>
#include <vector>

namespace orhc {

struct TolerancePair {
    double tol1 = 0.0;  ///< bound on max(||du||^2, ||dG||^2)
    double tol2 = 0.0;  ///< bound on ||G||^2
};

struct TolerancePolicy {
    TolerancePair low{1e-28, 1e-14};
    TolerancePair up{1e-4, 1e-2};

    void validate() const;
};

/// Tol = 1e-2 ||yhat||^2 / (T_rh + 1), clamped componentwise into [low, up].
TolerancePair dynamic_tolerance(const TolerancePolicy& policy, double yhat_norm, double T_rh);

/// Inner product of node-sampled controls under the trapezoidal rule.
double l2_inner(const ControlTrajectory& a, const ControlTrajectory& b);
double l2_norm_sq(const ControlTrajectory& a);

/// Alternating Barzilai-Borwein stepsize from s = u_k - u_{k-1}, r = G_k - G_{k-1}.
/// Odd iterations use <s,s>/<s,r>, even ones <s,r>/<r,r>; the result is
/// clipped to [1e-8, 1e8]. A non-positive or non-finite <s,r> returns previous.
double abb_step(double ss, double sr, double rr, int iteration, double previous);
double abb_step(const ControlTrajectory& u_prev, const ControlTrajectory& u_cur, const ControlTrajectory& g_prev,
                const ControlTrajectory& g_cur, int iteration, double previous);

/// The finite-horizon problem data shared by all windows.
struct OcpProblem {
    const OperatorSet* ops = nullptr;
    const ReactionConvectionAssembler* rc = nullptr;
    const ActuatorSensorLayout* layout = nullptr;
    const PenaltyOperator* penalty = nullptr;
    LinearSolverOptions solver;
};

/// Discrete cost
///   J = sum_k dt/2 ||Q (y_k + y_{k+1})/2||^2 + 1/2 trapezoid(|u|^2),
/// whose exact gradient is computed by gradient(). y must store every state.
double evaluate_cost(const PenaltyOperator& q, const StateTrajectory& y, const ControlTrajectory& u);

struct GradientResult {
    ControlTrajectory G;
    StateTrajectory y;
    StateTrajectory p;
    double cost = 0.0;
};

/// Forward state from y_in under u, adjoint with source -Q^*Q y and p = 0 at the
/// end, and G = u - (U_M)^* p in the trapezoidal L2 inner product.
GradientResult gradient(const OcpProblem& problem, const TimeGrid& grid, const Vector& y_in,
                        const ControlTrajectory& u);

struct OcpIterate {
    int iteration = 0;
    double g_norm_sq = 0.0;
    double du_sq = 0.0;
    double dg_sq = 0.0;
    double stepsize = 0.0;  ///< stepsize used to reach this iterate
    double cost = 0.0;
};

struct OcpResult {
    ControlTrajectory u_star;
    StateTrajectory y_star;  ///< norms at every node, states at the endpoints
    double cost = 0.0;
    double initial_cost = 0.0;
    int iterations = 0;
    TolerancePair tol_used;
    double residual_G_norm_sq = 0.0;
    double last_du_sq = 0.0;
    double last_dg_sq = 0.0;
    bool converged = false;
    std::vector<OcpIterate> trace;
    long linear_iterations = 0;
};

struct OcpSolveOptions {
    int max_iter = 2000;
    bool keep_trace = true;
    StoragePolicy storage = StoragePolicy::endpoints;
    /// Step matrices of the window; built internally when null and the window
    /// fits in cache_limit_bytes.
    const StepMatrixCache* cache = nullptr;
    std::size_t cache_limit_bytes = std::size_t{1} << 30;
};

/// Adjoint-gradient iteration u <- u - s G with aBB stepsizes, stopped when
/// max(||du||^2, ||dG||^2) <= tol1 and ||G||^2 <= tol2 on consecutive iterates.
/// The first stepsize is 1 / max(1, ||G_0||).
OcpResult solve_ocp(const OcpProblem& problem, double t_in, double T_rh, double dt, const Vector& y_in,
                    const TolerancePair& tol, const std::optional<ControlTrajectory>& u_init = std::nullopt,
                    const OcpSolveOptions& opt = {});

}  // namespace orhc
