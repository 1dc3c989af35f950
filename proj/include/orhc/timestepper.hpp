#pragma once

#include "orhc/fem.hpp"
#include "orhc/layout.hpp"
#include "orhc/linear_solver.hpp"
#include "orhc/types.hpp"

#include <functional>
#include <span>
#include <vector>

namespace orhc {

/// Uniform grid t_k = t_start + k dt, k = 0..steps.
struct TimeGrid {
    double t_start = 0.0;
    double dt = 0.0;
    long steps = 0;

    /// Throws ConfigError unless (t_end - t_start) / dt is an integer within 1e-9 relative.
    static TimeGrid make(double t_start, double t_end, double dt);

    double t(long k) const { return t_start + static_cast<double>(k) * dt; }
    double t_mid(long k) const { return t_start + (static_cast<double>(k) + 0.5) * dt; }
    double t_end() const { return t(steps); }
    long nodes() const { return steps + 1; }
};

/// Default step for a refinement level: 4e-4 halved per level.
double default_dt(int refinement_level);

/// discard keeps neither states nor norms.
enum class StoragePolicy { full, endpoints, norms_only, discard };

struct StateTrajectory {
    TimeGrid grid;
    std::vector<double> norms;        ///< mass norm at every node
    std::vector<long> stored_nodes;   ///< ascending node indices with a stored state
    std::vector<Vector> states;

    bool has_state(long k) const;
    const Vector& state(long k) const;
    const Vector& final_state() const { return state(grid.steps); }
};

struct StepMatrixCache;

struct IntegratorOptions {
    LinearSolverOptions solver;
    StoragePolicy storage = StoragePolicy::full;
    const StepMatrixCache* cache = nullptr;  ///< used when it covers the grid
};

/// Step matrices A_k = M + dt/2 L_k of one grid, stored contiguously so that
/// repeated sweeps over a window skip reassembly.
struct StepMatrixCache {
    TimeGrid grid;
    std::size_t nnz = 0;         ///< values per step, in the solver's storage layout
    bool banded = false;         ///< storage layout tag
    std::vector<double> values;  ///< steps x nnz

    /// True when g starts where the cache does, with the same dt and no more steps.
    bool covers(const TimeGrid& g) const {
        return !values.empty() && g.steps <= grid.steps && g.dt == grid.dt && g.t_start == grid.t_start;
    }
    std::span<const double> step(long k) const {
        return {values.data() + static_cast<std::size_t>(k) * nnz, nnz};
    }
    std::size_t bytes() const { return values.size() * sizeof(double); }
};

/// Crank-Nicolson building block in the scaled form
///   (M + dt/2 L_k) y_{k+1} = (M - dt/2 L_k) y_k + dt f_k,   L_k = K_A + C(t_{k+1/2}).
/// prepare() selects the step matrix (assembled, or read from an attached
/// cache); step() then solves, using A_k^T and B_k^T in transpose mode, with an
/// optional symmetric low-rank term added to L_k.
class CnStepper {
public:
    CnStepper(const OperatorSet& ops, const ReactionConvectionAssembler& rc, double dt,
              const LinearSolverOptions& solver = {});

    void prepare(double t_mid, bool transpose = false);
    void prepare(const TimeGrid& grid, long k, bool transpose = false);

    /// Fills a cache for grid; returns an empty cache when it would exceed max_bytes.
    StepMatrixCache build_cache(const TimeGrid& grid, std::size_t max_bytes) const;
    /// The cache must outlive its use; nullptr detaches.
    void attach_cache(const StepMatrixCache* cache) { cache_ = cache; }

    /// y_next solves A y_next = B y + load (load already scaled by dt). On entry
    /// y_next is the initial guess for iterative backends.
    void step(const Vector& y, const Vector& load, Vector& y_next, long step_index);

    /// Same with a low-rank term W:  (A + W) y_next = (B - W) y + load.
    void step(const Vector& y, const Vector& load, Vector& y_next, long step_index, const LowRankTerm& low_rank);

    double dt() const { return dt_; }
    Eigen::Index size() const { return ops_->size(); }
    const OperatorSet& operators() const { return *ops_; }
    const StepSolver& solver() const { return solver_; }

    /// Scaled low-rank term dt/2 * lambda F [V_S]^{-1} F^T of the observer injection.
    LowRankTerm observer_term(const ActuatorSensorLayout& layout, double lambda) const;

private:
    void assemble_into(double t_mid, std::span<double> out) const;

    const OperatorSet* ops_;
    const ReactionConvectionAssembler* rc_;
    double dt_;
    StepSolver solver_;
    std::vector<double> base_;  ///< M + dt/2 K_A, storage layout
    std::vector<double> mass_;
    mutable std::vector<double> rc_vals_;
    std::vector<double> a_vals_;
    std::span<const double> a_cur_;
    bool transpose_ = false;
    const StepMatrixCache* cache_ = nullptr;
    Vector rhs_;
};

/// Per-step load f_k (not yet multiplied by dt).
using StepLoad = std::function<void(long k, double t_mid, Vector& load)>;
/// Load as a function of time, sampled at t_{k+1/2}.
using LoadFunction = std::function<Vector(double t)>;

StateTrajectory cn_forward(const OperatorSet& ops, const ReactionConvectionAssembler& rc, const TimeGrid& grid,
                           const Vector& y0, const LoadFunction& forcing, const IntegratorOptions& opt = {});

/// Called with every node state (forward) or with (k, p_k, p_{k+1}) per interval (backward).
using NodeVisitor = std::function<void(long k, const Vector& y)>;
using IntervalVisitor = std::function<void(long k, const Vector& p_k, const Vector& p_k1)>;

StateTrajectory cn_forward(CnStepper& stepper, const TimeGrid& grid, const Vector& y0, const StepLoad& forcing,
                           StoragePolicy storage, const NodeVisitor& visit = {});

/// Backward sweep  (M + dt/2 L_k)^T p_k = (M - dt/2 L_k)^T p_{k+1} + dt s_k,  p_K = terminal.
/// This is the exact discrete adjoint of cn_forward: with psi_k = (p_k + p_{k+1})/2,
///   <y_K, p_K>_M - <y_0, p_0>_M = sum_k dt (f_k . psi_k - s_k . (y_k + y_{k+1})/2).
StateTrajectory cn_backward_adjoint(const OperatorSet& ops, const ReactionConvectionAssembler& rc,
                                    const TimeGrid& grid, const Vector& terminal, const LoadFunction& source,
                                    const IntegratorOptions& opt = {});

StateTrajectory cn_backward_adjoint(CnStepper& stepper, const TimeGrid& grid, const Vector& terminal,
                                    const StepLoad& source, StoragePolicy storage,
                                    const IntervalVisitor& visit = {});

/// Node-wise control samples, one row per grid node.
struct ControlTrajectory {
    TimeGrid grid;
    Matrix values;  ///< nodes x M

    static ControlTrajectory zeros(const TimeGrid& grid, int m);
    Vector at(long k) const { return values.row(k).transpose(); }
    int dim() const { return static_cast<int>(values.cols()); }
};

struct CoupledTrajectories {
    StateTrajectory plant;
    StateTrajectory observer;
    std::vector<double> error_norms;  ///< ||yhat - y||_M per node
};

/// Plant y' + (A + A_rc) y = U u and observer yhat' + (A + A_rc) yhat = U u
/// + J(Z yhat - Z y), advanced together. The observer reads the plant only
/// through the sensor output. Each step solves the block lower-triangular
/// 2N system by forward substitution.
CoupledTrajectories cn_coupled_plant_observer(const OperatorSet& ops, const ReactionConvectionAssembler& rc,
                                              const ActuatorSensorLayout& layout, const ObserverConfig& obs,
                                              const TimeGrid& grid, const Vector& y0, const Vector& yhat0,
                                              const ControlTrajectory& u, const IntegratorOptions& opt = {});

/// Standalone error equation z' + (A + A_rc) z = -lambda P z.
StateTrajectory cn_observer_error(const OperatorSet& ops, const ReactionConvectionAssembler& rc,
                                  const ActuatorSensorLayout& layout, const ObserverConfig& obs,
                                  const TimeGrid& grid, const Vector& z0, const IntegratorOptions& opt = {});

}  // namespace orhc
