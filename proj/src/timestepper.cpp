#include "orhc/timestepper.hpp"

#include <algorithm>
#include <cmath>

namespace orhc {

TimeGrid TimeGrid::make(double t_start, double t_end, double dt) {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("time step must be positive");
    const double span = t_end - t_start;
    if (!(span >= 0.0)) throw ConfigError("time grid end precedes its start");
    const double ratio = span / dt;
    const long steps = std::lround(ratio);
    if (std::abs(ratio - static_cast<double>(steps)) > 1e-9 * std::max(1.0, ratio)) {
        throw ConfigError("time interval is not an integer multiple of dt");
    }
    return TimeGrid{t_start, dt, steps};
}

double default_dt(int refinement_level) { return 4e-4 / std::pow(2.0, refinement_level); }

bool StateTrajectory::has_state(long k) const {
    return std::binary_search(stored_nodes.begin(), stored_nodes.end(), k);
}

const Vector& StateTrajectory::state(long k) const {
    const auto it = std::lower_bound(stored_nodes.begin(), stored_nodes.end(), k);
    if (it == stored_nodes.end() || *it != k) {
        throw DimensionError("state at node " + std::to_string(k) + " was not stored");
    }
    return states[static_cast<std::size_t>(it - stored_nodes.begin())];
}

namespace {

bool keep_state(StoragePolicy p, long k, long steps) {
    switch (p) {
        case StoragePolicy::full: return true;
        case StoragePolicy::endpoints: return k == 0 || k == steps;
        case StoragePolicy::norms_only:
        case StoragePolicy::discard: return false;
    }
    return false;
}

void record(StateTrajectory& tr, StoragePolicy p, long k, const Vector& y, const OperatorSet& ops) {
    if (p == StoragePolicy::discard) return;
    tr.norms.push_back(ops.mass_norm(y));
    if (keep_state(p, k, tr.grid.steps)) {
        tr.stored_nodes.push_back(k);
        tr.states.push_back(y);
    }
}

// Second-order extrapolation as the Krylov initial guess.
void extrapolate(const Vector& cur, const Vector& prev, bool have_prev, Vector& guess) {
    if (have_prev) {
        guess = 2.0 * cur - prev;
    } else {
        guess = cur;
    }
}

}  // namespace

CnStepper::CnStepper(const OperatorSet& ops, const ReactionConvectionAssembler& rc, double dt,
                     const LinearSolverOptions& solver)
    : ops_(&ops), rc_(&rc), dt_(dt), solver_(ops.mass, solver) {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    if (rc.pattern().nonZeros() != ops.mass.nonZeros() || ops.stiffness.nonZeros() != ops.mass.nonZeros()) {
        throw DimensionError("reaction-convection pattern does not match the operator set");
    }
    const auto nnz = static_cast<std::size_t>(ops.mass.nonZeros());
    std::vector<double> base(nnz);
    const double* m = ops.mass.valuePtr();
    const double* ka = ops.stiffness.valuePtr();
    for (std::size_t k = 0; k < nnz; ++k) base[k] = m[k] + 0.5 * dt * ka[k];
    const std::size_t storage = solver_.storage_size();
    base_.resize(storage);
    mass_.resize(storage);
    solver_.to_storage(base, base_);
    solver_.to_storage(std::span<const double>(m, nnz), mass_);
    rc_vals_.resize(nnz);
    a_vals_.assign(storage, 0.0);
    rhs_.resize(ops.size());
}

void CnStepper::assemble_into(double t_mid, std::span<double> out) const {
    rc_->assemble_values(t_mid, rc_vals_);
    const double h = 0.5 * dt_;
    const std::vector<int>& pos = solver_.slot_positions();
    // Storage entries outside the pattern are never written and stay zero.
    for (std::size_t k = 0; k < rc_vals_.size(); ++k) {
        const auto i = static_cast<std::size_t>(pos[k]);
        out[i] = base_[i] + h * rc_vals_[k];
    }
}

void CnStepper::prepare(double t_mid, bool transpose) {
    assemble_into(t_mid, a_vals_);
    a_cur_ = a_vals_;
    transpose_ = transpose;
}

void CnStepper::prepare(const TimeGrid& grid, long k, bool transpose) {
    if (cache_ && cache_->covers(grid) && cache_->nnz == base_.size() && cache_->banded == solver_.banded()) {
        a_cur_ = cache_->step(k);
        transpose_ = transpose;
    } else {
        prepare(grid.t_mid(k), transpose);
    }
}

StepMatrixCache CnStepper::build_cache(const TimeGrid& grid, std::size_t max_bytes) const {
    StepMatrixCache cache;
    cache.grid = grid;
    cache.nnz = base_.size();
    cache.banded = solver_.banded();
    const std::size_t total = static_cast<std::size_t>(grid.steps) * cache.nnz;
    if (total == 0 || total * sizeof(double) > max_bytes) return cache;
    cache.values.assign(total, 0.0);
    for (long k = 0; k < grid.steps; ++k) {
        assemble_into(grid.t_mid(k), {cache.values.data() + static_cast<std::size_t>(k) * cache.nnz, cache.nnz});
    }
    return cache;
}

// B = 2M - A, so the right-hand side needs a single pass over the pattern.
void CnStepper::step(const Vector& y, const Vector& load, Vector& y_next, long step_index) {
    solver_.multiply_combination(mass_, 2.0, a_cur_, -1.0,
                                 y, rhs_, transpose_);
    rhs_ += load;
    solver_.solve(a_cur_, nullptr, rhs_, y_next, step_index, transpose_);
}

void CnStepper::step(const Vector& y, const Vector& load, Vector& y_next, long step_index,
                     const LowRankTerm& low_rank) {
    solver_.multiply_combination(mass_, 2.0, a_cur_, -1.0,
                                 y, rhs_, transpose_);
    low_rank.apply_add(y, -1.0, rhs_);
    rhs_ += load;
    solver_.solve(a_cur_, &low_rank, rhs_, y_next, step_index, transpose_);
}

LowRankTerm CnStepper::observer_term(const ActuatorSensorLayout& layout, double lambda) const {
    const Matrix vinv = layout.gram_factor.solve(Matrix::Identity(layout.num_sensors(), layout.num_sensors()));
    return LowRankTerm(layout.sensor_loads, 0.5 * dt_ * lambda * vinv);
}

StateTrajectory cn_forward(CnStepper& stepper, const TimeGrid& grid, const Vector& y0, const StepLoad& forcing,
                           StoragePolicy storage, const NodeVisitor& visit) {
    require_size(y0.size(), stepper.size(), "cn_forward initial state");
    if (std::abs(grid.dt - stepper.dt()) > 1e-15 * grid.dt) throw ConfigError("grid and stepper dt differ");
    StateTrajectory tr;
    tr.grid = grid;
    if (storage != StoragePolicy::discard) tr.norms.reserve(static_cast<std::size_t>(grid.nodes()));
    const OperatorSet& ops = stepper.operators();
    Vector y = y0, prev, next, load = Vector::Zero(y0.size());
    record(tr, storage, 0, y, ops);
    if (visit) visit(0, y);
    for (long k = 0; k < grid.steps; ++k) {
        const double tm = grid.t_mid(k);
        stepper.prepare(grid, k);
        if (forcing) {
            forcing(k, tm, load);
            load *= grid.dt;
        }
        extrapolate(y, prev, k > 0, next);
        stepper.step(y, load, next, k);
        prev.swap(y);
        y.swap(next);
        record(tr, storage, k + 1, y, ops);
        if (visit) visit(k + 1, y);
    }
    return tr;
}

StateTrajectory cn_forward(const OperatorSet& ops, const ReactionConvectionAssembler& rc, const TimeGrid& grid,
                           const Vector& y0, const LoadFunction& forcing, const IntegratorOptions& opt) {
    CnStepper stepper(ops, rc, grid.dt, opt.solver);
    stepper.attach_cache(opt.cache);
    StepLoad load;
    if (forcing) {
        load = [&](long, double t, Vector& f) {
            f = forcing(t);
            require_size(f.size(), ops.size(), "forcing load");
        };
    }
    return cn_forward(stepper, grid, y0, load, opt.storage);
}

StateTrajectory cn_backward_adjoint(CnStepper& stepper, const TimeGrid& grid, const Vector& terminal,
                                    const StepLoad& source, StoragePolicy storage,
                                    const IntervalVisitor& visit) {
    require_size(terminal.size(), stepper.size(), "adjoint terminal state");
    const OperatorSet& ops = stepper.operators();
    const long K = grid.steps;
    const bool with_norms = storage != StoragePolicy::discard;
    std::vector<double> norms(with_norms ? static_cast<std::size_t>(K + 1) : 0);
    std::vector<std::pair<long, Vector>> kept;
    Vector p = terminal, prev, next, load = Vector::Zero(terminal.size());
    if (with_norms) norms[static_cast<std::size_t>(K)] = ops.mass_norm(p);
    if (keep_state(storage, K, K)) kept.emplace_back(K, p);
    for (long k = K - 1; k >= 0; --k) {
        const double tm = grid.t_mid(k);
        stepper.prepare(grid, k, true);
        if (source) {
            source(k, tm, load);
            load *= grid.dt;
        }
        extrapolate(p, prev, k < K - 1, next);
        stepper.step(p, load, next, k);
        if (visit) visit(k, next, p);
        prev.swap(p);
        p.swap(next);
        if (with_norms) norms[static_cast<std::size_t>(k)] = ops.mass_norm(p);
        if (keep_state(storage, k, K)) kept.emplace_back(k, p);
    }
    StateTrajectory tr;
    tr.grid = grid;
    tr.norms = std::move(norms);
    std::reverse(kept.begin(), kept.end());
    for (auto& [k, v] : kept) {
        tr.stored_nodes.push_back(k);
        tr.states.push_back(std::move(v));
    }
    return tr;
}

StateTrajectory cn_backward_adjoint(const OperatorSet& ops, const ReactionConvectionAssembler& rc,
                                    const TimeGrid& grid, const Vector& terminal, const LoadFunction& source,
                                    const IntegratorOptions& opt) {
    CnStepper stepper(ops, rc, grid.dt, opt.solver);
    stepper.attach_cache(opt.cache);
    StepLoad load;
    if (source) {
        load = [&](long, double t, Vector& f) {
            f = source(t);
            require_size(f.size(), ops.size(), "adjoint source");
        };
    }
    return cn_backward_adjoint(stepper, grid, terminal, load, opt.storage);
}

ControlTrajectory ControlTrajectory::zeros(const TimeGrid& grid, int m) {
    return ControlTrajectory{grid, Matrix::Zero(grid.nodes(), m)};
}

CoupledTrajectories cn_coupled_plant_observer(const OperatorSet& ops, const ReactionConvectionAssembler& rc,
                                              const ActuatorSensorLayout& layout, const ObserverConfig& obs,
                                              const TimeGrid& grid, const Vector& y0, const Vector& yhat0,
                                              const ControlTrajectory& u, const IntegratorOptions& opt) {
    require_size(y0.size(), ops.size(), "plant initial state");
    require_size(yhat0.size(), ops.size(), "observer initial state");
    require_size(u.values.rows(), grid.nodes(), "control trajectory");
    require_size(u.values.cols(), layout.num_actuators(), "control trajectory");

    CnStepper stepper(ops, rc, grid.dt, opt.solver);
    stepper.attach_cache(opt.cache);
    const LowRankTerm inj = stepper.observer_term(layout, obs.lambda);

    CoupledTrajectories out;
    out.plant.grid = grid;
    out.observer.grid = grid;
    Vector y = y0, yh = yhat0, y_prev, yh_prev, y_next, yh_next;
    Vector w = measure_output(layout, y), w_next;
    Vector load(ops.size()), obs_load(ops.size());
    record(out.plant, opt.storage, 0, y, ops);
    record(out.observer, opt.storage, 0, yh, ops);
    out.error_norms.push_back(ops.mass_norm(yh - y));
    for (long k = 0; k < grid.steps; ++k) {
        stepper.prepare(grid, k);
        load.noalias() = grid.dt * (layout.actuator_loads * (0.5 * (u.values.row(k) + u.values.row(k + 1)).transpose()));

        extrapolate(y, y_prev, k > 0, y_next);
        stepper.step(y, load, y_next, k);
        w_next = measure_output(layout, y_next);

        obs_load = load;
        inj.apply_add_reduced(w + w_next, 1.0, obs_load);
        extrapolate(yh, yh_prev, k > 0, yh_next);
        stepper.step(yh, obs_load, yh_next, k, inj);

        y_prev.swap(y);
        y.swap(y_next);
        yh_prev.swap(yh);
        yh.swap(yh_next);
        w.swap(w_next);
        record(out.plant, opt.storage, k + 1, y, ops);
        record(out.observer, opt.storage, k + 1, yh, ops);
        out.error_norms.push_back(ops.mass_norm(yh - y));
    }
    return out;
}

StateTrajectory cn_observer_error(const OperatorSet& ops, const ReactionConvectionAssembler& rc,
                                  const ActuatorSensorLayout& layout, const ObserverConfig& obs,
                                  const TimeGrid& grid, const Vector& z0, const IntegratorOptions& opt) {
    require_size(z0.size(), ops.size(), "error initial state");
    CnStepper stepper(ops, rc, grid.dt, opt.solver);
    stepper.attach_cache(opt.cache);
    const LowRankTerm inj = stepper.observer_term(layout, obs.lambda);
    StateTrajectory tr;
    tr.grid = grid;
    Vector z = z0, prev, next;
    const Vector zero = Vector::Zero(ops.size());
    record(tr, opt.storage, 0, z, ops);
    for (long k = 0; k < grid.steps; ++k) {
        stepper.prepare(grid, k);
        extrapolate(z, prev, k > 0, next);
        stepper.step(z, zero, next, k, inj);
        prev.swap(z);
        z.swap(next);
        record(tr, opt.storage, k + 1, z, ops);
    }
    return tr;
}

}  // namespace orhc
