#include "orhc/layout.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace orhc {

void ObserverConfig::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw ConfigError("observer gain lambda must be positive, got " + std::to_string(lambda));
    }
}

namespace {

double overlap(const Rect& a, const Rect& b) {
    const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

Vector nodal_indicator(const Mesh& mesh, const OperatorSet& ops, const Rect& r) {
    const double eps = 1e-9 * mesh.h();
    Vector v = Vector::Zero(ops.size());
    for (Eigen::Index d = 0; d < ops.size(); ++d) {
        const Point2 p = mesh.vertices[static_cast<std::size_t>(ops.dof_to_vertex[static_cast<std::size_t>(d)])];
        if (r.contains_closed(p, eps)) v[d] = 1.0;
    }
    return v;
}

}  // namespace

ActuatorSensorLayout build_layout(int grid_m, double shrink_ratio, const Mesh& mesh,
                                  const OperatorSet& ops) {
    if (grid_m < 1) {
        throw ConfigError("grid_m must be a positive integer");
    }
    if (!(shrink_ratio > 0.0 && shrink_ratio <= 1.0)) {
        throw ConfigError("shrink_ratio must lie in (0, 1]");
    }
    ActuatorSensorLayout L;
    L.grid_m = grid_m;
    L.shrink_ratio = shrink_ratio;
    const int cells = 2 * grid_m;
    const double cell = 1.0 / cells;
    const double half = 0.5 * shrink_ratio * cell;
    for (int j = 0; j < cells; ++j) {
        for (int i = 0; i < cells; ++i) {
            const double cx = (i + 0.5) * cell;
            const double cy = (j + 0.5) * cell;
            const Rect r{cx - half, cx + half, cy - half, cy + half};
            mesh.check_aligned(r);
            ((i + j) % 2 == 0 ? L.actuator_rects : L.sensor_rects).push_back(r);
        }
    }

    const Eigen::Index n = ops.size();
    L.actuator_loads.resize(n, L.num_actuators());
    for (int j = 0; j < L.num_actuators(); ++j) {
        L.actuator_loads.col(j) = indicator_load(mesh, ops, L.actuator_rects[static_cast<std::size_t>(j)]);
    }
    L.sensor_loads.resize(n, L.num_sensors());
    L.sensor_indicators.resize(n, L.num_sensors());
    for (int j = 0; j < L.num_sensors(); ++j) {
        const Rect& r = L.sensor_rects[static_cast<std::size_t>(j)];
        L.sensor_loads.col(j) = indicator_load(mesh, ops, r);
        L.sensor_indicators.col(j) = nodal_indicator(mesh, ops, r);
    }
    L.gram_sensors.resize(L.num_sensors(), L.num_sensors());
    for (int i = 0; i < L.num_sensors(); ++i) {
        for (int j = 0; j < L.num_sensors(); ++j) {
            L.gram_sensors(i, j) = overlap(L.sensor_rects[static_cast<std::size_t>(i)],
                                           L.sensor_rects[static_cast<std::size_t>(j)]);
        }
    }
    L.gram_factor.compute(L.gram_sensors);
    if (L.gram_factor.info() != Eigen::Success) {
        throw SolverError("sensor Gram matrix is not positive definite");
    }
    return L;
}

Vector apply_control(const ActuatorSensorLayout& layout, const Vector& u) {
    require_size(u.size(), layout.num_actuators(), "apply_control");
    return layout.actuator_loads * u;
}

Vector actuator_adjoint(const ActuatorSensorLayout& layout, const Vector& p) {
    require_size(p.size(), layout.state_size(), "actuator_adjoint");
    return layout.actuator_loads.transpose() * p;
}

Vector measure_output(const ActuatorSensorLayout& layout, const Vector& y) {
    require_size(y.size(), layout.state_size(), "measure_output");
    return layout.sensor_loads.transpose() * y;
}

Vector sensor_coefficients(const ActuatorSensorLayout& layout, const Vector& w) {
    require_size(w.size(), layout.num_sensors(), "sensor_coefficients");
    return layout.gram_factor.solve(w);
}

Vector reconstruct_from_output(const ActuatorSensorLayout& layout, const Vector& w) {
    return layout.sensor_indicators * sensor_coefficients(layout, w);
}

Vector project_onto_sensors(const ActuatorSensorLayout& layout, const Vector& y) {
    return reconstruct_from_output(layout, measure_output(layout, y));
}

Vector observer_injection(const ActuatorSensorLayout& layout, const ObserverConfig& cfg,
                          const Vector& yhat, const Vector& w) {
    require_size(w.size(), layout.num_sensors(), "observer_injection");
    const Vector residual = measure_output(layout, yhat) - w;
    return -cfg.lambda * (layout.sensor_loads * sensor_coefficients(layout, residual));
}

}  // namespace orhc
