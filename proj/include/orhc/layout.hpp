#pragma once

#include "orhc/fem.hpp"
#include "orhc/mesh.hpp"
#include "orhc/types.hpp"

#include <Eigen/Cholesky>

#include <vector>

namespace orhc {

struct ObserverConfig {
    double lambda = 100.0;

    void validate() const;
};

/// Chessboard of 2m x 2m cells. Each cell holds one concentric rectangle of
/// side shrink_ratio / (2m); actuators sit on cells with even i + j, sensors
/// on odd ones. Cells are indexed from the lower-left, i along x1.
struct ActuatorSensorLayout {
    int grid_m = 0;
    double shrink_ratio = 0.0;
    std::vector<Rect> actuator_rects;
    std::vector<Rect> sensor_rects;
    Matrix actuator_loads;     ///< N x M, column j = (integral of phi_i over the j-th actuator)
    Matrix sensor_loads;       ///< N x S
    Matrix sensor_indicators;  ///< N x S, nodal interpolants of the closed sensor rectangles
    Matrix gram_sensors;       ///< S x S, (1_i, 1_j) in L2
    Eigen::LLT<Matrix> gram_factor;

    int num_actuators() const { return static_cast<int>(actuator_rects.size()); }
    int num_sensors() const { return static_cast<int>(sensor_rects.size()); }
    Eigen::Index state_size() const { return actuator_loads.rows(); }
};

ActuatorSensorLayout build_layout(int grid_m, double shrink_ratio, const Mesh& mesh,
                                  const OperatorSet& ops);

/// Load vector of sum_j u_j 1_{omega_j}.
Vector apply_control(const ActuatorSensorLayout& layout, const Vector& u);

/// (U_M)^* applied to a state: components are the integrals of p over each actuator.
Vector actuator_adjoint(const ActuatorSensorLayout& layout, const Vector& p);

/// w_j = integral of y over the j-th sensor.
Vector measure_output(const ActuatorSensorLayout& layout, const Vector& y);

/// Coefficients c = [V_S]^{-1} w of the sensor-span element with output w.
Vector sensor_coefficients(const ActuatorSensorLayout& layout, const Vector& w);

/// State with sensor coefficients [V_S]^{-1} w on the interpolated indicators.
Vector reconstruct_from_output(const ActuatorSensorLayout& layout, const Vector& w);

/// P_{W_S} y, the measure-then-reconstruct map.
Vector project_onto_sensors(const ActuatorSensorLayout& layout, const Vector& y);

/// Load of -lambda sum_j ([V_S]^{-1}(Z yhat - w))_j 1_{omega_j}.
Vector observer_injection(const ActuatorSensorLayout& layout, const ObserverConfig& cfg,
                          const Vector& yhat, const Vector& w);

}  // namespace orhc
