#pragma once

#include "orhc/scenario.hpp"

#include <string>
#include <vector>

namespace orhc {

struct CheckResult {
    std::string name;
    bool passed = false;
    double value = 0.0;      ///< measured quantity
    double threshold = 0.0;  ///< bound it was compared against
    std::string detail;
};

/// Analytic Neumann spectrum pi^2 (k^2 + l^2) of -Lap on the unit square, sorted.
std::vector<double> analytic_neumann_spectrum(int count);

/// Largest relative deviation of the computed eigenvalues from the analytic
/// ones; the constant mode is compared in absolute terms.
CheckResult check_spectrum(const EigenBasis& basis, double rel_tol, const std::string& name);

/// Central differences of the cost against <G, delta> for random directions.
CheckResult check_gradient_fd(const ScenarioSetup& s, double T_rh, int directions, double h, double rel_tol,
                              unsigned long seed);

/// <y_K, p_K>_M - <y_0, p_0>_M against the discrete duality sum, random data.
CheckResult check_adjoint_duality(const ScenarioSetup& s, long steps, unsigned long seed);

/// Richardson ratio ||y_dt - y_dt/2|| / ||y_dt/2 - y_dt/4|| of the free final state.
CheckResult check_cn_order(const ScenarioSetup& s, double T, double dt);

/// Coupled-integrator error norms against the standalone error equation.
CheckResult check_separation(const ScenarioSetup& s, double T, double rel_tol);

CheckResult check_projection_idempotence(const ScenarioSetup& s, unsigned long seed);

/// The quick suite behind the `check` command.
std::vector<CheckResult> run_check_suite(const ScenarioSetup& s);

}  // namespace orhc
