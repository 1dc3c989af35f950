#pragma once

#include "orhc/scenario.hpp"

#include <memory>
#include <random>

namespace orhc::test {

inline Vector random_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

inline double max_abs(const SparseMatrix& m) {
    double out = 0.0;
    for (int k = 0; k < m.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(m, k); it; ++it) out = std::max(out, std::abs(it.value()));
    }
    return out;
}

/// The default preset on a coarse mesh, quiet and without plots.
inline ScenarioConfig coarse_config(int n_div = 16) {
    ScenarioConfig cfg = scenario_preset("paper-5.1");
    cfg.mesh.n_div = n_div;
    cfg.output.plots = false;
    return cfg;
}

inline std::unique_ptr<ScenarioSetup> coarse_setup(int n_div = 16) { return build_scenario(coarse_config(n_div)); }

}  // namespace orhc::test
