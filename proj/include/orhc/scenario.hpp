#pragma once

#include "orhc/orhc.hpp"

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace orhc {

struct MeshSettings {
    int n_div = 48;
    int refinement_level = 0;
};

struct PhysicsSettings {
    double nu = 0.1;
    std::string coefficients = "oscillating";
    BoundaryCondition bc = BoundaryCondition::neumann;
};

struct LayoutSettings {
    int grid_m = 2;
    double shrink_ratio = 0.5;
};

struct PenaltySettings {
    PenaltyKind kind = PenaltyKind::eig_projection;
    double scale = 28.284271247461902;  // sqrt(800)
    int count = 30;
};

struct OcpSettings {
    TolerancePolicy tolerances;
    int max_iter = 2000;
    bool warm_start = false;
};

struct RhcSettings {
    double T_rh = 2.0;
    double tau = 0.1;
    double T_infty = 4.0;
    ConcatRule tn_rule = ConcatRule::max_argmin;
    SqueezeStop squeeze;
};

struct TimeSettings {
    double dt = 0.0;  ///< 0 selects the default for the refinement level
};

struct SolverSettings {
    LinearSolverKind kind = LinearSolverKind::bicgstab;
    double rel_tol = 1e-13;
    double ocp_rel_tol = 1e-11;
    int max_iterations = 1000;
    double cache_limit_mb = 1024.0;
};

struct InitialSettings {
    std::string state = "cosine";      ///< cosine | constant | zero
    std::string estimate = "output";   ///< output | exact | zero
};

struct SweepSettings {
    std::vector<double> T_rh{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
    int workers = 1;
};

struct OutputSettings {
    std::string dir = "out";
    bool plots = true;
    bool verbose = false;
};

/// Every parameter of a run. Defaults are the paper-5.1 preset.
struct ScenarioConfig {
    std::string name = "paper-5.1";
    MeshSettings mesh;
    PhysicsSettings physics;
    LayoutSettings layout;
    ObserverConfig observer;
    PenaltySettings penalty;
    OcpSettings ocp;
    RhcSettings rhc;
    TimeSettings time;
    SolverSettings solver;
    InitialSettings initial;
    SweepSettings sweep;
    OutputSettings output;
    unsigned long seed = 20240613;

    void validate() const;
    double dt() const;
    OrhcConfig orhc_config() const;
    LinearSolverOptions plant_solver() const;
    LinearSolverOptions ocp_solver() const;
};

ScenarioConfig scenario_preset(const std::string& name);

/// Flat key/value text: "[section]" headers, "key = value" lines, '#'
/// comments. Values are numbers, booleans, quoted or bare strings, or
/// bracketed comma-separated lists. A top-level "preset" key selects the
/// base configuration.
std::map<std::string, std::string> parse_key_values(const std::string& text);

/// Sets "section.key" (or a top-level key) from its text value.
void apply_setting(ScenarioConfig& cfg, const std::string& key, const std::string& value);

ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);

/// Applies "key=value" overrides in order and re-validates.
void apply_overrides(ScenarioConfig& cfg, const std::vector<std::string>& overrides);

/// Canonical text form; parse_scenario(format_scenario(c)) reproduces c.
std::string format_scenario(const ScenarioConfig& cfg);

/// Discretization and operators of a scenario.
struct ScenarioSetup {
    ScenarioConfig config;
    Mesh mesh;
    OperatorSet ops;
    std::unique_ptr<ReactionConvectionAssembler> rc;
    ActuatorSensorLayout layout;
    std::shared_ptr<const EigenBasis> basis;  ///< null unless the penalty needs it
    std::unique_ptr<PenaltyOperator> penalty;
    Vector y0;
    Vector yhat0;
    double dt = 0.0;
    double setup_seconds = 0.0;

    OrhcContext context() const;
    OcpProblem ocp_problem() const;
};

std::unique_ptr<ScenarioSetup> build_scenario(const ScenarioConfig& cfg);

/// Initial state presets.
Vector initial_state(const std::string& name, const Mesh& mesh, const OperatorSet& ops);

}  // namespace orhc
