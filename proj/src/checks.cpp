#include "orhc/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace orhc {

namespace {

Vector random_vector(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = dist(rng);
    return v;
}

ControlTrajectory random_control(const TimeGrid& grid, int m, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    ControlTrajectory u = ControlTrajectory::zeros(grid, m);
    for (Eigen::Index i = 0; i < u.values.rows(); ++i) {
        for (Eigen::Index j = 0; j < u.values.cols(); ++j) u.values(i, j) = dist(rng);
    }
    return u;
}

double forward_cost(const ScenarioSetup& s, const TimeGrid& grid, const Vector& y_in, const ControlTrajectory& u) {
    CnStepper stepper(s.ops, *s.rc, grid.dt, s.config.ocp_solver());
    const Matrix& fa = s.layout.actuator_loads;
    StepLoad forcing = [&](long k, double, Vector& load) {
        load.noalias() = fa * (0.5 * (u.values.row(k) + u.values.row(k + 1)).transpose());
    };
    const StateTrajectory y = cn_forward(stepper, grid, y_in, forcing, StoragePolicy::full);
    return evaluate_cost(*s.penalty, y, u);
}

std::string describe(double value, double threshold, const char* relation) {
    std::ostringstream os;
    os.precision(3);
    os << value << ' ' << relation << ' ' << threshold;
    return os.str();
}

}  // namespace

std::vector<double> analytic_neumann_spectrum(int count) {
    std::vector<double> out;
    const int kmax = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(count)))) + 2;
    for (int k = 0; k <= kmax; ++k) {
        for (int l = 0; l <= kmax; ++l) out.push_back(std::numbers::pi * std::numbers::pi * (k * k + l * l));
    }
    std::sort(out.begin(), out.end());
    out.resize(static_cast<std::size_t>(count));
    return out;
}

CheckResult check_spectrum(const EigenBasis& basis, double rel_tol, const std::string& name) {
    CheckResult r;
    r.name = name;
    r.threshold = rel_tol;
    const auto exact = analytic_neumann_spectrum(basis.count());
    double worst = 0.0;
    for (int i = 0; i < basis.count(); ++i) {
        const double e = exact[static_cast<std::size_t>(i)];
        const double dev = e == 0.0 ? std::abs(basis.values[i]) : std::abs(basis.values[i] - e) / e;
        worst = std::max(worst, dev);
    }
    r.value = worst;
    r.passed = worst <= rel_tol;
    r.detail = "max relative eigenvalue deviation " + describe(worst, rel_tol, "<=");
    return r;
}

CheckResult check_gradient_fd(const ScenarioSetup& s, double T_rh, int directions, double h, double rel_tol,
                              unsigned long seed) {
    CheckResult r;
    r.name = "gradient_fd";
    r.threshold = rel_tol;
    std::mt19937_64 rng(seed);
    const TimeGrid grid = TimeGrid::make(0.0, T_rh, s.dt);
    const int m = s.layout.num_actuators();
    const ControlTrajectory u = random_control(grid, m, rng);
    const OcpProblem problem = s.ocp_problem();
    const GradientResult g = gradient(problem, grid, s.yhat0, u);
    double worst = 0.0;
    for (int d = 0; d < directions; ++d) {
        const ControlTrajectory delta = random_control(grid, m, rng);
        ControlTrajectory up = u, um = u;
        up.values += h * delta.values;
        um.values -= h * delta.values;
        const double fd = (forward_cost(s, grid, s.yhat0, up) - forward_cost(s, grid, s.yhat0, um)) / (2.0 * h);
        const double exact = l2_inner(g.G, delta);
        worst = std::max(worst, std::abs(fd - exact) / std::abs(exact));
    }
    r.value = worst;
    r.passed = worst <= rel_tol;
    r.detail = std::to_string(directions) + " directions, worst relative error " + describe(worst, rel_tol, "<=");
    return r;
}

CheckResult check_adjoint_duality(const ScenarioSetup& s, long steps, unsigned long seed) {
    CheckResult r;
    r.name = "adjoint_duality";
    r.threshold = 1e-9;
    std::mt19937_64 rng(seed);
    const Eigen::Index n = s.ops.size();
    const TimeGrid grid{0.0, s.dt, steps};
    const Vector y0 = random_vector(n, rng);
    const Vector pK = random_vector(n, rng);
    Matrix f(n, steps), src(n, steps);
    for (long k = 0; k < steps; ++k) {
        f.col(k) = random_vector(n, rng);
        src.col(k) = random_vector(n, rng);
    }
    CnStepper stepper(s.ops, *s.rc, s.dt, s.config.plant_solver());
    const StateTrajectory y = cn_forward(stepper, grid, y0, [&](long k, double, Vector& l) { l = f.col(k); },
                                         StoragePolicy::full);
    const StateTrajectory p = cn_backward_adjoint(stepper, grid, pK,
                                                  [&](long k, double, Vector& l) { l = src.col(k); },
                                                  StoragePolicy::full);
    const double lhs = s.ops.mass_inner(y.state(steps), p.state(steps)) - s.ops.mass_inner(y.state(0), p.state(0));
    double rhs = 0.0;
    for (long k = 0; k < steps; ++k) {
        const Vector psi = 0.5 * (p.state(k) + p.state(k + 1));
        const Vector ybar = 0.5 * (y.state(k) + y.state(k + 1));
        rhs += s.dt * (f.col(k).dot(psi) - src.col(k).dot(ybar));
    }
    const double scale = std::max({std::abs(lhs), std::abs(rhs), 1e-300});
    r.value = std::abs(lhs - rhs) / scale;
    r.passed = r.value <= r.threshold;
    r.detail = "relative duality defect " + describe(r.value, r.threshold, "<=");
    return r;
}

CheckResult check_cn_order(const ScenarioSetup& s, double T, double dt) {
    CheckResult r;
    r.name = "cn_order";
    IntegratorOptions opt;
    opt.solver = s.config.plant_solver();
    opt.storage = StoragePolicy::endpoints;
    std::vector<Vector> finals;
    for (int level = 0; level < 3; ++level) {
        const double h = dt / std::pow(2.0, level);
        finals.push_back(run_free(s.ops, *s.rc, TimeGrid::make(0.0, T, h), s.y0, opt).final_state());
    }
    const double e1 = s.ops.mass_norm(finals[0] - finals[1]);
    const double e2 = s.ops.mass_norm(finals[1] - finals[2]);
    r.value = e1 / e2;
    r.threshold = 4.0;
    r.passed = r.value >= 3.5 && r.value <= 4.5;
    std::ostringstream os;
    os.precision(4);
    os << "Richardson ratio " << r.value << " (differences " << e1 << ", " << e2 << "), expected in [3.5, 4.5]";
    r.detail = os.str();
    return r;
}

CheckResult check_separation(const ScenarioSetup& s, double T, double rel_tol) {
    CheckResult r;
    r.name = "separation";
    r.threshold = rel_tol;
    const TimeGrid grid = TimeGrid::make(0.0, T, s.dt);
    const int m = s.layout.num_actuators();
    ControlTrajectory u = ControlTrajectory::zeros(grid, m);
    for (long k = 0; k <= grid.steps; ++k) {
        for (int j = 0; j < m; ++j) u.values(k, j) = std::sin((j + 1) * grid.t(k));
    }
    IntegratorOptions opt;
    opt.solver = s.config.plant_solver();
    opt.storage = StoragePolicy::endpoints;
    const CoupledTrajectories c =
        cn_coupled_plant_observer(s.ops, *s.rc, s.layout, s.config.observer, grid, s.y0, s.yhat0, u, opt);
    const StateTrajectory z =
        cn_observer_error(s.ops, *s.rc, s.layout, s.config.observer, grid, s.yhat0 - s.y0, opt);
    double worst = 0.0;
    for (std::size_t k = 0; k < z.norms.size(); ++k) {
        const double ref = z.norms[k];
        if (ref > 0.0) worst = std::max(worst, std::abs(c.error_norms[k] - ref) / ref);
    }
    r.value = worst;
    r.passed = worst <= rel_tol;
    r.detail = "max relative error-norm mismatch " + describe(worst, rel_tol, "<=");
    return r;
}

CheckResult check_projection_idempotence(const ScenarioSetup& s, unsigned long seed) {
    CheckResult r;
    r.name = "projection_idempotence";
    r.threshold = 1e-12;
    std::mt19937_64 rng(seed);
    const Vector y = random_vector(s.ops.size(), rng);
    const Vector py = project_onto_sensors(s.layout, y);
    const Vector ppy = project_onto_sensors(s.layout, py);
    r.value = (ppy - py).norm() / std::max(py.norm(), 1e-300);
    r.passed = r.value <= r.threshold;
    r.detail = "relative change under a second projection " + describe(r.value, r.threshold, "<=");
    return r;
}

std::vector<CheckResult> run_check_suite(const ScenarioSetup& s) {
    std::vector<CheckResult> out;
    if (s.basis) out.push_back(check_spectrum(*s.basis, 0.02, "spectrum"));
    out.push_back(check_projection_idempotence(s, s.config.seed));
    out.push_back(check_adjoint_duality(s, 50, s.config.seed + 1));
    out.push_back(check_gradient_fd(s, 0.25, 10, 1e-5, 1e-4, s.config.seed + 2));
    out.push_back(check_cn_order(s, 0.2, s.dt));
    out.push_back(check_separation(s, 0.2, 1e-9));
    return out;
}

}  // namespace orhc
