#include "orhc/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace orhc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

std::string unquote(const std::string& v) {
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') return v.substr(1, v.size() - 2);
    return v;
}

double to_double(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    double out = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(out)) {
        throw ConfigError("'" + key + "' expects a number, got '" + v + "'");
    }
    return out;
}

long to_long(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    long out = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("'" + key + "' expects an integer, got '" + v + "'");
    }
    return out;
}

int to_int(const std::string& key, const std::string& v) {
    const long x = to_long(key, v);
    if (x < -2147483647L || x > 2147483647L) throw ConfigError("'" + key + "' is out of range");
    return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
    const std::string s = trim(v);
    if (s == "true") return true;
    if (s == "false") return false;
    throw ConfigError("'" + key + "' expects true or false, got '" + v + "'");
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::string s = trim(v);
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
        throw ConfigError("'" + key + "' expects a list like [1, 2], got '" + v + "'");
    }
    s = s.substr(1, s.size() - 2);
    std::vector<double> out;
    if (trim(s).empty()) return out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_double(key, item));
    return out;
}

TolerancePair to_pair(const std::string& key, const std::string& v) {
    const auto l = to_list(key, v);
    if (l.size() != 2) throw ConfigError("'" + key + "' expects two values");
    return {l[0], l[1]};
}

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt_list(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt(v[i]);
    return s + "]";
}

const std::vector<std::string> kStates{"cosine", "constant", "zero"};
const std::vector<std::string> kEstimates{"output", "exact", "zero"};

}  // namespace

void ScenarioConfig::validate() const {
    if (mesh.n_div < 4 || mesh.n_div % 8 != 0) throw ConfigError("mesh.n_div must be a positive multiple of 8");
    if (mesh.refinement_level < 0 || mesh.refinement_level > 4) {
        throw ConfigError("mesh.refinement_level must be in [0, 4]");
    }
    if (!(physics.nu > 0.0)) throw ConfigError("physics.nu must be positive");
    make_coefficient_preset(physics.coefficients);
    if (layout.grid_m < 1) throw ConfigError("layout.grid_m must be positive");
    if (!(layout.shrink_ratio > 0.0) || layout.shrink_ratio > 1.0) {
        throw ConfigError("layout.shrink_ratio must lie in (0, 1]");
    }
    observer.validate();
    if (!(penalty.scale >= 0.0) || !std::isfinite(penalty.scale)) {
        throw ConfigError("penalty.scale must be non-negative");
    }
    if (penalty.count < 1) throw ConfigError("penalty.count must be positive");
    ocp.tolerances.validate();
    if (ocp.max_iter < 1) throw ConfigError("ocp.max_iter must be positive");
    orhc_config().validate();
    if (!(time.dt >= 0.0) || !std::isfinite(time.dt)) throw ConfigError("time.dt must be non-negative");
    if (!(solver.rel_tol > 0.0) || !(solver.ocp_rel_tol > 0.0)) {
        throw ConfigError("solver tolerances must be positive");
    }
    if (solver.max_iterations < 1) throw ConfigError("solver.max_iterations must be positive");
    if (!(solver.cache_limit_mb >= 0.0)) throw ConfigError("solver.cache_limit_mb must be non-negative");
    if (std::find(kStates.begin(), kStates.end(), initial.state) == kStates.end()) {
        throw ConfigError("unknown initial.state '" + initial.state + "'");
    }
    if (std::find(kEstimates.begin(), kEstimates.end(), initial.estimate) == kEstimates.end()) {
        throw ConfigError("unknown initial.estimate '" + initial.estimate + "'");
    }
    if (sweep.T_rh.empty()) throw ConfigError("sweep.T_rh must not be empty");
    for (double t : sweep.T_rh) {
        if (!(t >= rhc.tau)) throw ConfigError("sweep.T_rh entries must be at least rhc.tau");
    }
    if (sweep.workers < 1) throw ConfigError("sweep.workers must be positive");
    if (output.dir.empty()) throw ConfigError("output.dir must not be empty");
}

double ScenarioConfig::dt() const { return time.dt > 0.0 ? time.dt : default_dt(mesh.refinement_level); }

OrhcConfig ScenarioConfig::orhc_config() const {
    OrhcConfig c;
    c.T_rh = rhc.T_rh;
    c.tau = rhc.tau;
    c.T_infty = rhc.T_infty;
    c.tn_rule = rhc.tn_rule;
    c.squeeze = rhc.squeeze;
    c.tolerances = ocp.tolerances;
    c.max_iter = ocp.max_iter;
    c.warm_start = ocp.warm_start;
    return c;
}

LinearSolverOptions ScenarioConfig::plant_solver() const {
    return {solver.kind, solver.rel_tol, solver.max_iterations, true};
}

LinearSolverOptions ScenarioConfig::ocp_solver() const {
    return {solver.kind, solver.ocp_rel_tol, solver.max_iterations, true};
}

ScenarioConfig scenario_preset(const std::string& name) {
    if (name == "paper-5.1") return ScenarioConfig{};
    throw ConfigError("unknown preset '" + name + "'");
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
    std::map<std::string, std::string> out;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string s = trim(strip_comment(line));
        if (s.empty()) continue;
        if (s.front() == '[' && s.find('=') == std::string::npos) {
            if (s.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            if (section.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = unquote(trim(s.substr(eq + 1)));
        if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (!out.emplace(full, value).second) {
            throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + full + "'");
        }
    }
    return out;
}

void apply_setting(ScenarioConfig& c, const std::string& key, const std::string& raw) {
    const std::string v = unquote(trim(raw));
    if (key == "name") c.name = v;
    else if (key == "seed") c.seed = static_cast<unsigned long>(to_long(key, v));
    else if (key == "mesh.n_div") c.mesh.n_div = to_int(key, v);
    else if (key == "mesh.refinement_level") c.mesh.refinement_level = to_int(key, v);
    else if (key == "physics.nu") c.physics.nu = to_double(key, v);
    else if (key == "physics.coefficients") c.physics.coefficients = v;
    else if (key == "physics.bc") c.physics.bc = boundary_condition_from_string(v);
    else if (key == "layout.grid_m") c.layout.grid_m = to_int(key, v);
    else if (key == "layout.shrink_ratio") c.layout.shrink_ratio = to_double(key, v);
    else if (key == "observer.lambda") c.observer.lambda = to_double(key, v);
    else if (key == "penalty.kind") c.penalty.kind = penalty_kind_from_string(v);
    else if (key == "penalty.scale") c.penalty.scale = to_double(key, v);
    else if (key == "penalty.count") c.penalty.count = to_int(key, v);
    else if (key == "ocp.tol_low") c.ocp.tolerances.low = to_pair(key, v);
    else if (key == "ocp.tol_up") c.ocp.tolerances.up = to_pair(key, v);
    else if (key == "ocp.max_iter") c.ocp.max_iter = to_int(key, v);
    else if (key == "ocp.warm_start") c.ocp.warm_start = to_bool(key, v);
    else if (key == "rhc.T_rh") c.rhc.T_rh = to_double(key, v);
    else if (key == "rhc.tau") c.rhc.tau = to_double(key, v);
    else if (key == "rhc.T_infty") c.rhc.T_infty = to_double(key, v);
    else if (key == "rhc.tn_rule") c.rhc.tn_rule = concat_rule_from_string(v);
    else if (key == "rhc.squeeze_consecutive") c.rhc.squeeze.consecutive_limit = to_int(key, v);
    else if (key == "rhc.squeeze_total") c.rhc.squeeze.total_limit = to_int(key, v);
    else if (key == "time.dt") c.time.dt = to_double(key, v);
    else if (key == "solver.kind") c.solver.kind = linear_solver_kind_from_string(v);
    else if (key == "solver.rel_tol") c.solver.rel_tol = to_double(key, v);
    else if (key == "solver.ocp_rel_tol") c.solver.ocp_rel_tol = to_double(key, v);
    else if (key == "solver.max_iterations") c.solver.max_iterations = to_int(key, v);
    else if (key == "solver.cache_limit_mb") c.solver.cache_limit_mb = to_double(key, v);
    else if (key == "initial.state") c.initial.state = v;
    else if (key == "initial.estimate") c.initial.estimate = v;
    else if (key == "sweep.T_rh") c.sweep.T_rh = to_list(key, v);
    else if (key == "sweep.workers") c.sweep.workers = to_int(key, v);
    else if (key == "output.dir") c.output.dir = v;
    else if (key == "output.plots") c.output.plots = to_bool(key, v);
    else if (key == "output.verbose") c.output.verbose = to_bool(key, v);
    else throw ConfigError("unknown setting '" + key + "'");
}

ScenarioConfig parse_scenario(const std::string& text) {
    auto kv = parse_key_values(text);
    ScenarioConfig cfg;
    if (auto it = kv.find("preset"); it != kv.end()) {
        cfg = scenario_preset(it->second);
        kv.erase(it);
    }
    for (const auto& [k, v] : kv) apply_setting(cfg, k, v);
    cfg.validate();
    return cfg;
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

void apply_overrides(ScenarioConfig& cfg, const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
        apply_setting(cfg, trim(o.substr(0, eq)), o.substr(eq + 1));
    }
    cfg.validate();
}

std::string format_scenario(const ScenarioConfig& c) {
    std::ostringstream os;
    auto str = [](const std::string& s) { return "\"" + s + "\""; };
    auto pair = [](const TolerancePair& p) { return fmt_list({p.tol1, p.tol2}); };
    os << "name = " << str(c.name) << "\n";
    os << "seed = " << c.seed << "\n\n";
    os << "[mesh]\nn_div = " << c.mesh.n_div << "\nrefinement_level = " << c.mesh.refinement_level << "\n\n";
    os << "[physics]\nnu = " << fmt(c.physics.nu) << "\ncoefficients = " << str(c.physics.coefficients)
       << "\nbc = " << str(to_string(c.physics.bc)) << "\n\n";
    os << "[layout]\ngrid_m = " << c.layout.grid_m << "\nshrink_ratio = " << fmt(c.layout.shrink_ratio) << "\n\n";
    os << "[observer]\nlambda = " << fmt(c.observer.lambda) << "\n\n";
    os << "[penalty]\nkind = " << str(to_string(c.penalty.kind)) << "\nscale = " << fmt(c.penalty.scale)
       << "\ncount = " << c.penalty.count << "\n\n";
    os << "[ocp]\ntol_low = " << pair(c.ocp.tolerances.low) << "\ntol_up = " << pair(c.ocp.tolerances.up)
       << "\nmax_iter = " << c.ocp.max_iter << "\nwarm_start = " << (c.ocp.warm_start ? "true" : "false")
       << "\n\n";
    os << "[rhc]\nT_rh = " << fmt(c.rhc.T_rh) << "\ntau = " << fmt(c.rhc.tau) << "\nT_infty = " << fmt(c.rhc.T_infty)
       << "\ntn_rule = " << str(to_string(c.rhc.tn_rule))
       << "\nsqueeze_consecutive = " << c.rhc.squeeze.consecutive_limit
       << "\nsqueeze_total = " << c.rhc.squeeze.total_limit << "\n\n";
    os << "[time]\ndt = " << fmt(c.time.dt) << "\n\n";
    os << "[solver]\nkind = " << str(to_string(c.solver.kind)) << "\nrel_tol = " << fmt(c.solver.rel_tol)
       << "\nocp_rel_tol = " << fmt(c.solver.ocp_rel_tol) << "\nmax_iterations = " << c.solver.max_iterations
       << "\ncache_limit_mb = " << fmt(c.solver.cache_limit_mb) << "\n\n";
    os << "[initial]\nstate = " << str(c.initial.state) << "\nestimate = " << str(c.initial.estimate) << "\n\n";
    os << "[sweep]\nT_rh = " << fmt_list(c.sweep.T_rh) << "\nworkers = " << c.sweep.workers << "\n\n";
    os << "[output]\ndir = " << str(c.output.dir) << "\nplots = " << (c.output.plots ? "true" : "false")
       << "\nverbose = " << (c.output.verbose ? "true" : "false") << "\n";
    return os.str();
}

Vector initial_state(const std::string& name, const Mesh& mesh, const OperatorSet& ops) {
    if (name == "cosine") {
        return ops.interpolate(mesh, [](Point2 p) { return 1.0 - 2.0 * std::cos(std::numbers::pi * p.x); });
    }
    if (name == "constant") return ops.interpolate(mesh, [](Point2) { return 1.0; });
    if (name == "zero") return Vector::Zero(ops.size());
    throw ConfigError("unknown initial state '" + name + "'");
}

OrhcContext ScenarioSetup::context() const {
    OrhcContext ctx;
    ctx.ops = &ops;
    ctx.rc = rc.get();
    ctx.layout = &layout;
    ctx.penalty = penalty.get();
    ctx.observer = config.observer;
    ctx.solver = config.plant_solver();
    ctx.ocp_solver = config.ocp_solver();
    ctx.dt = dt;
    ctx.cache_limit_bytes = static_cast<std::size_t>(config.solver.cache_limit_mb * 1024.0 * 1024.0);
    ctx.keep_ocp_trace = config.output.verbose;
    return ctx;
}

OcpProblem ScenarioSetup::ocp_problem() const {
    return OcpProblem{&ops, rc.get(), &layout, penalty.get(), config.ocp_solver()};
}

std::unique_ptr<ScenarioSetup> build_scenario(const ScenarioConfig& cfg) {
    cfg.validate();
    const auto clock0 = std::chrono::steady_clock::now();
    auto s = std::make_unique<ScenarioSetup>();
    s->config = cfg;
    s->mesh = build_mesh(cfg.mesh.n_div, cfg.mesh.refinement_level);
    s->ops = assemble_static(s->mesh, cfg.physics.nu, cfg.physics.bc);
    s->rc = std::make_unique<ReactionConvectionAssembler>(s->mesh, s->ops,
                                                          make_coefficient_preset(cfg.physics.coefficients));
    s->layout = build_layout(cfg.layout.grid_m, cfg.layout.shrink_ratio, s->mesh, s->ops);
    switch (cfg.penalty.kind) {
        case PenaltyKind::eig_projection: {
            EigenSolverOptions eo;
            eo.seed = cfg.seed;
            s->basis = std::make_shared<EigenBasis>(compute_neumann_eigenbasis(s->ops, cfg.penalty.count, eo));
            s->penalty = std::make_unique<PenaltyOperator>(
                PenaltyOperator::eig_projection(s->ops, s->basis, cfg.penalty.scale));
            break;
        }
        case PenaltyKind::identity:
            s->penalty = std::make_unique<PenaltyOperator>(PenaltyOperator::identity(s->ops, cfg.penalty.scale));
            break;
        case PenaltyKind::sensors:
            s->penalty = std::make_unique<PenaltyOperator>(PenaltyOperator::sensors(s->layout, cfg.penalty.scale));
            break;
        case PenaltyKind::sqrt_A:
            s->penalty = std::make_unique<PenaltyOperator>(PenaltyOperator::sqrt_A(s->ops, cfg.penalty.scale));
            break;
    }
    s->y0 = initial_state(cfg.initial.state, s->mesh, s->ops);
    if (cfg.initial.estimate == "output") {
        s->yhat0 = information_initial_guess(s->layout, s->y0);
    } else if (cfg.initial.estimate == "exact") {
        s->yhat0 = s->y0;
    } else {
        s->yhat0 = Vector::Zero(s->ops.size());
    }
    s->dt = cfg.dt();
    s->setup_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - clock0).count();
    return s;
}

}  // namespace orhc
