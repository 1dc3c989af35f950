#include "orhc/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace orhc {

namespace {

std::string fmt17(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

double parse_double(const std::string& s, int line) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError("CSV line " + std::to_string(line) + ": bad number '" + s + "'");
    }
    return v;
}

const char* kCsvHeader = "t,norm_y,norm_err,norm_u_pointwise,is_concat_time,squeeze_ok";

nlohmann::json finite_or_null(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

}  // namespace

LogLinearFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& v, double t_min, double t_max,
                            const std::vector<bool>& skip) {
    require_size(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(t.size()), "fit_log_linear");
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!skip.empty() && skip[i]) continue;
        if (t[i] < t_min || t[i] > t_max || !(v[i] > 0.0) || !std::isfinite(v[i])) continue;
        xs.push_back(t[i]);
        ys.push_back(std::log(v[i]));
    }
    LogLinearFit fit;
    fit.points = static_cast<int>(xs.size());
    if (fit.points < 2) return fit;
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxx += (xs[i] - mx) * (xs[i] - mx);
        sxy += (xs[i] - mx) * (ys[i] - my);
    }
    if (sxx == 0.0) {
        fit.points = 0;
        return fit;
    }
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.max_residual = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < xs.size(); ++i) {
        fit.max_residual = std::max(fit.max_residual, ys[i] - (fit.intercept + fit.slope * xs[i]));
    }
    return fit;
}

std::vector<NormSample> concatenation_samples(const std::vector<NormSample>& history) {
    std::vector<NormSample> out;
    for (const auto& s : history) {
        if (!s.is_concat_time) continue;
        if (!out.empty() && out.back().t == s.t) {
            out.back() = s;
        } else {
            out.push_back(s);
        }
    }
    return out;
}

DecayFits compute_decay_fits(const std::vector<NormSample>& history) {
    DecayFits f;
    const auto samples = concatenation_samples(history);
    std::vector<double> t, ny, nz, nc;
    std::vector<bool> below_floor;
    for (const auto& s : samples) {
        t.push_back(s.t);
        ny.push_back(s.norm_y);
        nz.push_back(s.norm_err);
        nc.push_back(std::hypot(s.norm_y, s.norm_err));
        below_floor.push_back(!(s.norm_err > f.error_floor_ratio * s.norm_y));
    }
    const double inf = std::numeric_limits<double>::infinity();
    f.state = fit_log_linear(t, ny, -inf, inf);
    f.error = fit_log_linear(t, nz, -inf, inf, below_floor);
    f.combined = fit_log_linear(t, nc, -inf, inf);
    if (!t.empty()) {
        const double t_end = t.back();
        const double t0 = t.front() + 2.0 * (t_end - t.front()) / 3.0;
        f.final_third = fit_log_linear(t, ny, t0, t_end);
    }
    if (f.combined.valid() && nc.front() > 0.0) {
        const double mu = f.combined.rate();
        double d = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) d = std::max(d, nc[i] * std::exp(mu * t[i]) / nc.front());
        f.bound.mu = mu;
        f.bound.D = d;
        f.bound.D_fit = std::exp(f.combined.intercept) / nc.front();
        bool ok = mu > 0.0 && std::isfinite(d);
        for (std::size_t i = 0; ok && i < t.size(); ++i) {
            ok = nc[i] <= d * std::exp(-mu * t[i]) * nc.front() * (1.0 + 1e-12);
        }
        f.bound.holds = ok;
    }
    if (!history.empty() && history.front().norm_err > 0.0) {
        const double z0 = history.front().norm_err;
        f.min_relative_error = inf;
        for (const auto& s : history) {
            const double r = s.norm_err / z0;
            f.min_relative_error = std::min(f.min_relative_error, r);
            if (f.time_below_1e14 < 0.0 && r < 1e-14) f.time_below_1e14 = s.t;
        }
    }
    return f;
}

void write_norm_csv(const std::vector<NormSample>& history, std::ostream& os) {
    os << kCsvHeader << "\n";
    for (const auto& s : history) {
        os << fmt17(s.t) << ',' << fmt17(s.norm_y) << ',' << fmt17(s.norm_err) << ',' << fmt17(s.norm_u) << ','
           << (s.is_concat_time ? 1 : 0) << ',' << (s.squeeze_ok ? 1 : 0) << '\n';
    }
}

void write_norm_csv(const std::vector<NormSample>& history, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    write_norm_csv(history, os);
    if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<NormSample> read_norm_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kCsvHeader) throw ConfigError("CSV header mismatch");
    std::vector<NormSample> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string c;
        while (std::getline(ss, c, ',')) cols.push_back(c);
        if (cols.size() != 6) throw ConfigError("CSV line " + std::to_string(lineno) + ": expected 6 columns");
        NormSample s;
        s.t = parse_double(cols[0], lineno);
        s.norm_y = parse_double(cols[1], lineno);
        s.norm_err = parse_double(cols[2], lineno);
        s.norm_u = parse_double(cols[3], lineno);
        s.is_concat_time = cols[4] == "1";
        s.squeeze_ok = cols[5] == "1";
        out.push_back(s);
    }
    return out;
}

std::vector<NormSample> read_norm_csv_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("cannot read '" + path + "'");
    return read_norm_csv(is);
}

std::vector<NormSample> free_history(const StateTrajectory& tr) {
    std::vector<NormSample> out;
    out.reserve(tr.norms.size());
    for (std::size_t k = 0; k < tr.norms.size(); ++k) {
        NormSample s;
        s.t = tr.grid.t(static_cast<long>(k));
        s.norm_y = tr.norms[k];
        out.push_back(s);
    }
    return out;
}

nlohmann::json config_json(const ScenarioConfig& c) {
    nlohmann::json j;
    j["name"] = c.name;
    j["seed"] = c.seed;
    j["mesh"] = {{"n_div", c.mesh.n_div}, {"refinement_level", c.mesh.refinement_level}};
    j["physics"] = {{"nu", c.physics.nu}, {"coefficients", c.physics.coefficients}, {"bc", to_string(c.physics.bc)}};
    j["layout"] = {{"grid_m", c.layout.grid_m}, {"shrink_ratio", c.layout.shrink_ratio}};
    j["observer"] = {{"lambda", c.observer.lambda}};
    j["penalty"] = {{"kind", to_string(c.penalty.kind)}, {"scale", c.penalty.scale}, {"count", c.penalty.count}};
    j["ocp"] = {{"tol_low", {c.ocp.tolerances.low.tol1, c.ocp.tolerances.low.tol2}},
                {"tol_up", {c.ocp.tolerances.up.tol1, c.ocp.tolerances.up.tol2}},
                {"max_iter", c.ocp.max_iter},
                {"warm_start", c.ocp.warm_start}};
    j["rhc"] = {{"T_rh", c.rhc.T_rh},
                {"tau", c.rhc.tau},
                {"T_infty", c.rhc.T_infty},
                {"tn_rule", to_string(c.rhc.tn_rule)},
                {"squeeze_consecutive", c.rhc.squeeze.consecutive_limit},
                {"squeeze_total", c.rhc.squeeze.total_limit}};
    j["time"] = {{"dt", c.time.dt}, {"dt_effective", c.dt()}};
    j["solver"] = {{"kind", to_string(c.solver.kind)},
                   {"rel_tol", c.solver.rel_tol},
                   {"ocp_rel_tol", c.solver.ocp_rel_tol},
                   {"max_iterations", c.solver.max_iterations},
                   {"cache_limit_mb", c.solver.cache_limit_mb}};
    j["initial"] = {{"state", c.initial.state}, {"estimate", c.initial.estimate}};
    j["sweep"] = {{"T_rh", c.sweep.T_rh}, {"workers", c.sweep.workers}};
    j["output"] = {{"dir", c.output.dir}, {"plots", c.output.plots}, {"verbose", c.output.verbose}};
    return j;
}

namespace {

nlohmann::json fit_json(const LogLinearFit& f) {
    return {{"slope", finite_or_null(f.slope)},
            {"rate", finite_or_null(f.rate())},
            {"intercept", finite_or_null(f.intercept)},
            {"max_residual", finite_or_null(f.max_residual)},
            {"points", f.points}};
}

}  // namespace

nlohmann::json fits_json(const DecayFits& f) {
    return {{"state", fit_json(f.state)},
            {"error", fit_json(f.error)},
            {"combined", fit_json(f.combined)},
            {"final_third_state", fit_json(f.final_third)},
            {"bound",
             {{"mu", finite_or_null(f.bound.mu)},
              {"D", finite_or_null(f.bound.D)},
              {"D_fit", finite_or_null(f.bound.D_fit)},
              {"holds", f.bound.holds}}},
            {"error_floor_ratio", f.error_floor_ratio},
            {"min_relative_error", finite_or_null(f.min_relative_error)},
            {"time_below_1e-14", f.time_below_1e14}};
}

nlohmann::json window_json(const WindowRecord& w) {
    return {{"index", w.index},
            {"t_in", w.t_in},
            {"t_out", w.t_out},
            {"theta", finite_or_null(w.theta)},
            {"squeeze_ok", w.squeeze_ok},
            {"iterations", w.iterations},
            {"converged", w.converged},
            {"tol", {w.tol.tol1, w.tol.tol2}},
            {"cost", finite_or_null(w.cost)},
            {"initial_cost", finite_or_null(w.initial_cost)},
            {"yhat_norm", finite_or_null(w.yhat_norm)},
            {"residual_G_norm_sq", finite_or_null(w.residual_G_norm_sq)},
            {"control_l2_sq", finite_or_null(w.control_l2_sq)},
            {"linear_iterations", w.linear_iterations}};
}

nlohmann::json orhc_summary_json(const ScenarioSetup& setup, const OrhcRunRecord& rec, const DecayFits& fits) {
    nlohmann::json j;
    j["scenario"] = config_json(setup.config);
    j["discretization"] = {{"n_div", setup.mesh.n_div},
                           {"vertices", setup.mesh.num_vertices()},
                           {"triangles", setup.mesh.num_triangles()},
                           {"dt", setup.dt},
                           {"actuators", setup.layout.num_actuators()},
                           {"sensors", setup.layout.num_sensors()}};
    if (setup.basis) {
        j["eigenvalues"] = std::vector<double>(setup.basis->values.data(),
                                               setup.basis->values.data() + setup.basis->values.size());
    }
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : rec.windows) windows.push_back(window_json(w));
    j["run"] = {{"concat_times", rec.concat_times},
                {"theta", rec.theta},
                {"sqz_violations_total", rec.sqz_violations_total},
                {"consecutive_violations", rec.consecutive_violations},
                {"max_consecutive_violations", rec.max_consecutive_violations},
                {"control_energy", finite_or_null(rec.control_energy)},
                {"control_l2_norm", finite_or_null(std::sqrt(rec.control_energy))},
                {"stopped_reason", to_string(rec.stopped_reason)},
                {"final_time", rec.concat_times.back()},
                {"linear_iterations", rec.linear_iterations},
                {"windows", windows}};
    j["fits"] = fits_json(fits);
    return j;
}

void write_trace_csv(const std::vector<WindowRecord>& windows, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << "window,iteration,g_norm_sq,du_sq,dg_sq,stepsize,cost\n";
    for (const auto& w : windows) {
        for (const auto& it : w.trace) {
            os << w.index << ',' << it.iteration << ',' << fmt17(it.g_norm_sq) << ',' << fmt17(it.du_sq) << ','
               << fmt17(it.dg_sq) << ',' << fmt17(it.stepsize) << ',' << fmt17(it.cost) << '\n';
        }
    }
}

void write_json(const nlohmann::json& j, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << j.dump(2) << "\n";
    if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<PlotMarker> plot_markers(const OrhcRunRecord& rec) {
    std::vector<PlotMarker> out;
    for (std::size_t n = 0; n < rec.theta.size() && n + 1 < rec.concat_times.size(); ++n) {
        out.push_back({rec.concat_times[n + 1], !(rec.theta[n] < 1.0)});
    }
    return out;
}

std::string render_semilog_svg(const std::string& title, const std::vector<PlotSeries>& series,
                               const std::vector<PlotMarker>& markers) {
    constexpr double W = 900.0, H = 520.0, L = 80.0, R = 170.0, T = 40.0, B = 50.0;
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double t0 = std::numeric_limits<double>::infinity(), t1 = -t0;
    double lmin = std::log10(eps), lmax = lmin;
    for (const auto& s : series) {
        for (std::size_t i = 0; i < s.t.size(); ++i) {
            t0 = std::min(t0, s.t[i]);
            t1 = std::max(t1, s.t[i]);
            if (s.v[i] > 0.0 && std::isfinite(s.v[i])) {
                const double l = std::log10(s.v[i]);
                lmin = std::min(lmin, l);
                lmax = std::max(lmax, l);
            }
        }
    }
    if (!(t1 > t0)) {
        t0 = 0.0;
        t1 = 1.0;
    }
    lmin = std::floor(lmin);
    lmax = std::ceil(lmax);
    if (lmax <= lmin) lmax = lmin + 1.0;
    auto px = [&](double t) { return L + (t - t0) / (t1 - t0) * (W - L - R); };
    auto py = [&](double l) { return T + (lmax - l) / (lmax - lmin) * (H - T - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << fmt2(L) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\">" << title
       << "</text>\n";
    os << "<rect x=\"" << fmt2(L) << "\" y=\"" << fmt2(T) << "\" width=\"" << fmt2(W - L - R) << "\" height=\""
       << fmt2(H - T - B) << "\" fill=\"none\" stroke=\"black\"/>\n";
    const int step = std::max(1, static_cast<int>(std::ceil((lmax - lmin) / 12.0)));
    for (int e = static_cast<int>(lmin); e <= static_cast<int>(lmax); e += step) {
        os << "<line x1=\"" << fmt2(L - 5) << "\" x2=\"" << fmt2(L) << "\" y1=\"" << fmt2(py(e)) << "\" y2=\""
           << fmt2(py(e)) << "\" stroke=\"black\"/>\n";
        os << "<text x=\"" << fmt2(L - 8) << "\" y=\"" << fmt2(py(e) + 4)
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">1e" << e << "</text>\n";
    }
    for (int i = 0; i <= 8; ++i) {
        const double t = t0 + (t1 - t0) * i / 8.0;
        os << "<text x=\"" << fmt2(px(t)) << "\" y=\"" << fmt2(H - B + 18)
           << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << fmt2(t) << "</text>\n";
    }
    os << "<text x=\"" << fmt2((L + W - R) / 2) << "\" y=\"" << fmt2(H - 10)
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">t</text>\n";
    os << "<line x1=\"" << fmt2(L) << "\" x2=\"" << fmt2(W - R) << "\" y1=\"" << fmt2(py(std::log10(eps)))
       << "\" y2=\"" << fmt2(py(std::log10(eps))) << "\" stroke=\"gray\" stroke-dasharray=\"8,4\"/>\n";
    for (const auto& m : markers) {
        os << "<line x1=\"" << fmt2(px(m.t)) << "\" x2=\"" << fmt2(px(m.t)) << "\" y1=\"" << fmt2(T) << "\" y2=\""
           << fmt2(H - B) << "\" stroke=\"" << (m.violated ? "black" : "gray") << "\""
           << (m.violated ? "" : " stroke-dasharray=\"1,3\"") << " class=\""
           << (m.violated ? "marker-violated" : "marker-ok") << "\"/>\n";
    }
    constexpr std::size_t max_points = 4000;
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const std::size_t stride = std::max<std::size_t>(1, s.t.size() / max_points);
        std::string pts;
        auto flush = [&] {
            if (!pts.empty()) {
                os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.3\" points=\"" << pts
                   << "\"/>\n";
            }
            pts.clear();
        };
        for (std::size_t i = 0; i < s.t.size(); i += stride) {
            const std::size_t k = (i + stride >= s.t.size()) ? s.t.size() - 1 : i;
            if (s.v[k] > 0.0 && std::isfinite(s.v[k])) {
                pts += fmt2(px(s.t[k])) + "," + fmt2(py(std::log10(s.v[k]))) + " ";
            } else {
                flush();
            }
        }
        flush();
        const double ly = T + 20.0 + 20.0 * static_cast<double>(si);
        os << "<line x1=\"" << fmt2(W - R + 12) << "\" x2=\"" << fmt2(W - R + 40) << "\" y1=\"" << fmt2(ly)
           << "\" y2=\"" << fmt2(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << fmt2(W - R + 46) << "\" y=\"" << fmt2(ly + 4)
           << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void write_norm_plot(const std::string& title, const std::vector<NormSample>& history,
                     const std::vector<PlotMarker>& markers, const std::string& path) {
    PlotSeries y{"|y|", "#1f4e9c", {}, {}}, z{"|yhat - y|", "#c0392b", {}, {}}, u{"|u|", "#2e8b57", {}, {}};
    for (const auto& s : history) {
        for (auto* p : {&y, &z, &u}) p->t.push_back(s.t);
        y.v.push_back(s.norm_y);
        z.v.push_back(s.norm_err);
        u.v.push_back(s.norm_u);
    }
    std::vector<PlotSeries> series{y};
    if (std::any_of(z.v.begin(), z.v.end(), [](double v) { return v > 0.0; })) series.push_back(z);
    if (std::any_of(u.v.begin(), u.v.end(), [](double v) { return v > 0.0; })) series.push_back(u);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write '" + path + "'");
    os << render_semilog_svg(title, series, markers);
}

}  // namespace orhc
