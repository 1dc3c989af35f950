#pragma once

#include "orhc/orhc.hpp"
#include "orhc/scenario.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <vector>

namespace orhc {

/// Least-squares line through (t, log v).
struct LogLinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double max_residual = 0.0;  ///< largest log(v) - fit(t)
    int points = 0;

    bool valid() const { return points >= 2; }
    double rate() const { return -slope; }
};

/// Fits over samples with t in [t_min, t_max] and v > 0, skipping those where skip[i] is set.
LogLinearFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& v, double t_min, double t_max,
                            const std::vector<bool>& skip = {});

/// Exponential envelope ||(y, z)(t_n)|| <= D e^{-mu t_n} ||(y0, z0)|| from the run's own regression.
struct DecayBound {
    double mu = 0.0;      ///< fitted rate
    double D = 0.0;       ///< smallest constant for which every sample obeys the bound
    double D_fit = 0.0;   ///< constant from the regression intercept
    bool holds = false;   ///< mu > 0 and every sample obeys the bound
};

struct DecayFits {
    LogLinearFit state;       ///< log ||y(t_n)||
    LogLinearFit error;       ///< log ||yhat - y||(t_n), above the rounding floor
    LogLinearFit combined;    ///< log ||(y, z)(t_n)||
    LogLinearFit final_third; ///< log ||y(t_n)|| over the last third of the run
    DecayBound bound;
    double error_floor_ratio = 1e-13;  ///< error samples below this times ||y|| are excluded
    double min_relative_error = 0.0;   ///< min ||z(t)|| / ||z(0)|| over the history
    double time_below_1e14 = -1.0;     ///< first t with ||z(t)|| / ||z(0)|| < 1e-14, or -1
};

/// Samples at concatenation times, one per time (the right-sided row).
std::vector<NormSample> concatenation_samples(const std::vector<NormSample>& history);

DecayFits compute_decay_fits(const std::vector<NormSample>& history);

/// CSV with the fixed header t,norm_y,norm_err,norm_u_pointwise,is_concat_time,squeeze_ok.
void write_norm_csv(const std::vector<NormSample>& history, std::ostream& os);
void write_norm_csv(const std::vector<NormSample>& history, const std::string& path);
std::vector<NormSample> read_norm_csv(std::istream& is);
std::vector<NormSample> read_norm_csv_file(const std::string& path);

/// Samples of an uncontrolled run; error and control columns are zero.
std::vector<NormSample> free_history(const StateTrajectory& tr);

nlohmann::json config_json(const ScenarioConfig& cfg);
nlohmann::json fits_json(const DecayFits& fits);
nlohmann::json window_json(const WindowRecord& w);

/// Run summary without wall-clock fields, so identical runs serialize identically.
nlohmann::json orhc_summary_json(const ScenarioSetup& setup, const OrhcRunRecord& rec, const DecayFits& fits);

/// Convergence trace rows: window,iteration,g_norm_sq,du_sq,dg_sq,stepsize,cost.
void write_trace_csv(const std::vector<WindowRecord>& windows, const std::string& path);

void write_json(const nlohmann::json& j, const std::string& path);

/// Marker at each t_n (n >= 1); violated is true where the squeezing property failed.
struct PlotMarker {
    double t = 0.0;
    bool violated = false;
};
std::vector<PlotMarker> plot_markers(const OrhcRunRecord& rec);

struct PlotSeries {
    std::string label;
    std::string color;
    std::vector<double> t;
    std::vector<double> v;
};

/// Semilog SVG line plot with vertical markers (dotted where the squeezing
/// property held, solid where violated) and a dashed machine-precision line.
std::string render_semilog_svg(const std::string& title, const std::vector<PlotSeries>& series,
                               const std::vector<PlotMarker>& markers);

/// Norm plot of a run: ||y||, ||yhat - y|| and |u| against t.
void write_norm_plot(const std::string& title, const std::vector<NormSample>& history,
                     const std::vector<PlotMarker>& markers, const std::string& path);

}  // namespace orhc
