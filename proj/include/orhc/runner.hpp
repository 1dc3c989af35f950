#pragma once

#include "orhc/report.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace orhc {

struct OrhcRunOutput {
    OrhcRunRecord record;
    DecayFits fits;
    nlohmann::json summary;
    double seconds = 0.0;
};

/// Runs the closed loop for the setup with cfg (normally setup.config.orhc_config()).
/// When out_dir is non-empty it receives norms.csv, summary.json, timings.json,
/// norms.svg (if plots are on) and trace.csv (if verbose). Progress lines go to
/// progress when it is not null.
OrhcRunOutput run_orhc_scenario(const ScenarioSetup& setup, const OrhcConfig& cfg, const std::string& out_dir,
                                std::ostream* progress);

struct FreeRunOutput {
    StateTrajectory trajectory;
    std::vector<NormSample> history;
    LogLinearFit growth;  ///< log ||y|| over [1, T_infty]
};

FreeRunOutput run_free_scenario(const ScenarioSetup& setup, double T, const std::string& out_dir);

struct SweepEntry {
    double T_rh = 0.0;
    OrhcRunOutput output;
};

/// One run per horizon in setup.config.sweep.T_rh, executed by up to
/// sweep.workers threads; run i writes into out_dir/T_rh_<value>.
std::vector<SweepEntry> run_sweep(const ScenarioSetup& setup, const std::string& out_dir, std::ostream* progress);

nlohmann::json sweep_summary_json(const std::vector<SweepEntry>& entries);

}  // namespace orhc
