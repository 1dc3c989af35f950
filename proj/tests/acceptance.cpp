#include "orhc/checks.hpp"
#include "orhc/runner.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

using namespace orhc;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    Verdict() = default;
    Verdict(int i, std::string t) : id(i), title(std::move(t)) {}

    int id = 0;
    std::string title;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

double since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double v, int digits = 4) {
    std::ostringstream os;
    os.precision(digits);
    os << v;
    return os.str();
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Decay clearly outside the +-0.05 band that counts as stagnation.
bool stabilizing(const OrhcRunOutput& o) {
    return o.record.stopped_reason == StopReason::reached_T_infty && o.fits.state.valid() && o.fits.state.slope < -0.05;
}

std::string join(const std::vector<std::string>& parts) {
    std::string s;
    for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? "; " : "") + parts[i];
    return s;
}

std::string run_brief(const OrhcRunOutput& o) {
    const auto& r = o.record;
    return "Sqz=" + std::to_string(r.sqz_violations_total) + " maxcons=" + std::to_string(r.max_consecutive_violations) +
           " stop=" + to_string(r.stopped_reason) + " t_end=" + num(r.concat_times.back()) +
           " slope=" + num(o.fits.state.slope);
}

class Acceptance {
public:
    Acceptance(fs::path out, std::set<int> only) : out_(std::move(out)), only_(std::move(only)) {}

    int run() {
        fs::create_directories(out_);
        for (int id = 1; id <= 10; ++id) {
            if (!only_.empty() && !only_.count(id)) continue;
            const auto t0 = std::chrono::steady_clock::now();
            Verdict v;
            v.id = id;
            try {
                v = evaluate(id);
            } catch (const std::exception& e) {
                v.passed = false;
                v.detail = std::string("exception: ") + e.what();
            }
            v.id = id;
            v.seconds = since(t0);
            std::cout << "criterion " << id << " " << (v.passed ? "PASS" : "FAIL") << "  " << v.title << ": "
                      << v.detail << " [" << num(v.seconds, 3) << " s]\n"
                      << std::flush;
            verdicts_.push_back(v);
        }
        nlohmann::json rows = nlohmann::json::array();
        bool all = true;
        for (const auto& v : verdicts_) {
            all = all && v.passed;
            rows.push_back({{"criterion", v.id}, {"title", v.title}, {"passed", v.passed}, {"detail", v.detail},
                            {"seconds", v.seconds}});
        }
        write_json({{"criteria", rows}, {"all_passed", all}}, (out_ / "acceptance.json").string());
        return all ? 0 : 1;
    }

private:
    fs::path out_;
    std::set<int> only_;
    std::vector<Verdict> verdicts_;
    std::unique_ptr<ScenarioSetup> level0_, level1_, lambda19_;
    std::vector<SweepEntry> sweep_;
    std::optional<OrhcRunOutput> run19_, long100_;
    std::vector<double> sweep_seconds_;

    static ScenarioConfig base_config() {
        ScenarioConfig c = scenario_preset("paper-5.1");
        c.output.plots = true;
        return c;
    }

    ScenarioSetup& level0() {
        if (!level0_) level0_ = build_scenario(base_config());
        return *level0_;
    }

    ScenarioSetup& level1() {
        if (!level1_) {
            ScenarioConfig c = base_config();
            c.mesh.refinement_level = 1;
            level1_ = build_scenario(c);
        }
        return *level1_;
    }

    ScenarioSetup& lambda19() {
        if (!lambda19_) {
            ScenarioConfig c = base_config();
            c.observer.lambda = 19.0;
            lambda19_ = build_scenario(c);
        }
        return *lambda19_;
    }

    OrhcRunOutput orhc(const ScenarioSetup& s, const OrhcConfig& cfg, const std::string& name) {
        std::cerr << "running " << name << "\n" << std::flush;
        return run_orhc_scenario(s, cfg, (out_ / name).string(), nullptr);
    }

    const std::vector<SweepEntry>& sweep() {
        if (sweep_.empty()) {
            const auto t0 = std::chrono::steady_clock::now();
            std::cerr << "running the horizon sweep\n" << std::flush;
            sweep_ = run_sweep(level0(), (out_ / "sweep").string(), &std::cerr);
            sweep_seconds_.push_back(since(t0));
        }
        return sweep_;
    }

    const OrhcRunOutput& run_lambda100() {
        for (const auto& e : sweep()) {
            if (e.T_rh == level0().config.rhc.T_rh) return e.output;
        }
        throw std::runtime_error("the sweep does not contain the default horizon");
    }

    const OrhcRunOutput& run_lambda19() {
        if (!run19_) run19_ = orhc(lambda19(), lambda19().config.orhc_config(), "lambda_19");
        return *run19_;
    }

    const OrhcRunOutput& run_long100() {
        if (!long100_) {
            OrhcConfig cfg = level0().config.orhc_config();
            cfg.T_infty = 100.0;
            long100_ = orhc(level0(), cfg, "long_lambda_100");
        }
        return *long100_;
    }

    Verdict evaluate(int id) {
        switch (id) {
            case 1: return spectral();
            case 2: return gradient();
            case 3: return cn_order();
            case 4: return separation();
            case 5: return free_instability();
            case 6: return horizon_sweep();
            case 7: return observer_gain();
            case 8: return tolerance_degradation();
            case 9: return decay_bound();
            case 10: return determinism();
        }
        throw std::logic_error("unknown criterion");
    }

    Verdict spectral() {
        Verdict v(1, "spectral oracle");
        const CheckResult c0 = check_spectrum(*level0().basis, 0.02, "spectrum_level0");
        const CheckResult c1 = check_spectrum(*level1().basis, 0.005, "spectrum_level1");
        const double t0 = level0().setup_seconds, t1 = level1().setup_seconds;
        v.passed = c0.passed && c1.passed && t0 < 30.0 && t1 < 30.0;
        v.detail = "level 0 " + num(c0.value) + " <= 0.02, level 1 " + num(c1.value) + " <= 0.005, setup " + num(t0, 3) +
                   " s / " + num(t1, 3) + " s < 30 s";
        return v;
    }

    Verdict gradient() {
        Verdict v(2, "adjoint gradient");
        const auto t0 = std::chrono::steady_clock::now();
        const CheckResult c = check_gradient_fd(level0(), 0.25, 10, 1e-5, 1e-4, level0().config.seed);
        const double secs = since(t0);
        v.passed = c.passed && secs < 120.0;
        v.detail = c.detail + ", " + num(secs, 3) + " s < 120 s";
        return v;
    }

    Verdict cn_order() {
        Verdict v(3, "Crank-Nicolson order");
        const CheckResult c = check_cn_order(level0(), 0.2, level0().dt);
        v.passed = c.passed;
        v.detail = c.detail;
        return v;
    }

    Verdict separation() {
        Verdict v(4, "separation principle");
        const CheckResult c = check_separation(level0(), 1.0, 1e-9);
        v.passed = c.passed;
        v.detail = c.detail;
        return v;
    }

    Verdict free_instability() {
        Verdict v(5, "free instability");
        const auto f0 = run_free_scenario(level0(), 4.0, (out_ / "free_level0").string());
        const auto f1 = run_free_scenario(level1(), 4.0, (out_ / "free_level1").string());
        double worst = 0.0;
        for (int i = 0; i <= 40; ++i) {
            const double t = 0.1 * i;
            const auto k0 = static_cast<std::size_t>(std::lround(t / level0().dt));
            const auto k1 = static_cast<std::size_t>(std::lround(t / level1().dt));
            const double a = f0.trajectory.norms.at(k0), b = f1.trajectory.norms.at(k1);
            worst = std::max(worst, std::abs(a - b) / b);
        }
        const bool grows = f0.trajectory.norms.back() > f0.trajectory.norms.front();
        v.passed = grows && f0.growth.slope > 0.0 && f1.growth.slope > 0.0 && worst <= 0.05;
        v.detail = "|y(4)|/|y(0)| = " + num(f0.trajectory.norms.back() / f0.trajectory.norms.front()) +
                   ", slope on [1,4] " + num(f0.growth.slope) + " (level 1 " + num(f1.growth.slope) +
                   "), level 0 vs 1 max relative gap " + num(worst) + " <= 0.05";
        return v;
    }

    Verdict horizon_sweep() {
        Verdict v(6, "horizon sweep");
        const auto& entries = sweep();
        bool ok = sweep_seconds_.front() < 1800.0;
        std::vector<std::string> d;
        for (const auto& e : entries) {
            const auto& r = e.output.record;
            bool good = false;
            if (e.T_rh == 0.5) {
                const bool grows = !r.norm_history.empty() && r.norm_history.back().norm_y > r.norm_history.front().norm_y;
                good = r.stopped_reason == StopReason::squeeze_stop && r.consecutive_violations >= 10 && grows;
            } else if (e.T_rh == 1.0) {
                good = r.sqz_violations_total <= 3 && stabilizing(e.output);
            } else {
                good = r.sqz_violations_total == 0 && stabilizing(e.output);
            }
            ok = ok && good;
            d.push_back("T_rh=" + num(e.T_rh) + " " + (good ? "ok" : "BAD") + " (" + run_brief(e.output) + ")");
        }
        v.passed = ok && entries.size() == 6;
        d.push_back("sweep " + num(sweep_seconds_.front(), 4) + " s < 1800 s");
        v.detail = join(d);
        return v;
    }

    Verdict observer_gain() {
        Verdict v(7, "observer gain");
        const auto& a = run_lambda100();
        const auto& b = run_lambda19();
        const double ra = a.fits.error.rate(), rb = b.fits.error.rate();
        const bool sqz = a.record.sqz_violations_total == 0 && b.record.sqz_violations_total == 0;
        const bool order = ra > rb;
        const bool dominated = a.fits.state.rate() <= ra && b.fits.state.rate() <= rb;
        v.passed = sqz && order && dominated;
        const auto& l = run_long100();
        const double tb = l.fits.time_below_1e14;
        const bool best_effort = tb >= 0.0 && tb < 40.0;
        v.detail = "lambda=100: " + run_brief(a) + " error rate " + num(ra) + "; lambda=19: " + run_brief(b) +
                   " error rate " + num(rb) + "; best-effort long run " + (best_effort ? "ok" : "not met") +
                   " (min |z|/|z0| = " + num(l.fits.min_relative_error) + ", first t below 1e-14: " + num(tb) +
                   ", " + run_brief(l) + ")";
        return v;
    }

    Verdict tolerance_degradation() {
        Verdict v(8, "tolerance degradation");
        bool ok = true;
        std::vector<std::string> d;
        for (ScenarioSetup* s : {&level0(), &lambda19()}) {
            OrhcConfig cfg = s->config.orhc_config();
            cfg.T_infty = 100.0;
            cfg.tolerances.low = {1e-8, 1e-4};
            const double lambda = s->config.observer.lambda;
            const auto o = orhc(*s, cfg, "loose_lambda_" + num(lambda));
            const auto& r = o.record;
            const bool flat = o.fits.final_third.valid() && std::abs(o.fits.final_third.slope) <= 0.05;
            bool good = flat;
            if (lambda == 100.0) {
                good = good && r.stopped_reason == StopReason::squeeze_stop &&
                       r.sqz_violations_total >= cfg.squeeze.total_limit && r.concat_times.back() < 100.0;
            }
            ok = ok && good;
            d.push_back("lambda=" + num(lambda) + " " + (good ? "ok" : "BAD") + " (" + run_brief(o) +
                        ", final-third slope " + num(o.fits.final_third.slope) + ")");
        }
        v.passed = ok;
        v.detail = join(d);
        return v;
    }

    Verdict decay_bound() {
        Verdict v(9, "exponential decay bound");
        std::vector<std::pair<std::string, const OrhcRunOutput*>> runs;
        for (const auto& e : sweep()) runs.emplace_back("T_rh=" + num(e.T_rh), &e.output);
        runs.emplace_back("lambda=19", &run_lambda19());
        runs.emplace_back("long lambda=100", &run_long100());
        bool ok = true;
        int used = 0;
        std::vector<std::string> d;
        for (const auto& [name, o] : runs) {
            if (!stabilizing(*o)) continue;
            ++used;
            const auto& b = o->fits.bound;
            const bool good = b.holds && b.mu > 0.0 && std::isfinite(b.D) && std::isfinite(o->record.control_energy);
            ok = ok && good;
            d.push_back(name + " " + (good ? "ok" : "BAD") + " (mu " + num(b.mu) + ", D " + num(b.D) + ", D_fit " +
                        num(b.D_fit) + ", |u|_L2 " + num(std::sqrt(o->record.control_energy)) + ")");
        }
        v.passed = ok && used > 0;
        v.detail = std::to_string(used) + " stabilizing runs: " + join(d);
        return v;
    }

    Verdict determinism() {
        Verdict v(10, "determinism");
        OrhcConfig cfg = level0().config.orhc_config();
        cfg.T_rh = 1.0;
        cfg.T_infty = 1.5;
        level0().config.output.verbose = true;
        const auto a = orhc(level0(), cfg, "determinism_a");
        const auto b = orhc(level0(), cfg, "determinism_b");
        level0().config.output.verbose = false;
        bool ok = true;
        std::vector<std::string> d;
        for (const char* f : {"norms.csv", "summary.json", "trace.csv", "norms.svg"}) {
            const std::string x = read_file(out_ / "determinism_a" / f);
            const std::string y = read_file(out_ / "determinism_b" / f);
            const bool same = !x.empty() && x == y;
            ok = ok && same;
            d.push_back(std::string(f) + (same ? " identical (" + std::to_string(x.size()) + " bytes)" : " differs"));
        }
        v.passed = ok;
        v.detail = join(d);
        return v;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string out = "acceptance_out";
    std::vector<int> only;
    app.add_option("--out", out, "Output directory");
    app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 10));
    CLI11_PARSE(app, argc, argv);
    return Acceptance(out, {only.begin(), only.end()}).run();
}
