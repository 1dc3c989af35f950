#include "orhc/checks.hpp"
#include "orhc/runner.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace orhc;

namespace {

py::object to_python(const nlohmann::json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

py::dict history_dict(const std::vector<NormSample>& h) {
    std::vector<double> t, y, z, u;
    std::vector<bool> concat, ok;
    for (const auto& s : h) {
        t.push_back(s.t);
        y.push_back(s.norm_y);
        z.push_back(s.norm_err);
        u.push_back(s.norm_u);
        concat.push_back(s.is_concat_time);
        ok.push_back(s.squeeze_ok);
    }
    py::dict d;
    d["t"] = t;
    d["norm_y"] = y;
    d["norm_err"] = z;
    d["norm_u"] = u;
    d["is_concat_time"] = concat;
    d["squeeze_ok"] = ok;
    return d;
}

struct Scenario {
    std::shared_ptr<ScenarioSetup> setup;

    Scenario(const std::string& text, const std::vector<std::string>& overrides) {
        ScenarioConfig cfg = text.empty() ? scenario_preset("paper-5.1") : parse_scenario(text);
        apply_overrides(cfg, overrides);
        setup = build_scenario(cfg);
    }
};

}  // namespace

PYBIND11_MODULE(_orhc, m) {
    m.doc() = "Output-based receding horizon control of a parabolic system";

    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<GeometryError>(m, "GeometryError", PyExc_ValueError);

    m.def("preset_text", [](const std::string& name) { return format_scenario(scenario_preset(name)); },
          py::arg("name") = "paper-5.1");
    m.def("normalize_config", [](const std::string& text) { return format_scenario(parse_scenario(text)); },
          "Parses a scenario and returns its canonical text");
    m.def("analytic_neumann_spectrum", &analytic_neumann_spectrum, py::arg("count"));
    m.def(
        "fit_log_linear",
        [](const std::vector<double>& t, const std::vector<double>& v) {
            const double inf = std::numeric_limits<double>::infinity();
            const LogLinearFit f = fit_log_linear(t, v, -inf, inf);
            return py::make_tuple(f.slope, f.intercept, f.points);
        },
        py::arg("t"), py::arg("v"));

    py::class_<Scenario>(m, "Scenario")
        .def(py::init<const std::string&, const std::vector<std::string>&>(), py::arg("config") = "",
             py::arg("overrides") = std::vector<std::string>{})
        .def_property_readonly("config", [](const Scenario& s) { return format_scenario(s.setup->config); })
        .def_property_readonly("dt", [](const Scenario& s) { return s.setup->dt; })
        .def_property_readonly("num_dofs", [](const Scenario& s) { return s.setup->ops.size(); })
        .def_property_readonly("num_actuators", [](const Scenario& s) { return s.setup->layout.num_actuators(); })
        .def_property_readonly("y0", [](const Scenario& s) { return s.setup->y0; })
        .def_property_readonly("yhat0", [](const Scenario& s) { return s.setup->yhat0; })
        .def_property_readonly("eigenvalues",
                               [](const Scenario& s) {
                                   if (!s.setup->basis) return Vector(0);
                                   return s.setup->basis->values;
                               })
        .def("mass_norm", [](const Scenario& s, const Vector& v) { return s.setup->ops.mass_norm(v); })
        .def(
            "run_free",
            [](const Scenario& s, double T, const std::string& out_dir) {
                FreeRunOutput r;
                {
                    py::gil_scoped_release release;
                    r = run_free_scenario(*s.setup, T, out_dir);
                }
                py::dict d = history_dict(r.history);
                d["growth_slope"] = r.growth.slope;
                return d;
            },
            py::arg("T"), py::arg("out_dir") = "")
        .def(
            "run_orhc",
            [](const Scenario& s, py::object T_rh, py::object T_infty, const std::string& out_dir) {
                OrhcConfig cfg = s.setup->config.orhc_config();
                if (!T_rh.is_none()) cfg.T_rh = T_rh.cast<double>();
                if (!T_infty.is_none()) cfg.T_infty = T_infty.cast<double>();
                cfg.validate();
                OrhcRunOutput r;
                {
                    py::gil_scoped_release release;
                    r = run_orhc_scenario(*s.setup, cfg, out_dir, nullptr);
                }
                py::dict d;
                d["history"] = history_dict(r.record.norm_history);
                d["summary"] = to_python(r.summary);
                return d;
            },
            py::arg("T_rh") = py::none(), py::arg("T_infty") = py::none(), py::arg("out_dir") = "")
        .def("checks", [](const Scenario& s) {
            py::list out;
            for (const auto& c : run_check_suite(*s.setup)) {
                py::dict d;
                d["name"] = c.name;
                d["passed"] = c.passed;
                d["value"] = c.value;
                d["threshold"] = c.threshold;
                d["detail"] = c.detail;
                out.append(d);
            }
            return out;
        });
}
