#include "clomisd/entropy_solver.hpp"
#include "clomisd/errors.hpp"
#include "clomisd/pricing.hpp"
#include "clomisd/report.hpp"
#include "clomisd/risk.hpp"
#include "clomisd/synth_index.hpp"

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace clomisd;

namespace {

BespokeSpec bespoke_from(const std::string& pv_path, const ScenarioSet& scenarios,
                         const std::optional<std::string>& quotes_path) {
    BespokeSpec spec;
    spec.pv = load_pv_matrix(pv_path, scenarios);
    if (quotes_path) {
        const auto quotes = load_quotes(*quotes_path);
        spec.pinned_tranches = quotes.prices();
        spec.market_loan_price = quotes.market_loan_price();
        for (const auto& t : quotes.tranches()) {
            if (!t.rating.empty()) spec.ratings.emplace_back(t.name, t.rating);
        }
    }
    return spec;
}

std::string calibrate(const std::string& scenarios, const std::string& pv, const std::string& quotes) {
    const auto set = load_scenarios(scenarios);
    return calibration_json(calibrate_index(load_pv_matrix(pv, set), load_quotes(quotes))).dump();
}

std::string map(const std::string& scenarios, const std::string& index_pv, const std::string& index_quotes,
                const std::string& bespoke_pv, const std::optional<std::string>& bespoke_quotes) {
    const auto set = load_scenarios(scenarios);
    const auto index = calibrate_index(load_pv_matrix(index_pv, set), load_quotes(index_quotes));
    const auto spec = bespoke_from(bespoke_pv, set, bespoke_quotes);
    return mapping_json(map_bespoke(index, spec), spec, index.basis, set).dump();
}

std::string risk(const std::string& scenarios, const std::string& index_pv, const std::string& index_quotes,
                 const std::string& bespoke_pv, const std::string& bespoke_quotes, const std::string& mode,
                 const std::string& constraint_mode, double bump, const std::string& scheme) {
    const auto set = load_scenarios(scenarios);
    const auto pv = load_pv_matrix(index_pv, set);
    const auto quotes = load_quotes(index_quotes);
    const auto spec = bespoke_from(bespoke_pv, set, bespoke_quotes);
    RiskReport report;
    report.config.bump_size = bump;
    report.config.scheme = parse_bump_scheme(scheme);
    report.config.constraint_mode = parse_constraint_mode(constraint_mode);
    report.config.validate();
    report.bespoke_tranches = spec.pv.tranche_names();
    if (mode == "delta") {
        for (const auto& [name, d] : loan_price_delta(calibrate_index(pv, quotes), spec, report.config)) {
            report.deltas.push_back(d);
        }
    } else if (mode == "tranche01") {
        report.tranche01 = tranche01(pv, quotes, {}, spec, report.config);
    } else {
        throw ValidationError(ValidationError::Kind::InvalidSettings, "mode must be delta or tranche01");
    }
    return to_json(report).dump();
}

std::string synth(const std::string& spec_path, const std::string& scenarios, std::optional<int> periods) {
    const auto deal = load_synthetic_spec(spec_path);
    std::ostringstream out;
    write_pv_matrix(out, build_pv_matrix(deal, load_scenarios(scenarios), periods.value_or(deal.default_periods())));
    return out.str();
}

py::dict maxent(const std::vector<std::vector<double>>& coefficients, const std::vector<double>& targets,
                std::size_t n, const std::optional<std::vector<double>>& prior) {
    if (coefficients.size() != targets.size()) {
        throw ValidationError(ValidationError::Kind::Misaligned, "one target per coefficient row");
    }
    std::vector<ConstraintSpec> constraints;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        constraints.push_back({coefficients[k], targets[k], "c" + std::to_string(k)});
    }
    const auto r = prior ? solve_min_cross_entropy(Misd::normalized(*prior), constraints)
                         : solve_maxent(constraints, n);
    py::dict out;
    out["weights"] = r.misd.weights();
    out["multipliers"] = r.diagnostics.multipliers;
    out["residuals"] = r.diagnostics.residuals;
    out["iterations"] = r.diagnostics.iterations;
    out["objective"] = r.diagnostics.objective;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
    py::register_exception<SolverError>(m, "SolverError", base.ptr());

    m.def("calibrate", &calibrate, py::arg("scenarios"), py::arg("pv"), py::arg("quotes"));
    m.def("map", &map, py::arg("scenarios"), py::arg("index_pv"), py::arg("index_quotes"), py::arg("bespoke_pv"),
          py::arg("bespoke_quotes") = py::none());
    m.def("risk", &risk, py::arg("scenarios"), py::arg("index_pv"), py::arg("index_quotes"), py::arg("bespoke_pv"),
          py::arg("bespoke_quotes"), py::arg("mode") = "delta", py::arg("constraint_mode") = "hard",
          py::arg("bump") = 1.0, py::arg("scheme") = "forward");
    m.def("synth", &synth, py::arg("spec"), py::arg("scenarios"), py::arg("periods") = py::none());
    m.def("maxent", &maxent, py::arg("coefficients"), py::arg("targets"), py::arg("n"),
          py::arg("prior") = py::none());
}
