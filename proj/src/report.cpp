#include "clomisd/report.hpp"

#include "clomisd/errors.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace clomisd {

namespace {

Json number_or_null(const std::optional<double>& v) {
    return v ? Json(round12(*v)) : Json(nullptr);
}

Json prices_json(const TranchePrices& prices) {
    Json out = Json::object();
    for (const auto& [name, price] : prices) out[name] = round12(price);
    return out;
}

}  // namespace

double round12(double value) {
    if (!std::isfinite(value) || value == 0.0) return value;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", value);
    return std::strtod(buf, nullptr);
}

Json to_json(const ScenarioSet& scenarios) {
    Json out = Json::array();
    for (const auto& s : scenarios) {
        out.push_back({{"id", s.id}, {"cadr", round12(s.cadr)}, {"capr", round12(s.capr)},
                       {"crr", round12(s.crr)}});
    }
    return out;
}

Json to_json(const ImpliedQuantities& implied) {
    return {{"cadr", round12(implied.cadr)},
            {"capr", round12(implied.capr)},
            {"crr", round12(implied.crr)},
            {"collateral_price", round12(implied.collateral_price)}};
}

Json to_json(const SolveDiagnostics& d) {
    Json multipliers = Json::array();
    for (double v : d.multipliers) multipliers.push_back(round12(v));
    Json residuals = Json::array();
    for (double v : d.residuals) residuals.push_back(round12(v));
    return {{"status", d.status},
            {"feasible", d.feasible},
            {"iterations", d.iterations},
            {"objective", round12(d.objective)},
            {"multipliers", multipliers},
            {"residuals", residuals},
            {"max_residual_scaled", round12(d.max_residual_scaled)},
            {"rank_deficient", d.rank_deficient},
            {"min_hessian_eigenvalue", round12(d.min_hessian_eigenvalue)}};
}

Json to_json(const SolverSettings& s) {
    return {{"residual_tol", s.residual_tol},
            {"max_iterations", s.max_iterations},
            {"scale", s.scale},
            {"mode", s.mode == ConstraintMode::Hard ? "hard" : "soft"},
            {"soft_weight", s.soft_weight}};
}

Json to_json(const BumpConfig& c) {
    return {{"bump_size", c.bump_size},
            {"scheme", to_string(c.scheme)},
            {"constraint_mode", to_string(c.constraint_mode)},
            {"soft_weight", c.soft_weight}};
}

Json to_json(const Tranche01Matrix& m) {
    Json rows = Json::array();
    for (std::size_t b = 0; b < m.bespoke_tranches.size(); ++b) {
        Json row = Json::object();
        for (std::size_t j = 0; j < m.index_tranches.size(); ++j) {
            row[m.index_tranches[j]] = number_or_null(m.entries[b][j]);
        }
        rows.push_back({{"bespoke_tranche", m.bespoke_tranches[b]}, {"sensitivities", row}});
    }
    return {{"index_tranches", m.index_tranches}, {"rows", rows}, {"failures", m.failures}};
}

Json to_json(const RiskReport& r) {
    Json out = {{"config", to_json(r.config)}};
    if (!r.deltas.empty()) {
        Json deltas = Json::object();
        for (std::size_t j = 0; j < r.deltas.size(); ++j) deltas[r.bespoke_tranches[j]] = round12(r.deltas[j]);
        out["deltas"] = deltas;
    }
    if (r.tranche01) out["tranche01"] = to_json(*r.tranche01);
    return out;
}

Json misd_json(const Misd& misd, const ScenarioSet& scenarios) {
    Json out = Json::array();
    for (std::size_t i = 0; i < misd.size(); ++i) {
        out.push_back({{"scenario_id", scenarios[i].id},
                       {"cadr_key", round12(scenarios[i].cadr * 100.0)},
                       {"weight", round12(misd[i])}});
    }
    return out;
}

Json calibration_json(const CalibratedIndex& index) {
    const auto model = price_tranches(index.misd, index.pv);
    Json tranches = Json::array();
    for (const auto& [name, market] : index.quotes.prices()) {
        const double m = price_of(model, name);
        tranches.push_back({{"tranche", name},
                            {"market", round12(market)},
                            {"model", round12(m)},
                            {"error", round12(m - market)}});
    }
    return {{"scenarios", to_json(index.pv.scenarios())},
            {"misd", misd_json(index.misd, index.pv.scenarios())},
            {"tranche_prices", tranches},
            {"model_prices", prices_json(model)},
            {"implied", to_json(index.implied)},
            {"market_loan_price", number_or_null(index.quotes.market_loan_price())},
            {"basis", number_or_null(index.basis)},
            {"diagnostics", to_json(index.diagnostics)}};
}

Json mapping_json(const BespokeResult& result, const BespokeSpec& spec,
                  std::optional<double> index_basis, const ScenarioSet& scenarios) {
    Json pins = Json::object();
    for (const auto& [name, target] : spec.pinned_tranches) pins[name] = round12(target);
    return {{"scenarios", to_json(scenarios)},
            {"misd", misd_json(result.misd, scenarios)},
            {"model_prices", prices_json(result.prices)},
            {"implied", to_json(result.implied)},
            {"index_basis", number_or_null(index_basis)},
            {"market_loan_price", number_or_null(spec.market_loan_price)},
            {"manager_adjustment", round12(spec.manager_adjustment)},
            {"collateral_target", number_or_null(result.collateral_target)},
            {"pinned_tranches", pins},
            {"diagnostics", to_json(result.diagnostics)}};
}

IndexState index_state_from_report(const Json& report) {
    try {
        std::vector<Scenario> scenarios;
        for (const auto& s : report.at("scenarios")) {
            scenarios.push_back({s.at("id").get<int>(), s.at("cadr").get<double>(),
                                 s.at("capr").get<double>(), s.at("crr").get<double>()});
        }
        std::vector<double> weights;
        for (const auto& w : report.at("misd")) weights.push_back(w.at("weight").get<double>());
        if (weights.size() != scenarios.size()) {
            throw ValidationError(ValidationError::Kind::Misaligned,
                                  "index report: misd and scenario counts differ");
        }
        std::optional<double> basis;
        if (report.contains("basis") && !report.at("basis").is_null()) {
            basis = report.at("basis").get<double>();
        }
        // Weights were rounded to 12 digits when written.
        return {ScenarioSet(std::move(scenarios)), Misd::normalized(std::move(weights)), basis};
    } catch (const Json::exception& e) {
        throw ValidationError(ValidationError::Kind::Malformed, std::string("index report: ") + e.what());
    }
}

Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(ValidationError::Kind::Malformed, "cannot open '" + path.string() + "'");
    }
    try {
        return Json::parse(in);
    } catch (const Json::exception& e) {
        throw ValidationError(ValidationError::Kind::Malformed,
                              "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

std::string misd_csv(const Misd& misd, const ScenarioSet& scenarios) {
    std::ostringstream out;
    out << "cadr_key,weight\n";
    for (std::size_t i = 0; i < misd.size(); ++i) {
        out << format_percent(scenarios[i].cadr) << ',' << Json(round12(misd[i])).dump() << '\n';
    }
    return out.str();
}

std::string tranche01_csv(const Tranche01Matrix& m) {
    std::ostringstream out;
    out << "bespoke_tranche";
    for (const auto& name : m.index_tranches) out << ',' << name;
    out << '\n';
    for (std::size_t b = 0; b < m.bespoke_tranches.size(); ++b) {
        out << m.bespoke_tranches[b];
        for (const auto& v : m.entries[b]) {
            out << ',';
            if (v) out << Json(round12(*v)).dump();
        }
        out << '\n';
    }
    return out.str();
}

std::string deltas_csv(const RiskReport& r) {
    std::ostringstream out;
    out << "bespoke_tranche,delta\n";
    for (std::size_t j = 0; j < r.deltas.size(); ++j) {
        out << r.bespoke_tranches[j] << ',' << Json(round12(r.deltas[j])).dump() << '\n';
    }
    return out.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write '" + tmp.string() + "'");
        out << content;
        out.flush();
        if (!out) throw Error("write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw Error("cannot move output into place at '" + path.string() + "'");
    }
}

}  // namespace clomisd
