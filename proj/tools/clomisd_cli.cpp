// clomisd: calibrate / map / risk / synth from the command line.
//
// Exit codes: 0 success, 2 invalid input, 3 solver failure, 1 anything else.

#include "clomisd/deal_model.hpp"
#include "clomisd/errors.hpp"
#include "clomisd/pricing.hpp"
#include "clomisd/report.hpp"
#include "clomisd/risk.hpp"
#include "clomisd/synth_index.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace fs = std::filesystem;
using namespace clomisd;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitSolver = 3;

struct SolverFlags {
    double residual_tol = 1e-8;
    int max_iterations = 200;
    double scale = 100.0;

    void add(CLI::App& app) {
        app.add_option("--residual-tol", residual_tol, "Max constraint residual, scaled units")
            ->capture_default_str();
        app.add_option("--max-iterations", max_iterations, "Newton iteration limit")->capture_default_str();
        app.add_option("--scale", scale, "Divisor applied to coefficients before solving")
            ->capture_default_str();
    }

    SolverSettings settings() const {
        SolverSettings s;
        s.residual_tol = residual_tol;
        s.max_iterations = max_iterations;
        s.scale = scale;
        s.validate();
        return s;
    }
};

std::pair<std::string, double> parse_assignment(const std::string& text, const char* flag) {
    const auto eq = text.rfind('=');
    if (eq == std::string::npos || eq == 0) {
        throw ValidationError(ValidationError::Kind::Malformed,
                              std::string(flag) + " expects NAME=VALUE, got '" + text + "'");
    }
    std::string value = text.substr(eq + 1);
    const char* first = value.data();
    if (!value.empty() && value[0] == '+') ++first;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(first, value.data() + value.size(), v);
    if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size()) {
        throw ValidationError(ValidationError::Kind::Malformed,
                              std::string(flag) + ": cannot parse number in '" + text + "'");
    }
    return {text.substr(0, eq), v};
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
    auto p = out;
    p.replace_extension();
    p += suffix;
    return p;
}

// Bespoke flags shared by `map` and `risk`.
struct BespokeFlags {
    std::string bespoke_quotes;
    std::optional<double> loan_price;
    double manager_adj = 0.0;
    std::vector<std::string> pins;

    void add(CLI::App& app) {
        app.add_option("--bespoke-quotes", bespoke_quotes,
                       "Bespoke quote file: quoted prices become pins, plus ratings and market_loan_price");
        app.add_option("--loan-price", loan_price, "Bespoke average market loan price, points");
        app.add_option("--manager-adj", manager_adj, "Manager quality adjustment, points")
            ->capture_default_str();
        app.add_option("--pin", pins, "Pinned bespoke tranche NAME=PRICE (repeatable)");
    }

    BespokeSpec build(TranchePVMatrix pv) const {
        BespokeSpec spec;
        spec.pv = std::move(pv);
        spec.manager_adjustment = manager_adj;
        if (!bespoke_quotes.empty()) {
            const auto quotes = load_quotes(bespoke_quotes);
            for (const auto& t : quotes.tranches()) {
                if (!t.rating.empty()) spec.ratings.emplace_back(t.name, t.rating);
            }
            if (pins.empty()) spec.pinned_tranches = quotes.prices();
            spec.market_loan_price = quotes.market_loan_price();
        }
        if (!pins.empty()) {
            for (const auto& p : pins) spec.pinned_tranches.push_back(parse_assignment(p, "--pin"));
        }
        if (loan_price) spec.market_loan_price = loan_price;
        return spec;
    }

    Json echo() const {
        return {{"bespoke_quotes", bespoke_quotes},
                {"loan_price", loan_price ? Json(*loan_price) : Json(nullptr)},
                {"manager_adj", manager_adj},
                {"pins", pins}};
    }
};

Json header(const std::string& command, Json config) {
    return {{"tool", "clomisd"}, {"command", command}, {"config", std::move(config)}};
}

void merge(Json& into, const Json& from) {
    for (const auto& [k, v] : from.items()) into[k] = v;
}

// ------------------------------------------------------------------ commands

struct CalibrateCmd {
    std::string scenarios, pv, quotes, out, misd_csv;
    std::vector<std::string> bumps;
    std::optional<double> market_loan_price;
    SolverFlags solver;

    int run() const {
        const auto settings = solver.settings();
        const auto set = load_scenarios(scenarios);
        const auto matrix = load_pv_matrix(pv, set);
        auto q = load_quotes(quotes);
        if (market_loan_price) {
            q = DealQuotes(q.tranches(), *market_loan_price, q.attributes());
        }
        Json applied = Json::object();
        for (const auto& b : bumps) {
            const auto [name, shift] = parse_assignment(b, "--bump");
            const auto resolved = q.resolve(name);
            if (!resolved) {
                throw ValidationError(ValidationError::Kind::MissingColumn,
                                      "--bump: no tranche or unique rating '" + name + "'");
            }
            q = q.with_bumped_price(*resolved, shift);
            applied[*resolved] = shift;
        }
        const auto index = calibrate_index(matrix, q, settings);

        Json report = header("calibrate", {{"scenarios", scenarios},
                                           {"pv", pv},
                                           {"quotes", quotes},
                                           {"bumps", applied},
                                           {"solver", to_json(settings)}});
        merge(report, calibration_json(index));
        const fs::path csv_path = misd_csv.empty() ? sibling(out, "_misd.csv") : fs::path(misd_csv);
        const auto csv = clomisd::misd_csv(index.misd, set);
        write_file_atomic(out, report.dump(2) + "\n");
        write_file_atomic(csv_path, csv);
        return 0;
    }
};

struct MapCmd {
    std::string index_report, pv, out, misd_csv, constraint_mode = "hard";
    double soft_weight = 100.0;
    BespokeFlags bespoke;
    SolverFlags solver;

    int run() const {
        auto settings = solver.settings();
        if (constraint_mode == "soft") {
            settings.mode = ConstraintMode::Soft;
            settings.soft_weight = soft_weight;
        } else if (constraint_mode != "hard") {
            throw ValidationError(ValidationError::Kind::InvalidSettings,
                                  "--constraint-mode must be hard or soft");
        }
        settings.validate();
        const auto state = index_state_from_report(load_json(index_report));
        const auto spec = bespoke.build(load_pv_matrix(pv, state.scenarios));
        const auto result = map_bespoke(state.misd, state.scenarios, state.basis, spec, settings);

        Json config = {{"index_report", index_report}, {"pv", pv}};
        merge(config, bespoke.echo());
        config["solver"] = to_json(settings);
        Json report = header("map", std::move(config));
        merge(report, mapping_json(result, spec, state.basis, state.scenarios));
        const fs::path csv_path = misd_csv.empty() ? sibling(out, "_misd.csv") : fs::path(misd_csv);
        const auto csv = clomisd::misd_csv(result.misd, state.scenarios);
        write_file_atomic(out, report.dump(2) + "\n");
        write_file_atomic(csv_path, csv);
        return 0;
    }
};

struct RiskCmd {
    std::string scenarios, pv, quotes, bespoke_pv, out, csv, mode = "delta";
    std::string scheme = "forward", constraint_mode = "hard";
    double bump = 1.0, soft_weight = 100.0;
    bool serial = false;
    BespokeFlags bespoke;
    SolverFlags solver;

    int run() const {
        const auto settings = solver.settings();
        BumpConfig config;
        config.bump_size = bump;
        config.scheme = parse_bump_scheme(scheme);
        config.constraint_mode = parse_constraint_mode(constraint_mode);
        config.soft_weight = soft_weight;
        config.parallel = !serial;
        config.validate();
        if (mode != "delta" && mode != "tranche01") {
            throw ValidationError(ValidationError::Kind::InvalidSettings, "--mode must be delta or tranche01");
        }

        const auto set = load_scenarios(scenarios);
        const auto index_pv = load_pv_matrix(pv, set);
        const auto index_quotes = load_quotes(quotes);
        const auto spec = bespoke.build(load_pv_matrix(bespoke_pv, set));
        const auto index = calibrate_index(index_pv, index_quotes, settings);
        const auto baseline = map_bespoke(index, spec, remap_settings(settings, config));

        RiskReport risk;
        risk.config = config;
        risk.bespoke_tranches = spec.pv.tranche_names();
        std::string matrix_csv;
        if (mode == "delta") {
            for (const auto& [name, d] : loan_price_delta(index, spec, config, settings)) {
                risk.deltas.push_back(d);
            }
            matrix_csv = deltas_csv(risk);
        } else {
            risk.tranche01 = tranche01(index_pv, index_quotes, settings, spec, config);
            matrix_csv = tranche01_csv(*risk.tranche01);
            for (const auto& f : risk.tranche01->failures) std::cerr << "tranche01: " << f << '\n';
        }

        Json echo = {{"mode", mode},
                     {"scenarios", scenarios},
                     {"pv", pv},
                     {"quotes", quotes},
                     {"bespoke_pv", bespoke_pv}};
        merge(echo, bespoke.echo());
        echo["solver"] = to_json(settings);
        Json report = header("risk", std::move(echo));
        report["index"] = calibration_json(index);
        report["bespoke"] = mapping_json(baseline, spec, index.basis, set);
        report["risk"] = to_json(risk);

        const fs::path csv_path = csv.empty() ? sibling(out, "_" + mode + ".csv") : fs::path(csv);
        write_file_atomic(out, report.dump(2) + "\n");
        write_file_atomic(csv_path, matrix_csv);
        return 0;
    }
};

struct SynthCmd {
    std::string spec, scenarios, out;
    int periods = 0;

    int run() const {
        const auto deal = load_synthetic_spec(spec);
        const auto set = load_scenarios(scenarios);
        const int n = periods > 0 ? periods : deal.default_periods();
        const auto matrix = build_pv_matrix(deal, set, n);
        std::ostringstream text;
        write_pv_matrix(text, matrix);
        write_file_atomic(out, text.str());
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Scenario-distribution pricing and risk for cash CLO tranches"};
    app.require_subcommand(1);

    CalibrateCmd calibrate;
    auto* cal = app.add_subcommand("calibrate", "Calibrate the index MISD to tranche quotes");
    cal->add_option("--scenarios", calibrate.scenarios, "Scenario CSV")->required();
    cal->add_option("--pv", calibrate.pv, "Index PV matrix CSV")->required();
    cal->add_option("--quotes", calibrate.quotes, "Index quote file")->required();
    cal->add_option("--out", calibrate.out, "JSON report path")->required();
    cal->add_option("--misd-csv", calibrate.misd_csv, "MISD CSV path (default <out>_misd.csv)");
    cal->add_option("--bump", calibrate.bumps, "Shift a quote before calibrating, NAME=DELTA (repeatable)");
    cal->add_option("--market-loan-price", calibrate.market_loan_price, "Override the index market loan price");
    calibrate.solver.add(*cal);

    MapCmd map;
    auto* mp = app.add_subcommand("map", "Map the index MISD to a bespoke deal");
    mp->add_option("--index-report", map.index_report, "Report written by `calibrate`")->required();
    mp->add_option("--pv", map.pv, "Bespoke PV matrix CSV")->required();
    mp->add_option("--out", map.out, "JSON report path")->required();
    mp->add_option("--misd-csv", map.misd_csv, "MISD CSV path (default <out>_misd.csv)");
    mp->add_option("--constraint-mode", map.constraint_mode, "hard | soft")->capture_default_str();
    mp->add_option("--soft-weight", map.soft_weight, "Penalty weight in soft mode")->capture_default_str();
    map.bespoke.add(*mp);
    map.solver.add(*mp);

    RiskCmd risk;
    auto* rk = app.add_subcommand("risk", "Loan-price delta or tranche01 by bump-remap-reprice");
    rk->add_option("--scenarios", risk.scenarios, "Scenario CSV")->required();
    rk->add_option("--pv", risk.pv, "Index PV matrix CSV")->required();
    rk->add_option("--quotes", risk.quotes, "Index quote file")->required();
    rk->add_option("--bespoke-pv", risk.bespoke_pv, "Bespoke PV matrix CSV")->required();
    rk->add_option("--out", risk.out, "JSON report path")->required();
    rk->add_option("--csv", risk.csv, "Matrix CSV path (default <out>_<mode>.csv)");
    rk->add_option("--mode", risk.mode, "delta | tranche01")->capture_default_str();
    rk->add_option("--bump", risk.bump, "Bump size, points")->capture_default_str();
    rk->add_option("--scheme", risk.scheme, "forward | central")->capture_default_str();
    rk->add_option("--constraint-mode", risk.constraint_mode, "hard | soft | co-bump")->capture_default_str();
    rk->add_option("--soft-weight", risk.soft_weight, "Penalty weight in soft mode")->capture_default_str();
    rk->add_flag("--serial", risk.serial, "Run bump remaps on one thread");
    risk.bespoke.add(*rk);
    risk.solver.add(*rk);

    SynthCmd synth;
    auto* sy = app.add_subcommand("synth", "Generate a synthetic-index PV matrix");
    sy->add_option("--spec", synth.spec, "Synthetic deal spec (key = value)")->required();
    sy->add_option("--scenarios", synth.scenarios, "Scenario CSV")->required();
    sy->add_option("--out", synth.out, "PV matrix CSV path")->required();
    sy->add_option("--periods", synth.periods, "Cashflow periods (default maturity x frequency)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (*cal) return calibrate.run();
        if (*mp) return map.run();
        if (*rk) return risk.run();
        if (*sy) return synth.run();
    } catch (const ValidationError& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
        return kExitValidation;
    } catch (const SolverError& e) {
        std::cerr << "solver error [" << to_string(e.kind()) << "]: " << e.what() << '\n';
        if (!e.residuals().empty()) {
            std::cerr << "residuals:";
            for (double r : e.residuals()) std::cerr << ' ' << r;
            std::cerr << '\n';
        }
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
