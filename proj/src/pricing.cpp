#include "clomisd/pricing.hpp"

#include "clomisd/errors.hpp"

namespace clomisd {

namespace {

void require_alignment(const Misd& misd, std::size_t rows, const char* what) {
    if (misd.size() != rows) {
        throw ValidationError(ValidationError::Kind::Misaligned,
                              std::string(what) + ": distribution has " + std::to_string(misd.size()) +
                                  " weights, expected " + std::to_string(rows));
    }
}

}  // namespace

double CalibratedIndex::require_basis() const {
    if (!basis) {
        throw ValidationError(ValidationError::Kind::MissingMarketLoanPrice,
                              "index quotes carry no market_loan_price; basis unavailable");
    }
    return *basis;
}

CalibratedIndex calibrate_index(const TranchePVMatrix& pv, const DealQuotes& quotes,
                                const SolverSettings& settings) {
    std::vector<ConstraintSpec> constraints;
    for (const auto& [name, price] : quotes.prices()) {
        const auto j = pv.tranche_index(name);
        if (!j) {
            throw ValidationError(ValidationError::Kind::MissingColumn,
                                  "quoted tranche '" + name + "' has no PV column");
        }
        constraints.push_back({pv.column(*j), price, name});
    }
    auto solved = solve_maxent(constraints, pv.scenario_count(), settings);

    CalibratedIndex out{std::move(solved.misd), quotes, pv, {}, std::nullopt,
                        std::move(solved.diagnostics)};
    out.implied = implied_expectations(out.misd, pv.scenarios(), pv.collateral());
    if (quotes.market_loan_price()) {
        out.basis = implied_basis(out.implied.collateral_price, *quotes.market_loan_price());
    }
    return out;
}

ImpliedQuantities implied_expectations(const Misd& misd, const ScenarioSet& scenarios,
                                       std::span<const double> collateral) {
    require_alignment(misd, scenarios.size(), "implied_expectations");
    if (collateral.size() != scenarios.size()) {
        throw ValidationError(ValidationError::Kind::Misaligned,
                              "implied_expectations: collateral column length mismatch");
    }
    ImpliedQuantities q;
    q.cadr = misd.expectation(scenarios.cadr());
    q.capr = misd.expectation(scenarios.capr());
    q.crr = misd.expectation(scenarios.crr());
    q.collateral_price = misd.expectation(collateral);
    return q;
}

BespokeResult map_bespoke(const CalibratedIndex& index, const BespokeSpec& bespoke,
                          const SolverSettings& settings) {
    return map_bespoke(index.misd, index.pv.scenarios(), index.basis, bespoke, settings);
}

BespokeResult map_bespoke(const Misd& index_misd, const ScenarioSet& index_scenarios,
                          std::optional<double> index_basis, const BespokeSpec& bespoke,
                          const SolverSettings& settings) {
    const auto& pv = bespoke.pv;
    if (!(pv.scenarios() == index_scenarios) || index_misd.size() != pv.scenario_count()) {
        throw ValidationError(ValidationError::Kind::Misaligned,
                              "bespoke and index PV matrices use different scenario sets");
    }

    std::vector<ConstraintSpec> constraints;
    std::optional<double> collateral_target;
    if (bespoke.market_loan_price) {
        if (!index_basis) {
            throw ValidationError(ValidationError::Kind::MissingMarketLoanPrice,
                                  "index has no market loan price, so its basis is unknown");
        }
        collateral_target = *index_basis + *bespoke.market_loan_price + bespoke.manager_adjustment;
        constraints.push_back({pv.collateral(), *collateral_target, "COL"});
    }
    for (const auto& [name, target] : bespoke.pinned_tranches) {
        const auto j = pv.tranche_index(name);
        if (!j) {
            throw ValidationError(ValidationError::Kind::PinnedTrancheUnknown,
                                  "pinned tranche '" + name + "' not in bespoke PV matrix");
        }
        constraints.push_back({pv.column(*j), target, name});
    }

    auto solved = solve_min_cross_entropy(index_misd, constraints, settings);
    BespokeResult out;
    out.prices = price_tranches(solved.misd, pv);
    out.implied = implied_expectations(solved.misd, pv.scenarios(), pv.collateral());
    out.misd = std::move(solved.misd);
    out.diagnostics = std::move(solved.diagnostics);
    out.collateral_target = collateral_target;
    return out;
}

TranchePrices price_tranches(const Misd& misd, const TranchePVMatrix& pv) {
    require_alignment(misd, pv.scenario_count(), "price_tranches");
    TranchePrices prices;
    for (std::size_t j = 0; j < pv.tranche_count(); ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < pv.scenario_count(); ++i) acc += misd[i] * pv.value(i, j);
        prices.emplace_back(pv.tranche_names()[j], acc);
    }
    return prices;
}

double price_of(const TranchePrices& prices, const std::string& name) {
    for (const auto& [n, p] : prices) {
        if (n == name) return p;
    }
    throw ValidationError(ValidationError::Kind::MissingColumn, "no price for tranche '" + name + "'");
}

}  // namespace clomisd
