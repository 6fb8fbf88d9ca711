#pragma once

#include "clomisd/deal_model.hpp"
#include "clomisd/entropy_solver.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace clomisd {

// Expectations of scenario attributes under a MISD. Rates are fractions,
// collateral_price is in points.
struct ImpliedQuantities {
    double cadr = 0.0;
    double capr = 0.0;
    double crr = 0.0;
    double collateral_price = 0.0;
};

using TranchePrices = std::vector<std::pair<std::string, double>>;

struct CalibratedIndex {
    Misd misd;
    DealQuotes quotes;
    TranchePVMatrix pv;
    ImpliedQuantities implied;
    // Implied collateral minus market loan average; empty when the quotes
    // carry no market loan price.
    std::optional<double> basis;
    SolveDiagnostics diagnostics;

    // Throws ValidationError(MissingMarketLoanPrice) when basis is absent.
    double require_basis() const;
};

struct BespokeSpec {
    TranchePVMatrix pv;
    // Average market price of the bespoke loans (points). Empty: the loan
    // constraint is omitted from the mapping.
    std::optional<double> market_loan_price;
    double manager_adjustment = 0.0;
    // Tranche name -> target price. Kept in insertion order.
    std::vector<std::pair<std::string, double>> pinned_tranches;
    // Optional tranche name -> rating, used to line bespoke tranches up with
    // index tranches in risk reports.
    std::vector<std::pair<std::string, std::string>> ratings;
};

struct BespokeResult {
    Misd misd;
    TranchePrices prices;
    ImpliedQuantities implied;
    SolveDiagnostics diagnostics;
    // Target of the loan constraint, when one was applied.
    std::optional<double> collateral_target;
};

CalibratedIndex calibrate_index(const TranchePVMatrix& pv, const DealQuotes& quotes,
                                const SolverSettings& settings = {});

ImpliedQuantities implied_expectations(const Misd& misd, const ScenarioSet& scenarios,
                                       std::span<const double> collateral);

inline double implied_basis(double implied_collateral, double market_loan_price) {
    return implied_collateral - market_loan_price;
}

BespokeResult map_bespoke(const CalibratedIndex& index, const BespokeSpec& bespoke,
                          const SolverSettings& settings = {});

// Same mapping from a stored index state: prior MISD, its scenario set and
// basis (empty if the index had no market loan price).
BespokeResult map_bespoke(const Misd& index_misd, const ScenarioSet& index_scenarios,
                          std::optional<double> index_basis, const BespokeSpec& bespoke,
                          const SolverSettings& settings = {});

TranchePrices price_tranches(const Misd& misd, const TranchePVMatrix& pv);

// Price of one named tranche in a TranchePrices list.
double price_of(const TranchePrices& prices, const std::string& name);

}  // namespace clomisd
