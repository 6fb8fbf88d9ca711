#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clomisd {

// One loan-market state. Rates are fractions (0.03 == 3%).
struct Scenario {
    int id = 0;
    double cadr = 0.0;  // constant annualized default rate
    double capr = 0.0;  // constant annualized prepayment rate
    double crr = 0.0;   // constant recovery rate, fraction of par

    bool operator==(const Scenario&) const = default;
};

// Ordered, non-empty set of scenarios with strictly increasing ids and
// distinct CADR keys.
class ScenarioSet {
public:
    ScenarioSet() = default;
    explicit ScenarioSet(std::vector<Scenario> scenarios);

    std::size_t size() const noexcept { return scenarios_.size(); }
    bool empty() const noexcept { return scenarios_.empty(); }
    const Scenario& operator[](std::size_t i) const { return scenarios_[i]; }
    std::span<const Scenario> scenarios() const noexcept { return scenarios_; }
    auto begin() const noexcept { return scenarios_.begin(); }
    auto end() const noexcept { return scenarios_.end(); }

    // Row index of the scenario whose CADR (in percent) equals `cadr_percent`.
    std::optional<std::size_t> find_by_cadr_percent(double cadr_percent) const;

    std::vector<double> cadr() const;
    std::vector<double> capr() const;
    std::vector<double> crr() const;

    bool operator==(const ScenarioSet&) const = default;

private:
    std::vector<Scenario> scenarios_;
};

// Per-scenario tranche PVs in price points, plus the collateral column.
// Rows are aligned to the owned ScenarioSet.
class TranchePVMatrix {
public:
    TranchePVMatrix() = default;
    TranchePVMatrix(ScenarioSet scenarios, std::vector<std::string> tranche_names,
                    std::vector<std::vector<double>> rows, std::vector<double> collateral);

    const ScenarioSet& scenarios() const noexcept { return scenarios_; }
    std::size_t scenario_count() const noexcept { return scenarios_.size(); }
    std::size_t tranche_count() const noexcept { return tranche_names_.size(); }
    const std::vector<std::string>& tranche_names() const noexcept { return tranche_names_; }
    std::vector<int> scenario_ids() const;

    double value(std::size_t scenario, std::size_t tranche) const {
        return values_[scenario * tranche_names_.size() + tranche];
    }
    std::optional<std::size_t> tranche_index(const std::string& name) const;
    std::vector<double> column(std::size_t tranche) const;
    std::vector<double> column(const std::string& name) const;
    std::vector<double> row(std::size_t scenario) const;
    const std::vector<double>& collateral() const noexcept { return collateral_; }

    bool operator==(const TranchePVMatrix&) const = default;

private:
    ScenarioSet scenarios_;
    std::vector<std::string> tranche_names_;
    std::vector<double> values_;  // row-major, scenario x tranche
    std::vector<double> collateral_;
};

// Informational per-tranche data. Never used by the pricing math.
struct TrancheInfo {
    std::string name;
    std::optional<double> price;  // points; absent == not quoted
    std::string notional;
    std::string rating;
    std::string coupon;

    bool operator==(const TrancheInfo&) const = default;
};

// Market quotes for one deal. `tranches` keeps file order and includes
// unquoted rows; `prices()` lists only the quoted ones.
class DealQuotes {
public:
    DealQuotes() = default;
    DealQuotes(std::vector<TrancheInfo> tranches, std::optional<double> market_loan_price,
               std::vector<std::pair<std::string, std::string>> attributes = {});

    std::vector<std::pair<std::string, double>> prices() const;
    std::optional<double> price(const std::string& name) const;
    const std::vector<TrancheInfo>& tranches() const noexcept { return tranches_; }
    std::optional<double> market_loan_price() const noexcept { return market_loan_price_; }
    const std::vector<std::pair<std::string, std::string>>& attributes() const noexcept {
        return attributes_;
    }
    std::optional<std::string> rating(const std::string& name) const;
    // Resolve a tranche by name, falling back to a unique rating match.
    std::optional<std::string> resolve(const std::string& name_or_rating) const;

    // Copy with one quoted price shifted by `bump` points.
    DealQuotes with_bumped_price(const std::string& name, double bump) const;

    bool operator==(const DealQuotes&) const = default;

private:
    std::vector<TrancheInfo> tranches_;
    std::optional<double> market_loan_price_;
    std::vector<std::pair<std::string, std::string>> attributes_;
};

ScenarioSet parse_scenarios(std::istream& in);
TranchePVMatrix parse_pv_matrix(std::istream& in, const ScenarioSet& scenarios);
DealQuotes parse_quotes(std::istream& in);

ScenarioSet load_scenarios(const std::filesystem::path& path);
TranchePVMatrix load_pv_matrix(const std::filesystem::path& path, const ScenarioSet& scenarios);
DealQuotes load_quotes(const std::filesystem::path& path);

void write_scenarios(std::ostream& out, const ScenarioSet& scenarios);
void write_pv_matrix(std::ostream& out, const TranchePVMatrix& pv);
void write_quotes(std::ostream& out, const DealQuotes& quotes);

// Shortest decimal text that parses back to exactly `value`.
std::string format_exact(double value);
// Percent text p such that parse(p) / 100 == fraction exactly.
std::string format_percent(double fraction);

}  // namespace clomisd
