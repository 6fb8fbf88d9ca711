#pragma once

#include "clomisd/deal_model.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace clomisd {

struct SyntheticTranche {
    std::string name;
    double attachment = 0.0;     // fraction of original portfolio notional
    double detachment = 0.0;
    double coupon_spread = 0.0;  // fraction per year over the floating index
};

// LCDX-style funded tranches on a loan portfolio driven by one scenario.
// The floating index is the period forward rate implied by the flat
// continuously-compounded discount_rate, so zero-spread notes price at par.
struct SyntheticDealSpec {
    std::vector<SyntheticTranche> tranches;
    double maturity = 5.0;           // years
    int payment_frequency = 4;       // per year; default grid resolution
    double portfolio_spread = 0.0;   // fraction per year paid by the loans
    double discount_rate = 0.0;      // flat, continuously compounded

    // Throws ValidationError(InvalidTranching / InvalidSettings).
    void validate() const;
    int default_periods() const;
};

struct LossPathPoint {
    double time = 0.0;           // years, end of period
    double outstanding = 0.0;    // performing notional after the period
    double cumulative_loss = 0.0;
    double cumulative_recovered = 0.0;  // recoveries plus prepayments
    double cumulative_defaulted = 0.0;
};

// One point per period; all quantities are fractions of original notional.
// Defaults and prepayments compete for the same outstanding notional: each
// period a fraction 1 - (1-cadr)^dt (1-capr)^dt leaves the pool, split in
// proportion to the two hazard rates -ln(1-cadr) and -ln(1-capr). With
// either rate zero this is the plain per-period rate of the other.
std::vector<LossPathPoint> loss_path(const Scenario& scenario, double maturity, int periods);

struct SyntheticPrices {
    std::vector<double> tranche_prices;  // points, in spec tranche order
    double collateral_price = 0.0;       // points per 100 notional
};

SyntheticPrices synth_tranche_pv(const SyntheticDealSpec& spec, const Scenario& scenario, int periods);

TranchePVMatrix build_pv_matrix(const SyntheticDealSpec& spec, const ScenarioSet& scenarios, int periods);

// Remaining, written-down and amortized notional of [attachment, detachment]
// given cumulative portfolio loss and cumulative principal paid.
struct TrancheSlice {
    double remaining = 0.0;
    double written_down = 0.0;
    double amortized = 0.0;
};
TrancheSlice tranche_slice(double attachment, double detachment, double cumulative_loss,
                           double cumulative_recovered);

// key = value lines; '#' starts a comment. `tranche = NAME, a, d, spread`
// may repeat.
SyntheticDealSpec parse_synthetic_spec(std::istream& in);
SyntheticDealSpec load_synthetic_spec(const std::filesystem::path& path);

}  // namespace clomisd
