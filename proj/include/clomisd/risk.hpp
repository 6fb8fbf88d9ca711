#pragma once

#include "clomisd/pricing.hpp"

#include <optional>
#include <string>
#include <vector>

namespace clomisd {

enum class BumpScheme { Forward, Central };

// How pinned bespoke targets behave under a bump.
//   Hard:   pins re-enforced exactly at their unbumped targets.
//   Soft:   every mapping constraint becomes a quadratic penalty.
//   CoBump: hard pins; when an index tranche is bumped, a pinned bespoke
//           tranche of the same rating moves with it. Same as Hard for
//           loan-price bumps.
enum class BumpConstraintMode { Hard, Soft, CoBump };

struct BumpConfig {
    double bump_size = 1.0;  // points
    BumpScheme scheme = BumpScheme::Forward;
    BumpConstraintMode constraint_mode = BumpConstraintMode::Hard;
    double soft_weight = 100.0;  // used only in Soft mode; scaled units
    // Run independent bump remaps on separate threads.
    bool parallel = true;

    void validate() const;
};

const char* to_string(BumpScheme scheme) noexcept;
const char* to_string(BumpConstraintMode mode) noexcept;
BumpScheme parse_bump_scheme(const std::string& text);
BumpConstraintMode parse_constraint_mode(const std::string& text);

// Bespoke tranche x index tranche sensitivities, points per point. An
// entry is empty when a bumped recalibration or remap failed; the reason
// is recorded in `failures`.
struct Tranche01Matrix {
    std::vector<std::string> bespoke_tranches;
    std::vector<std::string> index_tranches;
    std::vector<std::vector<std::optional<double>>> entries;
    std::vector<std::string> failures;
};

struct RiskReport {
    BumpConfig config;
    std::vector<std::string> bespoke_tranches;
    // Loan-price deltas per bespoke tranche; empty unless computed.
    std::vector<double> deltas;
    std::optional<Tranche01Matrix> tranche01;
};

// Solver settings used for bespoke remaps under `config`.
SolverSettings remap_settings(const SolverSettings& base, const BumpConfig& config);

// d(price_b) / d(bespoke market loan price), K^I held fixed.
TranchePrices loan_price_delta(const CalibratedIndex& index, const BespokeSpec& bespoke,
                               const BumpConfig& config = {}, const SolverSettings& settings = {});

// Recalibrate the index with one quoted price shifted by `bump` points.
CalibratedIndex quote_bump_recalibration(const TranchePVMatrix& pv, const DealQuotes& quotes,
                                         const std::string& tranche, double bump,
                                         const SolverSettings& settings = {});

// Bump each quoted index tranche, recalibrate (index market loan price held
// fixed, so K^I moves), remap the bespoke and difference its prices.
Tranche01Matrix tranche01(const TranchePVMatrix& index_pv, const DealQuotes& index_quotes,
                          const SolverSettings& settings, const BespokeSpec& bespoke,
                          const BumpConfig& config = {});

}  // namespace clomisd
