#include "clomisd/risk.hpp"

#include "clomisd/errors.hpp"

#include <cmath>
#include <functional>
#include <future>

namespace clomisd {

namespace {

// Runs the tasks, on worker threads when `parallel`, and returns results in
// task order.
template <typename T>
std::vector<T> run_all(std::vector<std::function<T()>> tasks, bool parallel) {
    std::vector<T> out;
    out.reserve(tasks.size());
    if (!parallel) {
        for (auto& task : tasks) out.push_back(task());
        return out;
    }
    std::vector<std::future<T>> futures;
    for (auto& task : tasks) futures.push_back(std::async(std::launch::async, task));
    for (auto& f : futures) out.push_back(f.get());
    return out;
}

std::string rating_or_name(const std::vector<std::pair<std::string, std::string>>& ratings,
                           const std::string& name) {
    for (const auto& [n, r] : ratings) {
        if (n == name && !r.empty()) return r;
    }
    return name;
}

}  // namespace

void BumpConfig::validate() const {
    if (!(bump_size > 0.0) || !std::isfinite(bump_size)) {
        throw ValidationError(ValidationError::Kind::InvalidSettings, "bump_size must be > 0");
    }
    if (constraint_mode == BumpConstraintMode::Soft && !(soft_weight > 0.0)) {
        throw ValidationError(ValidationError::Kind::InvalidSettings, "soft_weight must be > 0");
    }
}

const char* to_string(BumpScheme scheme) noexcept {
    return scheme == BumpScheme::Forward ? "forward" : "central";
}

const char* to_string(BumpConstraintMode mode) noexcept {
    switch (mode) {
        case BumpConstraintMode::Hard: return "hard";
        case BumpConstraintMode::Soft: return "soft";
        case BumpConstraintMode::CoBump: return "co-bump";
    }
    return "hard";
}

BumpScheme parse_bump_scheme(const std::string& text) {
    if (text == "forward") return BumpScheme::Forward;
    if (text == "central") return BumpScheme::Central;
    throw ValidationError(ValidationError::Kind::InvalidSettings, "unknown bump scheme '" + text + "'");
}

BumpConstraintMode parse_constraint_mode(const std::string& text) {
    if (text == "hard") return BumpConstraintMode::Hard;
    if (text == "soft") return BumpConstraintMode::Soft;
    if (text == "co-bump" || text == "cobump") return BumpConstraintMode::CoBump;
    throw ValidationError(ValidationError::Kind::InvalidSettings,
                          "unknown constraint mode '" + text + "'");
}

SolverSettings remap_settings(const SolverSettings& base, const BumpConfig& config) {
    SolverSettings s = base;
    if (config.constraint_mode == BumpConstraintMode::Soft) {
        s.mode = ConstraintMode::Soft;
        s.soft_weight = config.soft_weight;
    } else {
        s.mode = ConstraintMode::Hard;
    }
    return s;
}

TranchePrices loan_price_delta(const CalibratedIndex& index, const BespokeSpec& bespoke,
                               const BumpConfig& config, const SolverSettings& settings) {
    config.validate();
    if (!bespoke.market_loan_price) {
        throw ValidationError(ValidationError::Kind::MissingMarketLoanPrice,
                              "loan price delta needs a bespoke market loan price");
    }
    const SolverSettings s = remap_settings(settings, config);
    const double h = config.bump_size;
    const double up_shift = h;
    const double down_shift = config.scheme == BumpScheme::Central ? -h : 0.0;

    const auto shifted = [&](double shift) {
        return [&, shift] {
            BespokeSpec b = bespoke;
            b.market_loan_price = *bespoke.market_loan_price + shift;
            return map_bespoke(index, b, s).prices;
        };
    };
    const auto results = run_all<TranchePrices>({shifted(up_shift), shifted(down_shift)}, config.parallel);

    TranchePrices deltas;
    const double width = up_shift - down_shift;
    for (std::size_t j = 0; j < results[0].size(); ++j) {
        deltas.emplace_back(results[0][j].first, (results[0][j].second - results[1][j].second) / width);
    }
    return deltas;
}

CalibratedIndex quote_bump_recalibration(const TranchePVMatrix& pv, const DealQuotes& quotes,
                                         const std::string& tranche, double bump,
                                         const SolverSettings& settings) {
    if (!std::isfinite(bump)) {
        throw ValidationError(ValidationError::Kind::InvalidSettings, "bump must be finite");
    }
    return calibrate_index(pv, quotes.with_bumped_price(tranche, bump), settings);
}

Tranche01Matrix tranche01(const TranchePVMatrix& index_pv, const DealQuotes& index_quotes,
                          const SolverSettings& settings, const BespokeSpec& bespoke,
                          const BumpConfig& config) {
    config.validate();
    const SolverSettings map_settings = remap_settings(settings, config);
    const auto baseline_index = calibrate_index(index_pv, index_quotes, settings);
    const auto baseline = map_bespoke(baseline_index, bespoke, map_settings).prices;

    Tranche01Matrix out;
    out.bespoke_tranches = bespoke.pv.tranche_names();
    for (const auto& [name, price] : index_quotes.prices()) out.index_tranches.push_back(name);

    const double h = config.bump_size;
    const bool central = config.scheme == BumpScheme::Central;

    struct Column {
        std::vector<std::optional<double>> values;
        std::string failure;
    };

    // Bumped bespoke prices for one index tranche and signed shift.
    const auto remap = [&](const std::string& index_tranche, double shift) {
        const auto bumped = quote_bump_recalibration(index_pv, index_quotes, index_tranche, shift, settings);
        BespokeSpec b = bespoke;
        if (config.constraint_mode == BumpConstraintMode::CoBump) {
            std::string index_rating = index_quotes.rating(index_tranche).value_or(index_tranche);
            for (auto& [pinned, target] : b.pinned_tranches) {
                if (rating_or_name(bespoke.ratings, pinned) == index_rating) target += shift;
            }
        }
        return map_bespoke(bumped, b, map_settings).prices;
    };

    std::vector<std::function<Column()>> tasks;
    for (const auto& index_tranche : out.index_tranches) {
        tasks.push_back([&, index_tranche]() -> Column {
            Column col;
            try {
                const auto up = remap(index_tranche, h);
                const auto down = central ? remap(index_tranche, -h) : baseline;
                const double width = central ? 2.0 * h : h;
                for (std::size_t b = 0; b < up.size(); ++b) {
                    col.values.emplace_back((up[b].second - down[b].second) / width);
                }
            } catch (const SolverError& e) {
                col.values.assign(baseline.size(), std::nullopt);
                col.failure = index_tranche + ": " + to_string(e.kind()) + ": " + e.what();
            }
            return col;
        });
    }
    const auto columns = run_all<Column>(std::move(tasks), config.parallel);

    out.entries.assign(out.bespoke_tranches.size(),
                       std::vector<std::optional<double>>(out.index_tranches.size()));
    for (std::size_t j = 0; j < columns.size(); ++j) {
        for (std::size_t b = 0; b < out.bespoke_tranches.size(); ++b) {
            out.entries[b][j] = columns[j].values[b];
        }
        if (!columns[j].failure.empty()) out.failures.push_back(columns[j].failure);
    }
    return out;
}

}  // namespace clomisd
