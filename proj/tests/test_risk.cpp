#include "clomisd/errors.hpp"
#include "clomisd/risk.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <cmath>

using namespace clomisd;
namespace fx = clomisd::testing;

namespace {

const CalibratedIndex& index() {
    static const CalibratedIndex idx = calibrate_index(fx::index_pv(), fx::index_quotes());
    return idx;
}

BespokeSpec default_bespoke() {
    BespokeSpec b;
    b.pv = fx::bespoke_pv();
    b.market_loan_price = fx::bespoke_quotes().market_loan_price();
    b.pinned_tranches = fx::bespoke_quotes().prices();
    for (const auto& t : fx::bespoke_quotes().tranches()) b.ratings.push_back({t.name, t.rating});
    return b;
}

std::vector<double> values(const TranchePrices& p) {
    std::vector<double> out;
    for (const auto& [n, v] : p) out.push_back(v);
    return out;
}

}  // namespace

TEST_CASE("loan price deltas are non-negative and fall with seniority") {
    for (auto mode : {BumpConstraintMode::Hard, BumpConstraintMode::CoBump, BumpConstraintMode::Soft}) {
        CAPTURE(to_string(mode));
        BumpConfig cfg;
        cfg.constraint_mode = mode;
        const auto d = values(loan_price_delta(index(), default_bespoke(), cfg));
        REQUIRE(d.size() == 6);
        for (double v : d) CHECK(v >= -0.01);
        // Columns run senior to junior, so deltas must not decrease along the row.
        for (std::size_t j = 1; j < d.size(); ++j) CHECK(d[j] >= d[j - 1] - 1e-9);
    }
}

TEST_CASE("hard pins have zero delta") {
    const auto d = loan_price_delta(index(), default_bespoke());
    CHECK(std::abs(d[0].second) < 1e-6);
}

TEST_CASE("a tranche whose PV never changes has zero delta") {
    auto spec = default_bespoke();
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < spec.pv.scenario_count(); ++i) {
        auto r = spec.pv.row(i);
        r.push_back(77.0);
        rows.push_back(r);
    }
    auto names = spec.pv.tranche_names();
    names.push_back("FLAT");
    spec.pv = TranchePVMatrix(spec.pv.scenarios(), names, rows, spec.pv.collateral());
    const auto d = loan_price_delta(index(), spec);
    CHECK(std::abs(price_of(d, "FLAT")) < 1e-10);
}

TEST_CASE("two-scenario toy delta") {
    const ScenarioSet set({{0, 0.0, 0.1, 0.8}, {1, 0.1, 0.1, 0.5}});
    const TranchePVMatrix pv(set, {"T"}, {{40.0}, {60.0}}, {80.0, 90.0});
    CalibratedIndex idx{Misd::uniform(2), DealQuotes({{"T", 50.0, "", "", ""}}, 85.0), pv, {}, 0.0, {}};
    BespokeSpec spec;
    spec.pv = pv;
    spec.market_loan_price = 85.0;
    // Target 85 -> 86 moves the upper weight from 0.5 to 0.6: the tranche moves 20 * 0.1.
    for (auto scheme : {BumpScheme::Forward, BumpScheme::Central}) {
        BumpConfig cfg;
        cfg.scheme = scheme;
        const auto d = loan_price_delta(idx, spec, cfg);
        CHECK(d[0].second == doctest::Approx(2.0).epsilon(1e-9));
    }
}

TEST_CASE("forward and central schemes agree") {
    BumpConfig fwd;
    BumpConfig cen;
    cen.scheme = BumpScheme::Central;
    cen.bump_size = 0.5;
    const auto a = values(loan_price_delta(index(), default_bespoke(), fwd));
    const auto b = values(loan_price_delta(index(), default_bespoke(), cen));
    for (std::size_t j = 0; j < a.size(); ++j) {
        CAPTURE(j);
        CHECK(std::abs(a[j] - b[j]) <= std::max(0.05, 0.1 * std::abs(b[j])));
    }
}

TEST_CASE("delta requires a bespoke loan price and a valid config") {
    auto spec = default_bespoke();
    spec.market_loan_price.reset();
    CHECK_THROWS_AS(loan_price_delta(index(), spec), ValidationError);
    BumpConfig bad;
    bad.bump_size = 0.0;
    CHECK_THROWS_AS(loan_price_delta(index(), default_bespoke(), bad), ValidationError);
    CHECK_THROWS_AS(parse_bump_scheme("backward"), ValidationError);
    CHECK_THROWS_AS(parse_constraint_mode("loose"), ValidationError);
    CHECK(parse_constraint_mode("co-bump") == BumpConstraintMode::CoBump);
    CHECK(parse_constraint_mode("cobump") == BumpConstraintMode::CoBump);
}

TEST_CASE("zero quote bump reproduces the calibration") {
    const auto r = quote_bump_recalibration(fx::index_pv(), fx::index_quotes(), "B", 0.0);
    CHECK(r.misd == index().misd);
}

TEST_CASE("AA +5 bump converges and reprices the bumped quotes") {
    const auto r = quote_bump_recalibration(fx::index_pv(), fx::index_quotes(), "B", 5.0);
    const auto model = price_tranches(r.misd, r.pv);
    for (const auto& [name, price] : r.quotes.prices()) CHECK(std::abs(price_of(model, name) - price) <= 0.01);
    CHECK(price_of(model, "B") == doctest::Approx(87.16).epsilon(1e-8));
    CHECK(r.diagnostics.feasible);
}

TEST_CASE("an unattainable bump raises a solver error with residuals") {
    try {
        quote_bump_recalibration(fx::index_pv(), fx::index_quotes(), "B", -90.0);
        FAIL("expected SolverError");
    } catch (const SolverError& e) {
        CHECK(e.residuals().size() == 6);
    }
}

TEST_CASE("self-mapping tranche01") {
    BespokeSpec spec;
    spec.pv = fx::index_pv();
    spec.pinned_tranches = fx::index_quotes().prices();
    const auto m = tranche01(fx::index_pv(), fx::index_quotes(), {}, spec);
    REQUIRE(m.entries.size() == 6);
    CHECK(m.failures.empty());
    for (std::size_t b = 0; b < 6; ++b) {
        for (std::size_t j = 0; j < 6; ++j) {
            REQUIRE(m.entries[b][j]);
            // Hard pins hold every bespoke price at its unbumped target.
            CHECK(*m.entries[b][j] == doctest::Approx(0.0).epsilon(1e-6).scale(1.0));
        }
    }

    // Unconstrained, the bespoke inherits the bumped index distribution.
    spec.pinned_tranches.clear();
    const auto free = tranche01(fx::index_pv(), fx::index_quotes(), {}, spec);
    for (std::size_t b = 0; b < 6; ++b) {
        for (std::size_t j = 0; j < 6; ++j) {
            CHECK(*free.entries[b][j] == doctest::Approx(b == j ? 1.0 : 0.0).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("co-bump moves a same-rating pin one for one") {
    BumpConfig cfg;
    cfg.constraint_mode = BumpConstraintMode::CoBump;
    const auto m = tranche01(fx::index_pv(), fx::index_quotes(), {}, default_bespoke(), cfg);
    REQUIRE(m.entries[0][0]);
    CHECK(*m.entries[0][0] == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t j = 1; j < 6; ++j) CHECK(std::abs(*m.entries[0][j]) < 1e-6);
}

TEST_CASE("same-rating index tranche is a top-two driver under soft constraints") {
    BumpConfig cfg;
    cfg.constraint_mode = BumpConstraintMode::Soft;
    cfg.soft_weight = 100.0;
    const auto m = tranche01(fx::index_pv(), fx::index_quotes(), {}, default_bespoke(), cfg);
    for (std::size_t b = 0; b < 6; ++b) {
        CAPTURE(m.bespoke_tranches[b]);
        std::vector<double> mags;
        for (const auto& e : m.entries[b]) mags.push_back(std::abs(e.value()));
        std::size_t larger = 0;
        for (double v : mags) larger += v > mags[b];
        CHECK(larger <= 1);
    }
}

TEST_CASE("failed bumps leave empty entries and a failure message") {
    BumpConfig cfg;
    cfg.bump_size = 60.0;
    const auto m = tranche01(fx::index_pv(), fx::index_quotes(), {}, default_bespoke(), cfg);
    CHECK_FALSE(m.failures.empty());
    bool some_empty = false;
    for (const auto& row : m.entries) {
        for (const auto& e : row) some_empty |= !e.has_value();
    }
    CHECK(some_empty);
}

TEST_CASE("parallel and serial runs are bit identical") {
    BumpConfig par;
    BumpConfig ser;
    ser.parallel = false;
    const auto a = tranche01(fx::index_pv(), fx::index_quotes(), {}, default_bespoke(), par);
    const auto b = tranche01(fx::index_pv(), fx::index_quotes(), {}, default_bespoke(), ser);
    CHECK(a.entries == b.entries);
    CHECK(a.failures == b.failures);
    CHECK(loan_price_delta(index(), default_bespoke(), par) == loan_price_delta(index(), default_bespoke(), ser));
}

TEST_CASE("remap settings follow the constraint mode") {
    BumpConfig cfg;
    cfg.constraint_mode = BumpConstraintMode::Soft;
    cfg.soft_weight = 7.0;
    const auto s = remap_settings({}, cfg);
    CHECK(s.mode == ConstraintMode::Soft);
    CHECK(s.soft_weight == 7.0);
    cfg.constraint_mode = BumpConstraintMode::CoBump;
    CHECK(remap_settings({}, cfg).mode == ConstraintMode::Hard);
}
