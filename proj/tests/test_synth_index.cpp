#include "clomisd/errors.hpp"
#include "clomisd/pricing.hpp"
#include "clomisd/synth_index.hpp"
#include "fixtures.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace clomisd;
namespace fx = clomisd::testing;

namespace {

SyntheticDealSpec lcdx() { return load_synthetic_spec(fx::data_path("lcdx_spec.cfg")); }

// Brute force: each period is cut into `sub` slices of the continuous exit
// process, and every slice's loss and principal runs through an explicit
// sequential waterfall of tranche balances (losses from the bottom,
// principal from the top). Written-down notional stops accruing when it is
// written down; cash moves at the period end.
SyntheticPrices waterfall_oracle(const SyntheticDealSpec& spec, const Scenario& s, int periods) {
    const int sub = std::max(1000, 20000 / periods);
    const double dt = spec.maturity / periods;
    const double fwd = std::exp(spec.discount_rate * dt) - 1.0;
    const double hd = s.cadr >= 1.0 ? INFINITY : -std::log(1.0 - s.cadr);
    const double hp = s.capr >= 1.0 ? INFINITY : -std::log(1.0 - s.capr);
    double share = 0.0;
    if (std::isinf(hd)) share = std::isinf(hp) ? 0.5 : 1.0;
    else if (!std::isinf(hp) && hd + hp > 0.0) share = hd / (hd + hp);
    const double h = hd + hp;

    std::vector<std::size_t> order(spec.tranches.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](auto a, auto b) {
        return spec.tranches[a].attachment < spec.tranches[b].attachment;
    });
    // Unallocated gaps between tranches are anonymous buckets.
    struct Bucket {
        int tranche;
        double balance;
    };
    std::vector<Bucket> stack;
    double cursor = 0.0;
    for (auto i : order) {
        const auto& t = spec.tranches[i];
        if (t.attachment > cursor) stack.push_back({-1, t.attachment - cursor});
        stack.push_back({static_cast<int>(i), t.detachment - t.attachment});
        cursor = t.detachment;
    }
    if (cursor < 1.0) stack.push_back({-1, 1.0 - cursor});

    std::vector<double> pv(spec.tranches.size(), 0.0);
    double pool = 1.0, col_pv = 0.0;
    for (int k = 1; k <= periods; ++k) {
        const double df = std::exp(-spec.discount_rate * k * dt);
        const double pool0 = pool;
        std::vector<double> start(stack.size()), written(stack.size(), 0.0), written_mean(stack.size(), 0.0),
            paid(stack.size(), 0.0);
        for (std::size_t b = 0; b < stack.size(); ++b) start[b] = stack[b].balance;
        double exited = 0.0, defaulted_mean = 0.0, principal_total = 0.0;
        for (int j = 1; j <= sub; ++j) {
            const double now = std::isinf(h) ? pool0 : pool0 * (1.0 - std::exp(-h * j * dt / sub));
            const double step = now - exited;
            const double before_default = exited * share;
            exited = now;
            double loss = step * share * (1.0 - s.crr);
            double principal = step * share * s.crr + step * (1.0 - share);
            principal_total += principal;
            defaulted_mean += 0.5 * (before_default + exited * share) / sub;
            std::vector<double> written_before = written;
            for (std::size_t b = 0; b < stack.size(); ++b) {
                const double hit = std::min(loss, stack[b].balance);
                stack[b].balance -= hit;
                written[b] += hit;
                loss -= hit;
            }
            for (std::size_t b = stack.size(); b-- > 0;) {
                const double pay = std::min(principal, stack[b].balance);
                stack[b].balance -= pay;
                paid[b] += pay;
                principal -= pay;
            }
            for (std::size_t b = 0; b < stack.size(); ++b) written_mean[b] += 0.5 * (written_before[b] + written[b]) / sub;
        }
        pool = pool0 - exited;
        for (std::size_t b = 0; b < stack.size(); ++b) {
            if (stack[b].tranche < 0) continue;
            const auto idx = static_cast<std::size_t>(stack[b].tranche);
            double flow = (start[b] - written_mean[b]) * (fwd + spec.tranches[idx].coupon_spread * dt) + paid[b];
            if (k == periods) flow += stack[b].balance;
            pv[idx] += df * flow;
        }
        double flow = (pool0 - defaulted_mean) * (fwd + spec.portfolio_spread * dt) + principal_total;
        if (k == periods) flow += pool;
        col_pv += df * flow;
    }
    SyntheticPrices out;
    for (std::size_t i = 0; i < pv.size(); ++i) {
        out.tranche_prices.push_back(100.0 * pv[i] / (spec.tranches[i].detachment - spec.tranches[i].attachment));
    }
    out.collateral_price = 100.0 * col_pv;
    return out;
}

}  // namespace

TEST_CASE("loss path with no defaults or prepayments stays flat") {
    const auto path = loss_path({0, 0.0, 0.0, 0.5}, 5.0, 20);
    REQUIRE(path.size() == 20);
    for (const auto& pt : path) {
        CHECK(pt.outstanding == 1.0);
        CHECK(pt.cumulative_loss == 0.0);
    }
    CHECK(path.back().time == doctest::Approx(5.0));
}

TEST_CASE("loss path matches closed-form survival") {
    const Scenario s{0, 0.10, 0.0, 0.4};
    const auto path = loss_path(s, 5.0, 20);
    CHECK(path.back().outstanding == doctest::Approx(std::pow(0.9, 5.0)).epsilon(1e-12));
    CHECK(path.back().cumulative_loss == doctest::Approx((1 - std::pow(0.9, 5.0)) * 0.6).epsilon(1e-12));

    // Daily grid: one year leaves (1 - cadr)(1 - capr) of the pool.
    const auto daily = loss_path({0, 0.2, 0.1, 0.3}, 1.0, 365);
    CHECK(daily.back().outstanding == doctest::Approx(0.8 * 0.9).epsilon(1e-12));
}

TEST_CASE("single-rate loss paths follow the per-period rate") {
    const auto one = loss_path({0, 0.10, 0.0, 0.5}, 1.0, 1);
    CHECK(one[0].cumulative_loss == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(one[0].outstanding == doctest::Approx(0.90).epsilon(1e-14));
    CHECK(one[0].cumulative_defaulted == doctest::Approx(0.10).epsilon(1e-14));

    for (const auto& pt : loss_path({0, 0.3, 0.0, 1.0}, 5.0, 20)) {
        CHECK(pt.cumulative_loss == 0.0);
        CHECK(pt.cumulative_recovered == doctest::Approx(pt.cumulative_defaulted).epsilon(1e-14));
    }
    const auto prepay_only = loss_path({0, 0.0, 0.2, 0.3}, 5.0, 20);
    CHECK(prepay_only.back().outstanding == doctest::Approx(std::pow(0.8, 5.0)).epsilon(1e-12));
    CHECK(prepay_only.back().cumulative_loss == 0.0);

    const auto wiped = loss_path({0, 1.0, 0.0, 0.25}, 5.0, 4);
    CHECK(wiped[0].outstanding == 0.0);
    CHECK(wiped[0].cumulative_loss == doctest::Approx(0.75));
}

TEST_CASE("competing exits split by hazard") {
    const Scenario s{0, 0.2, 0.1, 0.4};
    const auto path = loss_path(s, 5.0, 20);
    const double hd = -std::log(0.8), hp = -std::log(0.9);
    // Pool survival is exact at every grid point, and the default share of
    // everything that left is hd / (hd + hp).
    CHECK(path.back().outstanding == doctest::Approx(std::exp(-(hd + hp) * 5.0)).epsilon(1e-12));
    const double exited = 1.0 - path.back().outstanding;
    CHECK(path.back().cumulative_defaulted == doctest::Approx(exited * hd / (hd + hp)).epsilon(1e-12));
    // Same totals on any grid.
    const auto fine = loss_path(s, 5.0, 365);
    CHECK(fine.back().cumulative_loss == doctest::Approx(path.back().cumulative_loss).epsilon(1e-12));
}

TEST_CASE("single period with zero rates is pure loss clipping") {
    SyntheticDealSpec spec;
    spec.maturity = 1.0;
    spec.tranches = {{"LO", 0.0, 0.03, 0.0}, {"MID", 0.03, 0.07, 0.0}, {"HI", 0.07, 1.0, 0.0}};
    const Scenario s{0, 0.10, 0.0, 0.5};
    const double l = 0.05;
    const auto p = synth_tranche_pv(spec, s, 1);
    for (std::size_t j = 0; j < 3; ++j) {
        const auto& t = spec.tranches[j];
        const double w = t.detachment - t.attachment;
        CHECK(p.tranche_prices[j] == doctest::Approx(100.0 * (1.0 - std::clamp(l - t.attachment, 0.0, w) / w)).epsilon(1e-12));
    }
}

TEST_CASE("loss path conserves notional every period") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 0.6);
    for (int t = 0; t < 50; ++t) {
        const Scenario s{0, u(rng), u(rng), u(rng) / 0.6};
        for (const auto& pt : loss_path(s, 5.0, 48)) {
            CHECK(std::abs(pt.outstanding + pt.cumulative_loss + pt.cumulative_recovered - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("coarse grid that over-consumes the pool is rejected") {
    try {
        loss_path({0, 0.9, 0.9, 0.0}, 5.0, 1);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.kind() == ValidationError::Kind::CoarseGrid);
    }
    CHECK_THROWS_AS(loss_path({0, 0.1, 0.1, 0.1}, 5.0, 0), ValidationError);
}

TEST_CASE("zero-spread notes price at par without defaults") {
    auto spec = lcdx();
    spec.portfolio_spread = 0.0;
    for (auto& t : spec.tranches) t.coupon_spread = 0.0;
    for (double capr : {0.0, 0.15, 0.5}) {
        for (int periods : {1, 20, 60}) {
            const auto r = synth_tranche_pv(spec, {0, 0.0, capr, 0.5}, periods);
            for (double v : r.tranche_prices) CHECK(std::abs(v - 100.0) <= 1e-9);
            CHECK(std::abs(r.collateral_price - 100.0) <= 1e-9);
        }
    }
}

TEST_CASE("tranche slice splits width into remaining, written down and amortized") {
    const auto s = tranche_slice(0.05, 0.08, 0.06, 0.3);
    CHECK(s.written_down == doctest::Approx(0.01));
    CHECK(s.remaining == doctest::Approx(0.02));
    CHECK(s.amortized == 0.0);
    const auto senior = tranche_slice(0.15, 1.0, 0.06, 0.3);
    CHECK(senior.amortized == doctest::Approx(0.3));
    CHECK(senior.remaining == doctest::Approx(0.55));
    const auto wiped = tranche_slice(0.0, 0.05, 0.2, 0.1);
    CHECK(wiped.written_down == doctest::Approx(0.05));
    CHECK(wiped.remaining == 0.0);

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 500; ++t) {
        const double a = u(rng), det = a + (1 - a) * u(rng), l = u(rng), r = (1 - l) * u(rng);
        const auto x = tranche_slice(a, det, l, r);
        CHECK(std::abs(x.remaining + x.written_down + x.amortized - (det - a)) <= 1e-12);
    }
}

TEST_CASE("prices agree with an independent sequential waterfall") {
    const auto spec = lcdx();
    for (const auto& s : fx::fixture_scenarios()) {
        CAPTURE(s.cadr);
        for (int periods : {4, 20}) {
            const auto a = synth_tranche_pv(spec, s, periods);
            const auto b = waterfall_oracle(spec, s, periods);
            for (std::size_t j = 0; j < a.tranche_prices.size(); ++j) {
                CHECK(std::abs(a.tranche_prices[j] - b.tranche_prices[j]) < 1e-5);
            }
            CHECK(std::abs(a.collateral_price - b.collateral_price) < 1e-5);
        }
    }
    // Also with a gap between tranches.
    SyntheticDealSpec gappy = spec;
    gappy.tranches = {{"LO", 0.0, 0.1, 0.04}, {"HI", 0.3, 0.6, 0.01}};
    for (double cadr : {0.02, 0.1, 0.3}) {
        const Scenario s{0, cadr, 0.1, 0.5};
        const auto a = synth_tranche_pv(gappy, s, 40);
        const auto b = waterfall_oracle(gappy, s, 40);
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(std::abs(a.tranche_prices[j] - b.tranche_prices[j]) < 1e-5);
        }
    }
}

TEST_CASE("frozen reference prices") {
    const auto spec = lcdx();
    struct Row {
        double cadr, capr, crr;
        double eq, jm, m, sm, ss, col;
    };
    const Row rows[] = {
        {0.00, 0.15, 0.84, 123.128388569547, 113.877033141728, 108.094935999342, 104.625677713909,
         101.511793501125, 110.607676979245},
        {0.05, 0.10, 0.69, 14.735991616968, 98.869615872159, 108.094935999342, 104.625677713909,
         101.613321950540, 105.451913458246},
        {0.12, 0.03, 0.48, 3.102617231651, 6.269812796883, 7.958019410264, 9.448282983500,
         93.456955788361, 88.920263285936},
        {0.30, 0.00, 0.00, 0.566857725972, 1.124967426653, 1.395397168596, 1.614715102281,
         25.985632203691, 28.263480497950},
        {0.90, 0.00, 0.00, 0.087807372786, 0.174259659309, 0.216405214785, 0.250844823137,
         1.743577451945, 2.674093415200},
    };
    for (const auto& r : rows) {
        CAPTURE(r.cadr);
        const auto p = synth_tranche_pv(spec, {0, r.cadr, r.capr, r.crr}, 20);
        const double expected[] = {r.eq, r.jm, r.m, r.sm, r.ss};
        for (std::size_t j = 0; j < 5; ++j) CHECK(p.tranche_prices[j] == doctest::Approx(expected[j]).epsilon(1e-10));
        CHECK(p.collateral_price == doctest::Approx(r.col).epsilon(1e-10));
    }
}

TEST_CASE("doubling the grid moves prices by less than 0.05") {
    const auto spec = lcdx();
    for (int periods : {48, 96}) {
        const auto coarse = build_pv_matrix(spec, fx::fixture_scenarios(), periods);
        const auto fine = build_pv_matrix(spec, fx::fixture_scenarios(), 2 * periods);
        for (std::size_t i = 0; i < coarse.scenario_count(); ++i) {
            for (std::size_t j = 0; j < coarse.tranche_count(); ++j) {
                CHECK(std::abs(coarse.value(i, j) - fine.value(i, j)) < 0.05);
            }
            CHECK(std::abs(coarse.collateral()[i] - fine.collateral()[i]) < 0.05);
        }
    }
}

TEST_CASE("loss-only senior note does not rise with default rate") {
    auto spec = lcdx();
    // With a spread the senior also earns more as prepayments slow along the
    // grid; without one only losses move it.
    spec.tranches.back().coupon_spread = 0.0;
    const auto pv = build_pv_matrix(spec, fx::fixture_scenarios(), 20);
    const auto ss = *pv.tranche_index("SS");
    for (std::size_t i = 1; i < pv.scenario_count(); ++i) CHECK(pv.value(i, ss) <= pv.value(i - 1, ss) + 1e-9);
    for (std::size_t i = 0; i < pv.scenario_count(); ++i) {
        for (std::size_t j = 0; j < pv.tranche_count(); ++j) CHECK(pv.value(i, j) >= 0.0);
    }
}

TEST_CASE("quotes from a known distribution recalibrate consistently") {
    const auto spec = lcdx();
    const auto pv = build_pv_matrix(spec, fx::fixture_scenarios(), 20);
    std::vector<double> w(pv.scenario_count());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(-0.5 * std::pow((static_cast<double>(i) - 10.0) / 4.0, 2));
    const auto truth = Misd::normalized(w);
    std::vector<TrancheInfo> info;
    for (const auto& [name, price] : price_tranches(truth, pv)) info.push_back({name, price, "", "", ""});
    const auto idx = calibrate_index(pv, DealQuotes(info, std::nullopt));
    const auto model = price_tranches(idx.misd, pv);
    for (const auto& t : info) CHECK(std::abs(price_of(model, t.name) - *t.price) <= 1e-6);
}

TEST_CASE("spec parsing") {
    const auto spec = lcdx();
    CHECK(spec.tranches.size() == 5);
    CHECK(spec.default_periods() == 20);
    CHECK(spec.tranches[1].name == "JM");
    CHECK(spec.tranches[1].attachment == 0.05);

    const auto parse = [](const std::string& text) {
        std::istringstream in(text);
        return parse_synthetic_spec(in);
    };
    const auto kind = [&](const std::string& text) {
        try {
            parse(text);
        } catch (const ValidationError& e) {
            return e.kind();
        }
        FAIL("expected ValidationError");
        return ValidationError::Kind::Malformed;
    };
    using K = ValidationError::Kind;
    CHECK(kind("maturity = 5\n") == K::InvalidTranching);
    CHECK(kind("tranche = X, 0.1, 0.1, 0.01\n") == K::InvalidTranching);
    CHECK(kind("tranche = X, 0.2, 0.1, 0.01\n") == K::InvalidTranching);
    CHECK(kind("tranche = X, 0, 0.2, 0.01\ntranche = Y, 0.1, 0.3, 0.01\n") == K::InvalidTranching);
    CHECK(kind("tranche = X, 0, 0.2, 0.01\ntranche = X, 0.2, 0.3, 0.01\n") == K::InvalidTranching);
    CHECK(kind("tranche = X, 0, 1.2, 0.01\n") == K::InvalidTranching);
    CHECK(kind("tranche = X, 0, 0.2\n") == K::Malformed);
    CHECK(kind("colour = red\ntranche = X, 0, 0.2, 0.01\n") == K::Malformed);
    CHECK(kind("maturity five\n") == K::Malformed);
    CHECK(kind("maturity = 0\ntranche = X, 0, 0.2, 0.01\n") == K::InvalidSettings);
    CHECK(parse("# comment\n\ntranche = X, 0, 1, 0 # inline\n").tranches.size() == 1);
    CHECK_THROWS_AS(load_synthetic_spec("/nonexistent.cfg"), ValidationError);
}
