#include "clomisd/synth_index.hpp"

#include "clomisd/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace clomisd {

namespace {

using Kind = ValidationError::Kind;

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(first, last - first + 1));
}

double parse_double(const std::string& text, std::size_t line_no) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ValidationError(Kind::Malformed,
                              "line " + std::to_string(line_no) + ": cannot parse number '" + text + "'");
    }
    return v;
}

double hazard(double annual_rate) {
    return annual_rate >= 1.0 ? std::numeric_limits<double>::infinity() : -std::log1p(-annual_rate);
}

// Within a period, notional leaves the pool at constant hazard h, so the
// share of the period's exits that has happened by time s is
// g(s) = (1 - e^{-hs}) / (1 - e^{-h dt}).
class IntraPeriod {
public:
    IntraPeriod(double h, double dt) : h_(h), dt_(dt), denom_(-std::expm1(-h * dt)) {}

    // Mean of g over the period.
    double mean_fraction() const { return integral(dt_) / dt_; }

    // Mean over the period of clamp(c + slope * g(s), 0, cap), slope >= 0.
    double mean_clamped(double c, double slope, double cap) const {
        if (slope <= 0.0) return std::clamp(c, 0.0, cap);
        if (instant()) return std::clamp(c + slope, 0.0, cap);
        const double s1 = inverse(-c / slope);
        const double s2 = inverse((cap - c) / slope);
        const double ramp = c * (s2 - s1) + slope * (integral(s2) - integral(s1));
        return (ramp + cap * (dt_ - s2)) / dt_;
    }

private:
    bool instant() const { return std::isinf(h_); }
    bool linear() const { return h_ * dt_ < 1e-12; }

    // Integral of g from 0 to s.
    double integral(double s) const {
        if (instant()) return s;
        if (linear()) return s * s / (2.0 * dt_);
        return (s + std::expm1(-h_ * s) / h_) / denom_;
    }

    // Time at which g reaches v, for v clamped to [0, 1].
    double inverse(double v) const {
        v = std::clamp(v, 0.0, 1.0);
        if (instant()) return 0.0;
        if (linear()) return v * dt_;
        return -std::log1p(-v * denom_) / h_;
    }

    double h_;
    double dt_;
    double denom_;
};

void check_periods(int periods) {
    if (periods < 1) throw ValidationError(Kind::InvalidSettings, "periods must be >= 1");
}

}  // namespace

void SyntheticDealSpec::validate() const {
    if (tranches.empty()) throw ValidationError(Kind::InvalidTranching, "no tranches");
    if (!(maturity > 0.0) || !std::isfinite(maturity)) {
        throw ValidationError(Kind::InvalidSettings, "maturity must be > 0");
    }
    if (payment_frequency < 1) {
        throw ValidationError(Kind::InvalidSettings, "payment_frequency must be >= 1");
    }
    if (!std::isfinite(portfolio_spread) || !std::isfinite(discount_rate)) {
        throw ValidationError(Kind::InvalidSettings, "rates must be finite");
    }
    std::set<std::string> names;
    for (const auto& t : tranches) {
        if (t.name.empty()) throw ValidationError(Kind::InvalidTranching, "empty tranche name");
        if (!names.insert(t.name).second) {
            throw ValidationError(Kind::InvalidTranching, "duplicate tranche '" + t.name + "'");
        }
        if (!(t.attachment >= 0.0 && t.attachment < t.detachment && t.detachment <= 1.0)) {
            throw ValidationError(Kind::InvalidTranching,
                                  "tranche '" + t.name + "' needs 0 <= attachment < detachment <= 1");
        }
        if (!std::isfinite(t.coupon_spread)) {
            throw ValidationError(Kind::InvalidTranching, "tranche '" + t.name + "' spread not finite");
        }
    }
    auto sorted = tranches;
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& x, const auto& y) { return x.attachment < y.attachment; });
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        if (sorted[k].attachment < sorted[k - 1].detachment) {
            throw ValidationError(Kind::InvalidTranching, "tranches '" + sorted[k - 1].name + "' and '" +
                                                              sorted[k].name + "' overlap");
        }
    }
}

int SyntheticDealSpec::default_periods() const {
    return std::max(1, static_cast<int>(std::lround(maturity * payment_frequency)));
}

std::vector<LossPathPoint> loss_path(const Scenario& scenario, double maturity, int periods) {
    check_periods(periods);
    if (!(maturity > 0.0)) throw ValidationError(Kind::InvalidSettings, "maturity must be > 0");
    const double dt = maturity / periods;
    const double d = 1.0 - std::pow(1.0 - scenario.cadr, dt);
    const double p = 1.0 - std::pow(1.0 - scenario.capr, dt);
    if (d + p > 1.0) {
        throw ValidationError(Kind::CoarseGrid,
                              "per-period default plus prepayment exceeds 1; use more periods");
    }
    const double exit = 1.0 - (1.0 - d) * (1.0 - p);
    const double hd = hazard(scenario.cadr);
    const double hp = hazard(scenario.capr);
    double default_share = 0.0;
    if (std::isinf(hd)) {
        default_share = std::isinf(hp) ? 0.5 : 1.0;
    } else if (!std::isinf(hp) && hd + hp > 0.0) {
        default_share = hd / (hd + hp);
    }

    std::vector<LossPathPoint> path;
    path.reserve(static_cast<std::size_t>(periods));
    LossPathPoint pt;
    pt.outstanding = 1.0;
    for (int k = 1; k <= periods; ++k) {
        const double leaving = pt.outstanding * exit;
        const double defaulted = leaving * default_share;
        const double prepaid = leaving - defaulted;
        pt.cumulative_defaulted += defaulted;
        pt.cumulative_loss += defaulted * (1.0 - scenario.crr);
        pt.cumulative_recovered += defaulted * scenario.crr + prepaid;
        pt.outstanding = std::max(0.0, pt.outstanding - leaving);
        pt.time = k * dt;
        path.push_back(pt);
    }
    return path;
}

TrancheSlice tranche_slice(double attachment, double detachment, double cumulative_loss,
                           double cumulative_recovered) {
    // Losses eat [0, L) from the bottom, principal retires [1 - R, 1] from the
    // top. L + R <= 1, so the two never overlap.
    const double width = detachment - attachment;
    const double written = std::clamp(cumulative_loss - attachment, 0.0, width);
    const double top = 1.0 - cumulative_recovered;
    const double amortized = std::clamp(detachment - top, 0.0, width);
    const double remaining = std::max(0.0, std::min(detachment, top) - std::max(attachment, cumulative_loss));
    return {remaining, written, amortized};
}

SyntheticPrices synth_tranche_pv(const SyntheticDealSpec& spec, const Scenario& scenario, int periods) {
    spec.validate();
    const auto path = loss_path(scenario, spec.maturity, periods);
    const double dt = spec.maturity / periods;
    const double forward = std::expm1(spec.discount_rate * dt);
    const IntraPeriod shape(hazard(scenario.cadr) + hazard(scenario.capr), dt);

    // Coupons accrue on the balance at the start of the period, less notional
    // written down during it from the moment it is written down. Principal is
    // paid at the period end.
    SyntheticPrices out;
    for (const auto& t : spec.tranches) {
        const double width = t.detachment - t.attachment;
        TrancheSlice prev{width, 0.0, 0.0};
        double prev_loss = 0.0;
        double pv = 0.0;
        for (std::size_t k = 0; k < path.size(); ++k) {
            const auto now = tranche_slice(t.attachment, t.detachment, path[k].cumulative_loss,
                                           path[k].cumulative_recovered);
            const double written_in_period =
                shape.mean_clamped(prev_loss - t.attachment, path[k].cumulative_loss - prev_loss, width) -
                prev.written_down;
            const double accruing = prev.remaining - written_in_period;
            double flow = accruing * (forward + t.coupon_spread * dt) + (now.amortized - prev.amortized);
            if (k + 1 == path.size()) flow += now.remaining;
            pv += std::exp(-spec.discount_rate * path[k].time) * flow;
            prev = now;
            prev_loss = path[k].cumulative_loss;
        }
        out.tranche_prices.push_back(100.0 * pv / width);
    }

    double pv = 0.0;
    LossPathPoint prev;
    prev.outstanding = 1.0;
    for (std::size_t k = 0; k < path.size(); ++k) {
        const double defaulted = path[k].cumulative_defaulted - prev.cumulative_defaulted;
        const double accruing = prev.outstanding - defaulted * shape.mean_fraction();
        double flow = accruing * (forward + spec.portfolio_spread * dt) +
                      (path[k].cumulative_recovered - prev.cumulative_recovered);
        if (k + 1 == path.size()) flow += path[k].outstanding;
        pv += std::exp(-spec.discount_rate * path[k].time) * flow;
        prev = path[k];
    }
    out.collateral_price = 100.0 * pv;
    return out;
}

TranchePVMatrix build_pv_matrix(const SyntheticDealSpec& spec, const ScenarioSet& scenarios, int periods) {
    spec.validate();
    std::vector<std::string> names;
    for (const auto& t : spec.tranches) names.push_back(t.name);
    std::vector<std::vector<double>> rows;
    std::vector<double> collateral;
    for (const auto& s : scenarios) {
        auto prices = synth_tranche_pv(spec, s, periods);
        rows.push_back(std::move(prices.tranche_prices));
        collateral.push_back(prices.collateral_price);
    }
    return TranchePVMatrix(scenarios, std::move(names), std::move(rows), std::move(collateral));
}

SyntheticDealSpec parse_synthetic_spec(std::istream& in) {
    SyntheticDealSpec spec;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ValidationError(Kind::Malformed, "line " + std::to_string(line_no) + ": expected key = value");
        }
        const auto key = trim(std::string_view(line).substr(0, eq));
        const auto value = trim(std::string_view(line).substr(eq + 1));
        if (key == "maturity") {
            spec.maturity = parse_double(value, line_no);
        } else if (key == "payment_frequency") {
            const double f = parse_double(value, line_no);
            if (f != std::floor(f) || f < 1 || f > 366) {
                throw ValidationError(Kind::Malformed, "line " + std::to_string(line_no) +
                                                           ": payment_frequency must be a positive integer");
            }
            spec.payment_frequency = static_cast<int>(f);
        } else if (key == "portfolio_spread") {
            spec.portfolio_spread = parse_double(value, line_no);
        } else if (key == "discount_rate") {
            spec.discount_rate = parse_double(value, line_no);
        } else if (key == "tranche") {
            std::vector<std::string> parts;
            std::stringstream ss(value);
            std::string part;
            while (std::getline(ss, part, ',')) parts.push_back(trim(part));
            if (parts.size() != 4) {
                throw ValidationError(Kind::Malformed, "line " + std::to_string(line_no) +
                                                           ": tranche = name, attachment, detachment, spread");
            }
            spec.tranches.push_back({parts[0], parse_double(parts[1], line_no),
                                     parse_double(parts[2], line_no), parse_double(parts[3], line_no)});
        } else {
            throw ValidationError(Kind::Malformed,
                                  "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    spec.validate();
    return spec;
}

SyntheticDealSpec load_synthetic_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError(Kind::Malformed, "cannot open '" + path.string() + "'");
    return parse_synthetic_spec(in);
}

}  // namespace clomisd
