#include "clomisd/deal_model.hpp"

#include "clomisd/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
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

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        fields.push_back(trim(std::string_view(line).substr(start, comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return fields;
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

std::string where(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

double parse_number(const std::string& text, std::size_t line_no, const char* what) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (text.empty() || ec != std::errc{} || ptr != last || !std::isfinite(value)) {
        throw ValidationError(Kind::Malformed,
                              where(line_no) + "cannot parse " + what + " '" + text + "'");
    }
    return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ValidationError(Kind::Malformed, "cannot open '" + path.string() + "'");
    }
    return in;
}

bool same_cadr(double cadr_fraction, double key_percent) {
    return std::abs(cadr_fraction - key_percent / 100.0) <= 1e-12;
}

}  // namespace

const char* to_string(ValidationError::Kind kind) noexcept {
    switch (kind) {
        case Kind::Malformed: return "Malformed";
        case Kind::OutOfRange: return "OutOfRange";
        case Kind::Empty: return "Empty";
        case Kind::Duplicate: return "Duplicate";
        case Kind::Misaligned: return "Misaligned";
        case Kind::MissingColumn: return "MissingColumn";
        case Kind::MissingMarketLoanPrice: return "MissingMarketLoanPrice";
        case Kind::PinnedTrancheUnknown: return "PinnedTrancheUnknown";
        case Kind::InvalidSettings: return "InvalidSettings";
        case Kind::InvalidTranching: return "InvalidTranching";
        case Kind::CoarseGrid: return "CoarseGrid";
    }
    return "Unknown";
}

const char* to_string(SolverError::Kind kind) noexcept {
    switch (kind) {
        case SolverError::Kind::InfeasibleTarget: return "InfeasibleTarget";
        case SolverError::Kind::NonConvergence: return "NonConvergence";
        case SolverError::Kind::PriorSupportConflict: return "PriorSupportConflict";
    }
    return "Unknown";
}

std::string format_exact(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, ptr);
}

std::string format_percent(double fraction) {
    // Search a few ulps around fraction*100 for the shortest text that
    // reproduces the stored fraction after division by 100.
    std::string best;
    const auto consider = [&](double candidate) {
        const std::string text = format_exact(candidate);
        double parsed = 0.0;
        std::from_chars(text.data(), text.data() + text.size(), parsed);
        if (parsed / 100.0 == fraction && std::signbit(parsed) == std::signbit(fraction) &&
            (best.empty() || text.size() < best.size())) {
            best = text;
        }
    };
    const double centre = fraction * 100.0;
    consider(centre);
    double below = centre;
    double above = centre;
    for (int k = 0; k < 8; ++k) {
        below = std::nextafter(below, -INFINITY);
        above = std::nextafter(above, INFINITY);
        consider(below);
        consider(above);
    }
    if (best.empty()) {
        throw ValidationError(Kind::OutOfRange,
                              "no exact percent representation for " + format_exact(fraction));
    }
    return best;
}

// ---------------------------------------------------------------- ScenarioSet

ScenarioSet::ScenarioSet(std::vector<Scenario> scenarios) : scenarios_(std::move(scenarios)) {
    if (scenarios_.empty()) throw ValidationError(Kind::Empty, "scenario set is empty");
    for (std::size_t i = 0; i < scenarios_.size(); ++i) {
        const auto& s = scenarios_[i];
        for (double v : {s.cadr, s.capr, s.crr}) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw ValidationError(Kind::OutOfRange, "scenario " + std::to_string(s.id) +
                                                            ": rate outside [0, 1]");
            }
        }
        if (i > 0 && s.id <= scenarios_[i - 1].id) {
            throw ValidationError(Kind::Malformed, "scenario ids must be strictly increasing");
        }
        for (std::size_t j = 0; j < i; ++j) {
            if (scenarios_[j].cadr == s.cadr) {
                throw ValidationError(Kind::Duplicate,
                                      "duplicate CADR " + format_percent(s.cadr) + "%");
            }
        }
    }
}

std::optional<std::size_t> ScenarioSet::find_by_cadr_percent(double cadr_percent) const {
    for (std::size_t i = 0; i < scenarios_.size(); ++i) {
        if (same_cadr(scenarios_[i].cadr, cadr_percent)) return i;
    }
    return std::nullopt;
}

std::vector<double> ScenarioSet::cadr() const {
    std::vector<double> out;
    for (const auto& s : scenarios_) out.push_back(s.cadr);
    return out;
}

std::vector<double> ScenarioSet::capr() const {
    std::vector<double> out;
    for (const auto& s : scenarios_) out.push_back(s.capr);
    return out;
}

std::vector<double> ScenarioSet::crr() const {
    std::vector<double> out;
    for (const auto& s : scenarios_) out.push_back(s.crr);
    return out;
}

// ------------------------------------------------------------ TranchePVMatrix

TranchePVMatrix::TranchePVMatrix(ScenarioSet scenarios, std::vector<std::string> tranche_names,
                                 std::vector<std::vector<double>> rows,
                                 std::vector<double> collateral)
    : scenarios_(std::move(scenarios)),
      tranche_names_(std::move(tranche_names)),
      collateral_(std::move(collateral)) {
    if (scenarios_.empty()) throw ValidationError(Kind::Empty, "PV matrix has no scenarios");
    if (tranche_names_.empty()) throw ValidationError(Kind::Empty, "PV matrix has no tranches");
    std::set<std::string> seen;
    for (const auto& name : tranche_names_) {
        if (name.empty()) throw ValidationError(Kind::Malformed, "empty tranche name");
        if (!seen.insert(name).second) {
            throw ValidationError(Kind::Duplicate, "duplicate tranche name '" + name + "'");
        }
    }
    if (rows.size() != scenarios_.size() || collateral_.size() != scenarios_.size()) {
        throw ValidationError(Kind::Misaligned, "PV matrix row count " +
                                                    std::to_string(rows.size()) +
                                                    " != scenario count " +
                                                    std::to_string(scenarios_.size()));
    }
    values_.reserve(rows.size() * tranche_names_.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != tranche_names_.size()) {
            throw ValidationError(Kind::Misaligned,
                                  "PV row " + std::to_string(i) + " has wrong column count");
        }
        for (double v : rows[i]) {
            if (!(v >= 0.0) || !std::isfinite(v)) {
                throw ValidationError(Kind::OutOfRange,
                                      "PV row " + std::to_string(i) + ": negative or non-finite PV");
            }
            values_.push_back(v);
        }
        if (!(collateral_[i] >= 0.0) || !std::isfinite(collateral_[i])) {
            throw ValidationError(Kind::OutOfRange,
                                  "PV row " + std::to_string(i) + ": negative collateral price");
        }
    }
}

std::vector<int> TranchePVMatrix::scenario_ids() const {
    std::vector<int> ids;
    for (const auto& s : scenarios_) ids.push_back(s.id);
    return ids;
}

std::optional<std::size_t> TranchePVMatrix::tranche_index(const std::string& name) const {
    const auto it = std::find(tranche_names_.begin(), tranche_names_.end(), name);
    if (it == tranche_names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - tranche_names_.begin());
}

std::vector<double> TranchePVMatrix::column(std::size_t tranche) const {
    std::vector<double> out(scenario_count());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = value(i, tranche);
    return out;
}

std::vector<double> TranchePVMatrix::column(const std::string& name) const {
    const auto j = tranche_index(name);
    if (!j) throw ValidationError(Kind::MissingColumn, "no PV column for tranche '" + name + "'");
    return column(*j);
}

std::vector<double> TranchePVMatrix::row(std::size_t scenario) const {
    const auto first = values_.begin() + static_cast<std::ptrdiff_t>(scenario * tranche_count());
    return {first, first + static_cast<std::ptrdiff_t>(tranche_count())};
}

// ----------------------------------------------------------------- DealQuotes

DealQuotes::DealQuotes(std::vector<TrancheInfo> tranches, std::optional<double> market_loan_price,
                       std::vector<std::pair<std::string, std::string>> attributes)
    : tranches_(std::move(tranches)),
      market_loan_price_(market_loan_price),
      attributes_(std::move(attributes)) {
    std::set<std::string> seen;
    bool any_price = false;
    for (const auto& t : tranches_) {
        if (t.name.empty()) throw ValidationError(Kind::Malformed, "empty tranche name");
        if (!seen.insert(t.name).second) {
            throw ValidationError(Kind::Duplicate, "duplicate tranche '" + t.name + "'");
        }
        if (t.price) {
            if (!(*t.price >= 0.0) || !std::isfinite(*t.price)) {
                throw ValidationError(Kind::OutOfRange,
                                      "tranche '" + t.name + "': negative price");
            }
            any_price = true;
        }
    }
    if (!any_price) throw ValidationError(Kind::Empty, "quotes contain no prices");
    if (market_loan_price_ && (!(*market_loan_price_ >= 0.0) || !std::isfinite(*market_loan_price_))) {
        throw ValidationError(Kind::OutOfRange, "market_loan_price must be non-negative");
    }
}

std::vector<std::pair<std::string, double>> DealQuotes::prices() const {
    std::vector<std::pair<std::string, double>> out;
    for (const auto& t : tranches_) {
        if (t.price) out.emplace_back(t.name, *t.price);
    }
    return out;
}

std::optional<double> DealQuotes::price(const std::string& name) const {
    for (const auto& t : tranches_) {
        if (t.name == name) return t.price;
    }
    return std::nullopt;
}

std::optional<std::string> DealQuotes::rating(const std::string& name) const {
    for (const auto& t : tranches_) {
        if (t.name == name && !t.rating.empty()) return t.rating;
    }
    return std::nullopt;
}

std::optional<std::string> DealQuotes::resolve(const std::string& name_or_rating) const {
    for (const auto& t : tranches_) {
        if (t.name == name_or_rating) return t.name;
    }
    std::optional<std::string> match;
    for (const auto& t : tranches_) {
        if (t.rating == name_or_rating) {
            if (match) return std::nullopt;  // ambiguous
            match = t.name;
        }
    }
    return match;
}

DealQuotes DealQuotes::with_bumped_price(const std::string& name, double bump) const {
    auto tranches = tranches_;
    for (auto& t : tranches) {
        if (t.name == name) {
            if (!t.price) {
                throw ValidationError(Kind::MissingColumn, "tranche '" + name + "' is not quoted");
            }
            // Bumped quotes may go negative; the solver reports those as
            // infeasible rather than the loader rejecting them.
            t.price = *t.price + bump;
            DealQuotes out;
            out.tranches_ = std::move(tranches);
            out.market_loan_price_ = market_loan_price_;
            out.attributes_ = attributes_;
            return out;
        }
    }
    throw ValidationError(Kind::MissingColumn, "no quoted tranche '" + name + "'");
}

// -------------------------------------------------------------------- parsing

ScenarioSet parse_scenarios(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<Scenario> scenarios;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        const auto fields = split_csv(line);
        if (!header_seen) {
            std::vector<std::string> lower;
            for (auto f : fields) {
                std::transform(f.begin(), f.end(), f.begin(), ::tolower);
                lower.push_back(f);
            }
            if (lower != std::vector<std::string>{"cadr", "capr", "crr"}) {
                throw ValidationError(Kind::Malformed,
                                      where(line_no) + "expected header 'cadr,capr,crr'");
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != 3) {
            throw ValidationError(Kind::Malformed, where(line_no) + "expected 3 fields");
        }
        Scenario s;
        s.id = static_cast<int>(scenarios.size());
        double* dst[] = {&s.cadr, &s.capr, &s.crr};
        for (int k = 0; k < 3; ++k) {
            const double pct = parse_number(fields[k], line_no, "rate");
            if (pct < 0.0 || pct > 100.0) {
                throw ValidationError(Kind::OutOfRange,
                                      where(line_no) + "rate " + fields[k] + "% outside [0, 100]");
            }
            *dst[k] = pct / 100.0;
        }
        scenarios.push_back(s);
    }
    if (!header_seen) throw ValidationError(Kind::Empty, "scenario file is empty");
    if (scenarios.empty()) throw ValidationError(Kind::Empty, "scenario file has no rows");
    return ScenarioSet(std::move(scenarios));
}

TranchePVMatrix parse_pv_matrix(std::istream& in, const ScenarioSet& scenarios) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    std::vector<std::optional<std::vector<double>>> rows(scenarios.size());
    std::vector<double> collateral(scenarios.size(), 0.0);
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        auto fields = split_csv(line);
        if (header.empty()) {
            if (fields.size() < 3) {
                throw ValidationError(Kind::Malformed,
                                      where(line_no) + "header needs key, tranche(s) and COL");
            }
            if (fields.back() != "COL") {
                throw ValidationError(Kind::MissingColumn,
                                      where(line_no) + "last column must be 'COL'");
            }
            header = std::move(fields);
            continue;
        }
        if (fields.size() != header.size()) {
            throw ValidationError(Kind::Malformed, where(line_no) + "expected " +
                                                       std::to_string(header.size()) + " fields");
        }
        const double key = parse_number(fields[0], line_no, "scenario key");
        const auto idx = scenarios.find_by_cadr_percent(key);
        if (!idx) {
            throw ValidationError(Kind::Misaligned,
                                  where(line_no) + "no scenario with CADR " + fields[0] + "%");
        }
        if (rows[*idx]) {
            throw ValidationError(Kind::Duplicate,
                                  where(line_no) + "duplicate scenario key " + fields[0]);
        }
        std::vector<double> row;
        for (std::size_t k = 1; k + 1 < fields.size(); ++k) {
            const double v = parse_number(fields[k], line_no, "PV");
            if (v < 0.0) throw ValidationError(Kind::OutOfRange, where(line_no) + "negative PV");
            row.push_back(v);
        }
        const double col = parse_number(fields.back(), line_no, "collateral price");
        if (col < 0.0) {
            throw ValidationError(Kind::OutOfRange, where(line_no) + "negative collateral price");
        }
        rows[*idx] = std::move(row);
        collateral[*idx] = col;
    }
    if (header.empty()) throw ValidationError(Kind::Empty, "PV file is empty");
    std::vector<std::vector<double>> aligned;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i]) {
            throw ValidationError(Kind::Misaligned, "PV file has no row for CADR " +
                                                        format_percent(scenarios[i].cadr) + "%");
        }
        aligned.push_back(std::move(*rows[i]));
    }
    std::vector<std::string> names(header.begin() + 1, header.end() - 1);
    return TranchePVMatrix(scenarios, std::move(names), std::move(aligned), std::move(collateral));
}

DealQuotes parse_quotes(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    std::vector<TrancheInfo> tranches;
    std::optional<double> market_loan_price;
    std::vector<std::pair<std::string, std::string>> attributes;
    while (std::getline(in, line)) {
        ++line_no;
        if (is_blank(line)) continue;
        if (header.empty() && line.find('=') != std::string::npos) {
            const auto eq = line.find('=');
            const auto key = trim(std::string_view(line).substr(0, eq));
            const auto value = trim(std::string_view(line).substr(eq + 1));
            if (key.empty()) throw ValidationError(Kind::Malformed, where(line_no) + "empty key");
            if (key == "market_loan_price") {
                market_loan_price = parse_number(value, line_no, "market_loan_price");
            } else {
                attributes.emplace_back(key, value);
            }
            continue;
        }
        auto fields = split_csv(line);
        if (header.empty()) {
            if (fields.size() < 2 || fields[0] != "tranche" || fields[1] != "price") {
                throw ValidationError(Kind::Malformed,
                                      where(line_no) + "expected header 'tranche,price,...'");
            }
            for (std::size_t k = 2; k < fields.size(); ++k) {
                if (fields[k] != "notional" && fields[k] != "rating" && fields[k] != "coupon") {
                    throw ValidationError(Kind::Malformed,
                                          where(line_no) + "unknown column '" + fields[k] + "'");
                }
            }
            header = std::move(fields);
            continue;
        }
        if (fields.size() != header.size()) {
            throw ValidationError(Kind::Malformed, where(line_no) + "expected " +
                                                       std::to_string(header.size()) + " fields");
        }
        TrancheInfo t;
        t.name = fields[0];
        if (!fields[1].empty()) {
            t.price = parse_number(fields[1], line_no, "price");
            if (*t.price < 0.0) {
                throw ValidationError(Kind::OutOfRange, where(line_no) + "negative price");
            }
        }
        for (std::size_t k = 2; k < header.size(); ++k) {
            if (header[k] == "notional") t.notional = fields[k];
            if (header[k] == "rating") t.rating = fields[k];
            if (header[k] == "coupon") t.coupon = fields[k];
        }
        tranches.push_back(std::move(t));
    }
    if (header.empty()) throw ValidationError(Kind::Empty, "quote file has no price section");
    return DealQuotes(std::move(tranches), market_loan_price, std::move(attributes));
}

ScenarioSet load_scenarios(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_scenarios(in);
}

TranchePVMatrix load_pv_matrix(const std::filesystem::path& path, const ScenarioSet& scenarios) {
    auto in = open_input(path);
    return parse_pv_matrix(in, scenarios);
}

DealQuotes load_quotes(const std::filesystem::path& path) {
    auto in = open_input(path);
    return parse_quotes(in);
}

// -------------------------------------------------------------------- writing

void write_scenarios(std::ostream& out, const ScenarioSet& scenarios) {
    out << "cadr,capr,crr\n";
    for (const auto& s : scenarios) {
        out << format_percent(s.cadr) << ',' << format_percent(s.capr) << ','
            << format_percent(s.crr) << '\n';
    }
}

void write_pv_matrix(std::ostream& out, const TranchePVMatrix& pv) {
    out << "CADR";
    for (const auto& name : pv.tranche_names()) out << ',' << name;
    out << ",COL\n";
    for (std::size_t i = 0; i < pv.scenario_count(); ++i) {
        out << format_percent(pv.scenarios()[i].cadr);
        for (std::size_t j = 0; j < pv.tranche_count(); ++j) out << ',' << format_exact(pv.value(i, j));
        out << ',' << format_exact(pv.collateral()[i]) << '\n';
    }
}

void write_quotes(std::ostream& out, const DealQuotes& quotes) {
    for (const auto& [key, value] : quotes.attributes()) out << key << '=' << value << '\n';
    if (quotes.market_loan_price()) {
        out << "market_loan_price=" << format_exact(*quotes.market_loan_price()) << '\n';
    }
    out << "tranche,price,notional,rating,coupon\n";
    for (const auto& t : quotes.tranches()) {
        out << t.name << ',' << (t.price ? format_exact(*t.price) : std::string{}) << ','
            << t.notional << ',' << t.rating << ',' << t.coupon << '\n';
    }
}

}  // namespace clomisd
