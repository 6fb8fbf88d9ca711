#pragma once

#include "clomisd/pricing.hpp"
#include "clomisd/risk.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>

namespace clomisd {

using Json = nlohmann::ordered_json;

// Round to 12 significant digits, the precision every report number carries.
double round12(double value);

Json to_json(const ScenarioSet& scenarios);
Json to_json(const ImpliedQuantities& implied);
Json to_json(const SolveDiagnostics& diagnostics);
Json to_json(const SolverSettings& settings);
Json to_json(const BumpConfig& config);
Json to_json(const Tranche01Matrix& matrix);
Json to_json(const RiskReport& report);
Json misd_json(const Misd& misd, const ScenarioSet& scenarios);

// Report sections for an index calibration: scenarios, misd, prices,
// implied quantities, basis and diagnostics.
Json calibration_json(const CalibratedIndex& index);
// Report sections for a bespoke mapping.
Json mapping_json(const BespokeResult& result, const BespokeSpec& spec,
                  std::optional<double> index_basis, const ScenarioSet& scenarios);

// The part of a calibration report a mapping needs.
struct IndexState {
    ScenarioSet scenarios;
    Misd misd;
    std::optional<double> basis;
};
IndexState index_state_from_report(const Json& report);
Json load_json(const std::filesystem::path& path);

// Two-column CSV: cadr_key (percent), weight.
std::string misd_csv(const Misd& misd, const ScenarioSet& scenarios);
// Bespoke x index matrix CSV; unavailable entries are left blank.
std::string tranche01_csv(const Tranche01Matrix& matrix);
std::string deltas_csv(const RiskReport& report);

// Write to a temporary sibling then rename, so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace clomisd
