#pragma once

#include "clomisd/deal_model.hpp"

#include <string>

namespace clomisd::testing {

inline std::string data_path(const std::string& name) { return std::string(CLOMISD_DATA_DIR) + "/" + name; }

inline const ScenarioSet& fixture_scenarios() {
    static const ScenarioSet set = load_scenarios(data_path("scenarios.csv"));
    return set;
}

inline const TranchePVMatrix& index_pv() {
    static const TranchePVMatrix pv = load_pv_matrix(data_path("clo_idx_pv.csv"), fixture_scenarios());
    return pv;
}

inline const TranchePVMatrix& bespoke_pv() {
    static const TranchePVMatrix pv = load_pv_matrix(data_path("clo_bspk_pv.csv"), fixture_scenarios());
    return pv;
}

inline const DealQuotes& index_quotes() {
    static const DealQuotes q = load_quotes(data_path("clo_idx_quotes.csv"));
    return q;
}

inline const DealQuotes& bespoke_quotes() {
    static const DealQuotes q = load_quotes(data_path("clo_bspk_quotes.csv"));
    return q;
}

}  // namespace clomisd::testing
