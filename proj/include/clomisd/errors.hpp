#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace clomisd {

// Root of every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input: malformed files, out-of-range values, misaligned data,
// references to unknown tranches. The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    enum class Kind {
        Malformed,
        OutOfRange,
        Empty,
        Duplicate,
        Misaligned,
        MissingColumn,
        MissingMarketLoanPrice,
        PinnedTrancheUnknown,
        InvalidSettings,
        InvalidTranching,
        CoarseGrid,
    };

    ValidationError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

// Failure inside the entropy solver. Carries the per-constraint residuals
// (in the caller's units) at the point the solve was abandoned.
class SolverError : public Error {
public:
    enum class Kind { InfeasibleTarget, NonConvergence, PriorSupportConflict };

    SolverError(Kind kind, const std::string& what, std::vector<double> residuals = {})
        : Error(what), kind_(kind), residuals_(std::move(residuals)) {}

    Kind kind() const noexcept { return kind_; }
    const std::vector<double>& residuals() const noexcept { return residuals_; }

private:
    Kind kind_;
    std::vector<double> residuals_;
};

const char* to_string(ValidationError::Kind kind) noexcept;
const char* to_string(SolverError::Kind kind) noexcept;

}  // namespace clomisd
