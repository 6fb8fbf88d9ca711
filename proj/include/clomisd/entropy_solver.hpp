#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace clomisd {

// Linear expectation constraint: sum_i p_i * coefficients[i] == target.
struct ConstraintSpec {
    std::vector<double> coefficients;
    double target = 0.0;
    std::string label;
};

// Market implied scenario distribution: non-negative weights summing to 1.
class Misd {
public:
    Misd() = default;
    // Validates non-negativity and normalization (|sum - 1| <= 1e-12).
    explicit Misd(std::vector<double> weights);

    static Misd uniform(std::size_t n);
    static Misd point_mass(std::size_t n, std::size_t at);
    // Rescales non-negative weights to sum to one.
    static Misd normalized(std::vector<double> weights);

    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const { return weights_[i]; }
    const std::vector<double>& weights() const noexcept { return weights_; }

    // E[values] under this distribution.
    double expectation(std::span<const double> values) const;

    bool operator==(const Misd&) const = default;

private:
    std::vector<double> weights_;
};

enum class ConstraintMode { Hard, Soft };

struct SolverSettings {
    // Max |E[c] - target| in scaled units (coefficients / scale).
    double residual_tol = 1e-8;
    int max_iterations = 200;
    // Coefficients and targets are divided by this before solving.
    double scale = 100.0;
    ConstraintMode mode = ConstraintMode::Hard;
    // Soft mode adds (soft_weight / 2) * sum_k r_k^2 to the primal objective,
    // r_k being the scaled residuals.
    double soft_weight = 100.0;
    // ||lambda||_inf above this is taken as evidence of an infeasible target.
    double multiplier_cap = 1e4;
    int max_stalled_iterations = 20;

    void validate() const;
};

struct SolveDiagnostics {
    std::vector<double> multipliers;  // one per constraint, scaled units
    std::vector<double> residuals;    // E[c] - target, caller's units
    int iterations = 0;
    double objective = 0.0;  // entropy (maxent) or divergence (cross-entropy)
    bool feasible = false;
    bool rank_deficient = false;
    double min_hessian_eigenvalue = 0.0;
    double max_residual_scaled = 0.0;
    std::string status;
};

struct SolveResult {
    Misd misd;
    SolveDiagnostics diagnostics;
};

// Maximum Shannon entropy distribution over `n` scenarios subject to the
// constraints. Throws SolverError on infeasible targets or non-convergence.
SolveResult solve_maxent(std::span<const ConstraintSpec> constraints, std::size_t n,
                         const SolverSettings& settings = {});

// Minimum Kullback-Leibler divergence from `prior` subject to the
// constraints. Scenarios with zero prior weight keep zero weight.
SolveResult solve_min_cross_entropy(const Misd& prior, std::span<const ConstraintSpec> constraints,
                                    const SolverSettings& settings = {});

double shannon_entropy(std::span<const double> p);
// sum q ln(q/p); +inf when q is not absolutely continuous w.r.t. p.
double kl_divergence(std::span<const double> q, std::span<const double> p);

}  // namespace clomisd
