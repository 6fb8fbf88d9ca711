#include "clomisd/entropy_solver.hpp"

#include "clomisd/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

namespace clomisd {

// ------------------------------------------------------------------------ Misd

Misd::Misd(std::vector<double> weights) : weights_(std::move(weights)) {
    if (weights_.empty()) {
        throw ValidationError(ValidationError::Kind::Empty, "distribution has no scenarios");
    }
    double sum = 0.0;
    for (double w : weights_) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ValidationError(ValidationError::Kind::OutOfRange,
                                  "distribution weight negative or non-finite");
        }
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) {
        throw ValidationError(ValidationError::Kind::OutOfRange,
                              "distribution weights do not sum to 1");
    }
}

Misd Misd::uniform(std::size_t n) {
    return Misd(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

Misd Misd::point_mass(std::size_t n, std::size_t at) {
    std::vector<double> w(n, 0.0);
    w.at(at) = 1.0;
    return Misd(std::move(w));
}

Misd Misd::normalized(std::vector<double> weights) {
    double sum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw ValidationError(ValidationError::Kind::OutOfRange,
                                  "distribution weight negative or non-finite");
        }
        sum += w;
    }
    if (!(sum > 0.0)) {
        throw ValidationError(ValidationError::Kind::OutOfRange, "distribution has zero mass");
    }
    for (double& w : weights) w /= sum;
    return Misd(std::move(weights));
}

double Misd::expectation(std::span<const double> values) const {
    if (values.size() != weights_.size()) {
        throw ValidationError(ValidationError::Kind::Misaligned,
                              "expectation: length mismatch with distribution");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) acc += weights_[i] * values[i];
    return acc;
}

double shannon_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p) {
        if (x > 0.0) h -= x * std::log(x);
    }
    return h;
}

double kl_divergence(std::span<const double> q, std::span<const double> p) {
    double d = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (q[i] <= 0.0) continue;
        if (p[i] <= 0.0) return std::numeric_limits<double>::infinity();
        d += q[i] * std::log(q[i] / p[i]);
    }
    return d;
}

void SolverSettings::validate() const {
    const auto bad = [](const char* what) {
        throw ValidationError(ValidationError::Kind::InvalidSettings, what);
    };
    if (!(residual_tol > 0.0)) bad("residual_tol must be > 0");
    if (max_iterations < 1) bad("max_iterations must be >= 1");
    if (!(scale > 0.0) || !std::isfinite(scale)) bad("scale must be > 0");
    if (mode == ConstraintMode::Soft && !(soft_weight > 0.0)) bad("soft_weight must be > 0");
    if (!(multiplier_cap > 0.0)) bad("multiplier_cap must be > 0");
    if (max_stalled_iterations < 1) bad("max_stalled_iterations must be >= 1");
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Exponential-family dual restricted to the support of the base measure:
//   g(lambda) = ln sum_i w_i exp(lambda . c_i) - lambda . b  [+ |lambda|^2 / (2W)]
class Dual {
public:
    Dual(VectorXd log_base, MatrixXd coeffs, VectorXd targets, const SolverSettings& settings)
        : log_base_(std::move(log_base)),
          coeffs_(std::move(coeffs)),
          targets_(std::move(targets)),
          soft_(settings.mode == ConstraintMode::Soft),
          inv_weight_(soft_ ? 1.0 / settings.soft_weight : 0.0) {}

    Eigen::Index constraints() const { return coeffs_.rows(); }

    double value(const VectorXd& lambda) const {
        const VectorXd a = log_base_ + coeffs_.transpose() * lambda;
        const double mx = a.maxCoeff();
        const double lse = mx + std::log((a.array() - mx).exp().sum());
        return lse - lambda.dot(targets_) + 0.5 * inv_weight_ * lambda.squaredNorm();
    }

    // Distribution, moments, gradient and Hessian at lambda.
    void evaluate(const VectorXd& lambda) {
        const VectorXd a = log_base_ + coeffs_.transpose() * lambda;
        const double mx = a.maxCoeff();
        q_ = (a.array() - mx).exp();
        q_ /= q_.sum();
        moments_ = coeffs_ * q_;
        const MatrixXd centered = coeffs_.colwise() - moments_;
        hessian_ = centered * q_.asDiagonal() * centered.transpose();
        gradient_ = moments_ - targets_;
        if (soft_) {
            gradient_ += inv_weight_ * lambda;
            hessian_ += inv_weight_ * MatrixXd::Identity(constraints(), constraints());
        }
    }

    const VectorXd& q() const { return q_; }
    const VectorXd& gradient() const { return gradient_; }
    const MatrixXd& hessian() const { return hessian_; }
    VectorXd residuals() const { return moments_ - targets_; }
    bool soft() const { return soft_; }

private:
    VectorXd log_base_;
    MatrixXd coeffs_;
    VectorXd targets_;
    bool soft_;
    double inv_weight_;
    VectorXd q_, moments_, gradient_;
    MatrixXd hessian_;
};

struct Problem {
    std::vector<std::size_t> support;
    VectorXd log_base;
    MatrixXd coeffs;  // constraints x support, scaled
    VectorXd targets;
};

std::vector<double> to_caller_units(const VectorXd& scaled, double scale) {
    std::vector<double> out(static_cast<std::size_t>(scaled.size()));
    for (Eigen::Index k = 0; k < scaled.size(); ++k) out[static_cast<std::size_t>(k)] = scaled[k] * scale;
    return out;
}

void check_constraints(std::span<const ConstraintSpec> constraints, std::size_t n) {
    for (const auto& c : constraints) {
        if (c.coefficients.size() != n) {
            throw ValidationError(ValidationError::Kind::Misaligned,
                                  "constraint '" + c.label + "' has " +
                                      std::to_string(c.coefficients.size()) +
                                      " coefficients, expected " + std::to_string(n));
        }
        if (!std::isfinite(c.target)) {
            throw ValidationError(ValidationError::Kind::OutOfRange,
                                  "constraint '" + c.label + "' has a non-finite target");
        }
        for (double v : c.coefficients) {
            if (!std::isfinite(v)) {
                throw ValidationError(ValidationError::Kind::OutOfRange,
                                      "constraint '" + c.label + "' has a non-finite coefficient");
            }
        }
    }
}

// Hard targets outside [min, max] of their coefficients can never be met.
void check_box_feasibility(std::span<const ConstraintSpec> constraints, const Problem& problem,
                           const std::vector<double>& prior, const SolverSettings& settings,
                           bool cross_entropy) {
    if (settings.mode != ConstraintMode::Hard) return;
    for (Eigen::Index k = 0; k < problem.coeffs.rows(); ++k) {
        const double lo = problem.coeffs.row(k).minCoeff();
        const double hi = problem.coeffs.row(k).maxCoeff();
        const double b = problem.targets[k];
        if (b >= lo - settings.residual_tol && b <= hi + settings.residual_tol) continue;

        std::vector<double> residuals;
        for (Eigen::Index r = 0; r < problem.coeffs.rows(); ++r) {
            double m = 0.0;
            for (std::size_t i = 0; i < prior.size(); ++i) {
                m += prior[i] * constraints[static_cast<std::size_t>(r)].coefficients[i];
            }
            residuals.push_back(m - constraints[static_cast<std::size_t>(r)].target);
        }
        const auto& c = constraints[static_cast<std::size_t>(k)];
        const auto [full_lo, full_hi] = std::minmax_element(c.coefficients.begin(), c.coefficients.end());
        const bool reachable_off_support = c.target >= *full_lo && c.target <= *full_hi;
        if (cross_entropy && reachable_off_support) {
            throw SolverError(SolverError::Kind::PriorSupportConflict,
                              "constraint '" + c.label +
                                  "' is only attainable on scenarios the prior excludes",
                              std::move(residuals));
        }
        throw SolverError(SolverError::Kind::InfeasibleTarget,
                          "constraint '" + c.label + "' target outside the attainable range",
                          std::move(residuals));
    }
}

SolveResult solve(const std::vector<double>& base, bool cross_entropy,
                  std::span<const ConstraintSpec> constraints, const SolverSettings& settings) {
    settings.validate();
    const std::size_t n = base.size();
    check_constraints(constraints, n);

    Problem problem;
    for (std::size_t i = 0; i < n; ++i) {
        if (base[i] > 0.0) problem.support.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(problem.support.size());
    const auto k_count = static_cast<Eigen::Index>(constraints.size());
    problem.log_base.resize(m);
    problem.coeffs.resize(k_count, m);
    problem.targets.resize(k_count);
    for (Eigen::Index s = 0; s < m; ++s) {
        const std::size_t i = problem.support[static_cast<std::size_t>(s)];
        problem.log_base[s] = cross_entropy ? std::log(base[i]) : 0.0;
        for (Eigen::Index k = 0; k < k_count; ++k) {
            problem.coeffs(k, s) = constraints[static_cast<std::size_t>(k)].coefficients[i] / settings.scale;
        }
    }
    for (Eigen::Index k = 0; k < k_count; ++k) {
        problem.targets[k] = constraints[static_cast<std::size_t>(k)].target / settings.scale;
    }

    check_box_feasibility(constraints, problem, base, settings, cross_entropy);

    Dual dual(problem.log_base, problem.coeffs, problem.targets, settings);
    VectorXd lambda = VectorXd::Zero(k_count);
    SolveDiagnostics diag;
    int stalled = 0;
    bool converged = false;
    double min_eigenvalue = std::numeric_limits<double>::infinity();

    const auto finish = [&](const VectorXd& q_support) {
        std::vector<double> q(n, 0.0);
        for (Eigen::Index s = 0; s < m; ++s) q[problem.support[static_cast<std::size_t>(s)]] = q_support[s];
        auto misd = Misd::normalized(std::move(q));
        diag.multipliers.assign(lambda.data(), lambda.data() + lambda.size());
        diag.objective = cross_entropy ? kl_divergence(misd.weights(), base)
                                       : shannon_entropy(misd.weights());
        return SolveResult{std::move(misd), diag};
    };

    if (k_count == 0) {
        dual.evaluate(lambda);
        diag.feasible = true;
        diag.status = "converged";
        return finish(dual.q());
    }

    for (int iter = 0; iter <= settings.max_iterations; ++iter) {
        dual.evaluate(lambda);
        const VectorXd residuals = dual.residuals();
        diag.iterations = iter;
        diag.residuals = to_caller_units(residuals, settings.scale);
        diag.max_residual_scaled = k_count > 0 ? residuals.cwiseAbs().maxCoeff() : 0.0;

        const double stop_measure =
            k_count > 0 ? (dual.soft() ? dual.gradient().cwiseAbs().maxCoeff() : diag.max_residual_scaled)
                        : 0.0;
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(dual.hessian());
        const VectorXd& evals = eig.eigenvalues();
        if (k_count > 0) min_eigenvalue = std::min(min_eigenvalue, evals.minCoeff());
        diag.min_hessian_eigenvalue = std::isfinite(min_eigenvalue) ? min_eigenvalue : 0.0;
        if (stop_measure <= settings.residual_tol) {
            converged = true;
            break;
        }
        if (iter == settings.max_iterations) break;

        const double top = std::max(evals.maxCoeff(), 0.0);
        const double cutoff = std::max(top * 1e-12, std::numeric_limits<double>::min());
        VectorXd inv = VectorXd::Zero(k_count);
        bool dropped = false;
        for (Eigen::Index k = 0; k < k_count; ++k) {
            if (evals[k] > cutoff) {
                inv[k] = 1.0 / evals[k];
            } else {
                dropped = true;
            }
        }
        if (iter == 0 && dropped) diag.rank_deficient = true;

        const VectorXd& grad = dual.gradient();
        if (dropped && !dual.soft()) {
            // A combination of constraints that is constant on the support has a
            // gradient independent of the multipliers: nonzero means infeasible.
            for (Eigen::Index k = 0; k < k_count; ++k) {
                if (evals[k] > cutoff) continue;
                const VectorXd d = eig.eigenvectors().col(k);
                const VectorXd combo = problem.coeffs.transpose() * d;
                const double spread = combo.maxCoeff() - combo.minCoeff();
                if (spread <= 1e-12 * std::max(1.0, combo.cwiseAbs().maxCoeff()) &&
                    std::abs(grad.dot(d)) > settings.residual_tol) {
                    throw SolverError(SolverError::Kind::InfeasibleTarget,
                                      "constraints are jointly unattainable", diag.residuals);
                }
            }
        }
        VectorXd direction;
        if (inv.isZero()) {
            direction = -grad;
        } else {
            direction = -(eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose() * grad);
        }

        const double f0 = dual.value(lambda);
        const auto line_search = [&](const VectorXd& d) -> std::optional<double> {
            const double slope = grad.dot(d);
            if (!(slope < 0.0)) return std::nullopt;
            double t = 1.0;
            for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
                if (dual.value(lambda + t * d) <= f0 + 1e-4 * t * slope) return t;
            }
            return std::nullopt;
        };

        auto step = line_search(direction);
        if (!step) {
            direction = -grad;
            step = line_search(direction);
        }
        if (!step) {
            if (++stalled >= settings.max_stalled_iterations) {
                throw SolverError(SolverError::Kind::InfeasibleTarget,
                                  "line search stalled; targets appear unattainable",
                                  diag.residuals);
            }
            continue;
        }
        stalled = 0;
        lambda += *step * direction;
        if (lambda.cwiseAbs().maxCoeff() > settings.multiplier_cap) {
            dual.evaluate(lambda);
            throw SolverError(SolverError::Kind::InfeasibleTarget,
                              "multiplier norm exceeded cap; targets appear unattainable",
                              to_caller_units(dual.residuals(), settings.scale));
        }
    }

    if (!converged) {
        throw SolverError(SolverError::Kind::NonConvergence,
                          "no convergence after " + std::to_string(settings.max_iterations) +
                              " iterations",
                          diag.residuals);
    }
    diag.feasible = true;
    diag.status = diag.rank_deficient ? "converged (rank-deficient constraints)" : "converged";
    return finish(dual.q());
}

}  // namespace

SolveResult solve_maxent(std::span<const ConstraintSpec> constraints, std::size_t n,
                         const SolverSettings& settings) {
    if (n == 0) throw ValidationError(ValidationError::Kind::Empty, "scenario count must be >= 1");
    return solve(std::vector<double>(n, 1.0 / static_cast<double>(n)), false, constraints, settings);
}

SolveResult solve_min_cross_entropy(const Misd& prior, std::span<const ConstraintSpec> constraints,
                                    const SolverSettings& settings) {
    if (prior.size() == 0) throw ValidationError(ValidationError::Kind::Empty, "prior is empty");
    if (constraints.empty()) {
        settings.validate();
        SolveDiagnostics diag;
        diag.feasible = true;
        diag.status = "converged";
        return SolveResult{prior, diag};
    }
    return solve(prior.weights(), true, constraints, settings);
}

}  // namespace clomisd
