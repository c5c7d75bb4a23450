#pragma once

#include "nlgranger/series.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace nlgranger {

/// min_w |y - sum_g B_g w_g|_2^2 + penalty * sum_g |w_g|_2
///
/// The blocks B_g are stored side by side in one n x R design matrix; group g
/// owns columns [offsets[g], offsets[g+1]). There is no 1/2 on the loss.
struct GroupedProblem {
    std::shared_ptr<const Matrix> design;
    std::vector<Index> offsets;
    Vector target;
    double penalty = 0.0;
    /// Largest eigenvalue of design * design^T if already known.
    std::optional<double> spectral_norm_sq;

    static GroupedProblem from_blocks(const std::vector<Matrix>& blocks, Vector target, double penalty);

    std::size_t groups() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    Index width() const noexcept { return offsets.empty() ? 0 : offsets.back(); }
    Index group_size(std::size_t g) const { return offsets[g + 1] - offsets[g]; }

    /// Throws DimensionMismatch / BadRange when malformed.
    void validate() const;
};

struct SolverOptions {
    int max_iter = 2000;
    double rel_tol = 1e-7;
    double initial_step = 1.0;  // multiplies 1 / Lipschitz constant
    double backtrack_factor = 0.5;
    bool nonneg = false;
    /// Monotone accelerated steps (MFISTA with restart). The accepted iterate
    /// never increases the objective, as with plain ISTA.
    bool accelerate = true;

    void validate() const;
};

struct GroupedSolution {
    Vector weights;  // flat, same layout as the design columns
    std::vector<Index> offsets;
    std::vector<double> objective_trace;
    int iterations = 0;
    bool converged = false;

    auto group(std::size_t g) const { return weights.segment(offsets[g], offsets[g + 1] - offsets[g]); }
    double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

/// Proximal operator of t * |.|_2, optionally restricted to the nonnegative orthant.
Vector block_soft_threshold(const Eigen::Ref<const Vector>& v, double t, bool nonneg = false);

double group_lasso_objective(const GroupedProblem& problem, const Eigen::Ref<const Vector>& weights);

/// Proximal gradient descent with backtracking line search. Plain ISTA when
/// `opts.accelerate` is false, monotone FISTA otherwise.
GroupedSolution solve_group_lasso(const GroupedProblem& problem,
                                  const std::optional<Vector>& warm_start = std::nullopt,
                                  const SolverOptions& opts = {});

/// Largest violation of the group-lasso optimality conditions.
double optimality_gap(const GroupedProblem& problem, const Eigen::Ref<const Vector>& weights);

/// Largest eigenvalue of M^T M by power iteration.
double spectral_norm_sq(const Matrix& m);

} // namespace nlgranger
