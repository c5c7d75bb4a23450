#pragma once

#include "nlgranger/group_lasso.hpp"
#include "nlgranger/kernels.hpp"
#include "nlgranger/series.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nlgranger {

/// Sparsity regularizer on the output-kernel weights.
///   L1:   sum_d a_d
///   L1L2: sum_j sqrt(sum_i a_(ji)^2), one group per input partition j
enum class Penalty { L1, L1L2 };

/// Solution of one per-output problem.
struct TaskSolution {
    Vector a;                 // one nonnegative weight per kernel
    Vector c;                 // representer coefficients
    std::optional<Vector> z;  // flat empirical-feature weights (L1 path only)
    double objective = 0.0;
    bool converged = false;
    int iterations = 0;
    std::vector<double> objective_trace;
};

/// Learned forecaster. Column s of A and C belongs to output series s.
struct ModelFit {
    std::string method;  // "nvarl1", "nvarl12" or "nvar"
    int lag = 0;
    std::vector<KernelSpec> specs;  // norm factors filled in
    Matrix A;                       // l x m, nonnegative
    Matrix C;                       // n x m
    Matrix train_inputs;            // n x (m * lag), standardized
    NormStats norm_stats;
    Vector lambda;                  // one per output

    Index outputs() const noexcept { return A.cols(); }
    Index kernels() const noexcept { return A.rows(); }
    std::vector<std::vector<Index>> partition_map() const;
};

struct AdjacencyMatrix {
    /// values(j, s): influence of series j on series s, max entry 1 unless all zero.
    Matrix values;
};

/// Options for fitting every output of a kernel model.
struct FitOptions {
    Penalty penalty = Penalty::L1;
    std::string method = "nvarl1";
    SolverOptions solver;
    /// Outer alternating iterations for the L1/L2 path.
    int max_outer = 500;
    double outer_rel_tol = 1e-7;
    double rank_tol = 1e-10;
};

double task_objective(const GramStack& grams, const Eigen::Ref<const Vector>& y,
                      const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& c, double lambda,
                      Penalty penalty);

/// Solves (sum_d a_d K^d + lambda I) c = y by Cholesky factorization.
Vector solve_coefficients(const GramStack& grams, const Eigen::Ref<const Vector>& a,
                          const Eigen::Ref<const Vector>& y, double lambda);

/// Weighted kernel sum sum_d a_d K^d.
Matrix combined_gram(const GramStack& grams, const Eigen::Ref<const Vector>& a);

/// L1 path: group lasso on the empirical features with penalty 2 sqrt(lambda),
/// then a_d = sqrt(lambda) |z^d| and c from the linear system.
TaskSolution solve_task_l1(const FeatureStack& features, const GramStack& grams,
                           const Eigen::Ref<const Vector>& y, double lambda,
                           const std::optional<TaskSolution>& warm = std::nullopt,
                           const SolverOptions& opts = {});

/// L1/L2 path: alternate an exact c-step with one proximal gradient a-step.
/// The problem is not jointly convex; the result may be a local minimum.
TaskSolution solve_task_l12(const GramStack& grams, const Eigen::Ref<const Vector>& y, double lambda,
                            const std::optional<TaskSolution>& warm = std::nullopt,
                            const SolverOptions& opts = {}, int max_outer = 500,
                            double outer_rel_tol = 1e-7);

/// Solves every column of Y independently over shared grams and features.
/// `features` may be null for the L1/L2 path. `lambdas` has one entry per column.
std::vector<TaskSolution> solve_tasks(const GramStack& grams, const FeatureStack* features, const Matrix& Y,
                                      const Vector& lambdas, const FitOptions& options,
                                      const std::vector<TaskSolution>* warm = nullptr);

/// Builds the Gram stack on the training inputs and fits every output.
/// `lambda` holds one value for all tasks or one per task.
ModelFit fit(const SupervisedSet& train, std::vector<KernelSpec> specs, const Vector& lambda,
             const FitOptions& options = {});

/// Predictions in standardized space, one column per output.
Matrix predict(const ModelFit& model, const Matrix& new_inputs);

/// sum_d diag(A_d.) applied to precomputed cross Gram matrices.
Matrix predict_from_cross(const std::vector<Matrix>& cross, const Matrix& A, const Matrix& C);

/// Sums A over the kernels of each partition; only valid for partitioned models.
AdjacencyMatrix adjacency(const ModelFit& model, double threshold = 1e-8);

/// Zeroes entries below threshold * max and rescales the max to 1.
AdjacencyMatrix normalize_adjacency(Matrix raw, double threshold = 1e-8);

Penalty penalty_for_method(const std::string& method);

} // namespace nlgranger
