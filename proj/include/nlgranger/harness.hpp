#pragma once

#include "nlgranger/baselines.hpp"
#include "nlgranger/nvar.hpp"
#include "nlgranger/series.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nlgranger {

enum class Method { Mean, Lar, Lvarl2, Lvarl1, Nvar, Nvarl1, Nvarl12 };

std::string to_string(Method method);
/// Throws InvalidConfig for unknown names.
Method method_from_string(const std::string& name);
std::vector<Method> all_methods();

/// y_t = e_t + psi e_{t-1} with e_t i.i.d. Exponential(1) - 1 per coordinate.
///
/// Uniforms come from std::mt19937_64 as (x >> 11) * 2^-53 and are mapped to
/// -log(1 - u) - 1, so a seed reproduces the same series on every platform
/// with an IEEE libm. A burn-in draw provides e_0.
struct SyntheticSpec {
    Matrix psi;
    Index length = 1000;
    std::uint64_t seed = 1;

    static Matrix default_psi();
};

MultivariateSeries generate_synthetic(const SyntheticSpec& spec);

/// Logarithmic lambda grid 10^(low_exp .. high_exp) * scale, scale = sqrt(n) * l.
struct GridSpec {
    int count = 15;
    double low_exp = -3.0;
    double high_exp = 4.0;
    /// Replaces sqrt(n) * l when set.
    std::optional<double> scale;

    void validate() const;
};

/// Ascending grid values.
std::vector<double> lambda_grid(const GridSpec& grid, Index n, Index l);

/// Everything that shapes a fit except the data.
struct ModelConfig {
    int lag = 5;
    std::vector<std::vector<KernelEntry>> dictionaries{default_dictionary()};
    GridSpec grid;
    int folds = 5;
    SolverOptions solver;
    int max_outer = 500;
    double outer_rel_tol = 1e-7;
    double rank_tol = 1e-10;
};

/// Size of the kernel or group set that scales the lambda grid.
Index grid_multiplier(Method method, const ModelConfig& config, Index m);

/// A fitted model of any method, with the metadata needed to use it on raw data.
struct Forecaster {
    Method method = Method::Mean;
    std::variant<ModelFit, BaselineFit> body;
    std::vector<std::string> series_names;

    const NormStats& norm_stats() const;
    int lag() const;
    double lambda() const;
    /// Standardized inputs in, standardized predictions out.
    Matrix predict(const Matrix& inputs) const;
    bool has_adjacency() const;
    AdjacencyMatrix adjacency(double threshold = 1e-8) const;
};

Forecaster fit_method(Method method, const SupervisedSet& train, double lambda, const ModelConfig& config,
                      const NormStats& stats, std::vector<std::string> names);

struct CvResult {
    double best_lambda = 0.0;
    std::vector<double> lambdas;   // ascending
    std::vector<double> mean_mse;  // per lambda
    Matrix fold_mse;               // folds x lambdas
};

/// Contiguous-block K-fold CV over the lambda grid, sweeping from the largest
/// lambda down with warm starts. Ties go to the larger lambda.
CvResult cv_select(const SupervisedSet& train, Method method, const ModelConfig& config);

struct EvalReport {
    double mse = 0.0;
    double mse_std = 0.0;  // standard error of the per-step errors
    Vector per_step_errors;
    Index n_holdout = 0;
    std::string method;
    double lambda = 0.0;
};

using PredictFn = std::function<Matrix(const Matrix&)>;

EvalReport evaluate_holdout(const PredictFn& predict_fn, const SupervisedSet& holdout);

/// Supervised pairs whose targets are the last `holdout` rows of `values`.
SupervisedSet holdout_set(const Matrix& standardized_values, int lag, Index holdout);

struct DataSource {
    std::optional<SyntheticSpec> synthetic;
    std::optional<std::string> csv_path;
};

struct ExperimentConfig {
    DataSource data;
    Index train = 1000;
    Index holdout = 500;
    std::vector<Method> methods;
    ModelConfig model;
    /// Per-method fixed lambdas that bypass cross-validation.
    std::vector<std::pair<Method, double>> fixed_lambda;
};

struct MethodResult {
    Method method = Method::Mean;
    bool ok = false;
    std::string error;
    EvalReport report;
    std::optional<CvResult> cv;
    std::optional<AdjacencyMatrix> adjacency;
    std::optional<Forecaster> model;
    double seconds = 0.0;
};

struct ExperimentReport {
    std::vector<MethodResult> results;
    const MethodResult* find(Method method) const;
};

/// Full protocol: standardize on the training window, embed, select lambda by
/// CV, refit, score on the hold-out segment. When `out_dir` is non-empty the
/// report, MSE table and adjacency CSVs are written there after each method.
ExperimentReport run_experiment(const ExperimentConfig& config, const std::string& out_dir = {});

void write_adjacency_csv(const std::string& path, const AdjacencyMatrix& adj);

} // namespace nlgranger
