#pragma once

#include "nlgranger/group_lasso.hpp"
#include "nlgranger/kernels.hpp"
#include "nlgranger/nvar.hpp"

#include <optional>
#include <string>
#include <vector>

namespace nlgranger {

enum class BaselineKind { Mean, Lar, Lvarl2, Lvarl1, NvarFull };

std::string to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& name);

/// Comparison models. Linear kinds predict inputs * coefficients; nvar_full
/// wraps an unpartitioned kernel model.
struct BaselineFit {
    BaselineKind kind = BaselineKind::Mean;
    Matrix coefficients;  // (m * lag) x m, zero for mean
    std::optional<ModelFit> nvar;
    NormStats norm_stats;
    int lag = 0;
    double lambda = 0.0;
};

struct BaselineOptions {
    SolverOptions solver;
    std::vector<KernelEntry> dictionary = default_dictionary();
    double rank_tol = 1e-10;
};

/// Per-output warm starts for the lvarl1 path.
using LinearWarmStart = std::optional<Matrix>;

BaselineFit fit_baseline(BaselineKind kind, const SupervisedSet& train, double lambda,
                         const BaselineOptions& options = {}, const LinearWarmStart& warm = std::nullopt);

Matrix predict_baseline(const BaselineFit& fit, const Matrix& new_inputs);

/// Group l2 norms of the lvarl1 coefficients, thresholded and max-rescaled.
AdjacencyMatrix baseline_adjacency(const BaselineFit& fit, double threshold = 1e-8);

/// Ridge solution of (X^T X + lambda I) B = X^T Y.
Matrix ridge_coefficients(const Matrix& X, const Matrix& Y, double lambda);

} // namespace nlgranger
