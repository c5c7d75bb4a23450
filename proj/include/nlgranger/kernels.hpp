#pragma once

#include "nlgranger/series.hpp"

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nlgranger {

enum class KernelKind { Linear, Polynomial, Gaussian };

/// Marks a kernel that sees the whole input vector instead of one partition.
inline constexpr Index kFullInput = -1;

/// One scalar input kernel.
///
/// Polynomial kernels are inhomogeneous, (1 + <u,v>)^degree. Gaussian kernels
/// use exp(-|u - v|^2 / (2 width^2)).
struct KernelSpec {
    KernelKind kind = KernelKind::Linear;
    double parameter = 0.0;  // degree for polynomial, width for gaussian
    Index partition = kFullInput;
    std::optional<double> norm_factor;

    static KernelSpec linear(Index partition = kFullInput);
    static KernelSpec polynomial(int degree, Index partition = kFullInput);
    static KernelSpec gaussian(double width, Index partition = kFullInput);

    std::string label() const;
};

/// A dictionary entry before it is attached to a partition.
struct KernelEntry {
    KernelKind kind = KernelKind::Linear;
    double parameter = 0.0;
};

/// Linear, polynomial degree 2 and 3, gaussian widths 0.5, 1 and 2.
std::vector<KernelEntry> default_dictionary();

/// One dictionary per partition, in partition order. A single dictionary is
/// replicated across all m partitions.
std::vector<KernelSpec> partitioned_specs(const std::vector<std::vector<KernelEntry>>& dictionaries,
                                          Index m);
std::vector<KernelSpec> partitioned_specs(const std::vector<KernelEntry>& dictionary, Index m);

/// Every entry applied to the full input vector (no partitioning).
std::vector<KernelSpec> full_input_specs(const std::vector<KernelEntry>& dictionary);

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& u,
                   const Eigen::Ref<const Vector>& v);

struct NormalizedGram {
    Matrix gram;         // rho * raw gram, trace n
    double norm_factor;  // rho = n / trace(raw)
};

/// `rows` holds one point per row.
NormalizedGram gram_matrix(const KernelSpec& spec, const Matrix& rows);

/// rho * k(test_t, train_s) with the rho stored on the spec.
Matrix cross_gram(const KernelSpec& spec, const Matrix& train_rows, const Matrix& test_rows);

/// Eigenvalue-based factor Phi with Phi Phi^T = K. Columns are ordered by
/// decreasing eigenvalue and only eigenvalues above tol * lambda_max are kept.
Matrix empirical_features(const Matrix& gram, double tol = 1e-10);

/// Columns of `inputs` seen by a kernel.
Matrix kernel_inputs(const KernelSpec& spec, const Matrix& inputs,
                     const std::vector<std::vector<Index>>& partition_map);

struct GramStack {
    std::vector<Matrix> grams;
    std::vector<KernelSpec> specs;                  // norm_factor filled in
    std::vector<std::pair<Index, int>> group_index; // (partition j, position i within j)

    std::size_t size() const noexcept { return grams.size(); }
    Index n() const noexcept { return grams.empty() ? 0 : grams.front().rows(); }

    /// Sorted distinct partitions, one per l1/l2 group.
    std::vector<Index> partitions() const;
};

/// Empirical features of every Gram matrix, stored side by side in one
/// n x sum(r_d) matrix; block d spans columns [offsets[d], offsets[d+1]).
struct FeatureStack {
    std::shared_ptr<const Matrix> stacked;
    std::vector<Index> offsets;
    /// Largest eigenvalue of sum_d K^d, i.e. the squared spectral norm of `stacked`.
    double spectral_norm_sq = 0.0;

    std::size_t size() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
    Index rank(std::size_t d) const { return offsets[d + 1] - offsets[d]; }
    auto block(std::size_t d) const { return stacked->middleCols(offsets[d], rank(d)); }
};

GramStack build_gram_stack(std::vector<KernelSpec> specs, const Matrix& inputs,
                           const std::vector<std::vector<Index>>& partition_map);

FeatureStack build_feature_stack(const GramStack& grams, double tol = 1e-10);

/// Cross Gram matrices of every kernel in the stack against new inputs.
std::vector<Matrix> cross_gram_stack(const GramStack& grams, const Matrix& train_inputs,
                                     const Matrix& test_inputs,
                                     const std::vector<std::vector<Index>>& partition_map);

std::string to_string(KernelKind kind);
KernelKind kernel_kind_from_string(const std::string& name);

} // namespace nlgranger
