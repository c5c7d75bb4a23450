#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <string>
#include <vector>

namespace nlgranger {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Raw multivariate series: rows are time steps, columns are scalar series.
struct MultivariateSeries {
    Matrix values;
    std::vector<std::string> names;

    MultivariateSeries() = default;
    MultivariateSeries(Matrix v, std::vector<std::string> n);

    /// Builds a series with default names "y1".."ym".
    explicit MultivariateSeries(Matrix v);

    Index length() const noexcept { return values.rows(); }
    Index dim() const noexcept { return values.cols(); }

    /// Throws DimensionMismatch / BadRange when the invariants do not hold.
    void validate() const;

    /// Rows [begin, begin + count).
    MultivariateSeries slice(Index begin, Index count) const;
};

/// Per-series training statistics.
struct NormStats {
    Vector mean;
    Vector std;
};

/// Lag-embedded pairs. Inputs are grouped by source series, most recent lag
/// first, so partition j occupies the contiguous columns [j*lag, (j+1)*lag).
struct SupervisedSet {
    Matrix inputs;   // n x (m * lag)
    Matrix outputs;  // n x m
    int lag = 0;
    std::vector<std::vector<Index>> partition_map;

    Index size() const noexcept { return outputs.rows(); }
    Index dim() const noexcept { return outputs.cols(); }

    /// Columns of `inputs` that belong to series j.
    Matrix partition(Index j) const;

    /// Subset of rows, in the given order.
    SupervisedSet select_rows(const std::vector<Index>& rows) const;
};

enum class Direction { Forward, Inverse };

NormStats standardize_fit(const MultivariateSeries& series, Index train_len);

MultivariateSeries standardize_apply(const MultivariateSeries& series, const NormStats& stats,
                                     Direction direction);

/// Same transform on a bare matrix whose columns follow the stats ordering.
Matrix standardize_apply(const Matrix& values, const NormStats& stats, Direction direction);

SupervisedSet lag_embed(const MultivariateSeries& series, int lag);

/// Partition map for m series with the given lag.
std::vector<std::vector<Index>> make_partition_map(Index m, int lag);

/// Lag-embedded input rows for target times [first_target, first_target + count).
/// Requires first_target >= lag.
Matrix embed_inputs(const Matrix& values, int lag, Index first_target, Index count);

MultivariateSeries read_csv(std::istream& in);
MultivariateSeries read_csv(const std::string& path);
void write_csv(std::ostream& out, const MultivariateSeries& series);
void write_csv(const std::string& path, const MultivariateSeries& series);

} // namespace nlgranger
