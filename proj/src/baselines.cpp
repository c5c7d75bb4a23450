#include "nlgranger/baselines.hpp"

#include "nlgranger/error.hpp"
#include "nlgranger/parallel.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include <cmath>
#include <memory>

namespace nlgranger {

std::string to_string(BaselineKind kind) {
    switch (kind) {
    case BaselineKind::Mean: return "mean";
    case BaselineKind::Lar: return "lar";
    case BaselineKind::Lvarl2: return "lvarl2";
    case BaselineKind::Lvarl1: return "lvarl1";
    case BaselineKind::NvarFull: return "nvar";
    }
    return "unknown";
}

BaselineKind baseline_kind_from_string(const std::string& name) {
    if (name == "mean") return BaselineKind::Mean;
    if (name == "lar") return BaselineKind::Lar;
    if (name == "lvarl2" || name == "lvar") return BaselineKind::Lvarl2;
    if (name == "lvarl1") return BaselineKind::Lvarl1;
    if (name == "nvar" || name == "nvar_full") return BaselineKind::NvarFull;
    throw Error(ErrorCode::UnsupportedKind, "unknown baseline '" + name + "'");
}

Matrix ridge_coefficients(const Matrix& X, const Matrix& Y, double lambda) {
    if (X.rows() != Y.rows()) throw Error(ErrorCode::DimensionMismatch, "design and targets differ in rows");
    if (!(lambda >= 0.0)) throw Error(ErrorCode::BadRange, "lambda must be nonnegative");
    if (lambda == 0.0) return X.colPivHouseholderQr().solve(Y);
    Matrix system = X.transpose() * X;
    system.diagonal().array() += lambda;
    return system.llt().solve(X.transpose() * Y);
}

BaselineFit fit_baseline(BaselineKind kind, const SupervisedSet& train, double lambda,
                         const BaselineOptions& options, const LinearWarmStart& warm) {
    const Index m = train.dim();
    const Index width = train.inputs.cols();
    if (train.size() < 1) throw Error(ErrorCode::BadRange, "empty training set");
    if (kind != BaselineKind::Mean && !(lambda >= 0.0))
        throw Error(ErrorCode::BadRange, "lambda must be nonnegative");

    BaselineFit out;
    out.kind = kind;
    out.lag = train.lag;
    out.lambda = lambda;
    out.coefficients = Matrix::Zero(width, m);

    switch (kind) {
    case BaselineKind::Mean:
        break;
    case BaselineKind::Lar:
        for (Index s = 0; s < m; ++s) {
            const auto& cols = train.partition_map[static_cast<std::size_t>(s)];
            const Matrix own = train.partition(s);
            const Vector b = ridge_coefficients(own, train.outputs.col(s), lambda);
            for (std::size_t k = 0; k < cols.size(); ++k) out.coefficients(cols[k], s) = b(static_cast<Index>(k));
        }
        break;
    case BaselineKind::Lvarl2:
        out.coefficients = ridge_coefficients(train.inputs, train.outputs, lambda);
        break;
    case BaselineKind::Lvarl1: {
        if (warm && (warm->rows() != width || warm->cols() != m))
            throw Error(ErrorCode::DimensionMismatch, "lvarl1 warm start has the wrong shape");
        // Partition map slices are contiguous, so groups are column ranges.
        std::vector<Index> offsets{0};
        for (const auto& cols : train.partition_map) {
            if (cols.front() != offsets.back())
                throw Error(ErrorCode::DimensionMismatch, "partition map is not contiguous");
            offsets.push_back(offsets.back() + static_cast<Index>(cols.size()));
        }
        auto design = std::make_shared<const Matrix>(train.inputs);
        const double sigma = spectral_norm_sq(*design);
        parallel_for(static_cast<std::size_t>(m), [&](std::size_t s) {
            GroupedProblem problem;
            problem.design = design;
            problem.offsets = offsets;
            problem.target = train.outputs.col(static_cast<Index>(s));
            problem.penalty = lambda;
            problem.spectral_norm_sq = sigma;
            std::optional<Vector> start;
            if (warm) start = Vector(warm->col(static_cast<Index>(s)));
            out.coefficients.col(static_cast<Index>(s)) = solve_group_lasso(problem, start, options.solver).weights;
        });
        break;
    }
    case BaselineKind::NvarFull: {
        if (!(lambda > 0.0)) throw Error(ErrorCode::BadRange, "nvar needs a positive lambda");
        FitOptions fo;
        fo.penalty = Penalty::L1;
        fo.method = "nvar";
        fo.solver = options.solver;
        fo.rank_tol = options.rank_tol;
        out.nvar = fit(train, full_input_specs(options.dictionary), Vector::Constant(1, lambda), fo);
        out.coefficients.resize(0, 0);
        break;
    }
    }
    return out;
}

Matrix predict_baseline(const BaselineFit& fit, const Matrix& new_inputs) {
    if (fit.kind == BaselineKind::NvarFull) {
        if (!fit.nvar) throw Error(ErrorCode::DimensionMismatch, "nvar baseline has no kernel model");
        return predict(*fit.nvar, new_inputs);
    }
    if (new_inputs.cols() != fit.coefficients.rows())
        throw Error(ErrorCode::DimensionMismatch, "new inputs have " + std::to_string(new_inputs.cols()) +
                                                      " columns, model expects " +
                                                      std::to_string(fit.coefficients.rows()));
    return new_inputs * fit.coefficients;
}

AdjacencyMatrix baseline_adjacency(const BaselineFit& fit, double threshold) {
    if (fit.kind != BaselineKind::Lvarl1)
        throw Error(ErrorCode::UnsupportedKind, "adjacency is only defined for lvarl1 baselines");
    const Index m = fit.coefficients.cols();
    if (fit.lag < 1 || fit.coefficients.rows() != m * fit.lag)
        throw Error(ErrorCode::DimensionMismatch, "coefficient matrix does not match lag and outputs");
    Matrix raw(m, m);
    for (Index j = 0; j < m; ++j)
        for (Index s = 0; s < m; ++s) raw(j, s) = fit.coefficients.block(j * fit.lag, s, fit.lag, 1).norm();
    return normalize_adjacency(std::move(raw), threshold);
}

} // namespace nlgranger
