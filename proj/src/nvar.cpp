#include "nlgranger/nvar.hpp"

#include "nlgranger/error.hpp"
#include "nlgranger/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <lapacke.h>

#include <cmath>
#include <map>

namespace nlgranger {

namespace {

constexpr double kResidualTol = 1e-8;

void check_task_inputs(const GramStack& grams, Index y_size, Index a_size, double lambda) {
    if (grams.size() == 0) throw Error(ErrorCode::DimensionMismatch, "empty gram stack");
    if (y_size != grams.n()) throw Error(ErrorCode::DimensionMismatch, "target length differs from gram size");
    if (a_size != static_cast<Index>(grams.size()))
        throw Error(ErrorCode::DimensionMismatch, "kernel weight vector has the wrong length");
    if (!(lambda > 0.0)) throw Error(ErrorCode::BadRange, "lambda must be positive");
}

// Kernel indices per input partition, in partition order.
std::vector<std::vector<std::size_t>> partition_groups(const GramStack& grams) {
    std::map<Index, std::vector<std::size_t>> by_partition;
    for (std::size_t d = 0; d < grams.size(); ++d) by_partition[grams.group_index[d].first].push_back(d);
    std::vector<std::vector<std::size_t>> groups;
    for (auto& [j, members] : by_partition) groups.push_back(std::move(members));
    return groups;
}

double l12_penalty(const std::vector<std::vector<std::size_t>>& groups, const Vector& a) {
    double total = 0.0;
    for (const auto& members : groups) {
        double ss = 0.0;
        for (auto d : members) ss += a(static_cast<Index>(d)) * a(static_cast<Index>(d));
        total += std::sqrt(ss);
    }
    return total;
}

} // namespace

std::vector<std::vector<Index>> ModelFit::partition_map() const {
    if (lag < 1) throw Error(ErrorCode::BadRange, "model has no lag");
    return make_partition_map(train_inputs.cols() / lag, lag);
}

Penalty penalty_for_method(const std::string& method) {
    if (method == "nvarl12") return Penalty::L1L2;
    if (method == "nvarl1" || method == "nvar") return Penalty::L1;
    throw Error(ErrorCode::UnsupportedKind, "unknown kernel method '" + method + "'");
}

Matrix combined_gram(const GramStack& grams, const Eigen::Ref<const Vector>& a) {
    Matrix total = Matrix::Zero(grams.n(), grams.n());
    for (std::size_t d = 0; d < grams.size(); ++d) {
        const double w = a(static_cast<Index>(d));
        if (w != 0.0) total += w * grams.grams[d];
    }
    return total;
}

double task_objective(const GramStack& grams, const Eigen::Ref<const Vector>& y,
                      const Eigen::Ref<const Vector>& a, const Eigen::Ref<const Vector>& c, double lambda,
                      Penalty penalty) {
    check_task_inputs(grams, y.size(), a.size(), lambda);
    if (c.size() != grams.n()) throw Error(ErrorCode::DimensionMismatch, "coefficient vector has the wrong length");
    Vector fitted = Vector::Zero(grams.n());
    double ridge = 0.0;
    for (std::size_t d = 0; d < grams.size(); ++d) {
        const double w = a(static_cast<Index>(d));
        if (w == 0.0) continue;
        const Vector kc = grams.grams[d] * c;
        fitted += w * kc;
        ridge += w * c.dot(kc);
    }
    const double reg = penalty == Penalty::L1 ? a.sum() : l12_penalty(partition_groups(grams), a);
    return (y - fitted).squaredNorm() + lambda * ridge + reg;
}

namespace {

// Cholesky solve of an SPD system with iterative refinement. LAPACK overwrites
// the lower triangle and diagonal; the strict upper triangle keeps the system.
Vector spd_solve(Matrix& system, const Eigen::Ref<const Vector>& y) {
    const auto n = static_cast<lapack_int>(system.rows());
    const Vector diagonal = system.diagonal();
    auto apply = [&](const Vector& x) -> Vector {
        const Matrix& sys = system;
        Vector out = diagonal.cwiseProduct(x);
        out.noalias() += sys.triangularView<Eigen::StrictlyUpper>() * x;
        out.noalias() += sys.transpose().triangularView<Eigen::StrictlyLower>() * x;
        return out;
    };
    if (LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', n, system.data(), n) != 0)
        throw Error(ErrorCode::SingularSystem, "coefficient system is not positive definite");
    auto solve = [&](Vector rhs) {
        LAPACKE_dpotrs(LAPACK_COL_MAJOR, 'L', n, 1, system.data(), n, rhs.data(), n);
        return rhs;
    };
    Vector c = solve(y);
    const double target = kResidualTol * y.norm();
    Vector r = y - apply(c);
    for (int refine = 0; refine < 3 && r.norm() > target; ++refine) {
        c += solve(r);
        r = y - apply(c);
    }
    if (r.norm() > target) throw Error(ErrorCode::SingularSystem, "coefficient system is numerically singular");
    return c;
}

} // namespace

Vector solve_coefficients(const GramStack& grams, const Eigen::Ref<const Vector>& a,
                          const Eigen::Ref<const Vector>& y, double lambda) {
    check_task_inputs(grams, y.size(), a.size(), lambda);
    Matrix system = combined_gram(grams, a);
    system.diagonal().array() += lambda;
    return spd_solve(system, y);
}

TaskSolution solve_task_l1(const FeatureStack& features, const GramStack& grams,
                           const Eigen::Ref<const Vector>& y, double lambda,
                           const std::optional<TaskSolution>& warm, const SolverOptions& opts) {
    check_task_inputs(grams, y.size(), static_cast<Index>(features.size()), lambda);
    if (features.stacked->rows() != grams.n())
        throw Error(ErrorCode::DimensionMismatch, "feature and gram stacks disagree on n");

    GroupedProblem problem;
    problem.design = features.stacked;
    problem.offsets = features.offsets;
    problem.target = y;
    problem.penalty = 2.0 * std::sqrt(lambda);
    problem.spectral_norm_sq = features.spectral_norm_sq;

    std::optional<Vector> start;
    if (warm && warm->z && warm->z->size() == problem.width()) start = *warm->z;
    SolverOptions unconstrained = opts;
    unconstrained.nonneg = false;
    GroupedSolution gl = solve_group_lasso(problem, start, unconstrained);

    TaskSolution out;
    const double root = std::sqrt(lambda);
    out.a.resize(static_cast<Index>(features.size()));
    for (std::size_t d = 0; d < features.size(); ++d) out.a(static_cast<Index>(d)) = root * gl.group(d).norm();
    out.c = solve_coefficients(grams, out.a, y, lambda);
    out.objective = task_objective(grams, y, out.a, out.c, lambda, Penalty::L1);
    out.converged = gl.converged;
    out.iterations = gl.iterations;
    out.objective_trace = std::move(gl.objective_trace);
    out.z = std::move(gl.weights);
    return out;
}

TaskSolution solve_task_l12(const GramStack& grams, const Eigen::Ref<const Vector>& y, double lambda,
                            const std::optional<TaskSolution>& warm, const SolverOptions& opts, int max_outer,
                            double outer_rel_tol) {
    const auto l = static_cast<Index>(grams.size());
    check_task_inputs(grams, y.size(), l, lambda);
    opts.validate();
    if (max_outer < 1) throw Error(ErrorCode::InvalidConfig, "max_outer must be >= 1");
    const auto groups = partition_groups(grams);
    const Index n = grams.n();

    TaskSolution sol;
    sol.a = (warm && warm->a.size() == l) ? Vector(warm->a.cwiseMax(0.0))
                                          : Vector(Vector::Constant(l, 1.0 / static_cast<double>(l)));
    sol.c = solve_coefficients(grams, sol.a, y, lambda);

    // V = [K^1 c, ..., K^l c] and q_d = c^T K^d c for the current c. The
    // objective and the next a-step both read them, so each costs one pass.
    Matrix V(n, l);
    Vector q(l);
    auto refresh = [&] {
        for (Index d = 0; d < l; ++d) {
            V.col(d).noalias() = grams.grams[static_cast<std::size_t>(d)] * sol.c;
            q(d) = sol.c.dot(V.col(d));
        }
        return (y - V * sol.a).squaredNorm() + lambda * q.dot(sol.a) + l12_penalty(groups, sol.a);
    };
    double objective = refresh();
    if (!std::isfinite(objective)) throw Error(ErrorCode::NonFiniteObjective, "initial objective is not finite");
    sol.objective_trace.push_back(objective);

    for (int outer = 0; outer < max_outer; ++outer) {
        // Smooth part in a for fixed c: |y - V a|^2 + lambda q^T a.
        const Matrix gram_v = V.transpose() * V;
        const double top = Eigen::SelfAdjointEigenSolver<Matrix>(gram_v, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
        double step = top > 0.0 ? opts.initial_step / (2.0 * top) : opts.initial_step;

        const Vector fitted = V * sol.a;
        const double smooth = (y - fitted).squaredNorm() + lambda * q.dot(sol.a);
        const Vector grad = -2.0 * V.transpose() * (y - fitted) + lambda * q;
        Vector next(l);
        for (;;) {
            const Vector moved = sol.a - step * grad;
            for (const auto& members : groups) {
                Vector block(static_cast<Index>(members.size()));
                for (std::size_t k = 0; k < members.size(); ++k)
                    block(static_cast<Index>(k)) = moved(static_cast<Index>(members[k]));
                block = block_soft_threshold(block, step, true);
                for (std::size_t k = 0; k < members.size(); ++k)
                    next(static_cast<Index>(members[k])) = block(static_cast<Index>(k));
            }
            const double smooth_next = (y - V * next).squaredNorm() + lambda * q.dot(next);
            if (!std::isfinite(smooth_next)) throw Error(ErrorCode::NonFiniteObjective, "a-step diverged");
            const Vector delta = next - sol.a;
            if (smooth_next <= smooth + grad.dot(delta) + delta.squaredNorm() / (2.0 * step) + 1e-14 * std::abs(smooth))
                break;
            step *= opts.backtrack_factor;
            if (step < 1e-300) throw Error(ErrorCode::NonFiniteObjective, "line search step underflow");
        }
        sol.a = next;
        sol.c = solve_coefficients(grams, sol.a, y, lambda);
        const double next_objective = refresh();
        if (!std::isfinite(next_objective)) throw Error(ErrorCode::NonFiniteObjective, "objective became non-finite");
        const double change = objective - next_objective;
        objective = next_objective;
        sol.objective_trace.push_back(objective);
        sol.iterations = outer + 1;
        if (std::abs(change) <= outer_rel_tol * std::max(std::abs(objective), 1e-300) || objective == 0.0) {
            sol.converged = true;
            break;
        }
    }
    sol.objective = objective;
    return sol;
}

std::vector<TaskSolution> solve_tasks(const GramStack& grams, const FeatureStack* features, const Matrix& Y,
                                      const Vector& lambdas, const FitOptions& options,
                                      const std::vector<TaskSolution>* warm) {
    const auto m = static_cast<std::size_t>(Y.cols());
    if (lambdas.size() != Y.cols()) throw Error(ErrorCode::DimensionMismatch, "need one lambda per output");
    if (warm && warm->size() != m) throw Error(ErrorCode::DimensionMismatch, "warm start count differs from outputs");
    if (options.penalty == Penalty::L1 && !features)
        throw Error(ErrorCode::InvalidConfig, "the L1 path needs empirical features");
    std::vector<TaskSolution> out(m);
    parallel_for(m, [&](std::size_t s) {
        std::optional<TaskSolution> start;
        if (warm) start = (*warm)[s];
        const Vector y = Y.col(static_cast<Index>(s));
        const double lambda = lambdas(static_cast<Index>(s));
        out[s] = options.penalty == Penalty::L1
                     ? solve_task_l1(*features, grams, y, lambda, start, options.solver)
                     : solve_task_l12(grams, y, lambda, start, options.solver, options.max_outer,
                                      options.outer_rel_tol);
    });
    return out;
}

ModelFit fit(const SupervisedSet& train, std::vector<KernelSpec> specs, const Vector& lambda,
             const FitOptions& options) {
    const Index m = train.dim();
    if (train.size() < 1) throw Error(ErrorCode::BadRange, "empty training set");
    if (lambda.size() != 1 && lambda.size() != m)
        throw Error(ErrorCode::DimensionMismatch, "lambda must be a scalar or one value per output");
    const Vector lambdas = lambda.size() == 1 ? Vector(Vector::Constant(m, lambda(0))) : lambda;

    GramStack grams = build_gram_stack(std::move(specs), train.inputs, train.partition_map);
    std::optional<FeatureStack> features;
    if (options.penalty == Penalty::L1) features = build_feature_stack(grams, options.rank_tol);
    const auto tasks = solve_tasks(grams, features ? &*features : nullptr, train.outputs, lambdas, options);

    ModelFit model;
    model.method = options.method;
    model.lag = train.lag;
    model.specs = grams.specs;
    model.A.resize(static_cast<Index>(grams.size()), m);
    model.C.resize(train.size(), m);
    for (Index s = 0; s < m; ++s) {
        model.A.col(s) = tasks[static_cast<std::size_t>(s)].a;
        model.C.col(s) = tasks[static_cast<std::size_t>(s)].c;
    }
    model.train_inputs = train.inputs;
    model.lambda = lambdas;
    return model;
}

Matrix predict_from_cross(const std::vector<Matrix>& cross, const Matrix& A, const Matrix& C) {
    if (cross.size() != static_cast<std::size_t>(A.rows()))
        throw Error(ErrorCode::DimensionMismatch, "cross gram count differs from kernel count");
    const Index n_new = cross.empty() ? 0 : cross.front().rows();
    Matrix out = Matrix::Zero(n_new, A.cols());
    for (std::size_t d = 0; d < cross.size(); ++d) {
        const auto weights = A.row(static_cast<Index>(d));
        if (weights.isZero(0.0)) continue;
        if (cross[d].cols() != C.rows()) throw Error(ErrorCode::DimensionMismatch, "cross gram width differs from n");
        out.noalias() += (cross[d] * C) * weights.asDiagonal();
    }
    return out;
}

Matrix predict(const ModelFit& model, const Matrix& new_inputs) {
    if (new_inputs.cols() != model.train_inputs.cols())
        throw Error(ErrorCode::DimensionMismatch, "new inputs have " + std::to_string(new_inputs.cols()) +
                                                      " columns, model expects " +
                                                      std::to_string(model.train_inputs.cols()));
    if (static_cast<Index>(model.specs.size()) != model.A.rows())
        throw Error(ErrorCode::DimensionMismatch, "model kernel count differs from A");
    const auto map = model.partition_map();
    Matrix out = Matrix::Zero(new_inputs.rows(), model.A.cols());
    for (std::size_t d = 0; d < model.specs.size(); ++d) {
        const auto weights = model.A.row(static_cast<Index>(d));
        if (weights.isZero(0.0)) continue;
        const auto& spec = model.specs[d];
        const Matrix cross = cross_gram(spec, kernel_inputs(spec, model.train_inputs, map),
                                        kernel_inputs(spec, new_inputs, map));
        out.noalias() += (cross * model.C) * weights.asDiagonal();
    }
    return out;
}

AdjacencyMatrix normalize_adjacency(Matrix raw, double threshold) {
    const double top = raw.size() ? raw.maxCoeff() : 0.0;
    if (!(top > 0.0)) return {Matrix::Zero(raw.rows(), raw.cols())};
    raw = (raw.array() < threshold * top).select(0.0, raw);
    raw /= top;
    return {std::move(raw)};
}

AdjacencyMatrix adjacency(const ModelFit& model, double threshold) {
    const Index m = model.A.cols();
    Matrix raw = Matrix::Zero(m, m);
    for (std::size_t d = 0; d < model.specs.size(); ++d) {
        const Index j = model.specs[d].partition;
        if (j == kFullInput)
            throw Error(ErrorCode::UnsupportedKind, "an unpartitioned model carries no Granger structure");
        if (j < 0 || j >= m) throw Error(ErrorCode::DimensionMismatch, "kernel partition out of range");
        raw.row(j) += model.A.row(static_cast<Index>(d));
    }
    return normalize_adjacency(std::move(raw), threshold);
}

} // namespace nlgranger
