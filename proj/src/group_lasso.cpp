#include "nlgranger/group_lasso.hpp"

#include "nlgranger/error.hpp"

#include <cmath>

namespace nlgranger {

namespace {

// Forward product restricted to groups with nonzero weights.
void residual(const GroupedProblem& problem, const Vector& weights, const std::vector<char>& active,
              Vector& out) {
    out = -problem.target;
    const Matrix& design = *problem.design;
    for (std::size_t g = 0; g < problem.groups(); ++g) {
        if (!active[g]) continue;
        const Index begin = problem.offsets[g];
        const Index size = problem.group_size(g);
        out.noalias() += design.middleCols(begin, size) * weights.segment(begin, size);
    }
}

double penalty_sum(const GroupedProblem& problem, const Vector& weights) {
    double total = 0.0;
    for (std::size_t g = 0; g < problem.groups(); ++g)
        total += weights.segment(problem.offsets[g], problem.group_size(g)).norm();
    return total;
}

// F(x) - F(z) from differences, so it stays accurate when far below eps * F.
double objective_decrease(const GroupedProblem& problem, const Vector& x, const Vector& r_x, const Vector& z,
                          const Vector& r_z) {
    double penalty = 0.0;
    for (std::size_t g = 0; g < problem.groups(); ++g) {
        const auto xg = x.segment(problem.offsets[g], problem.group_size(g));
        const auto zg = z.segment(problem.offsets[g], problem.group_size(g));
        const double denom = xg.norm() + zg.norm();
        if (denom > 0.0) penalty += (xg - zg).dot(xg + zg) / denom;
    }
    return (r_x - r_z).dot(r_x + r_z) + problem.penalty * penalty;
}

} // namespace

GroupedProblem GroupedProblem::from_blocks(const std::vector<Matrix>& blocks, Vector target,
                                           double penalty) {
    GroupedProblem problem;
    problem.offsets.assign(1, 0);
    for (const auto& b : blocks) {
        if (b.rows() != target.size())
            throw Error(ErrorCode::DimensionMismatch, "block row count differs from target length");
        problem.offsets.push_back(problem.offsets.back() + b.cols());
    }
    auto design = std::make_shared<Matrix>(target.size(), problem.offsets.back());
    for (std::size_t g = 0; g < blocks.size(); ++g)
        design->middleCols(problem.offsets[g], blocks[g].cols()) = blocks[g];
    problem.design = std::move(design);
    problem.target = std::move(target);
    problem.penalty = penalty;
    return problem;
}

void GroupedProblem::validate() const {
    if (!design) throw Error(ErrorCode::DimensionMismatch, "grouped problem has no design matrix");
    if (design->rows() != target.size())
        throw Error(ErrorCode::DimensionMismatch, "design rows differ from target length");
    if (offsets.empty() || offsets.front() != 0 || offsets.back() != design->cols())
        throw Error(ErrorCode::DimensionMismatch, "group offsets do not cover the design");
    for (std::size_t g = 0; g + 1 < offsets.size(); ++g)
        if (offsets[g + 1] < offsets[g]) throw Error(ErrorCode::DimensionMismatch, "group offsets not sorted");
    if (!(penalty >= 0.0)) throw Error(ErrorCode::BadRange, "penalty must be nonnegative");
}

void SolverOptions::validate() const {
    if (max_iter < 1) throw Error(ErrorCode::InvalidConfig, "max_iter must be >= 1");
    if (!(rel_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "rel_tol must be positive");
    if (!(backtrack_factor > 0.0 && backtrack_factor < 1.0))
        throw Error(ErrorCode::InvalidConfig, "backtrack_factor must lie in (0, 1)");
    if (!(initial_step > 0.0)) throw Error(ErrorCode::InvalidConfig, "initial_step must be positive");
}

Vector block_soft_threshold(const Eigen::Ref<const Vector>& v, double t, bool nonneg) {
    Vector out = nonneg ? Vector(v.cwiseMax(0.0)) : Vector(v);
    const double norm = out.norm();
    if (norm == 0.0 || norm <= t) return Vector::Zero(v.size());
    if (t > 0.0) out *= 1.0 - t / norm;
    return out;
}

double group_lasso_objective(const GroupedProblem& problem, const Eigen::Ref<const Vector>& weights) {
    const Vector w = weights;
    const Vector r = (*problem.design) * w - problem.target;
    return r.squaredNorm() + problem.penalty * penalty_sum(problem, w);
}

double spectral_norm_sq(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    Vector v = Vector::Ones(m.cols()) / std::sqrt(static_cast<double>(m.cols()));
    double estimate = 0.0;
    for (int it = 0; it < 500; ++it) {
        const Vector mv = m * v;
        Vector w = m.transpose() * mv;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        const double next = mv.squaredNorm();
        v = w / norm;
        if (std::abs(next - estimate) <= 1e-9 * next) return next;
        estimate = next;
    }
    return estimate;
}

GroupedSolution solve_group_lasso(const GroupedProblem& problem, const std::optional<Vector>& warm_start,
                                  const SolverOptions& opts) {
    problem.validate();
    opts.validate();
    const std::size_t groups = problem.groups();
    const Matrix& design = *problem.design;
    const double kappa = problem.penalty;
    // Rounding in r = Bw - y scales with |y|, not with the residual.
    const double bound_slack = 1e-13 * problem.target.squaredNorm();

    GroupedSolution sol;
    sol.offsets = problem.offsets;
    if (warm_start) {
        if (warm_start->size() != problem.width())
            throw Error(ErrorCode::DimensionMismatch, "warm start does not match the design width");
        sol.weights = *warm_start;
        if (opts.nonneg) sol.weights = sol.weights.cwiseMax(0.0);
    } else {
        sol.weights = Vector::Zero(problem.width());
    }

    const double sigma = problem.spectral_norm_sq ? *problem.spectral_norm_sq : spectral_norm_sq(design);
    const double lipschitz = 2.0 * sigma;
    double step = lipschitz > 0.0 ? opts.initial_step / lipschitz : opts.initial_step;

    std::vector<char> active(groups), candidate_active(groups);
    for (std::size_t g = 0; g < groups; ++g)
        active[g] = !sol.weights.segment(problem.offsets[g], problem.group_size(g)).isZero(0.0);

    // x = sol.weights is the accepted iterate, y the extrapolated point the
    // gradient is taken at. Residuals are affine in the weights, so r(y) is
    // assembled from residuals that were computed exactly.
    Vector r_x, r_y, r_z, grad, y, z(problem.width());
    residual(problem, sol.weights, active, r_x);
    double objective = r_x.squaredNorm() + kappa * penalty_sum(problem, sol.weights);
    if (!std::isfinite(objective)) throw Error(ErrorCode::NonFiniteObjective, "initial objective is not finite");
    sol.objective_trace.push_back(objective);
    y = sol.weights;
    r_y = r_x;
    double momentum = 1.0;

    for (int it = 0; it < opts.max_iter; ++it) {
        const double smooth_y = r_y.squaredNorm();
        grad.noalias() = design.transpose() * r_y;
        grad *= 2.0;
        double smooth_z = 0.0;
        for (;;) {
            for (std::size_t g = 0; g < groups; ++g) {
                const Index begin = problem.offsets[g];
                const Index size = problem.group_size(g);
                z.segment(begin, size) = block_soft_threshold(
                    y.segment(begin, size) - step * grad.segment(begin, size), step * kappa, opts.nonneg);
                candidate_active[g] = !z.segment(begin, size).isZero(0.0);
            }
            residual(problem, z, candidate_active, r_z);
            smooth_z = r_z.squaredNorm();
            if (!std::isfinite(smooth_z)) throw Error(ErrorCode::NonFiniteObjective, "objective became non-finite");
            const Vector delta = z - y;
            const double bound = smooth_y + grad.dot(delta) + delta.squaredNorm() / (2.0 * step);
            if (smooth_z <= bound + 1e-14 * std::abs(smooth_y) + bound_slack) break;
            step *= opts.backtrack_factor;
            if (step < 1e-300) throw Error(ErrorCode::NonFiniteObjective, "line search step underflow");
        }
        const double objective_z = smooth_z + kappa * penalty_sum(problem, z);
        sol.iterations = it + 1;

        const double change = objective_decrease(problem, sol.weights, r_x, z, r_z);
        // A step taken from x itself (momentum 1) is a plain ISTA step and is always kept.
        if (!opts.accelerate || change >= 0.0 || momentum == 1.0) {
            if (opts.accelerate) {
                const double next_momentum = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
                const double beta = (momentum - 1.0) / next_momentum;
                y = z + beta * (z - sol.weights);
                r_y = r_z + beta * (r_z - r_x);
                momentum = next_momentum;
            }
            sol.weights.swap(z);
            r_x.swap(r_z);
            active.swap(candidate_active);
            if (!opts.accelerate) {
                y = sol.weights;
                r_y = r_x;
            }
            objective = objective_z;
            sol.objective_trace.push_back(objective);
            if (std::abs(change) <= opts.rel_tol * std::max(std::abs(objective), 1e-300) || objective == 0.0) {
                sol.converged = true;
                break;
            }
        } else {
            // Restart the momentum from the accepted iterate.
            momentum = 1.0;
            y = sol.weights;
            r_y = r_x;
            sol.objective_trace.push_back(objective);
        }
    }
    return sol;
}

double optimality_gap(const GroupedProblem& problem, const Eigen::Ref<const Vector>& weights) {
    problem.validate();
    if (weights.size() != problem.width())
        throw Error(ErrorCode::DimensionMismatch, "weights do not match the design width");
    const Vector w = weights;
    const Vector grad = 2.0 * problem.design->transpose() * ((*problem.design) * w - problem.target);
    double gap = 0.0;
    for (std::size_t g = 0; g < problem.groups(); ++g) {
        const Index begin = problem.offsets[g];
        const Index size = problem.group_size(g);
        const auto wg = w.segment(begin, size);
        const auto gg = grad.segment(begin, size);
        const double norm = wg.norm();
        const double violation = norm == 0.0 ? std::max(0.0, gg.norm() - problem.penalty)
                                             : (gg + problem.penalty * wg / norm).norm();
        gap = std::max(gap, violation);
    }
    return gap;
}

} // namespace nlgranger
