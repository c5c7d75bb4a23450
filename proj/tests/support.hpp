#pragma once

// Reference implementations used only by the tests.

#include "nlgranger/group_lasso.hpp"
#include "nlgranger/harness.hpp"
#include "nlgranger/nvar.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>
#include <vector>

namespace nlgranger::testing {

inline Matrix random_matrix(std::mt19937_64& rng, Index rows, Index cols) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix m(rows, cols);
    for (Index j = 0; j < cols; ++j)
        for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
}

inline Vector random_vector(std::mt19937_64& rng, Index size) { return random_matrix(rng, size, 1).col(0); }

/// Block coordinate descent with exact block minimization.
///
/// For block g with b = 2 B_g^T r_g and B_g^T B_g = V diag(s) V^T, the nonzero
/// minimizer is w = V diag(1 / (2 s_i + kappa / eta)) V^T b where eta = |w|,
/// found by bisection on sum_i (b~_i / (2 s_i eta + kappa))^2 = 1.
struct CoordinateDescentOracle {
    std::vector<Matrix> blocks;
    Vector target;
    double kappa = 0.0;

    std::vector<Vector> solve(int max_sweeps = 200000, double tol = 1e-14) const {
        const std::size_t groups = blocks.size();
        std::vector<Vector> w(groups);
        std::vector<Eigen::SelfAdjointEigenSolver<Matrix>> eig(groups);
        for (std::size_t g = 0; g < groups; ++g) {
            w[g] = Vector::Zero(blocks[g].cols());
            eig[g].compute(blocks[g].transpose() * blocks[g]);
        }
        Vector residual = target;
        for (int sweep = 0; sweep < max_sweeps; ++sweep) {
            double change = 0.0;
            for (std::size_t g = 0; g < groups; ++g) {
                const Vector partial = residual + blocks[g] * w[g];
                const Vector b = 2.0 * blocks[g].transpose() * partial;
                Vector next = Vector::Zero(b.size());
                if (b.norm() > kappa) {
                    const Vector bt = eig[g].eigenvectors().transpose() * b;
                    const Vector& s = eig[g].eigenvalues();
                    auto excess = [&](double eta) {
                        double total = 0.0;
                        for (Index i = 0; i < bt.size(); ++i) {
                            const double q = bt(i) / (2.0 * std::max(s(i), 0.0) * eta + kappa);
                            total += q * q;
                        }
                        return total - 1.0;
                    };
                    double lo = 0.0, hi = 1.0;
                    if (kappa == 0.0) {
                        // Plain least squares on the block.
                        next = eig[g].eigenvectors() *
                               (bt.array() / (2.0 * eig[g].eigenvalues().array())).matrix();
                    } else {
                        while (excess(hi) > 0.0) hi *= 2.0;
                        for (int it = 0; it < 200; ++it) {
                            const double mid = 0.5 * (lo + hi);
                            (excess(mid) > 0.0 ? lo : hi) = mid;
                        }
                        const double eta = 0.5 * (lo + hi);
                        Vector coef(bt.size());
                        for (Index i = 0; i < bt.size(); ++i)
                            coef(i) = bt(i) * eta / (2.0 * std::max(s(i), 0.0) * eta + kappa);
                        next = eig[g].eigenvectors() * coef;
                    }
                }
                change = std::max(change, (next - w[g]).cwiseAbs().maxCoeff());
                residual = partial - blocks[g] * next;
                w[g] = next;
            }
            if (change < tol) break;
        }
        return w;
    }
};

/// Conjugate gradients for a symmetric positive definite system.
inline Vector conjugate_gradient(const Matrix& A, const Vector& b, double tol = 1e-14, int max_iter = 100000) {
    Vector x = Vector::Zero(b.size());
    Vector r = b;
    Vector p = r;
    double rs = r.squaredNorm();
    for (int it = 0; it < max_iter && std::sqrt(rs) > tol * b.norm(); ++it) {
        const Vector Ap = A * p;
        const double alpha = rs / p.dot(Ap);
        x += alpha * p;
        r -= alpha * Ap;
        const double next = r.squaredNorm();
        p = r + (next / rs) * p;
        rs = next;
    }
    return x;
}

/// Largest increase between consecutive trace entries.
inline double max_increase(const std::vector<double>& trace) {
    double worst = 0.0;
    for (std::size_t i = 1; i < trace.size(); ++i) worst = std::max(worst, trace[i] - trace[i - 1]);
    return worst;
}

inline bool monotone(const std::vector<double>& trace, double slack = 1e-12) {
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (trace[i] > trace[i - 1] + slack * std::max(1.0, std::abs(trace[i - 1]))) return false;
    return true;
}

/// Small standardized synthetic training set.
inline SupervisedSet synthetic_train(Index length, std::uint64_t seed, int lag = 3) {
    SyntheticSpec spec;
    spec.psi = SyntheticSpec::default_psi();
    spec.length = length;
    spec.seed = seed;
    const auto series = generate_synthetic(spec);
    const NormStats stats = standardize_fit(series, length);
    return lag_embed(standardize_apply(series, stats, Direction::Forward), lag);
}

inline SolverOptions tight_solver() {
    SolverOptions opts;
    opts.max_iter = 200000;
    opts.rel_tol = 1e-20;
    return opts;
}

} // namespace nlgranger::testing
