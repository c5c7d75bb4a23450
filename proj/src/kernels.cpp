#include "nlgranger/kernels.hpp"

#include "nlgranger/error.hpp"
#include "nlgranger/parallel.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace nlgranger {

namespace {

constexpr double kTraceTol = 1e-12;

// Points are stored one per column so the inner loops walk contiguous memory.
template <class Op>
Matrix raw_kernel(const Matrix& left, const Matrix& right, bool symmetric, Op op) {
    const Index nl = left.cols();
    const Index nr = right.cols();
    Matrix out(nl, nr);
    for (Index s = 0; s < nr; ++s) {
        const Index first = symmetric ? s : 0;
        for (Index t = first; t < nl; ++t) {
            const double v = op(left.col(t), right.col(s));
            out(t, s) = v;
            if (symmetric) out(s, t) = v;
        }
    }
    return out;
}

Matrix raw_gram(const KernelSpec& spec, const Matrix& left_rows, const Matrix& right_rows,
                bool symmetric) {
    const Matrix left = left_rows.transpose();
    const Matrix right = right_rows.transpose();
    switch (spec.kind) {
    case KernelKind::Linear:
        return raw_kernel(left, right, symmetric,
                          [](const auto& u, const auto& v) { return u.dot(v); });
    case KernelKind::Polynomial: {
        const double degree = spec.parameter;
        return raw_kernel(left, right, symmetric, [degree](const auto& u, const auto& v) {
            return std::pow(1.0 + u.dot(v), degree);
        });
    }
    case KernelKind::Gaussian: {
        const double scale = 1.0 / (2.0 * spec.parameter * spec.parameter);
        return raw_kernel(left, right, symmetric, [scale](const auto& u, const auto& v) {
            return std::exp(-(u - v).squaredNorm() * scale);
        });
    }
    }
    throw Error(ErrorCode::UnsupportedKind, "unknown kernel kind");
}

void check_spec(const KernelSpec& spec) {
    if (spec.kind == KernelKind::Polynomial &&
        (spec.parameter < 2.0 || spec.parameter != std::floor(spec.parameter)))
        throw Error(ErrorCode::InvalidConfig, "polynomial degree must be an integer >= 2");
    if (spec.kind == KernelKind::Gaussian && !(spec.parameter > 0.0))
        throw Error(ErrorCode::InvalidConfig, "gaussian width must be positive");
}

// Largest eigenvalue of a symmetric PSD matrix by power iteration.
double top_eigenvalue(const Matrix& sym) {
    const Index n = sym.rows();
    if (n == 0) return 0.0;
    Vector v = Vector::Ones(n) / std::sqrt(static_cast<double>(n));
    double estimate = 0.0;
    for (int it = 0; it < 500; ++it) {
        Vector w = sym * v;
        const double norm = w.norm();
        if (norm == 0.0) return 0.0;
        const double next = v.dot(w);
        v = w / norm;
        if (std::abs(next - estimate) <= 1e-9 * std::abs(next)) return next;
        estimate = next;
    }
    return estimate;
}

} // namespace

KernelSpec KernelSpec::linear(Index partition) {
    return {KernelKind::Linear, 0.0, partition, std::nullopt};
}

KernelSpec KernelSpec::polynomial(int degree, Index partition) {
    KernelSpec spec{KernelKind::Polynomial, static_cast<double>(degree), partition, std::nullopt};
    check_spec(spec);
    return spec;
}

KernelSpec KernelSpec::gaussian(double width, Index partition) {
    KernelSpec spec{KernelKind::Gaussian, width, partition, std::nullopt};
    check_spec(spec);
    return spec;
}

std::string KernelSpec::label() const {
    std::ostringstream ss;
    ss << to_string(kind);
    if (kind != KernelKind::Linear) ss << '(' << parameter << ')';
    ss << '@' << (partition == kFullInput ? std::string("full") : std::to_string(partition));
    return ss.str();
}

std::string to_string(KernelKind kind) {
    switch (kind) {
    case KernelKind::Linear: return "linear";
    case KernelKind::Polynomial: return "polynomial";
    case KernelKind::Gaussian: return "gaussian";
    }
    return "unknown";
}

KernelKind kernel_kind_from_string(const std::string& name) {
    if (name == "linear") return KernelKind::Linear;
    if (name == "polynomial" || name == "poly") return KernelKind::Polynomial;
    if (name == "gaussian" || name == "rbf") return KernelKind::Gaussian;
    throw Error(ErrorCode::InvalidConfig, "unknown kernel kind '" + name + "'");
}

std::vector<KernelEntry> default_dictionary() {
    return {{KernelKind::Linear, 0.0},     {KernelKind::Polynomial, 2.0},
            {KernelKind::Polynomial, 3.0}, {KernelKind::Gaussian, 0.5},
            {KernelKind::Gaussian, 1.0},   {KernelKind::Gaussian, 2.0}};
}

std::vector<KernelSpec> partitioned_specs(const std::vector<std::vector<KernelEntry>>& dictionaries,
                                          Index m) {
    if (dictionaries.size() != 1 && static_cast<Index>(dictionaries.size()) != m)
        throw Error(ErrorCode::InvalidConfig, "need one kernel dictionary or one per series");
    std::vector<KernelSpec> specs;
    for (Index j = 0; j < m; ++j) {
        const auto& dict = dictionaries.size() == 1 ? dictionaries.front()
                                                    : dictionaries[static_cast<std::size_t>(j)];
        if (dict.empty()) throw Error(ErrorCode::InvalidConfig, "empty kernel dictionary");
        for (const auto& e : dict) {
            KernelSpec spec{e.kind, e.parameter, j, std::nullopt};
            check_spec(spec);
            specs.push_back(spec);
        }
    }
    return specs;
}

std::vector<KernelSpec> partitioned_specs(const std::vector<KernelEntry>& dictionary, Index m) {
    return partitioned_specs(std::vector<std::vector<KernelEntry>>{dictionary}, m);
}

std::vector<KernelSpec> full_input_specs(const std::vector<KernelEntry>& dictionary) {
    std::vector<KernelSpec> specs;
    for (const auto& e : dictionary) {
        KernelSpec spec{e.kind, e.parameter, kFullInput, std::nullopt};
        check_spec(spec);
        specs.push_back(spec);
    }
    return specs;
}

double kernel_eval(const KernelSpec& spec, const Eigen::Ref<const Vector>& u,
                   const Eigen::Ref<const Vector>& v) {
    if (u.size() != v.size()) throw Error(ErrorCode::DimensionMismatch, "kernel arguments differ in length");
    switch (spec.kind) {
    case KernelKind::Linear: return u.dot(v);
    case KernelKind::Polynomial: return std::pow(1.0 + u.dot(v), spec.parameter);
    case KernelKind::Gaussian:
        return std::exp(-(u - v).squaredNorm() / (2.0 * spec.parameter * spec.parameter));
    }
    throw Error(ErrorCode::UnsupportedKind, "unknown kernel kind");
}

NormalizedGram gram_matrix(const KernelSpec& spec, const Matrix& rows) {
    if (rows.rows() < 1) throw Error(ErrorCode::BadRange, "gram matrix needs at least one point");
    check_spec(spec);
    Matrix gram = raw_gram(spec, rows, rows, true);
    const double trace = gram.trace();
    if (!(trace >= kTraceTol))
        throw Error(ErrorCode::DegenerateKernel, "raw gram trace is numerically zero for " + spec.label());
    const double rho = static_cast<double>(rows.rows()) / trace;
    gram *= rho;
    return {std::move(gram), rho};
}

Matrix cross_gram(const KernelSpec& spec, const Matrix& train_rows, const Matrix& test_rows) {
    if (!spec.norm_factor) throw Error(ErrorCode::NormFactorMissing, spec.label() + " has no norm factor");
    if (train_rows.cols() != test_rows.cols())
        throw Error(ErrorCode::DimensionMismatch, "train/test inputs differ in width");
    Matrix out = raw_gram(spec, test_rows, train_rows, false);
    out *= *spec.norm_factor;
    return out;
}

Matrix empirical_features(const Matrix& gram, double tol) {
    const Index n = gram.rows();
    if (gram.cols() != n) throw Error(ErrorCode::DimensionMismatch, "gram matrix must be square");
    if (n == 0) return Matrix(0, 0);
    Matrix vectors = gram;
    Vector values(n);
    const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n),
                                           vectors.data(), static_cast<lapack_int>(n), values.data());
    if (info != 0) throw Error(ErrorCode::NotPSD, "eigendecomposition failed (info " + std::to_string(info) + ")");
    // Ascending order from LAPACK.
    const double top = values(n - 1);
    if (top <= 0.0) {
        if (values(0) < 0.0) throw Error(ErrorCode::NotPSD, "gram matrix has no positive eigenvalue");
        return Matrix(n, 0);
    }
    if (values(0) < -tol * top * 10.0) throw Error(ErrorCode::NotPSD, "gram matrix is not positive semidefinite");
    Index keep = 0;
    while (keep < n && values(n - 1 - keep) > tol * top) ++keep;
    Matrix phi(n, keep);
    for (Index k = 0; k < keep; ++k) phi.col(k) = vectors.col(n - 1 - k) * std::sqrt(values(n - 1 - k));
    return phi;
}

Matrix kernel_inputs(const KernelSpec& spec, const Matrix& inputs,
                     const std::vector<std::vector<Index>>& partition_map) {
    if (spec.partition == kFullInput) return inputs;
    if (spec.partition < 0 || spec.partition >= static_cast<Index>(partition_map.size()))
        throw Error(ErrorCode::DimensionMismatch, "kernel partition out of range");
    const auto& cols = partition_map[static_cast<std::size_t>(spec.partition)];
    Matrix out(inputs.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        if (cols[k] >= inputs.cols()) throw Error(ErrorCode::DimensionMismatch, "partition column out of range");
        out.col(static_cast<Index>(k)) = inputs.col(cols[k]);
    }
    return out;
}

std::vector<Index> GramStack::partitions() const {
    std::set<Index> unique;
    for (const auto& [j, i] : group_index) unique.insert(j);
    return {unique.begin(), unique.end()};
}

GramStack build_gram_stack(std::vector<KernelSpec> specs, const Matrix& inputs,
                           const std::vector<std::vector<Index>>& partition_map) {
    if (specs.empty()) throw Error(ErrorCode::InvalidConfig, "no kernels configured");
    GramStack stack;
    stack.grams.resize(specs.size());
    parallel_for(specs.size(), [&](std::size_t d) {
        auto normalized = gram_matrix(specs[d], kernel_inputs(specs[d], inputs, partition_map));
        stack.grams[d] = std::move(normalized.gram);
        specs[d].norm_factor = normalized.norm_factor;
    });
    std::map<Index, int> seen;
    for (const auto& spec : specs) stack.group_index.emplace_back(spec.partition, seen[spec.partition]++);
    stack.specs = std::move(specs);
    return stack;
}

FeatureStack build_feature_stack(const GramStack& grams, double tol) {
    std::vector<Matrix> blocks(grams.size());
    parallel_for(grams.size(), [&](std::size_t d) { blocks[d] = empirical_features(grams.grams[d], tol); });

    FeatureStack features;
    features.offsets.assign(1, 0);
    for (const auto& b : blocks) features.offsets.push_back(features.offsets.back() + b.cols());
    auto stacked = std::make_shared<Matrix>(grams.n(), features.offsets.back());
    for (std::size_t d = 0; d < blocks.size(); ++d) {
        stacked->middleCols(features.offsets[d], blocks[d].cols()) = blocks[d];
        blocks[d] = Matrix();
    }
    features.stacked = std::move(stacked);

    Matrix total = Matrix::Zero(grams.n(), grams.n());
    for (const auto& g : grams.grams) total += g;
    features.spectral_norm_sq = top_eigenvalue(total);
    return features;
}

std::vector<Matrix> cross_gram_stack(const GramStack& grams, const Matrix& train_inputs,
                                     const Matrix& test_inputs,
                                     const std::vector<std::vector<Index>>& partition_map) {
    std::vector<Matrix> out(grams.size());
    parallel_for(grams.size(), [&](std::size_t d) {
        const auto& spec = grams.specs[d];
        out[d] = cross_gram(spec, kernel_inputs(spec, train_inputs, partition_map),
                            kernel_inputs(spec, test_inputs, partition_map));
    });
    return out;
}

} // namespace nlgranger
