#include "doctest.h"

#include "nlgranger/baselines.hpp"
#include "nlgranger/error.hpp"
#include "support.hpp"

using namespace nlgranger;
using namespace nlgranger::testing;

namespace {

SupervisedSet univariate_train(Index length, std::uint64_t seed, int lag) {
    const Matrix values = [&] {
        SyntheticSpec spec;
        spec.psi = SyntheticSpec::default_psi();
        spec.length = length;
        spec.seed = seed;
        const auto s = generate_synthetic(spec);
        return Matrix(s.values.col(2));
    }();
    const MultivariateSeries series(values);
    return lag_embed(standardize_apply(series, standardize_fit(series, length), Direction::Forward), lag);
}

} // namespace

TEST_CASE("ridge matches the augmented least squares oracle") {
    std::mt19937_64 rng(61);
    const Matrix X = random_matrix(rng, 30, 6);
    const Matrix Y = random_matrix(rng, 30, 2);
    for (double lambda : {0.0, 0.1, 10.0}) {
        Matrix aug(36, 6);
        aug << X, std::sqrt(lambda) * Matrix::Identity(6, 6);
        Matrix rhs = Matrix::Zero(36, 2);
        rhs.topRows(30) = Y;
        const Matrix expected = aug.householderQr().solve(rhs);
        CHECK((ridge_coefficients(X, Y, lambda) - expected).norm() <= 1e-10 * expected.norm());
    }
    CHECK_THROWS_AS(ridge_coefficients(X, Y, -1.0), Error);
}

TEST_CASE("ridge shrinkage is monotone over the grid") {
    const SupervisedSet train = synthetic_train(120, 62, 3);
    double previous = std::numeric_limits<double>::infinity();
    for (double lambda : lambda_grid(GridSpec{}, train.size(), train.dim())) {
        const double norm = fit_baseline(BaselineKind::Lvarl2, train, lambda).coefficients.norm();
        CHECK(norm <= previous * (1.0 + 1e-12));
        previous = norm;
    }
}

TEST_CASE("lar equals lvarl2 on a univariate series") {
    const SupervisedSet train = univariate_train(80, 63, 4);
    for (double lambda : {0.0, 0.5, 50.0}) {
        const Matrix lar = fit_baseline(BaselineKind::Lar, train, lambda).coefficients;
        const Matrix lvar = fit_baseline(BaselineKind::Lvarl2, train, lambda).coefficients;
        CHECK((lar - lvar).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("lar uses only the own past of each series") {
    const SupervisedSet train = synthetic_train(80, 64, 2);
    const Matrix coef = fit_baseline(BaselineKind::Lar, train, 1.0).coefficients;
    for (Index s = 0; s < train.dim(); ++s)
        for (Index j = 0; j < train.dim(); ++j)
            if (j != s)
                for (Index c : train.partition_map[j]) CHECK(coef(c, s) == 0.0);
}

TEST_CASE("nvar with one series equals nvarl1") {
    const SupervisedSet train = univariate_train(50, 65, 3);
    const BaselineFit full = fit_baseline(BaselineKind::NvarFull, train, 0.4);
    REQUIRE(full.nvar.has_value());
    FitOptions opts;
    const ModelFit part = fit(train, partitioned_specs(default_dictionary(), 1), Vector::Constant(1, 0.4), opts);
    CHECK(full.nvar->A == part.A);
    CHECK(full.nvar->C == part.C);
    CHECK(predict_baseline(full, train.inputs) == predict(part, train.inputs));
}

TEST_CASE("lvarl1 matches the coordinate descent oracle with whole groups") {
    const SupervisedSet train = synthetic_train(60, 66, 2);
    BaselineOptions opts;
    opts.solver = tight_solver();
    const double lambda = 20.0;
    const BaselineFit model = fit_baseline(BaselineKind::Lvarl1, train, lambda, opts);
    int zero_groups = 0;
    for (Index s = 0; s < train.dim(); ++s) {
        std::vector<Matrix> blocks;
        for (Index j = 0; j < train.dim(); ++j) blocks.push_back(train.partition(j));
        const auto oracle = CoordinateDescentOracle{blocks, train.outputs.col(s), lambda}.solve();
        for (Index j = 0; j < train.dim(); ++j) {
            const Vector w = model.coefficients.block(j * train.lag, s, train.lag, 1);
            CHECK((w - oracle[static_cast<std::size_t>(j)]).cwiseAbs().maxCoeff() <= 1e-6);
            if (w.isZero(0.0)) ++zero_groups;
            else CHECK((w.array() != 0.0).any());
        }
    }
    CHECK(zero_groups > 0);
    const AdjacencyMatrix adj = baseline_adjacency(model);
    CHECK(adj.values.maxCoeff() == 1.0);
    CHECK(adj.values.minCoeff() >= 0.0);
}

TEST_CASE("lvarl1 warm start reaches the same objective") {
    const SupervisedSet train = synthetic_train(60, 67, 2);
    BaselineOptions opts;
    opts.solver = tight_solver();
    const BaselineFit a = fit_baseline(BaselineKind::Lvarl1, train, 5.0, opts);
    const BaselineFit b = fit_baseline(BaselineKind::Lvarl1, train, 5.0, opts, Matrix(a.coefficients * 3.0));
    CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK_THROWS_AS(fit_baseline(BaselineKind::Lvarl1, train, 5.0, opts, Matrix::Zero(2, 2)), Error);
}

TEST_CASE("mean baseline predicts the training mean") {
    const SupervisedSet train = synthetic_train(40, 68, 2);
    const BaselineFit mean = fit_baseline(BaselineKind::Mean, train, 0.0);
    CHECK(predict_baseline(mean, train.inputs).isZero(0.0));
    CHECK_THROWS_AS(baseline_adjacency(mean), Error);
}

TEST_CASE("baseline names") {
    for (auto kind : {BaselineKind::Mean, BaselineKind::Lar, BaselineKind::Lvarl2, BaselineKind::Lvarl1,
                      BaselineKind::NvarFull})
        CHECK(baseline_kind_from_string(to_string(kind)) == kind);
    CHECK(baseline_kind_from_string("lvar") == BaselineKind::Lvarl2);
    CHECK_THROWS_AS(baseline_kind_from_string("arima"), Error);
}

TEST_CASE("mean baseline error equals the hold-out second moment") {
    const SupervisedSet train = synthetic_train(50, 69, 2);
    const BaselineFit mean = fit_baseline(BaselineKind::Mean, train, 0.0);
    std::mt19937_64 rng(70);
    const Matrix inputs = random_matrix(rng, 7, train.inputs.cols());
    const Matrix outputs = random_matrix(rng, 7, train.dim());
    const Matrix predicted = predict_baseline(mean, inputs);
    CHECK(predicted.isZero(0.0));
    CHECK((outputs - predicted).squaredNorm() == outputs.squaredNorm());
}

TEST_CASE("unpenalized ridge is least squares") {
    const SupervisedSet train = synthetic_train(80, 71, 3);
    const Matrix coef = fit_baseline(BaselineKind::Lvarl2, train, 0.0).coefficients;
    const Matrix residual = train.outputs - train.inputs * coef;
    CHECK((train.inputs.transpose() * residual).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("baseline predictions are the coefficient product") {
    const SupervisedSet train = synthetic_train(60, 72, 3);
    std::mt19937_64 rng(73);
    const Matrix inputs = random_matrix(rng, 9, train.inputs.cols());
    const BaselineFit ridge = fit_baseline(BaselineKind::Lvarl2, train, 0.8);
    CHECK((predict_baseline(ridge, inputs) - inputs * ridge.coefficients).cwiseAbs().maxCoeff() <= 1e-14);

    BaselineFit walk = fit_baseline(BaselineKind::Lar, train, 1.0);
    walk.coefficients.setZero();
    for (Index s = 0; s < train.dim(); ++s) walk.coefficients(train.partition_map[s][0], s) = 1.0;
    const Matrix last = predict_baseline(walk, inputs);
    for (Index s = 0; s < train.dim(); ++s) CHECK(last.col(s) == inputs.col(train.partition_map[s][0]));
}

TEST_CASE("linear adjacency on known coefficients") {
    const SupervisedSet train = synthetic_train(40, 74, 2);
    BaselineFit model = fit_baseline(BaselineKind::Lvarl1, train, 1.0);
    model.coefficients.setZero();
    CHECK(baseline_adjacency(model).values.isZero(0.0));
    model.coefficients(train.partition_map[3][1], 0) = -0.4;
    const AdjacencyMatrix adj = baseline_adjacency(model);
    CHECK(adj.values(3, 0) == 1.0);
    CHECK(adj.values.sum() == 1.0);
}
