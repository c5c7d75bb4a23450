#include "nlgranger/harness.hpp"

#include "nlgranger/error.hpp"
#include "nlgranger/serialize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace nlgranger {

namespace {

bool is_kernel_method(Method method) {
    return method == Method::Nvar || method == Method::Nvarl1 || method == Method::Nvarl12;
}

BaselineKind baseline_kind(Method method) {
    switch (method) {
    case Method::Mean: return BaselineKind::Mean;
    case Method::Lar: return BaselineKind::Lar;
    case Method::Lvarl2: return BaselineKind::Lvarl2;
    case Method::Lvarl1: return BaselineKind::Lvarl1;
    case Method::Nvar: return BaselineKind::NvarFull;
    default: throw Error(ErrorCode::UnsupportedKind, to_string(method) + " is not a baseline");
    }
}

std::vector<KernelSpec> kernel_specs(Method method, const ModelConfig& config, Index m) {
    if (method == Method::Nvar) return full_input_specs(config.dictionaries.front());
    return partitioned_specs(config.dictionaries, m);
}

FitOptions fit_options(Method method, const ModelConfig& config) {
    FitOptions fo;
    fo.method = to_string(method);
    fo.penalty = method == Method::Nvarl12 ? Penalty::L1L2 : Penalty::L1;
    fo.solver = config.solver;
    fo.max_outer = config.max_outer;
    fo.outer_rel_tol = config.outer_rel_tol;
    fo.rank_tol = config.rank_tol;
    return fo;
}

BaselineOptions baseline_options(const ModelConfig& config) {
    BaselineOptions bo;
    bo.solver = config.solver;
    bo.dictionary = config.dictionaries.front();
    bo.rank_tol = config.rank_tol;
    return bo;
}

double mean_squared_error(const Matrix& predicted, const Matrix& actual) {
    return (predicted - actual).squaredNorm() / static_cast<double>(actual.size());
}

// Validation MSE for every lambda, visiting the grid from the largest value down.
std::vector<double> fold_path(Method method, const SupervisedSet& fit_rows, const SupervisedSet& val_rows,
                              const std::vector<double>& lambdas, const ModelConfig& config) {
    std::vector<double> mse(lambdas.size());
    const Index m = fit_rows.dim();
    if (is_kernel_method(method)) {
        const FitOptions fo = fit_options(method, config);
        const GramStack grams = build_gram_stack(kernel_specs(method, config, m), fit_rows.inputs,
                                                 fit_rows.partition_map);
        std::optional<FeatureStack> features;
        if (fo.penalty == Penalty::L1) features = build_feature_stack(grams, config.rank_tol);
        const auto cross = cross_gram_stack(grams, fit_rows.inputs, val_rows.inputs, fit_rows.partition_map);
        std::vector<TaskSolution> warm;
        for (std::size_t k = lambdas.size(); k-- > 0;) {
            auto tasks = solve_tasks(grams, features ? &*features : nullptr, fit_rows.outputs,
                                     Vector::Constant(m, lambdas[k]), fo, warm.empty() ? nullptr : &warm);
            Matrix A(static_cast<Index>(grams.size()), m), C(grams.n(), m);
            for (Index s = 0; s < m; ++s) {
                A.col(s) = tasks[static_cast<std::size_t>(s)].a;
                C.col(s) = tasks[static_cast<std::size_t>(s)].c;
            }
            mse[k] = mean_squared_error(predict_from_cross(cross, A, C), val_rows.outputs);
            warm = std::move(tasks);
        }
        return mse;
    }
    const BaselineKind kind = baseline_kind(method);
    const BaselineOptions bo = baseline_options(config);
    LinearWarmStart warm;
    for (std::size_t k = lambdas.size(); k-- > 0;) {
        const BaselineFit bf = fit_baseline(kind, fit_rows, lambdas[k], bo, warm);
        mse[k] = mean_squared_error(predict_baseline(bf, val_rows.inputs), val_rows.outputs);
        if (kind == BaselineKind::Lvarl1) warm = bf.coefficients;
    }
    return mse;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    out << text;
}

} // namespace

std::string to_string(Method method) {
    switch (method) {
    case Method::Mean: return "mean";
    case Method::Lar: return "lar";
    case Method::Lvarl2: return "lvarl2";
    case Method::Lvarl1: return "lvarl1";
    case Method::Nvar: return "nvar";
    case Method::Nvarl1: return "nvarl1";
    case Method::Nvarl12: return "nvarl12";
    }
    return "unknown";
}

Method method_from_string(const std::string& name) {
    for (Method m : all_methods())
        if (to_string(m) == name) return m;
    if (name == "lvar") return Method::Lvarl2;
    throw Error(ErrorCode::InvalidConfig, "unknown method '" + name + "'");
}

std::vector<Method> all_methods() {
    return {Method::Mean, Method::Lar, Method::Lvarl2, Method::Lvarl1, Method::Nvar, Method::Nvarl1, Method::Nvarl12};
}

Matrix SyntheticSpec::default_psi() {
    Matrix psi(5, 5);
    psi << 0.7, 1.3, 0, 0, 0,
           0, 0.6, -1.5, 0, 0,
           0, -1.2, 1.46, 0, 0,
           0, 0, 0, 0.6, 1.4,
           0, 0, 0, 1.3, -0.5;
    return psi;
}

MultivariateSeries generate_synthetic(const SyntheticSpec& spec) {
    const Matrix psi = spec.psi.size() ? spec.psi : SyntheticSpec::default_psi();
    if (psi.rows() != psi.cols() || psi.rows() < 1)
        throw Error(ErrorCode::DimensionMismatch, "psi must be a non-empty square matrix");
    if (spec.length < 2) throw Error(ErrorCode::BadRange, "synthetic length must be at least 2");
    const Index m = psi.rows();

    std::mt19937_64 rng(spec.seed);
    auto draw = [&rng, m] {
        Vector e(m);
        for (Index j = 0; j < m; ++j) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            e(j) = -std::log1p(-u) - 1.0;
        }
        return e;
    };

    Matrix values(spec.length, m);
    Vector previous = draw();
    for (Index t = 0; t < spec.length; ++t) {
        Vector current = draw();
        values.row(t) = (current + psi * previous).transpose();
        previous = std::move(current);
    }
    return MultivariateSeries(std::move(values));
}

void GridSpec::validate() const {
    if (count < 1) throw Error(ErrorCode::InvalidConfig, "grid count must be >= 1");
    if (count > 1 && !(low_exp < high_exp)) throw Error(ErrorCode::InvalidConfig, "grid needs low_exp < high_exp");
    if (scale && !(*scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "grid scale must be positive");
}

std::vector<double> lambda_grid(const GridSpec& grid, Index n, Index l) {
    grid.validate();
    const double scale = grid.scale ? *grid.scale : std::sqrt(static_cast<double>(n)) * static_cast<double>(l);
    std::vector<double> out;
    for (int k = 0; k < grid.count; ++k) {
        const double e = grid.count == 1 ? grid.low_exp
                                         : grid.low_exp + k * (grid.high_exp - grid.low_exp) / (grid.count - 1);
        out.push_back(std::pow(10.0, e) * scale);
    }
    return out;
}

Index grid_multiplier(Method method, const ModelConfig& config, Index m) {
    switch (method) {
    case Method::Nvarl1: return static_cast<Index>(partitioned_specs(config.dictionaries, m).size());
    case Method::Nvar: return static_cast<Index>(config.dictionaries.front().size());
    case Method::Nvarl12:
    case Method::Lvarl1:
    case Method::Lvarl2: return m;
    case Method::Lar:
    case Method::Mean: return 1;
    }
    return 1;
}

const NormStats& Forecaster::norm_stats() const {
    return std::visit([](const auto& b) -> const NormStats& { return b.norm_stats; }, body);
}

int Forecaster::lag() const {
    return std::visit([](const auto& b) { return b.lag; }, body);
}

double Forecaster::lambda() const {
    if (const auto* m = std::get_if<ModelFit>(&body)) return m->lambda.size() ? m->lambda(0) : 0.0;
    return std::get<BaselineFit>(body).lambda;
}

Matrix Forecaster::predict(const Matrix& inputs) const {
    if (const auto* m = std::get_if<ModelFit>(&body)) return nlgranger::predict(*m, inputs);
    return predict_baseline(std::get<BaselineFit>(body), inputs);
}

bool Forecaster::has_adjacency() const {
    return method == Method::Nvarl1 || method == Method::Nvarl12 || method == Method::Lvarl1;
}

AdjacencyMatrix Forecaster::adjacency(double threshold) const {
    if (const auto* m = std::get_if<ModelFit>(&body)) return nlgranger::adjacency(*m, threshold);
    return baseline_adjacency(std::get<BaselineFit>(body), threshold);
}

Forecaster fit_method(Method method, const SupervisedSet& train, double lambda, const ModelConfig& config,
                      const NormStats& stats, std::vector<std::string> names) {
    Forecaster out;
    out.method = method;
    out.series_names = std::move(names);
    if (method == Method::Nvarl1 || method == Method::Nvarl12) {
        ModelFit model = fit(train, kernel_specs(method, config, train.dim()), Vector::Constant(1, lambda),
                             fit_options(method, config));
        model.norm_stats = stats;
        out.body = std::move(model);
    } else {
        BaselineFit bf = fit_baseline(baseline_kind(method), train, lambda, baseline_options(config));
        bf.norm_stats = stats;
        if (bf.nvar) bf.nvar->norm_stats = stats;
        out.body = std::move(bf);
    }
    return out;
}

CvResult cv_select(const SupervisedSet& train, Method method, const ModelConfig& config) {
    CvResult out;
    if (method == Method::Mean) {
        out.lambdas = {0.0};
        out.mean_mse = {0.0};
        return out;
    }
    out.lambdas = lambda_grid(config.grid, train.size(), grid_multiplier(method, config, train.dim()));
    if (out.lambdas.size() == 1) {
        out.best_lambda = out.lambdas.front();
        out.mean_mse = {std::numeric_limits<double>::quiet_NaN()};
        return out;
    }
    const int folds = config.folds;
    if (folds < 2) throw Error(ErrorCode::InvalidConfig, "need at least two folds");
    const Index n = train.size();
    if (n / folds < 2) throw Error(ErrorCode::FoldTooSmall, "fewer than two rows per fold");

    out.fold_mse.resize(folds, static_cast<Index>(out.lambdas.size()));
    for (int f = 0; f < folds; ++f) {
        const Index begin = n * f / folds;
        const Index end = n * (f + 1) / folds;
        std::vector<Index> fit_idx, val_idx;
        for (Index t = 0; t < n; ++t) (t >= begin && t < end ? val_idx : fit_idx).push_back(t);
        const auto scores = fold_path(method, train.select_rows(fit_idx), train.select_rows(val_idx), out.lambdas,
                                      config);
        for (std::size_t k = 0; k < scores.size(); ++k) out.fold_mse(f, static_cast<Index>(k)) = scores[k];
    }
    out.mean_mse.resize(out.lambdas.size());
    std::size_t best = out.lambdas.size() - 1;
    for (std::size_t k = out.lambdas.size(); k-- > 0;) {
        out.mean_mse[k] = out.fold_mse.col(static_cast<Index>(k)).mean();
        if (out.mean_mse[k] < out.mean_mse[best]) best = k;
    }
    out.best_lambda = out.lambdas[best];
    return out;
}

EvalReport evaluate_holdout(const PredictFn& predict_fn, const SupervisedSet& holdout) {
    if (holdout.size() < 1) throw Error(ErrorCode::BadRange, "empty hold-out set");
    const Matrix predicted = predict_fn(holdout.inputs);
    if (predicted.rows() != holdout.outputs.rows() || predicted.cols() != holdout.outputs.cols())
        throw Error(ErrorCode::DimensionMismatch, "predictions do not match the hold-out shape");
    EvalReport report;
    report.n_holdout = holdout.size();
    const double m = static_cast<double>(holdout.dim());
    report.per_step_errors = (holdout.outputs - predicted).rowwise().squaredNorm() / m;
    report.mse = report.per_step_errors.mean();
    if (report.n_holdout > 1) {
        const double var = (report.per_step_errors.array() - report.mse).square().sum() /
                           static_cast<double>(report.n_holdout - 1);
        report.mse_std = std::sqrt(var / static_cast<double>(report.n_holdout));
    }
    return report;
}

SupervisedSet holdout_set(const Matrix& standardized_values, int lag, Index holdout) {
    const Index first = standardized_values.rows() - holdout;
    if (holdout < 1 || first < lag)
        throw Error(ErrorCode::SeriesTooShort, "not enough history before the hold-out segment");
    SupervisedSet set;
    set.lag = lag;
    set.inputs = embed_inputs(standardized_values, lag, first, holdout);
    set.outputs = standardized_values.bottomRows(holdout);
    set.partition_map = make_partition_map(standardized_values.cols(), lag);
    return set;
}

const MethodResult* ExperimentReport::find(Method method) const {
    for (const auto& r : results)
        if (r.method == method) return &r;
    return nullptr;
}

void write_adjacency_csv(const std::string& path, const AdjacencyMatrix& adj) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    out << std::setprecision(17);
    for (Index i = 0; i < adj.values.rows(); ++i) {
        for (Index j = 0; j < adj.values.cols(); ++j) out << (j ? "," : "") << adj.values(i, j);
        out << '\n';
    }
}

ExperimentReport run_experiment(const ExperimentConfig& config, const std::string& out_dir) {
    if (config.methods.empty()) throw Error(ErrorCode::InvalidConfig, "no methods requested");
    if (config.data.synthetic.has_value() == config.data.csv_path.has_value())
        throw Error(ErrorCode::InvalidConfig, "exactly one data source (synthetic or csv) is required");
    if (config.train < config.model.lag + 2) throw Error(ErrorCode::InvalidConfig, "training window too short");
    if (config.holdout < 1) throw Error(ErrorCode::InvalidConfig, "hold-out must be at least one step");
    config.model.grid.validate();
    config.model.solver.validate();

    MultivariateSeries series;
    if (config.data.synthetic) {
        SyntheticSpec spec = *config.data.synthetic;
        spec.length = config.train + config.holdout;
        series = generate_synthetic(spec);
    } else {
        series = read_csv(*config.data.csv_path);
        if (series.length() < config.train + config.holdout)
            throw Error(ErrorCode::SeriesTooShort, "CSV shorter than train + holdout");
        series = series.slice(0, config.train + config.holdout);
    }
    const NormStats stats = standardize_fit(series, config.train);
    const Matrix standardized = standardize_apply(series.values, stats, Direction::Forward);
    const SupervisedSet train = lag_embed(MultivariateSeries(standardized.topRows(config.train), series.names),
                                          config.model.lag);
    const SupervisedSet hold = holdout_set(standardized, config.model.lag, config.holdout);

    if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
    ExperimentReport report;
    for (Method method : config.methods) {
        MethodResult result;
        result.method = method;
        const auto start = std::chrono::steady_clock::now();
        try {
            double lambda = 0.0;
            auto fixed = std::find_if(config.fixed_lambda.begin(), config.fixed_lambda.end(),
                                      [method](const auto& p) { return p.first == method; });
            if (fixed != config.fixed_lambda.end()) {
                lambda = fixed->second;
            } else if (method != Method::Mean) {
                result.cv = cv_select(train, method, config.model);
                lambda = result.cv->best_lambda;
            }
            Forecaster model = fit_method(method, train, lambda, config.model, stats, series.names);
            result.report = evaluate_holdout([&](const Matrix& x) { return model.predict(x); }, hold);
            result.report.method = to_string(method);
            result.report.lambda = lambda;
            if (model.has_adjacency()) result.adjacency = model.adjacency();
            result.model = std::move(model);
            result.ok = true;
        } catch (const std::exception& e) {
            result.error = e.what();
        }
        result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        report.results.push_back(std::move(result));

        if (!out_dir.empty()) {
            const std::filesystem::path dir(out_dir);
            const auto& last = report.results.back();
            write_text((dir / "report.json").string(), experiment_report_to_json(report).dump(2));
            std::ostringstream table;
            table << std::setprecision(10) << "method,status,mse,mse_std,lambda,seconds\n";
            for (const auto& r : report.results)
                table << to_string(r.method) << ',' << (r.ok ? "ok" : "failed") << ',' << r.report.mse << ','
                      << r.report.mse_std << ',' << r.report.lambda << ',' << r.seconds << '\n';
            write_text((dir / "mse_table.csv").string(), table.str());
            if (last.adjacency)
                write_adjacency_csv((dir / ("adjacency_" + to_string(method) + ".csv")).string(), *last.adjacency);
            if (last.model)
                write_text((dir / ("model_" + to_string(method) + ".json")).string(),
                           forecaster_to_json(*last.model).dump());
        }
    }
    return report;
}

} // namespace nlgranger
