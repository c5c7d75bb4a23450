#include "nlgranger/serialize.hpp"

#include "nlgranger/error.hpp"

#include <cmath>
#include <fstream>

namespace nlgranger {

namespace {

constexpr const char* kFormatTag = "nlgranger.model";

json vector_to_json(const Vector& v) {
    return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Vector vector_from_json(const json& j) {
    if (!j.is_array()) throw Error(ErrorCode::ParseError, "expected a numeric array");
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(values.data(), static_cast<Index>(values.size()));
}

template <class T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw Error(ErrorCode::ParseError, std::string("missing key '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("bad value for '") + key + "': " + e.what());
    }
}

json spec_to_json(const KernelSpec& spec) {
    json j = kernel_entry_to_json({spec.kind, spec.parameter});
    j["partition"] = spec.partition == kFullInput ? json("full") : json(spec.partition);
    if (spec.norm_factor) j["norm_factor"] = *spec.norm_factor;
    return j;
}

KernelSpec spec_from_json(const json& j) {
    const KernelEntry e = kernel_entry_from_json(j);
    KernelSpec spec{e.kind, e.parameter, kFullInput, std::nullopt};
    if (j.contains("partition") && !(j["partition"].is_string() && j["partition"] == "full"))
        spec.partition = j["partition"].get<Index>();
    if (j.contains("norm_factor")) spec.norm_factor = j["norm_factor"].get<double>();
    return spec;
}

json norm_stats_to_json(const NormStats& s) {
    return {{"mean", vector_to_json(s.mean)}, {"std", vector_to_json(s.std)}};
}

NormStats norm_stats_from_json(const json& j) {
    return {vector_from_json(j.at("mean")), vector_from_json(j.at("std"))};
}

void kernel_body_to_json(const ModelFit& fit, json& j) {
    json specs = json::array();
    for (const auto& s : fit.specs) specs.push_back(spec_to_json(s));
    j["kernels"] = std::move(specs);
    j["lambda"] = vector_to_json(fit.lambda);
    j["A"] = matrix_to_json(fit.A);
    j["C"] = matrix_to_json(fit.C);
    j["train_inputs"] = matrix_to_json(fit.train_inputs);
}

ModelFit kernel_body_from_json(const json& j, const std::string& method, int lag, const NormStats& stats) {
    ModelFit fit;
    fit.method = method;
    fit.lag = lag;
    fit.norm_stats = stats;
    for (const auto& s : j.at("kernels")) fit.specs.push_back(spec_from_json(s));
    fit.lambda = vector_from_json(j.at("lambda"));
    fit.A = matrix_from_json(j.at("A"));
    fit.C = matrix_from_json(j.at("C"));
    fit.train_inputs = matrix_from_json(j.at("train_inputs"));
    if (static_cast<Index>(fit.specs.size()) != fit.A.rows() || fit.C.cols() != fit.A.cols() ||
        fit.C.rows() != fit.train_inputs.rows())
        throw Error(ErrorCode::ParseError, "kernel model arrays have inconsistent shapes");
    return fit;
}

} // namespace

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        const Vector row = m.row(i).transpose();
        rows.push_back(vector_to_json(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j) {
    if (!j.is_array()) throw Error(ErrorCode::ParseError, "expected an array of rows");
    if (j.empty()) return Matrix(0, 0);
    const auto cols = static_cast<Index>(j.front().size());
    Matrix m(static_cast<Index>(j.size()), cols);
    for (std::size_t i = 0; i < j.size(); ++i) {
        const Vector row = vector_from_json(j[i]);
        if (row.size() != cols) throw Error(ErrorCode::ParseError, "ragged matrix");
        m.row(static_cast<Index>(i)) = row.transpose();
    }
    return m;
}

json kernel_entry_to_json(const KernelEntry& e) {
    json j{{"kind", to_string(e.kind)}};
    if (e.kind == KernelKind::Polynomial) j["degree"] = static_cast<int>(e.parameter);
    if (e.kind == KernelKind::Gaussian) j["width"] = e.parameter;
    return j;
}

KernelEntry kernel_entry_from_json(const json& j) {
    KernelEntry e;
    e.kind = kernel_kind_from_string(required<std::string>(j, "kind"));
    if (j.contains("parameter")) e.parameter = j["parameter"].get<double>();
    if (e.kind == KernelKind::Polynomial && j.contains("degree")) e.parameter = j["degree"].get<double>();
    if (e.kind == KernelKind::Gaussian && j.contains("width")) e.parameter = j["width"].get<double>();
    if (e.kind != KernelKind::Linear && !(e.parameter > 0.0))
        throw Error(ErrorCode::InvalidConfig, "kernel '" + to_string(e.kind) + "' needs a positive parameter");
    return e;
}

json forecaster_to_json(const Forecaster& model) {
    json j;
    j["format"] = kFormatTag;
    j["version"] = kModelFormatVersion;
    j["method"] = to_string(model.method);
    j["lag"] = model.lag();
    j["series_names"] = model.series_names;
    j["norm_stats"] = norm_stats_to_json(model.norm_stats());
    if (const auto* fit = std::get_if<ModelFit>(&model.body)) {
        kernel_body_to_json(*fit, j);
        return j;
    }
    const auto& bf = std::get<BaselineFit>(model.body);
    if (bf.kind == BaselineKind::NvarFull) {
        if (!bf.nvar) throw Error(ErrorCode::DimensionMismatch, "nvar baseline has no kernel model");
        kernel_body_to_json(*bf.nvar, j);
    } else {
        j["lambda"] = bf.lambda;
        j["coefficients"] = matrix_to_json(bf.coefficients);
    }
    return j;
}

Forecaster forecaster_from_json(const json& j) {
    try {
        if (required<std::string>(j, "format") != kFormatTag)
            throw Error(ErrorCode::ParseError, "not a model document");
        const int version = required<int>(j, "version");
        if (version != kModelFormatVersion)
            throw Error(ErrorCode::ParseError, "unsupported model version " + std::to_string(version));
        Forecaster out;
        out.method = method_from_string(required<std::string>(j, "method"));
        const int lag = required<int>(j, "lag");
        out.series_names = j.value("series_names", std::vector<std::string>{});
        const NormStats stats = norm_stats_from_json(j.at("norm_stats"));
        switch (out.method) {
        case Method::Nvarl1:
        case Method::Nvarl12:
            out.body = kernel_body_from_json(j, to_string(out.method), lag, stats);
            break;
        case Method::Nvar: {
            BaselineFit bf;
            bf.kind = BaselineKind::NvarFull;
            bf.lag = lag;
            bf.norm_stats = stats;
            bf.nvar = kernel_body_from_json(j, "nvar", lag, stats);
            bf.lambda = bf.nvar->lambda.size() ? bf.nvar->lambda(0) : 0.0;
            out.body = std::move(bf);
            break;
        }
        default: {
            BaselineFit bf;
            bf.kind = baseline_kind_from_string(to_string(out.method));
            bf.lag = lag;
            bf.norm_stats = stats;
            bf.lambda = required<double>(j, "lambda");
            bf.coefficients = matrix_from_json(j.at("coefficients"));
            out.body = std::move(bf);
        }
        }
        return out;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("malformed model document: ") + e.what());
    }
}

void save_forecaster(const std::string& path, const Forecaster& model) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    out << forecaster_to_json(model).dump() << '\n';
}

json load_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path + ": " + e.what());
    }
}

Forecaster load_forecaster(const std::string& path) {
    return forecaster_from_json(load_json(path));
}

ModelConfig model_config_from_json(const json& j, ModelConfig base) {
    try {
        if (j.contains("lag")) base.lag = j["lag"].get<int>();
        if (j.contains("kernels")) {
            const auto& k = j["kernels"];
            if (!k.is_array() || k.empty()) throw Error(ErrorCode::InvalidConfig, "'kernels' must be a non-empty array");
            base.dictionaries.clear();
            if (k.front().is_array()) {
                for (const auto& dict : k) {
                    std::vector<KernelEntry> entries;
                    for (const auto& e : dict) entries.push_back(kernel_entry_from_json(e));
                    base.dictionaries.push_back(std::move(entries));
                }
            } else {
                std::vector<KernelEntry> entries;
                for (const auto& e : k) entries.push_back(kernel_entry_from_json(e));
                base.dictionaries.push_back(std::move(entries));
            }
        }
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            base.grid.count = g.value("count", base.grid.count);
            base.grid.low_exp = g.value("low_exp", base.grid.low_exp);
            base.grid.high_exp = g.value("high_exp", base.grid.high_exp);
            if (g.contains("scale")) base.grid.scale = g["scale"].get<double>();
        }
        base.folds = j.value("folds", base.folds);
        if (j.contains("solver")) {
            const auto& s = j["solver"];
            base.solver.max_iter = s.value("max_iter", base.solver.max_iter);
            base.solver.rel_tol = s.value("rel_tol", base.solver.rel_tol);
            base.solver.initial_step = s.value("initial_step", base.solver.initial_step);
            base.solver.backtrack_factor = s.value("backtrack_factor", base.solver.backtrack_factor);
        }
        base.max_outer = j.value("max_outer", base.max_outer);
        base.outer_rel_tol = j.value("outer_rel_tol", base.outer_rel_tol);
        base.rank_tol = j.value("rank_tol", base.rank_tol);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    if (base.lag < 1) throw Error(ErrorCode::InvalidConfig, "lag must be positive");
    base.grid.validate();
    base.solver.validate();
    return base;
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig cfg;
    // Method names are checked first so a typo fails before any data is touched.
    if (!j.contains("methods") || !j["methods"].is_array() || j["methods"].empty())
        throw Error(ErrorCode::InvalidConfig, "'methods' must list at least one method");
    for (const auto& name : j["methods"]) {
        if (!name.is_string()) throw Error(ErrorCode::InvalidConfig, "method names must be strings");
        cfg.methods.push_back(method_from_string(name.get<std::string>()));
    }
    cfg.model = model_config_from_json(j);
    try {
        cfg.train = j.value("train", cfg.train);
        cfg.holdout = j.value("holdout", cfg.holdout);
        if (j.contains("lambda")) {
            for (const auto& [name, value] : j["lambda"].items())
                cfg.fixed_lambda.emplace_back(method_from_string(name), value.get<double>());
        }
        const json data = j.value("data", json::object({{"synthetic", json::object()}}));
        if (data.contains("csv")) cfg.data.csv_path = data["csv"].get<std::string>();
        if (data.contains("synthetic")) {
            const auto& s = data["synthetic"];
            SyntheticSpec spec;
            spec.psi = s.contains("psi") ? matrix_from_json(s["psi"]) : SyntheticSpec::default_psi();
            spec.seed = s.value("seed", j.value("seed", std::uint64_t{1}));
            cfg.data.synthetic = spec;
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, e.what());
    }
    if (cfg.data.csv_path && cfg.data.synthetic)
        throw Error(ErrorCode::InvalidConfig, "give either 'csv' or 'synthetic' data, not both");
    return cfg;
}

json eval_report_to_json(const EvalReport& report) {
    return {{"method", report.method},
            {"lambda", report.lambda},
            {"mse", report.mse},
            {"mse_std", report.mse_std},
            {"n_holdout", report.n_holdout},
            {"per_step_errors", vector_to_json(report.per_step_errors)}};
}

json cv_result_to_json(const CvResult& cv) {
    json mean = json::array();
    for (double v : cv.mean_mse) mean.push_back(std::isfinite(v) ? json(v) : json(nullptr));
    return {{"best_lambda", cv.best_lambda}, {"lambdas", cv.lambdas}, {"mean_mse", mean},
            {"fold_mse", matrix_to_json(cv.fold_mse)}};
}

json experiment_report_to_json(const ExperimentReport& report) {
    json methods = json::array();
    for (const auto& r : report.results) {
        json entry{{"method", to_string(r.method)}, {"status", r.ok ? "ok" : "failed"}, {"seconds", r.seconds}};
        if (!r.ok) entry["error"] = r.error;
        if (r.ok) entry["report"] = eval_report_to_json(r.report);
        if (r.cv) entry["cv"] = cv_result_to_json(*r.cv);
        if (r.adjacency) entry["adjacency"] = matrix_to_json(r.adjacency->values);
        methods.push_back(std::move(entry));
    }
    return {{"results", methods}};
}

} // namespace nlgranger
