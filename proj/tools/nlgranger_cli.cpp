// Command line front end: generate, fit, predict, evaluate, adjacency, benchmark.

#include "nlgranger/error.hpp"
#include "nlgranger/harness.hpp"
#include "nlgranger/serialize.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace nlgranger;

namespace {

Matrix read_plain_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::vector<double> row;
        std::istringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) row.push_back(std::stod(field));
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error(ErrorCode::ParseError, path + " is empty");
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows.front().size()) throw Error(ErrorCode::ParseError, path + " is ragged");
        for (std::size_t j = 0; j < rows[i].size(); ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
    return m;
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path);
    out << text;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sparse multiple-kernel forecasting and Granger graphs for multivariate time series"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "Simulate the block-structured MA(1) benchmark process");
    Index gen_length = 1000;
    std::uint64_t gen_seed = 1;
    std::string gen_out, gen_psi;
    gen->add_option("--length", gen_length, "Number of time steps")->required();
    gen->add_option("--seed", gen_seed, "PRNG seed")->required();
    gen->add_option("--out", gen_out, "Output CSV")->required();
    gen->add_option("--psi", gen_psi, "Headerless CSV with the filter matrix");

    // fit
    auto* fit_cmd = app.add_subcommand("fit", "Fit one method on the first --train rows");
    std::string fit_data, fit_method_name, fit_config, fit_out;
    Index fit_train = 0;
    int fit_lag = 5;
    double fit_lambda = 0.0;
    bool fit_cv = false;
    fit_cmd->add_option("--data", fit_data, "Input CSV")->required();
    fit_cmd->add_option("--method", fit_method_name, "nvarl1|nvarl12|mean|lar|lvarl2|lvarl1|nvar")->required();
    fit_cmd->add_option("--train", fit_train, "Training window length (time steps)")->required();
    auto* lag_opt = fit_cmd->add_option("--lag", fit_lag, "Lag order");
    fit_cmd->add_option("--config", fit_config, "Model config JSON");
    fit_cmd->add_option("--out", fit_out, "Output model JSON")->required();
    auto* lambda_opt = fit_cmd->add_option("--lambda", fit_lambda, "Fixed regularization");
    auto* cv_flag = fit_cmd->add_flag("--cv", fit_cv, "Select lambda by cross-validation (default)");
    lambda_opt->excludes(cv_flag);

    // predict
    auto* pred = app.add_subcommand("predict", "One-step forecasts in original units");
    std::string pred_model, pred_data, pred_out;
    pred->add_option("--model", pred_model, "Model JSON")->required();
    pred->add_option("--data", pred_data, "Input CSV")->required();
    pred->add_option("--out", pred_out, "Output CSV")->required();

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Hold-out MSE on the last --holdout steps");
    std::string eval_model, eval_data, eval_out;
    Index eval_holdout = 500;
    eval->add_option("--model", eval_model, "Model JSON")->required();
    eval->add_option("--data", eval_data, "Input CSV")->required();
    eval->add_option("--holdout", eval_holdout, "Number of hold-out targets");
    eval->add_option("--out", eval_out, "Output report JSON")->required();

    // adjacency
    auto* adj = app.add_subcommand("adjacency", "Granger adjacency matrix of a fitted model");
    std::string adj_model, adj_out;
    double adj_threshold = 1e-8;
    adj->add_option("--model", adj_model, "Model JSON")->required();
    adj->add_option("--out", adj_out, "Output CSV (row = cause, column = effect)")->required();
    adj->add_option("--threshold", adj_threshold, "Relative zero threshold");

    // benchmark
    auto* bench = app.add_subcommand("benchmark", "Run a full experiment from a config file");
    std::string bench_config, bench_out;
    bench->add_option("--config", bench_config, "Experiment JSON")->required();
    bench->add_option("--out", bench_out, "Output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            SyntheticSpec spec;
            spec.length = gen_length;
            spec.seed = gen_seed;
            spec.psi = gen_psi.empty() ? SyntheticSpec::default_psi() : read_plain_matrix(gen_psi);
            write_csv(gen_out, generate_synthetic(spec));
        } else if (fit_cmd->parsed()) {
            const Method method = method_from_string(fit_method_name);
            ModelConfig config;
            if (!fit_config.empty()) config = model_config_from_json(load_json(fit_config));
            if (lag_opt->count() > 0 || fit_config.empty()) config.lag = fit_lag;
            const auto series = read_csv(fit_data);
            if (fit_train > series.length())
                throw Error(ErrorCode::BadRange, "--train exceeds the series length");
            const NormStats stats = standardize_fit(series, fit_train);
            const auto train = lag_embed(standardize_apply(series.slice(0, fit_train), stats, Direction::Forward),
                                         config.lag);
            double lambda = fit_lambda;
            if (lambda_opt->count() == 0 && method != Method::Mean) {
                const CvResult cv = cv_select(train, method, config);
                lambda = cv.best_lambda;
                std::cerr << "cv selected lambda " << lambda << '\n';
            }
            save_forecaster(fit_out, fit_method(method, train, lambda, config, stats, series.names));
        } else if (pred->parsed()) {
            const Forecaster model = load_forecaster(pred_model);
            const auto series = read_csv(pred_data);
            const Matrix standardized = standardize_apply(series.values, model.norm_stats(), Direction::Forward);
            const int lag = model.lag();
            // Targets lag..n_total; the last row is the forecast beyond the data.
            const Index count = series.length() - lag + 1;
            if (count < 1) throw Error(ErrorCode::SeriesTooShort, "series shorter than the model lag");
            const Matrix forecasts = standardize_apply(model.predict(embed_inputs(standardized, lag, lag, count)),
                                                       model.norm_stats(), Direction::Inverse);
            std::ofstream out(pred_out);
            if (!out) throw Error(ErrorCode::ParseError, "cannot write " + pred_out);
            out << "t";
            for (const auto& name : series.names) out << ',' << name;
            out << '\n' << std::setprecision(17);
            for (Index r = 0; r < forecasts.rows(); ++r) {
                out << (lag + r);
                for (Index c = 0; c < forecasts.cols(); ++c) out << ',' << forecasts(r, c);
                out << '\n';
            }
        } else if (eval->parsed()) {
            const Forecaster model = load_forecaster(eval_model);
            const auto series = read_csv(eval_data);
            const Matrix standardized = standardize_apply(series.values, model.norm_stats(), Direction::Forward);
            EvalReport report = evaluate_holdout([&](const Matrix& x) { return model.predict(x); },
                                                 holdout_set(standardized, model.lag(), eval_holdout));
            report.method = to_string(model.method);
            report.lambda = model.lambda();
            write_file(eval_out, eval_report_to_json(report).dump(2) + "\n");
            std::cout << report.method << " mse " << report.mse << " (" << report.mse_std << ")\n";
        } else if (adj->parsed()) {
            const Forecaster model = load_forecaster(adj_model);
            if (!model.has_adjacency())
                throw Error(ErrorCode::UnsupportedKind, to_string(model.method) + " has no Granger structure");
            write_adjacency_csv(adj_out, model.adjacency(adj_threshold));
        } else if (bench->parsed()) {
            const ExperimentConfig config = experiment_config_from_json(load_json(bench_config));
            const ExperimentReport report = run_experiment(config, bench_out);
            for (const auto& r : report.results) {
                std::cout << std::left << std::setw(8) << to_string(r.method);
                if (r.ok)
                    std::cout << " mse " << std::fixed << std::setprecision(4) << r.report.mse << " ("
                              << r.report.mse_std << ") lambda " << std::scientific << std::setprecision(3)
                              << r.report.lambda << std::defaultfloat << '\n';
                else
                    std::cout << " FAILED: " << r.error << '\n';
            }
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
