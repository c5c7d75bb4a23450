#pragma once

#include "nlgranger/harness.hpp"

#include "json.hpp"

#include <string>

namespace nlgranger {

using json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;

json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const json& j);

json kernel_entry_to_json(const KernelEntry& e);
KernelEntry kernel_entry_from_json(const json& j);

/// Versioned model document; see README for the field list.
json forecaster_to_json(const Forecaster& model);
Forecaster forecaster_from_json(const json& j);
void save_forecaster(const std::string& path, const Forecaster& model);
Forecaster load_forecaster(const std::string& path);

/// Reads the model-shaping keys (lag, kernels, grid, folds, solver, ...) on
/// top of `base`. Missing keys keep their base values.
ModelConfig model_config_from_json(const json& j, ModelConfig base = {});
ExperimentConfig experiment_config_from_json(const json& j);
json load_json(const std::string& path);

json eval_report_to_json(const EvalReport& report);
json cv_result_to_json(const CvResult& cv);
json experiment_report_to_json(const ExperimentReport& report);

} // namespace nlgranger
