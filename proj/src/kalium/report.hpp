#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "kalium/eval.hpp"
#include "kalium/fuzzy.hpp"
#include "kalium/pipeline.hpp"

namespace kalium {

using Json = nlohmann::ordered_json;

inline constexpr std::string_view kModelFormat = "kalium.tsk_model";
inline constexpr int kModelFormatVersion = 1;

/// Terms are stored once per input; rules refer to them by index. Doubles
/// are written in shortest round-trip form, so a reload is exact.
Json model_to_json(const TskModel& model);
/// Throws ValidationError on any schema problem.
TskModel model_from_json(const nlohmann::json& doc);
TskModel model_from_string(std::string_view text);

/// "If t_axis_deg is Low then [K+] = -0.0501 * t_axis_deg + 6.981"
std::string rule_text(const TskModel& model, std::size_t rule);

Json inference_trace_json(const TskModel& model, const Inference& inference);

Json cohort_json(const std::vector<CohortSample>& samples);
Json feature_report_json(const FeatureReport& report);
/// Box statistics for each significant feature, three groups each (an empty
/// class gets n = 0 and null statistics).
Json boxplots_json(const std::vector<CohortSample>& samples, const FeatureReport& report);

Json class_metrics_json(const ClassMetrics& metrics);
Json eval_report_json(const EvalReport& report);
std::string confusion_csv(const ClassMetrics& metrics);
std::string history_csv(const TrainHistory& history);

/// Human-readable comparison with one row per report: error, absolute error,
/// MAPE, r, then the classification summary.
std::string comparison_table(const std::vector<const EvalReport*>& reports);

std::string_view variant_name(Variant v);
/// Accepts "conventional" and "fcm-anfis" (also "fcm").
Variant variant_from_name(std::string_view name);

}  // namespace kalium
