#include "kalium/report.hpp"

#include <cmath>

#include <fmt/format.h>

#include "kalium/error.hpp"

namespace kalium {
namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string_view kind_name(MfKind kind) { return kind == MfKind::Gaussian ? "gaussian" : "trapezoid"; }

template <typename T>
T required(const nlohmann::json& obj, const char* key, std::string_view where) {
  if (!obj.is_object() || !obj.contains(key)) throw ValidationError(fmt::format("{}: missing '{}'", where, key));
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(fmt::format("{}: '{}' has the wrong type", where, key));
  }
}

Json mean_sd_json(const MeanSd& m) { return Json{{"mean", m.mean}, {"sd", optional_number(m.sd)}}; }

Json regression_json(const RegressionMetrics& m) {
  return Json{{"n", m.n},
              {"error_mM", mean_sd_json(m.errors.error)},
              {"abs_error_mM", mean_sd_json(m.errors.abs_error)},
              {"mape_percent", m.mape},
              {"pearson_r", optional_number(m.pearson_r)}};
}

std::string fmt_opt(const std::optional<double>& v, std::string_view spec) {
  return v ? fmt::format(fmt::runtime(spec), *v) : std::string("n/a");
}

}  // namespace

std::string_view variant_name(Variant v) { return v == Variant::Conventional ? "conventional" : "fcm-anfis"; }

Variant variant_from_name(std::string_view name) {
  if (name == "conventional") return Variant::Conventional;
  if (name == "fcm-anfis" || name == "fcm") return Variant::FcmAnfis;
  throw ValidationError(fmt::format("unknown model variant '{}'", name));
}

Json model_to_json(const TskModel& model) {
  Json inputs = Json::array();
  for (const auto& in : model.inputs()) {
    Json terms = Json::array();
    for (const auto& term : in.terms) {
      Json params = Json::array();
      for (const double p : term.mf.params()) params.push_back(p);
      terms.push_back(Json{{"name", term.name}, {"kind", kind_name(term.mf.kind())}, {"params", params}});
    }
    inputs.push_back(Json{{"name", in.name}, {"terms", terms}});
  }
  Json rules = Json::array();
  for (const auto& rule : model.rules()) {
    rules.push_back(Json{{"antecedents", rule.antecedents}, {"coefficients", rule.coefficients}, {"bias", rule.bias}});
  }
  return Json{{"format", kModelFormat},
              {"version", kModelFormatVersion},
              {"t_norm", "product"},
              {"inputs", inputs},
              {"rules", rules}};
}

TskModel model_from_json(const nlohmann::json& doc) {
  if (required<std::string>(doc, "format", "model") != kModelFormat) {
    throw ValidationError(fmt::format("model: format is not '{}'", kModelFormat));
  }
  if (required<int>(doc, "version", "model") != kModelFormatVersion) {
    throw ValidationError("model: unsupported format version");
  }
  if (doc.contains("t_norm") && doc.at("t_norm") != "product") throw ValidationError("model: only product t-norm");

  std::vector<InputVariable> inputs;
  for (const auto& in : required<nlohmann::json>(doc, "inputs", "model")) {
    InputVariable var;
    var.name = required<std::string>(in, "name", "model input");
    const std::string where = fmt::format("input '{}'", var.name);
    for (const auto& term : required<nlohmann::json>(in, "terms", where)) {
      const auto name = required<std::string>(term, "name", where);
      const auto kind = required<std::string>(term, "kind", where);
      const auto p = required<std::vector<double>>(term, "params", where);
      if (kind == "trapezoid" && p.size() == 4) {
        var.terms.push_back({name, MembershipFunction::trapezoid(p[0], p[1], p[2], p[3])});
      } else if (kind == "gaussian" && p.size() == 2) {
        var.terms.push_back({name, MembershipFunction::gaussian(p[0], p[1])});
      } else {
        throw ValidationError(fmt::format("{}: term '{}' has bad kind or parameter count", where, name));
      }
    }
    inputs.push_back(std::move(var));
  }

  std::vector<TskRule> rules;
  for (const auto& r : required<nlohmann::json>(doc, "rules", "model")) {
    TskRule rule;
    rule.antecedents = required<std::vector<std::size_t>>(r, "antecedents", "rule");
    rule.coefficients = required<std::vector<double>>(r, "coefficients", "rule");
    rule.bias = required<double>(r, "bias", "rule");
    rules.push_back(std::move(rule));
  }
  return TskModel(std::move(inputs), std::move(rules));
}

TskModel model_from_string(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(fmt::format("model JSON does not parse: {}", e.what()));
  }
  return model_from_json(doc);
}

std::string rule_text(const TskModel& model, std::size_t rule) {
  const auto& r = model.rules().at(rule);
  std::string text = "If ";
  for (std::size_t d = 0; d < model.input_dim(); ++d) {
    if (d > 0) text += " and ";
    const auto& in = model.inputs()[d];
    text += fmt::format("{} is {}", in.name, in.terms[r.antecedents[d]].name);
  }
  text += " then [K+] =";
  for (std::size_t d = 0; d < model.input_dim(); ++d) {
    text += fmt::format(" {:.4f} * {} +", r.coefficients[d], model.inputs()[d].name);
  }
  text += fmt::format(" {:.4f}", r.bias);
  return text;
}

Json inference_trace_json(const TskModel& model, const Inference& inference) {
  Json rules = Json::array();
  for (std::size_t r = 0; r < model.rule_count(); ++r) {
    rules.push_back(Json{{"rule", r + 1},
                         {"text", rule_text(model, r)},
                         {"firing", inference.firing[r]},
                         {"normalized", inference.normalized[r]}});
  }
  Json out{{"estimate_mM", inference.estimate}, {"zero_firing", inference.zero_firing}};
  out["fallback_rule"] = inference.fallback_rule ? Json(*inference.fallback_rule + 1) : Json(nullptr);
  out["rules"] = rules;
  return out;
}

Json cohort_json(const std::vector<CohortSample>& samples) {
  Json arr = Json::array();
  for (const auto& s : samples) {
    Json features;
    for (std::size_t f = 0; f < kFeatureCount; ++f) features[std::string(kFeatureNames[f])] = s.features[f];
    arr.push_back(Json{{"patient_id", s.patient_id},
                       {"ecg_time", format_timestamp(s.ecg_time)},
                       {"lab_time", format_timestamp(s.lab_time)},
                       {"delta_t_s", s.delta_t_s},
                       {"features", features},
                       {"potassium_mM", s.potassium_mm},
                       {"label", label_name(s.label)}});
  }
  const auto counts = class_counts(samples);
  return Json{{"n", samples.size()},
              {"class_counts", Json{{"hypo", counts[0]}, {"normal", counts[1]}, {"hyper", counts[2]}}},
              {"samples", arr}};
}

Json feature_report_json(const FeatureReport& report) {
  Json features = Json::array();
  std::size_t rank = 1;
  for (const auto& e : report.ranking) {
    features.push_back(Json{{"rank", rank++},
                            {"feature", e.name},
                            {"H", e.kw.h},
                            {"df", e.kw.df},
                            {"p", e.kw.p},
                            {"tie_correction", e.kw.tie_correction},
                            {"significant", e.significant},
                            {"pearson_r", optional_number(e.pearson_r)}});
  }
  return Json{{"test", "kruskal-wallis"},
              {"alpha", report.alpha},
              {"class_counts",
               Json{{"hypo", report.class_counts[0]}, {"normal", report.class_counts[1]}, {"hyper", report.class_counts[2]}}},
              {"warnings", report.warnings},
              {"features", features}};
}

Json boxplots_json(const std::vector<CohortSample>& samples, const FeatureReport& report) {
  Json out = Json::array();
  for (const auto& e : report.ranking) {
    if (!e.significant) continue;
    const Feature f = feature_from_name(e.name);
    Json groups = Json::array();
    for (std::size_t c = 0; c < kLabelCount; ++c) {
      std::vector<double> values;
      for (const auto& s : samples) {
        if (static_cast<std::size_t>(s.label) == c) values.push_back(s[f]);
      }
      Json g{{"class", label_name(static_cast<KLabel>(c))}, {"n", values.size()}};
      if (values.empty()) {
        for (const char* key : {"median", "q1", "q3", "iqr", "whisker_low", "whisker_high", "ci95_low", "ci95_high"}) {
          g[key] = nullptr;
        }
        g["outliers"] = Json::array();
      } else {
        const BoxStats b = boxplot_stats(values);
        g["median"] = b.median;
        g["q1"] = b.q1;
        g["q3"] = b.q3;
        g["iqr"] = b.iqr;
        g["whisker_low"] = b.whisker_low;
        g["whisker_high"] = b.whisker_high;
        g["ci95_low"] = b.ci95_low;
        g["ci95_high"] = b.ci95_high;
        g["outliers"] = b.outliers;
      }
      groups.push_back(std::move(g));
    }
    out.push_back(Json{{"feature", e.name}, {"groups", groups}});
  }
  return Json{{"notch", "mcgill-1.57"}, {"quantiles", "linear-interpolation"}, {"boxplots", out}};
}

Json class_metrics_json(const ClassMetrics& metrics) {
  Json matrix = Json::array();
  for (const auto& row : metrics.confusion) matrix.push_back(row);
  Json per_class = Json::array();
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    per_class.push_back(Json{{"class", label_name(static_cast<KLabel>(c))},
                             {"sensitivity", optional_number(metrics.sensitivity[c])},
                             {"specificity", optional_number(metrics.specificity[c])}});
  }
  return Json{{"labels", {"hypo", "normal", "hyper"}},
              {"confusion", matrix},
              {"total", metrics.total},
              {"accuracy", metrics.accuracy},
              {"per_class", per_class}};
}

Json eval_report_json(const EvalReport& report) {
  Json folds = Json::array();
  for (const auto& f : report.folds) {
    folds.push_back(Json{{"fold", f.fold},
                         {"n_train", f.n_train},
                         {"n_test", f.n_test},
                         {"metrics", regression_json(f.metrics)},
                         {"final_train_rmse", f.history.train_rmse.empty() ? Json(nullptr) : Json(f.history.train_rmse.back())},
                         {"zero_firing", f.zero_firing},
                         {"regularized_solves", f.regularized_solves}});
  }
  Json predictions = Json::array();
  for (std::size_t i = 0; i < report.actual.size(); ++i) {
    predictions.push_back(Json{{"index", i},
                               {"fold", report.assignment.fold[i]},
                               {"actual_mM", report.actual[i]},
                               {"estimate_mM", report.estimate[i]}});
  }
  return Json{{"variant", variant_name(report.variant)},
              {"inputs", report.inputs},
              {"cv", Json{{"k", report.assignment.k},
                          {"seed", report.assignment.seed},
                          {"stratified", report.assignment.stratified},
                          {"fold_sizes", report.assignment.fold_sizes()},
                          {"warnings", report.assignment.warnings}}},
              {"pooled", regression_json(report.pooled)},
              {"classification", class_metrics_json(report.classification)},
              {"folds", folds},
              {"predictions", predictions}};
}

std::string confusion_csv(const ClassMetrics& metrics) {
  std::string out = "actual\\predicted,hypo,normal,hyper\n";
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    out += fmt::format("{},{},{},{}\n", label_name(static_cast<KLabel>(c)), metrics.confusion[c][0],
                       metrics.confusion[c][1], metrics.confusion[c][2]);
  }
  return out;
}

std::string history_csv(const TrainHistory& history) {
  std::string out = "epoch,train_rmse,val_rmse\n";
  for (std::size_t e = 0; e < history.train_rmse.size(); ++e) {
    out += fmt::format("{},{},", e + 1, history.train_rmse[e]);
    if (e < history.validation_rmse.size()) out += fmt::format("{}", history.validation_rmse[e]);
    out += '\n';
  }
  return out;
}

std::string comparison_table(const std::vector<const EvalReport*>& reports) {
  std::string out = fmt::format("{:<14} {:>18} {:>18} {:>9} {:>7}\n", "Model", "Error (mM)", "Abs error (mM)",
                                "MAPE (%)", "r");
  for (const EvalReport* r : reports) {
    const auto& e = r->pooled.errors;
    out += fmt::format("{:<14} {:>18} {:>18} {:>9.2f} {:>7}\n", variant_name(r->variant),
                       fmt::format("{:.3f} +/- {}", e.error.mean, fmt_opt(e.error.sd, "{:.2f}")),
                       fmt::format("{:.2f} +/- {}", e.abs_error.mean, fmt_opt(e.abs_error.sd, "{:.2f}")),
                       r->pooled.mape, fmt_opt(r->pooled.pearson_r, "{:.2f}"));
  }
  out += "\n";
  out += fmt::format("{:<14} {:>9} {:>10} {:>10} {:>10} {:>10}\n", "Model", "Accuracy", "Sens hypo", "Sens hyper",
                     "Spec hypo", "Spec hyper");
  auto pct = [](const std::optional<double>& v) { return v ? fmt::format("{:.2f}%", 100.0 * *v) : std::string("n/a"); };
  for (const EvalReport* r : reports) {
    const auto& c = r->classification;
    out += fmt::format("{:<14} {:>9} {:>10} {:>10} {:>10} {:>10}\n", variant_name(r->variant),
                       fmt::format("{:.2f}%", 100.0 * c.accuracy), pct(c.sensitivity[0]), pct(c.sensitivity[2]),
                       pct(c.specificity[0]), pct(c.specificity[2]));
  }
  return out;
}

}  // namespace kalium
