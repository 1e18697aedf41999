#include "kalium/kalium.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <sstream>
#include <string>

#include <fmt/format.h>

#include "kalium/anfis.hpp"
#include "kalium/error.hpp"
#include "kalium/eval.hpp"
#include "kalium/pipeline.hpp"
#include "kalium/report.hpp"

struct kalium_cohort {
  std::vector<kalium::CohortSample> samples;
  std::vector<std::string> diagnostics;
};

struct kalium_model {
  kalium::TskModel model;
  std::vector<std::string> input_names;
};

struct kalium_evaluation {
  kalium::EvalReport report;
};

namespace {

thread_local std::string last_error;

template <typename Fn>
kalium_status guarded(Fn&& fn) noexcept {
  try {
    fn();
    last_error.clear();
    return KALIUM_OK;
  } catch (const kalium::Error& e) {
    last_error = e.what();
    return static_cast<kalium_status>(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return KALIUM_ERR_INTERNAL;
}

void require(const void* ptr, const char* what) {
  if (ptr == nullptr) throw kalium::ValidationError(fmt::format("{} must not be null", what));
}

char* copy_out(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void emit(char** out, const std::string& s) {
  require(out, "output pointer");
  *out = copy_out(s);
}

std::string dump(const kalium::Json& j) { return j.dump(2) + "\n"; }

double or_nan(const std::optional<double>& v) { return v ? *v : std::numeric_limits<double>::quiet_NaN(); }

kalium_cohort* build_cohort(std::istream& ecg_in, std::istream& labs_in, int64_t window_s) {
  auto ecgs = kalium::parse_ecg_csv(ecg_in);
  auto labs = kalium::parse_labs_csv(labs_in);
  auto cohort = std::make_unique<kalium_cohort>();
  for (const auto& d : ecgs.diagnostics) cohort->diagnostics.push_back("ecg " + d);
  for (const auto& d : labs.diagnostics) cohort->diagnostics.push_back("labs " + d);
  cohort->samples = kalium::join_cohort(ecgs.rows, labs.rows, window_s);
  return cohort.release();
}

std::vector<kalium::Feature> parse_features(const char* list) {
  std::vector<kalium::Feature> out;
  const std::string text = list != nullptr ? list : "t_axis_deg";
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    out.push_back(kalium::feature_from_name(item.substr(b, e - b + 1)));
  }
  if (out.empty()) throw kalium::ValidationError("no input features selected");
  return out;
}

kalium::TrainConfig to_train_config(const kalium_train_config& c) {
  kalium::TrainConfig t;
  if (c.variant != KALIUM_CONVENTIONAL && c.variant != KALIUM_FCM_ANFIS) {
    throw kalium::ValidationError("unknown model variant");
  }
  t.variant = c.variant == KALIUM_CONVENTIONAL ? kalium::Variant::Conventional : kalium::Variant::FcmAnfis;
  t.epochs = c.epochs;
  t.learning_rate = c.learning_rate;
  t.mfs_per_dim = c.mfs_per_dim;
  t.fcm.clusters = c.clusters;
  t.fcm.fuzziness = c.fuzziness;
  t.fcm.tol = c.fcm_tol;
  t.fcm.max_iter = c.phase_split;
  t.fcm.seed = c.seed;
  t.phase_split = c.phase_split;
  t.seed = c.seed;
  t.validate();
  return t;
}

const kalium::TskModel& model_of(const kalium_model* m) {
  require(m, "model");
  return m->model;
}

kalium::Json trace_with_label(const kalium::TskModel& model, const kalium::Inference& inf) {
  auto j = kalium::inference_trace_json(model, inf);
  j["class"] = kalium::label_name(kalium::classify_estimate(inf.estimate));
  return j;
}

}  // namespace

extern "C" {

const char* kalium_version(void) { return KALIUM_VERSION_STRING; }

const char* kalium_last_error(void) { return last_error.c_str(); }

void kalium_string_free(char* s) { std::free(s); }

kalium_status kalium_label_potassium(double k_mm, kalium_label* out) {
  return guarded([&] {
    require(out, "output label");
    *out = static_cast<kalium_label>(kalium::label_potassium(k_mm));
  });
}

kalium_status kalium_classify_estimate(double k_mm, kalium_label* out) {
  return guarded([&] {
    require(out, "output label");
    *out = static_cast<kalium_label>(kalium::classify_estimate(k_mm));
  });
}

const char* kalium_label_name(kalium_label label) {
  switch (label) {
    case KALIUM_HYPO: return "hypo";
    case KALIUM_NORMAL: return "normal";
    case KALIUM_HYPER: return "hyper";
  }
  return "unknown";
}

kalium_status kalium_cohort_join_files(const char* ecg_csv_path, const char* labs_csv_path, int64_t window_s,
                                       kalium_cohort** out) {
  return guarded([&] {
    require(ecg_csv_path, "ECG path");
    require(labs_csv_path, "labs path");
    require(out, "output cohort");
    std::ifstream ecg(ecg_csv_path);
    if (!ecg) throw kalium::IoError(fmt::format("cannot open ECG file '{}': file not found", ecg_csv_path));
    std::ifstream labs(labs_csv_path);
    if (!labs) throw kalium::IoError(fmt::format("cannot open labs file '{}': file not found", labs_csv_path));
    *out = build_cohort(ecg, labs, window_s);
  });
}

kalium_status kalium_cohort_join_text(const char* ecg_csv, const char* labs_csv, int64_t window_s,
                                      kalium_cohort** out) {
  return guarded([&] {
    require(ecg_csv, "ECG CSV");
    require(labs_csv, "labs CSV");
    require(out, "output cohort");
    std::istringstream ecg(ecg_csv);
    std::istringstream labs(labs_csv);
    *out = build_cohort(ecg, labs, window_s);
  });
}

void kalium_cohort_free(kalium_cohort* cohort) { delete cohort; }

size_t kalium_cohort_size(const kalium_cohort* cohort) { return cohort != nullptr ? cohort->samples.size() : 0; }

void kalium_cohort_class_counts(const kalium_cohort* cohort, size_t counts[3]) {
  if (counts == nullptr) return;
  counts[0] = counts[1] = counts[2] = 0;
  if (cohort == nullptr) return;
  const auto c = kalium::class_counts(cohort->samples);
  for (std::size_t i = 0; i < 3; ++i) counts[i] = c[i];
}

size_t kalium_cohort_diagnostic_count(const kalium_cohort* cohort) {
  return cohort != nullptr ? cohort->diagnostics.size() : 0;
}

const char* kalium_cohort_diagnostic(const kalium_cohort* cohort, size_t index) {
  if (cohort == nullptr || index >= cohort->diagnostics.size()) return nullptr;
  return cohort->diagnostics[index].c_str();
}

kalium_status kalium_cohort_csv(const kalium_cohort* cohort, char** out) {
  return guarded([&] {
    require(cohort, "cohort");
    emit(out, kalium::write_cohort_csv(cohort->samples));
  });
}

kalium_status kalium_cohort_json(const kalium_cohort* cohort, char** out) {
  return guarded([&] {
    require(cohort, "cohort");
    emit(out, dump(kalium::cohort_json(cohort->samples)));
  });
}

kalium_status kalium_synthesize(size_t n, double noise_sd, uint64_t seed, char** ecg_csv, char** labs_csv) {
  return guarded([&] {
    require(ecg_csv, "ECG output");
    require(labs_csv, "labs output");
    const auto data = kalium::generate_synthetic(n, noise_sd, seed);
    char* ecg = copy_out(kalium::write_ecg_csv(data.ecgs));
    try {
      *labs_csv = copy_out(kalium::write_labs_csv(data.labs));
    } catch (...) {
      std::free(ecg);
      throw;
    }
    *ecg_csv = ecg;
  });
}

kalium_status kalium_feature_report_json(const kalium_cohort* cohort, double alpha, char** out) {
  return guarded([&] {
    require(cohort, "cohort");
    emit(out, dump(kalium::feature_report_json(kalium::select_features(cohort->samples, alpha))));
  });
}

kalium_status kalium_boxplots_json(const kalium_cohort* cohort, double alpha, char** out) {
  return guarded([&] {
    require(cohort, "cohort");
    const auto report = kalium::select_features(cohort->samples, alpha);
    emit(out, dump(kalium::boxplots_json(cohort->samples, report)));
  });
}

void kalium_train_config_init(kalium_train_config* config) {
  if (config == nullptr) return;
  const kalium::TrainConfig defaults;
  config->variant = KALIUM_FCM_ANFIS;
  config->epochs = defaults.epochs;
  config->learning_rate = defaults.learning_rate;
  config->mfs_per_dim = defaults.mfs_per_dim;
  config->clusters = defaults.fcm.clusters;
  config->fuzziness = defaults.fcm.fuzziness;
  config->fcm_tol = defaults.fcm.tol;
  config->phase_split = defaults.phase_split;
  config->folds = 10;
  config->stratified = 1;
  config->seed = defaults.seed;
  config->features = "t_axis_deg";
  config->parallel = 1;
}

kalium_status kalium_evaluate(const kalium_cohort* cohort, const kalium_train_config* config,
                              kalium_evaluation** out) {
  return guarded([&] {
    require(cohort, "cohort");
    require(config, "config");
    require(out, "output evaluation");
    const auto features = parse_features(config->features);
    const auto train_config = to_train_config(*config);
    std::vector<kalium::KLabel> labels;
    for (const auto& s : cohort->samples) labels.push_back(s.label);
    const auto folds = kalium::kfold(labels, config->folds, config->seed, config->stratified != 0);
    auto eval = std::make_unique<kalium_evaluation>();
    eval->report = kalium::cross_validate(cohort->samples, features, folds, train_config, config->parallel != 0);
    *out = eval.release();
  });
}

void kalium_evaluation_free(kalium_evaluation* evaluation) { delete evaluation; }

kalium_status kalium_evaluation_summary(const kalium_evaluation* evaluation, kalium_eval_summary* out) {
  return guarded([&] {
    require(evaluation, "evaluation");
    require(out, "output summary");
    const auto& r = evaluation->report;
    out->n = r.pooled.n;
    out->error_mean_mm = r.pooled.errors.error.mean;
    out->error_sd_mm = or_nan(r.pooled.errors.error.sd);
    out->abs_error_mean_mm = r.pooled.errors.abs_error.mean;
    out->abs_error_sd_mm = or_nan(r.pooled.errors.abs_error.sd);
    out->mape_percent = r.pooled.mape;
    out->pearson_r = or_nan(r.pooled.pearson_r);
    out->accuracy = r.classification.accuracy;
    for (std::size_t c = 0; c < 3; ++c) {
      out->sensitivity[c] = or_nan(r.classification.sensitivity[c]);
      out->specificity[c] = or_nan(r.classification.specificity[c]);
    }
  });
}

kalium_status kalium_evaluation_report_json(const kalium_evaluation* evaluation, char** out) {
  return guarded([&] {
    require(evaluation, "evaluation");
    emit(out, dump(kalium::eval_report_json(evaluation->report)));
  });
}

kalium_status kalium_evaluation_confusion_csv(const kalium_evaluation* evaluation, char** out) {
  return guarded([&] {
    require(evaluation, "evaluation");
    emit(out, kalium::confusion_csv(evaluation->report.classification));
  });
}

size_t kalium_evaluation_fold_count(const kalium_evaluation* evaluation) {
  return evaluation != nullptr ? evaluation->report.folds.size() : 0;
}

kalium_status kalium_evaluation_fold_model_json(const kalium_evaluation* evaluation, size_t fold, char** out) {
  return guarded([&] {
    require(evaluation, "evaluation");
    if (fold >= evaluation->report.folds.size()) throw kalium::ValidationError("fold index out of range");
    emit(out, dump(kalium::model_to_json(evaluation->report.folds[fold].model)));
  });
}

kalium_status kalium_evaluation_fold_history_csv(const kalium_evaluation* evaluation, size_t fold, char** out) {
  return guarded([&] {
    require(evaluation, "evaluation");
    if (fold >= evaluation->report.folds.size()) throw kalium::ValidationError("fold index out of range");
    emit(out, kalium::history_csv(evaluation->report.folds[fold].history));
  });
}

kalium_status kalium_comparison_table(const kalium_evaluation* const* evaluations, size_t count, char** out) {
  return guarded([&] {
    require(evaluations, "evaluations");
    std::vector<const kalium::EvalReport*> reports;
    for (size_t i = 0; i < count; ++i) {
      require(evaluations[i], "evaluation");
      reports.push_back(&evaluations[i]->report);
    }
    emit(out, kalium::comparison_table(reports));
  });
}

kalium_status kalium_train(const kalium_cohort* cohort, const kalium_train_config* config, kalium_model** out) {
  return guarded([&] {
    require(cohort, "cohort");
    require(config, "config");
    require(out, "output model");
    const auto features = parse_features(config->features);
    auto train_config = to_train_config(*config);
    for (const auto f : features) train_config.input_names.emplace_back(kalium::feature_name(f));
    const Eigen::MatrixXd x = kalium::design_matrix(cohort->samples, features);
    Eigen::VectorXd y(static_cast<Eigen::Index>(cohort->samples.size()));
    for (std::size_t i = 0; i < cohort->samples.size(); ++i) {
      y(static_cast<Eigen::Index>(i)) = cohort->samples[i].potassium_mm;
    }
    auto result = kalium::train(x, y, train_config);
    auto handle = std::make_unique<kalium_model>();
    handle->input_names = result.model.input_names();
    handle->model = std::move(result.model);
    *out = handle.release();
  });
}

kalium_status kalium_model_from_json(const char* json, kalium_model** out) {
  return guarded([&] {
    require(json, "model JSON");
    require(out, "output model");
    auto handle = std::make_unique<kalium_model>();
    handle->model = kalium::model_from_string(json);
    handle->input_names = handle->model.input_names();
    *out = handle.release();
  });
}

kalium_status kalium_model_load(const char* path, kalium_model** out) {
  return guarded([&] {
    require(path, "model path");
    require(out, "output model");
    std::ifstream in(path);
    if (!in) throw kalium::IoError(fmt::format("cannot open model file '{}': file not found", path));
    std::stringstream ss;
    ss << in.rdbuf();
    auto handle = std::make_unique<kalium_model>();
    handle->model = kalium::model_from_string(ss.str());
    handle->input_names = handle->model.input_names();
    *out = handle.release();
  });
}

void kalium_model_free(kalium_model* model) { delete model; }

kalium_status kalium_model_to_json(const kalium_model* model, char** out) {
  return guarded([&] { emit(out, dump(kalium::model_to_json(model_of(model)))); });
}

size_t kalium_model_input_count(const kalium_model* model) {
  return model != nullptr ? model->model.input_dim() : 0;
}

const char* kalium_model_input_name(const kalium_model* model, size_t index) {
  if (model == nullptr || index >= model->input_names.size()) return nullptr;
  return model->input_names[index].c_str();
}

size_t kalium_model_rule_count(const kalium_model* model) { return model != nullptr ? model->model.rule_count() : 0; }

kalium_status kalium_model_predict(const kalium_model* model, const double* inputs, size_t input_count,
                                   kalium_prediction* out) {
  return guarded([&] {
    require(inputs, "inputs");
    require(out, "output prediction");
    const auto inf = model_of(model).infer(std::span<const double>(inputs, input_count));
    out->estimate_mm = inf.estimate;
    out->label = static_cast<kalium_label>(kalium::classify_estimate(inf.estimate));
    out->zero_firing = inf.zero_firing ? 1 : 0;
  });
}

kalium_status kalium_model_trace_json(const kalium_model* model, const double* inputs, size_t input_count,
                                      char** out) {
  return guarded([&] {
    require(inputs, "inputs");
    const auto& m = model_of(model);
    const auto inf = m.infer(std::span<const double>(inputs, input_count));
    emit(out, dump(trace_with_label(m, inf)));
  });
}

kalium_status kalium_model_predict_csv(const kalium_model* model, const char* csv, char** out) {
  return guarded([&] {
    require(csv, "CSV text");
    const auto& m = model_of(model);
    std::istringstream in(csv);
    const auto rows = kalium::parse_numeric_csv(in, m.input_names());
    kalium::Json arr = kalium::Json::array();
    for (const auto& row : rows) {
      auto j = trace_with_label(m, m.infer(row));
      kalium::Json inputs;
      for (std::size_t d = 0; d < row.size(); ++d) inputs[m.inputs()[d].name] = row[d];
      arr.push_back(kalium::Json{{"inputs", inputs}, {"prediction", j}});
    }
    emit(out, dump(arr));
  });
}

}  // extern "C"
