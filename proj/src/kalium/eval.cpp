#include "kalium/eval.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "kalium/error.hpp"
#include "kalium/stats.hpp"

namespace kalium {
namespace {

MeanSd mean_sd(const std::vector<double>& v) {
  MeanSd out;
  const auto n = static_cast<double>(v.size());
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() >= 2) {
    double ss = 0.0;
    for (const double x : v) ss += (x - out.mean) * (x - out.mean);
    out.sd = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

void check_pair(std::span<const double> actual, std::span<const double> estimate) {
  if (actual.size() != estimate.size()) throw ValidationError("actual and estimated values differ in length");
  if (actual.empty()) throw ValidationError("metrics need at least one sample");
}

}  // namespace

std::vector<std::size_t> FoldAssignment::fold_sizes() const {
  std::vector<std::size_t> sizes(k, 0);
  for (const std::size_t f : fold) ++sizes[f];
  return sizes;
}

FoldAssignment kfold(const std::vector<KLabel>& labels, std::size_t k, std::uint64_t seed, bool stratified) {
  const std::size_t n = labels.size();
  if (k < 2) throw ValidationError("k-fold needs k >= 2");
  if (n < k) throw ValidationError(fmt::format("k-fold needs at least k = {} samples, got {}", k, n));

  FoldAssignment out;
  out.k = k;
  out.seed = seed;
  out.stratified = stratified;
  out.fold.assign(n, 0);

  std::mt19937_64 rng(seed);
  std::vector<std::vector<std::size_t>> strata;
  if (stratified) {
    strata.resize(kLabelCount);
    for (std::size_t i = 0; i < n; ++i) strata[static_cast<std::size_t>(labels[i])].push_back(i);
    for (std::size_t c = 0; c < kLabelCount; ++c) {
      if (!strata[c].empty() && strata[c].size() < k) {
        out.warnings.push_back(fmt::format("class '{}' has {} samples for {} folds; some folds lack it",
                                           label_name(static_cast<KLabel>(c)), strata[c].size(), k));
      }
    }
  } else {
    strata.emplace_back(n);
    std::iota(strata[0].begin(), strata[0].end(), std::size_t{0});
  }

  std::size_t counter = 0;
  for (auto& stratum : strata) {
    std::shuffle(stratum.begin(), stratum.end(), rng);
    for (const std::size_t i : stratum) out.fold[i] = counter++ % k;
  }
  return out;
}

double mape(std::span<const double> actual, std::span<const double> estimate) {
  check_pair(actual, estimate);
  double sum = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) throw ValidationError("MAPE is undefined for a zero actual value");
    sum += std::abs((estimate[i] - actual[i]) / actual[i]);
  }
  return sum / static_cast<double>(actual.size()) * 100.0;
}

ErrorStats error_stats(std::span<const double> actual, std::span<const double> estimate) {
  check_pair(actual, estimate);
  std::vector<double> err(actual.size());
  std::vector<double> abs_err(actual.size());
  for (std::size_t i = 0; i < actual.size(); ++i) {
    err[i] = estimate[i] - actual[i];
    abs_err[i] = std::abs(err[i]);
  }
  return {mean_sd(err), mean_sd(abs_err)};
}

KLabel classify_estimate(double k_mm) {
  if (!std::isfinite(k_mm)) throw ValidationError("potassium estimate must be finite");
  if (k_mm < 3.5) return KLabel::Hypo;
  if (k_mm <= 5.0) return KLabel::Normal;
  return KLabel::Hyper;
}

ClassMetrics confusion_and_metrics(const std::vector<KLabel>& actual, const std::vector<KLabel>& predicted) {
  if (actual.size() != predicted.size()) throw ValidationError("actual and predicted labels differ in length");
  if (actual.empty()) throw ValidationError("confusion matrix of an empty sample");
  ClassMetrics out;
  out.total = actual.size();
  for (std::size_t i = 0; i < actual.size(); ++i) {
    ++out.confusion[static_cast<std::size_t>(actual[i])][static_cast<std::size_t>(predicted[i])];
  }
  std::size_t trace = 0;
  for (std::size_t c = 0; c < kLabelCount; ++c) {
    trace += out.confusion[c][c];
    std::size_t row = 0;
    std::size_t col = 0;
    for (std::size_t j = 0; j < kLabelCount; ++j) {
      row += out.confusion[c][j];
      col += out.confusion[j][c];
    }
    const std::size_t tp = out.confusion[c][c];
    const std::size_t fn = row - tp;
    const std::size_t fp = col - tp;
    const std::size_t tn = out.total - tp - fn - fp;
    if (tp + fn > 0) out.sensitivity[c] = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (tn + fp > 0) out.specificity[c] = static_cast<double>(tn) / static_cast<double>(tn + fp);
  }
  out.accuracy = static_cast<double>(trace) / static_cast<double>(out.total);
  return out;
}

RegressionMetrics regression_metrics(std::span<const double> actual, std::span<const double> estimate) {
  RegressionMetrics m;
  m.n = actual.size();
  m.errors = error_stats(actual, estimate);
  m.mape = mape(actual, estimate);
  if (actual.size() >= 2) m.pearson_r = pearson_r(estimate, actual);
  return m;
}

Eigen::MatrixXd design_matrix(const std::vector<CohortSample>& samples, const std::vector<Feature>& features) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(features.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    for (std::size_t d = 0; d < features.size(); ++d) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = samples[i][features[d]];
    }
  }
  return x;
}

EvalReport cross_validate(const std::vector<CohortSample>& samples, const std::vector<Feature>& features,
                          const FoldAssignment& assignment, const TrainConfig& config, bool parallel) {
  if (features.empty()) throw ValidationError("cross-validation needs at least one input feature");
  if (assignment.fold.size() != samples.size()) throw ValidationError("fold assignment does not match the cohort");

  EvalReport report;
  report.variant = config.variant;
  report.assignment = assignment;
  for (const auto f : features) report.inputs.emplace_back(feature_name(f));

  TrainConfig fold_config = config;
  fold_config.input_names = report.inputs;

  const Eigen::MatrixXd x = design_matrix(samples, features);
  Eigen::VectorXd y(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) y(static_cast<Eigen::Index>(i)) = samples[i].potassium_mm;

  auto run_fold = [&](std::size_t fold) {
    std::vector<Eigen::Index> train_idx;
    std::vector<Eigen::Index> test_idx;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      (assignment.fold[i] == fold ? test_idx : train_idx).push_back(static_cast<Eigen::Index>(i));
    }
    const Eigen::MatrixXd x_train = x(train_idx, Eigen::all);
    const Eigen::VectorXd y_train = y(train_idx);
    const Eigen::MatrixXd x_test = x(test_idx, Eigen::all);
    const Eigen::VectorXd y_test = y(test_idx);

    FoldReport fr;
    fr.fold = fold;
    fr.n_train = train_idx.size();
    fr.n_test = test_idx.size();
    if (test_idx.empty()) throw ValidationError(fmt::format("fold {} is empty", fold));
    TrainResult trained;
    const ValidationSet held_out{x_test, y_test};
    try {
      trained = train(x_train, y_train, fold_config, &held_out);
    } catch (const TrainingDiverged& e) {
      throw TrainingDiverged(fmt::format("fold {}: {}", fold, e.what()));
    } catch (const ValidationError& e) {
      throw ValidationError(fmt::format("fold {}: {}", fold, e.what()));
    }
    const Prediction pred = predict(trained.model, x_test);
    std::vector<double> actual(y_test.data(), y_test.data() + y_test.size());
    fr.metrics = regression_metrics(actual, pred.estimates);
    fr.zero_firing = pred.zero_firing;
    fr.regularized_solves = trained.regularized_solves;
    fr.model = std::move(trained.model);
    fr.history = std::move(trained.history);
    return std::make_pair(std::move(fr), std::make_pair(std::move(test_idx), pred.estimates));
  };

  using FoldOutput = decltype(run_fold(0));
  std::vector<FoldOutput> outputs;
  if (parallel) {
    std::vector<std::future<FoldOutput>> futures;
    for (std::size_t f = 0; f < assignment.k; ++f) futures.push_back(std::async(std::launch::async, run_fold, f));
    for (auto& fut : futures) outputs.push_back(fut.get());
  } else {
    for (std::size_t f = 0; f < assignment.k; ++f) outputs.push_back(run_fold(f));
  }

  report.actual.assign(y.data(), y.data() + y.size());
  report.estimate.assign(samples.size(), 0.0);
  for (auto& [fold_report, predictions] : outputs) {
    const auto& [indices, estimates] = predictions;
    for (std::size_t j = 0; j < indices.size(); ++j) report.estimate[static_cast<std::size_t>(indices[j])] = estimates[j];
    report.folds.push_back(std::move(fold_report));
  }
  report.pooled = regression_metrics(report.actual, report.estimate);

  std::vector<KLabel> actual_labels;
  std::vector<KLabel> predicted_labels;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    actual_labels.push_back(samples[i].label);
    predicted_labels.push_back(classify_estimate(report.estimate[i]));
  }
  report.classification = confusion_and_metrics(actual_labels, predicted_labels);
  return report;
}

}  // namespace kalium
