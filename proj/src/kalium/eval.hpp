#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kalium/anfis.hpp"
#include "kalium/pipeline.hpp"

namespace kalium {

struct FoldAssignment {
  std::vector<std::size_t> fold;  // per sample, 0..k-1
  std::size_t k = 10;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::vector<std::string> warnings;

  std::vector<std::size_t> fold_sizes() const;
};

/// Seeded shuffle, then round-robin. The stratified variant walks the
/// classes in label order with one counter shared across classes, so both
/// the overall and the per-class fold counts differ by at most one.
FoldAssignment kfold(const std::vector<KLabel>& labels, std::size_t k = 10, std::uint64_t seed = 42,
                     bool stratified = true);

/// Mean absolute percentage error, in percent.
double mape(std::span<const double> actual, std::span<const double> estimate);

struct MeanSd {
  double mean = 0.0;
  std::optional<double> sd;  // sample (n - 1) convention; missing for n < 2
};

struct ErrorStats {
  MeanSd error;      // estimate - actual
  MeanSd abs_error;
};

ErrorStats error_stats(std::span<const double> actual, std::span<const double> estimate);

/// Same thresholds as label_potassium, without the positivity precondition.
KLabel classify_estimate(double k_mm);

using ConfusionMatrix = std::array<std::array<std::size_t, kLabelCount>, kLabelCount>;  // [actual][predicted]

struct ClassMetrics {
  ConfusionMatrix confusion{};
  std::array<std::optional<double>, kLabelCount> sensitivity{};
  std::array<std::optional<double>, kLabelCount> specificity{};
  double accuracy = 0.0;
  std::size_t total = 0;
};

ClassMetrics confusion_and_metrics(const std::vector<KLabel>& actual, const std::vector<KLabel>& predicted);

struct RegressionMetrics {
  std::size_t n = 0;
  ErrorStats errors;
  double mape = 0.0;
  std::optional<double> pearson_r;
};

RegressionMetrics regression_metrics(std::span<const double> actual, std::span<const double> estimate);

struct FoldReport {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  RegressionMetrics metrics;
  TskModel model;
  TrainHistory history;
  std::size_t zero_firing = 0;
  std::size_t regularized_solves = 0;
};

struct EvalReport {
  Variant variant = Variant::FcmAnfis;
  std::vector<std::string> inputs;
  FoldAssignment assignment;
  std::vector<FoldReport> folds;
  std::vector<double> actual;     // by sample index
  std::vector<double> estimate;   // out-of-fold, by sample index
  RegressionMetrics pooled;
  ClassMetrics classification;
};

/// Feature columns of the cohort, in the order given.
Eigen::MatrixXd design_matrix(const std::vector<CohortSample>& samples, const std::vector<Feature>& features);

/// Train on k-1 folds, predict the held-out one, pool the out-of-fold
/// estimates. Folds train concurrently when `parallel` is set; the report is
/// assembled in fold order either way. A diverging fold is reported as
/// TrainingDiverged naming the fold.
EvalReport cross_validate(const std::vector<CohortSample>& samples, const std::vector<Feature>& features,
                          const FoldAssignment& assignment, const TrainConfig& config, bool parallel = true);

}  // namespace kalium
