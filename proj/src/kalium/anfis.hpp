#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kalium/error.hpp"
#include "kalium/fcm.hpp"
#include "kalium/fuzzy.hpp"

namespace kalium {

enum class Variant { Conventional, FcmAnfis };

struct TrainConfig {
  std::size_t epochs = 200;
  double learning_rate = 0.01;
  Variant variant = Variant::FcmAnfis;
  std::size_t mfs_per_dim = 5;  // Conventional
  FcmConfig fcm{};              // FcmAnfis; fcm.clusters is the rule count
  std::size_t phase_split = 100;
  std::uint64_t seed = 42;
  std::vector<std::string> input_names;  // defaults to x1..xD

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_rmse;
  std::vector<double> validation_rmse;  // empty without a validation set
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

struct ConsequentFit {
  double sse = 0.0;
  double rmse = 0.0;
  bool regularized = false;  // design matrix was rank deficient
};

/// Least-squares consequents with the antecedents frozen. The design row of
/// sample i is [w_i1 * (1, x_i), ..., w_iR * (1, x_i)] with w the normalized
/// firing strengths (one-hot on the fallback rule for zero-firing samples).
/// Full-rank systems go through column-pivoted QR; rank-deficient ones get a
/// ridge term 1e-8 * trace(A'A)/p and are flagged.
ConsequentFit solve_consequents(TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

double sum_squared_error(const TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);
double rmse(const TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Antecedent parameters flattened input by input, term by term.
std::vector<double> antecedent_parameters(const TskModel& model);
void set_antecedent_parameters(TskModel& model, std::span<const double> values, std::span<const double> sigma_floors);

/// Analytic dE/dp for E = 1/2 sum (y_hat - y)^2, in antecedent_parameters
/// order. Zero-firing samples contribute nothing; their count is written to
/// `zero_firing` when given.
std::vector<double> antecedent_gradient(const TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        std::size_t* zero_firing = nullptr);

struct GradientStep {
  bool nonfinite = false;  // some gradient components were zeroed
  std::size_t zero_firing_samples = 0;
};

/// p <- p - lr * dE/dp, then trapezoids are clipped back into order and
/// Gaussian widths floored at 1e-6 of the feature range.
GradientStep antecedent_gradient_step(TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      double learning_rate);

struct ValidationSet {
  const Eigen::MatrixXd& x;
  const Eigen::VectorXd& y;
};

struct TrainResult {
  TskModel model;
  TrainHistory history;
  std::size_t regularized_solves = 0;
  bool nonfinite_gradient = false;
};

/// Hybrid learning. Conventional: grid-partition trapezoids over the
/// training range, then every epoch after the first takes a gradient step
/// on the antecedents before re-solving the consequents. FcmAnfis: the
/// first `phase_split` epochs hold the FCM-initialized Gaussian rule base
/// with its least-squares consequents; the remaining epochs alternate as
/// above. Throws TrainingDiverged if training RMSE exceeds 10x its first value.
TrainResult train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainConfig& config,
                  const ValidationSet* validation = nullptr);

struct Prediction {
  std::vector<double> estimates;
  std::vector<Inference> trace;
  std::size_t zero_firing = 0;
};

Prediction predict(const TskModel& model, const Eigen::MatrixXd& x);

}  // namespace kalium
