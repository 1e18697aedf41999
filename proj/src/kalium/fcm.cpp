#include "kalium/fcm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "kalium/error.hpp"

namespace kalium {
namespace {

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& data) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) rows[static_cast<std::size_t>(i)].push_back(data(i, j));
  }
  return rows;
}

std::size_t distinct_rows(const Eigen::MatrixXd& data) {
  auto rows = rows_of(data);
  std::sort(rows.begin(), rows.end());
  return static_cast<std::size_t>(std::unique(rows.begin(), rows.end()) - rows.begin());
}

void check_data(const Eigen::MatrixXd& data, std::size_t clusters) {
  const auto n = static_cast<std::size_t>(data.rows());
  if (data.cols() < 1) throw ValidationError("FCM needs at least one feature column");
  if (!data.allFinite()) throw ValidationError("FCM data contains non-finite values");
  if (n <= clusters) {
    throw ValidationError(fmt::format("FCM needs more points than clusters (n = {}, c = {})", n, clusters));
  }
  const std::size_t distinct = distinct_rows(data);
  if (distinct == 1) throw ValidationError("FCM data points are all identical");
  if (distinct < clusters) {
    throw ValidationError(
        fmt::format("FCM needs at least {} distinct points, data has {}", clusters, distinct));
  }
}

Eigen::MatrixXd update_centers(const Eigen::MatrixXd& data, const Eigen::MatrixXd& membership,
                               const Eigen::MatrixXd& previous, double fuzziness) {
  Eigen::MatrixXd centers = previous;
  const Eigen::MatrixXd weights = membership.array().pow(fuzziness).matrix();
  for (Eigen::Index k = 0; k < membership.cols(); ++k) {
    const double total = weights.col(k).sum();
    if (total > 0.0) centers.row(k) = (weights.col(k).transpose() * data) / total;
  }
  return centers;
}

}  // namespace

void FcmConfig::validate() const {
  if (clusters < 2) throw ValidationError("FCM cluster count must be at least 2");
  if (!(fuzziness > 1.0) || !std::isfinite(fuzziness)) throw ValidationError("FCM fuzziness exponent must be > 1");
  if (!(tol > 0.0)) throw ValidationError("FCM tolerance must be > 0");
  if (max_iter < 1) throw ValidationError("FCM max_iter must be positive");
}

Eigen::MatrixXd fcm_memberships(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centers, double fuzziness) {
  const Eigen::Index n = data.rows();
  const Eigen::Index c = centers.rows();
  const double exponent = 2.0 / (fuzziness - 1.0);
  Eigen::MatrixXd u(n, c);
  Eigen::VectorXd dist(c);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < c; ++k) dist(k) = (data.row(i) - centers.row(k)).norm();
    const auto on_center = (dist.array() == 0.0).count();
    if (on_center > 0) {
      for (Eigen::Index k = 0; k < c; ++k) u(i, k) = dist(k) == 0.0 ? 1.0 / static_cast<double>(on_center) : 0.0;
      continue;
    }
    // (d_min / d_k)^(2/(m-1)) stays in (0, 1] and avoids overflow for tiny distances.
    const double dmin = dist.minCoeff();
    double total = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) {
      u(i, k) = std::pow(dmin / dist(k), exponent);
      total += u(i, k);
    }
    u.row(i) /= total;
  }
  return u;
}

double fcm_objective(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centers, const Eigen::MatrixXd& membership,
                     double fuzziness) {
  double j = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index k = 0; k < centers.rows(); ++k) {
      j += std::pow(membership(i, k), fuzziness) * (data.row(i) - centers.row(k)).squaredNorm();
    }
  }
  return j;
}

FcmResult fcm_cluster_from(const Eigen::MatrixXd& data, const Eigen::MatrixXd& initial_centers,
                           const FcmConfig& config, const FcmObserver& observer) {
  config.validate();
  check_data(data, config.clusters);
  if (initial_centers.rows() != static_cast<Eigen::Index>(config.clusters) || initial_centers.cols() != data.cols()) {
    throw ValidationError("FCM initial centers do not match cluster count and data dimension");
  }

  FcmResult result;
  result.fuzziness = config.fuzziness;
  result.centers = initial_centers;
  result.membership = fcm_memberships(data, result.centers, config.fuzziness);

  for (std::size_t iter = 1; iter <= config.max_iter; ++iter) {
    result.centers = update_centers(data, result.membership, result.centers, config.fuzziness);
    Eigen::MatrixXd next = fcm_memberships(data, result.centers, config.fuzziness);
    const double change = (next - result.membership).cwiseAbs().maxCoeff();
    result.membership = std::move(next);
    result.objective_history.push_back(fcm_objective(data, result.centers, result.membership, config.fuzziness));
    result.iterations = iter;
    if (observer) observer(iter, result.membership, result.centers);
    if (change < config.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

FcmResult fcm_cluster(const Eigen::MatrixXd& data, const FcmConfig& config, const FcmObserver& observer) {
  config.validate();
  check_data(data, config.clusters);

  std::vector<std::size_t> order(static_cast<std::size_t>(data.rows()));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);
  std::shuffle(order.begin(), order.end(), rng);

  Eigen::MatrixXd centers(static_cast<Eigen::Index>(config.clusters), data.cols());
  Eigen::Index picked = 0;
  for (const std::size_t idx : order) {
    const auto row = data.row(static_cast<Eigen::Index>(idx));
    bool duplicate = false;
    for (Eigen::Index k = 0; k < picked && !duplicate; ++k) duplicate = centers.row(k) == row;
    if (duplicate) continue;
    centers.row(picked++) = row;
    if (picked == centers.rows()) break;
  }
  return fcm_cluster_from(data, centers, config, observer);
}

double sigma_floor(double feature_range) { return feature_range > 0.0 ? 1e-6 * feature_range : 1e-6; }

std::vector<std::vector<MembershipFunction>> clusters_to_mfs(const FcmResult& result, const Eigen::MatrixXd& data) {
  const Eigen::Index c = result.centers.rows();
  const Eigen::Index dim = result.centers.cols();
  if (c < 1 || dim != data.cols() || result.membership.rows() != data.rows() || result.membership.cols() != c) {
    throw ValidationError("FCM result does not match the data it is applied to");
  }
  const Eigen::MatrixXd weights = result.membership.array().pow(result.fuzziness).matrix();
  std::vector<std::vector<MembershipFunction>> out(static_cast<std::size_t>(c));
  for (Eigen::Index d = 0; d < dim; ++d) {
    const double floor = sigma_floor(data.col(d).maxCoeff() - data.col(d).minCoeff());
    for (Eigen::Index k = 0; k < c; ++k) {
      const double mu = result.centers(k, d);
      const double total = weights.col(k).sum();
      double sigma = 0.0;
      if (total > 0.0) {
        const double spread = (weights.col(k).array() * (data.col(d).array() - mu).square()).sum();
        sigma = std::sqrt(spread / total);
      }
      out[static_cast<std::size_t>(k)].push_back(MembershipFunction::gaussian(mu, std::max(sigma, floor)));
    }
  }
  return out;
}

}  // namespace kalium
