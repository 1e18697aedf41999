#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "kalium/fuzzy.hpp"

namespace kalium {

struct FcmConfig {
  std::size_t clusters = 3;
  double fuzziness = 2.0;  // m
  double tol = 1e-5;       // on max |delta U|
  std::size_t max_iter = 100;
  std::uint64_t seed = 42;

  void validate() const;
};

struct FcmResult {
  Eigen::MatrixXd centers;     // clusters x D
  Eigen::MatrixXd membership;  // n x clusters, rows sum to 1
  std::vector<double> objective_history;
  std::size_t iterations = 0;
  bool converged = false;
  double fuzziness = 2.0;
};

/// Called after every iteration with the iteration number (1-based), the
/// updated partition and the centers it was computed from.
using FcmObserver = std::function<void(std::size_t, const Eigen::MatrixXd&, const Eigen::MatrixXd&)>;

/// Seeded FCM: the initial centers are `clusters` distinct data rows drawn
/// with the config seed. Throws ValidationError when n <= c or the data has
/// fewer than c distinct points.
FcmResult fcm_cluster(const Eigen::MatrixXd& data, const FcmConfig& config, const FcmObserver& observer = {});

/// Same alternation starting from explicit centers.
FcmResult fcm_cluster_from(const Eigen::MatrixXd& data, const Eigen::MatrixXd& initial_centers,
                           const FcmConfig& config, const FcmObserver& observer = {});

/// Optimal partition for fixed centers. A point sitting on a center belongs
/// to it fully (split evenly if it sits on several).
Eigen::MatrixXd fcm_memberships(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centers, double fuzziness);

/// J = sum_ik u_ik^m ||x_i - v_k||^2
double fcm_objective(const Eigen::MatrixXd& data, const Eigen::MatrixXd& centers, const Eigen::MatrixXd& membership,
                     double fuzziness);

/// Floor applied to Gaussian widths: 1e-6 times the feature range (1e-6 for a
/// constant feature).
double sigma_floor(double feature_range);

/// One Gaussian per cluster per dimension: mean at the cluster center, sigma
/// the u^m-weighted spread of the data around it, floored by sigma_floor.
/// Indexed [cluster][dimension].
std::vector<std::vector<MembershipFunction>> clusters_to_mfs(const FcmResult& result, const Eigen::MatrixXd& data);

}  // namespace kalium
