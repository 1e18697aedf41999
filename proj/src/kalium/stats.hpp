#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace kalium {

/// Ascending ranks 1..n; tied values share the mean of their rank span.
std::vector<double> rank_midties(std::span<const double> values);

struct KwResult {
  double h = 0.0;  // reported as "Chi-square value" in the feature report
  std::size_t df = 0;
  double p = 1.0;
  double tie_correction = 1.0;  // 1 - sum(t^3 - t)/(N^3 - N)
};

/// Kruskal-Wallis H with tie correction, p from the chi-square upper tail
/// with k - 1 degrees of freedom. All-tied data gives H = 0, p = 1.
KwResult kruskal_wallis(const std::vector<std::vector<double>>& groups);

/// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);

/// Upper tail of the chi-square distribution.
double chi2_sf(double x, std::size_t df);

/// Sample correlation; nullopt when either side has zero variance.
std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y);

/// Linear interpolation between order statistics ("type 7"). `sorted` must be
/// ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double q);

enum class NotchMethod { McGill, None };

struct BoxStats {
  std::size_t n = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  std::vector<double> outliers;
};

/// Tukey box: whiskers reach the most extreme points within 1.5 IQR of the
/// quartiles; McGill notches are median +/- 1.57 IQR / sqrt(n).
BoxStats boxplot_stats(std::span<const double> values, NotchMethod notch = NotchMethod::McGill);

}  // namespace kalium
