#include "kalium/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "kalium/error.hpp"

namespace kalium {
namespace {

constexpr int kMaxGammaIterations = 1000;
constexpr double kGammaEps = 1e-16;

// P(a, x) by its power series; converges quickly for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxGammaIterations; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kGammaEps) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Q(a, x) by the Legendre continued fraction (modified Lentz), x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = std::numeric_limits<double>::min() / kGammaEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxGammaIterations; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kGammaEps) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

std::vector<double> rank_midties(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) hold ranks i+1..j+1
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid;
    i = j + 1;
  }
  return ranks;
}

KwResult kruskal_wallis(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) throw ValidationError("Kruskal-Wallis needs at least two groups");
  std::vector<double> pooled;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw ValidationError(fmt::format("Kruskal-Wallis group {} is empty", g));
    for (const double v : groups[g]) {
      if (!std::isfinite(v)) throw ValidationError("Kruskal-Wallis values must be finite");
    }
    pooled.insert(pooled.end(), groups[g].begin(), groups[g].end());
  }
  const auto n_total = static_cast<double>(pooled.size());
  if (pooled.size() < 3) throw ValidationError("Kruskal-Wallis needs at least 3 observations");

  const auto ranks = rank_midties(pooled);
  const double mean_rank = 0.5 * (n_total + 1.0);
  double between = 0.0;
  std::size_t offset = 0;
  for (const auto& group : groups) {
    double sum = 0.0;
    for (std::size_t k = 0; k < group.size(); ++k) sum += ranks[offset + k];
    const auto size = static_cast<double>(group.size());
    const double dev = sum / size - mean_rank;
    between += size * dev * dev;
    offset += group.size();
  }

  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    const auto t = static_cast<double>(j - i);
    ties += t * t * t - t;
    i = j;
  }

  KwResult out;
  out.df = groups.size() - 1;
  out.tie_correction = 1.0 - ties / (n_total * n_total * n_total - n_total);
  if (out.tie_correction <= 0.0) {
    out.h = 0.0;
    out.p = 1.0;
    return out;
  }
  out.h = 12.0 / (n_total * (n_total + 1.0)) * between / out.tie_correction;
  out.p = chi2_sf(out.h, out.df);
  return out;
}

double gamma_q(double a, double x) {
  if (!(a > 0.0)) throw ValidationError("incomplete gamma needs a > 0");
  if (!(x >= 0.0)) throw ValidationError("incomplete gamma needs x >= 0");
  if (x == 0.0) return 1.0;
  if (std::isinf(x)) return 0.0;
  if (x < a + 1.0) return std::clamp(1.0 - gamma_p_series(a, x), 0.0, 1.0);
  return std::clamp(gamma_q_fraction(a, x), 0.0, 1.0);
}

double chi2_sf(double x, std::size_t df) {
  if (df == 0) throw ValidationError("chi-square needs at least one degree of freedom");
  if (!(x >= 0.0)) throw ValidationError(fmt::format("chi-square statistic must be >= 0, got {}", x));
  return gamma_q(0.5 * static_cast<double>(df), 0.5 * x);
}

std::optional<double> pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson_r needs equal-length samples");
  if (x.size() < 2) throw ValidationError("pearson_r needs at least 2 points");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

BoxStats boxplot_stats(std::span<const double> values, NotchMethod notch) {
  if (values.empty()) throw ValidationError("boxplot needs at least one value");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());

  BoxStats box;
  box.n = sorted.size();
  box.q1 = quantile_sorted(sorted, 0.25);
  box.median = quantile_sorted(sorted, 0.5);
  box.q3 = quantile_sorted(sorted, 0.75);
  box.iqr = box.q3 - box.q1;

  const double lo_fence = box.q1 - 1.5 * box.iqr;
  const double hi_fence = box.q3 + 1.5 * box.iqr;
  box.whisker_low = box.q1;
  box.whisker_high = box.q3;
  for (const double v : sorted) {
    if (v >= lo_fence) {
      box.whisker_low = std::min(v, box.q1);
      break;
    }
  }
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if (*it <= hi_fence) {
      box.whisker_high = std::max(*it, box.q3);
      break;
    }
  }
  for (const double v : sorted) {
    if (v < lo_fence || v > hi_fence) box.outliers.push_back(v);
  }

  const double half = notch == NotchMethod::McGill ? 1.57 * box.iqr / std::sqrt(static_cast<double>(box.n)) : 0.0;
  box.ci95_low = box.median - half;
  box.ci95_high = box.median + half;
  return box;
}

}  // namespace kalium
