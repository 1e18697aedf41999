#include "kalium/fuzzy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

#include "kalium/error.hpp"

namespace kalium {

MembershipFunction MembershipFunction::trapezoid(double a, double b, double c, double d) {
  if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d))) {
    throw ValidationError("trapezoid parameters must be finite");
  }
  if (!(a <= b && b <= c && c <= d)) {
    throw ValidationError(fmt::format("trapezoid requires a <= b <= c <= d, got ({}, {}, {}, {})", a, b, c, d));
  }
  return MembershipFunction(MfKind::Trapezoid, {a, b, c, d});
}

MembershipFunction MembershipFunction::gaussian(double center, double sigma) {
  if (!std::isfinite(center) || !std::isfinite(sigma) || sigma <= 0.0) {
    throw ValidationError(fmt::format("gaussian requires finite center and sigma > 0, got ({}, {})", center, sigma));
  }
  return MembershipFunction(MfKind::Gaussian, {center, sigma, 0.0, 0.0});
}

double MembershipFunction::degree(double x) const noexcept {
  if (kind_ == MfKind::Gaussian) {
    const double z = (x - params_[0]) / params_[1];
    return std::exp(-0.5 * z * z);
  }
  const auto [a, b, c, d] = params_;
  if (x >= b && x <= c) return 1.0;
  if (x <= a || x >= d) return 0.0;
  const double v = x < b ? (x - a) / (b - a) : (d - x) / (d - c);
  return std::clamp(v, 0.0, 1.0);
}

double MembershipFunction::center() const noexcept {
  return kind_ == MfKind::Gaussian ? params_[0] : 0.5 * (params_[1] + params_[2]);
}

std::array<double, MembershipFunction::kMaxParams> MembershipFunction::param_gradient(double x) const noexcept {
  std::array<double, kMaxParams> g{};
  if (kind_ == MfKind::Gaussian) {
    const double mu = params_[0];
    const double sigma = params_[1];
    const double m = degree(x);
    const double dx = x - mu;
    g[0] = m * dx / (sigma * sigma);
    g[1] = m * dx * dx / (sigma * sigma * sigma);
    return g;
  }
  const auto [a, b, c, d] = params_;
  if (x > a && x < b) {
    const double w2 = (b - a) * (b - a);
    g[0] = (x - b) / w2;
    g[1] = -(x - a) / w2;
  } else if (x > c && x < d) {
    const double w2 = (d - c) * (d - c);
    g[2] = (d - x) / w2;
    g[3] = (x - c) / w2;
  }
  return g;
}

void MembershipFunction::assign(std::span<const double> values, double sigma_floor) {
  if (values.size() != param_count()) {
    throw ValidationError(fmt::format("expected {} membership parameters, got {}", param_count(), values.size()));
  }
  std::copy(values.begin(), values.end(), params_.begin());
  if (kind_ == MfKind::Trapezoid) {
    params_[1] = std::max(params_[1], params_[0]);
    params_[2] = std::max(params_[2], params_[1]);
    params_[3] = std::max(params_[3], params_[2]);
  } else {
    const double floor = sigma_floor > 0.0 ? sigma_floor : std::numeric_limits<double>::min();
    params_[1] = std::max(params_[1], floor);
  }
}

double TskRule::consequent(std::span<const double> x) const noexcept {
  double v = bias;
  for (std::size_t d = 0; d < coefficients.size(); ++d) v += coefficients[d] * x[d];
  return v;
}

double ordered_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return std::accumulate(values.begin(), values.end(), 0.0);
}

TskModel::TskModel(std::vector<InputVariable> inputs, std::vector<TskRule> rules)
    : inputs_(std::move(inputs)), rules_(std::move(rules)) {
  validate();
}

std::vector<std::string> TskModel::input_names() const {
  std::vector<std::string> names;
  names.reserve(inputs_.size());
  for (const auto& in : inputs_) names.push_back(in.name);
  return names;
}

void TskModel::validate() const {
  if (inputs_.empty()) throw ValidationError("model needs at least one input");
  if (rules_.empty()) throw ValidationError("model needs at least one rule");
  for (const auto& in : inputs_) {
    if (in.terms.empty()) throw ValidationError(fmt::format("input '{}' has no terms", in.name));
  }
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    const auto& rule = rules_[r];
    if (rule.antecedents.size() != inputs_.size() || rule.coefficients.size() != inputs_.size()) {
      throw ValidationError(fmt::format("rule {} does not match the model input dimension {}", r, inputs_.size()));
    }
    for (std::size_t d = 0; d < inputs_.size(); ++d) {
      if (rule.antecedents[d] >= inputs_[d].terms.size()) {
        throw ValidationError(fmt::format("rule {} references missing term {} of input '{}'", r,
                                          rule.antecedents[d], inputs_[d].name));
      }
    }
  }
}

Inference TskModel::infer(std::span<const double> x) const {
  const std::size_t dim = inputs_.size();
  if (x.size() != dim) {
    throw ValidationError(fmt::format("model expects {} inputs, got {}", dim, x.size()));
  }
  const std::size_t n_rules = rules_.size();

  Inference out;
  out.firing.resize(n_rules);
  std::vector<double> consequents(n_rules);
  for (std::size_t r = 0; r < n_rules; ++r) {
    double w = 1.0;
    for (std::size_t d = 0; d < dim; ++d) w *= antecedent(r, d).degree(x[d]);
    out.firing[r] = w;
    consequents[r] = rules_[r].consequent(x);
  }

  const double total = ordered_sum(out.firing);
  out.normalized.assign(n_rules, 0.0);
  if (total > 0.0) {
    std::vector<double> weighted(n_rules);
    for (std::size_t r = 0; r < n_rules; ++r) {
      out.normalized[r] = out.firing[r] / total;
      weighted[r] = out.firing[r] * consequents[r];
    }
    out.estimate = ordered_sum(std::move(weighted)) / total;
    return out;
  }

  // Nothing fired: fall back to the rule whose antecedent centers are nearest.
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < n_rules; ++r) {
    double dist = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double delta = x[d] - antecedent(r, d).center();
      dist += delta * delta;
    }
    if (dist < best_dist) {
      best_dist = dist;
      best = r;
    }
  }
  out.zero_firing = true;
  out.fallback_rule = best;
  out.estimate = consequents[best];
  return out;
}

std::vector<std::string> term_labels(std::size_t count) {
  switch (count) {
    case 2: return {"Low", "High"};
    case 3: return {"Low", "Medium", "High"};
    case 5: return {"VeryLow", "Low", "Medium", "High", "VeryHigh"};
    default: break;
  }
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < count; ++i) labels.push_back(fmt::format("mf{}", i + 1));
  return labels;
}

std::vector<MembershipFunction> grid_partition_1d(double lo, double hi, std::size_t mfs) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo < hi)) {
    throw ValidationError(fmt::format("grid partition needs a range with min < max, got [{}, {}]", lo, hi));
  }
  if (mfs < 2) throw ValidationError("grid partition needs at least 2 membership functions per input");
  const double step = (hi - lo) / static_cast<double>(mfs - 1);
  std::vector<MembershipFunction> out;
  out.reserve(mfs);
  for (std::size_t j = 0; j < mfs; ++j) {
    const double c = lo + static_cast<double>(j) * step;
    out.push_back(MembershipFunction::trapezoid(c - 0.75 * step, c - 0.25 * step, c + 0.25 * step, c + 0.75 * step));
  }
  return out;
}

std::vector<std::vector<MembershipFunction>> grid_partition(std::span<const std::pair<double, double>> input_ranges,
                                                            std::size_t mfs_per_dim) {
  if (input_ranges.empty()) throw ValidationError("grid partition needs at least one input range");
  std::vector<std::vector<MembershipFunction>> out;
  for (const auto& [lo, hi] : input_ranges) out.push_back(grid_partition_1d(lo, hi, mfs_per_dim));
  return out;
}

TskModel make_grid_model(std::span<const std::pair<double, double>> input_ranges, std::size_t mfs_per_dim,
                         std::vector<std::string> input_names) {
  if (input_names.size() != input_ranges.size()) {
    throw ValidationError("grid model needs one name per input range");
  }
  const auto grid = grid_partition(input_ranges, mfs_per_dim);
  const auto labels = term_labels(mfs_per_dim);
  const std::size_t dim = grid.size();

  std::vector<InputVariable> inputs;
  for (std::size_t d = 0; d < dim; ++d) {
    InputVariable in{std::move(input_names[d]), {}};
    for (std::size_t j = 0; j < mfs_per_dim; ++j) in.terms.push_back({labels[j], grid[d][j]});
    inputs.push_back(std::move(in));
  }

  std::size_t n_rules = 1;
  for (std::size_t d = 0; d < dim; ++d) n_rules *= mfs_per_dim;
  std::vector<TskRule> rules;
  rules.reserve(n_rules);
  for (std::size_t r = 0; r < n_rules; ++r) {
    TskRule rule;
    rule.antecedents.assign(dim, 0);
    rule.coefficients.assign(dim, 0.0);
    std::size_t rest = r;
    for (std::size_t d = dim; d-- > 0;) {
      rule.antecedents[d] = rest % mfs_per_dim;
      rest /= mfs_per_dim;
    }
    rules.push_back(std::move(rule));
  }
  return TskModel(std::move(inputs), std::move(rules));
}

}  // namespace kalium
