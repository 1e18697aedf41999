#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace kalium {

enum class MfKind { Trapezoid, Gaussian };

/// Antecedent membership function. Trapezoids keep a <= b <= c <= d and
/// Gaussians keep sigma > 0; every constructor and `assign` re-establishes
/// those invariants.
class MembershipFunction {
 public:
  static constexpr std::size_t kMaxParams = 4;

  /// Throws ValidationError unless a <= b <= c <= d and all are finite.
  static MembershipFunction trapezoid(double a, double b, double c, double d);
  /// Throws ValidationError unless sigma > 0 and both are finite.
  static MembershipFunction gaussian(double center, double sigma);

  MfKind kind() const noexcept { return kind_; }
  std::span<const double> params() const noexcept { return {params_.data(), param_count()}; }
  std::size_t param_count() const noexcept { return kind_ == MfKind::Trapezoid ? 4 : 2; }

  /// Degree of membership in [0, 1].
  double degree(double x) const noexcept;

  /// Plateau midpoint for trapezoids, mean for Gaussians.
  double center() const noexcept;

  /// d(degree)/d(param) for each entry of params(). Trapezoid corners use
  /// one-sided derivatives on the open ramps and 0 at kinks and plateaus.
  std::array<double, kMaxParams> param_gradient(double x) const noexcept;

  /// Overwrite the parameters, then clip the trapezoid corners back into
  /// order or floor sigma at `sigma_floor`.
  void assign(std::span<const double> values, double sigma_floor);

  bool operator==(const MembershipFunction&) const = default;

 private:
  MembershipFunction(MfKind kind, std::array<double, kMaxParams> params) : kind_(kind), params_(params) {}

  MfKind kind_ = MfKind::Trapezoid;
  std::array<double, kMaxParams> params_{};
};

inline double eval_mf(const MembershipFunction& mf, double x) noexcept { return mf.degree(x); }

struct FuzzyTerm {
  std::string name;
  MembershipFunction mf;
};

/// One input dimension and the linguistic terms defined over it. Rules refer
/// to terms by index, so grid-partition rules share their antecedents.
struct InputVariable {
  std::string name;
  std::vector<FuzzyTerm> terms;
};

/// First-order rule: IF x1 is T1 AND ... THEN y = bias + coefficients . x
struct TskRule {
  std::vector<std::size_t> antecedents;  // term index per input dimension
  std::vector<double> coefficients;      // one per input dimension
  double bias = 0.0;

  double consequent(std::span<const double> x) const noexcept;
};

struct Inference {
  double estimate = 0.0;
  std::vector<double> firing;
  std::vector<double> normalized;
  /// Set when no rule fired; `estimate` then comes from `fallback_rule`.
  bool zero_firing = false;
  std::optional<std::size_t> fallback_rule;
};

/// Product t-norm TSK model. Immutable inference; training code mutates it
/// through the non-const accessors and is expected to keep it valid.
class TskModel {
 public:
  TskModel() = default;
  /// Throws ValidationError if the rule base is inconsistent with the inputs.
  TskModel(std::vector<InputVariable> inputs, std::vector<TskRule> rules);

  std::size_t input_dim() const noexcept { return inputs_.size(); }
  std::size_t rule_count() const noexcept { return rules_.size(); }
  std::vector<std::string> input_names() const;

  const std::vector<InputVariable>& inputs() const noexcept { return inputs_; }
  std::vector<InputVariable>& inputs() noexcept { return inputs_; }
  const std::vector<TskRule>& rules() const noexcept { return rules_; }
  std::vector<TskRule>& rules() noexcept { return rules_; }

  const MembershipFunction& antecedent(std::size_t rule, std::size_t dim) const {
    return inputs_[dim].terms[rules_[rule].antecedents[dim]].mf;
  }

  /// Throws ValidationError when x.size() != input_dim().
  Inference infer(std::span<const double> x) const;

  void validate() const;

 private:
  std::vector<InputVariable> inputs_;
  std::vector<TskRule> rules_;
};

inline Inference infer(const TskModel& model, std::span<const double> x) { return model.infer(x); }

/// Sum after sorting ascending, so the result does not depend on input order.
double ordered_sum(std::vector<double> values);

/// Conventional term names for small partitions ("Low", "Medium", "High", ...).
std::vector<std::string> term_labels(std::size_t count);

/// Equally spaced trapezoids over [lo, hi]. With spacing s = (hi - lo)/(n - 1)
/// term j has its plateau [c_j - s/4, c_j + s/4] around c_j = lo + j*s and
/// ramps of width s/2 on each side. Neighbours cross at 0.5, so inside
/// [lo, hi] the memberships sum to exactly 1 (the coverage floor).
std::vector<MembershipFunction> grid_partition_1d(double lo, double hi, std::size_t mfs);

std::vector<std::vector<MembershipFunction>> grid_partition(
    std::span<const std::pair<double, double>> input_ranges, std::size_t mfs_per_dim);

/// Cross-product rule base over the grid terms, zero consequents. The last
/// dimension varies fastest.
TskModel make_grid_model(std::span<const std::pair<double, double>> input_ranges, std::size_t mfs_per_dim,
                         std::vector<std::string> input_names);

}  // namespace kalium
