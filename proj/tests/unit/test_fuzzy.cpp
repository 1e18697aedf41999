#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "kalium/error.hpp"
#include "kalium/fuzzy.hpp"

using namespace kalium;

namespace {

// [K+] = -0.0501 * T axis + 6.9810
TskModel single_rule_model(const MembershipFunction& mf) {
  InputVariable in{"t_axis_deg", {{"Low", mf}}};
  TskRule rule{{0}, {-0.0501}, 6.9810};
  return TskModel({in}, {rule});
}

MembershipFunction random_mf(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  if (rng() % 2 == 0) {
    std::array<double, 4> p{u(rng), u(rng), u(rng), u(rng)};
    std::sort(p.begin(), p.end());
    if (rng() % 4 == 0) p[1] = p[0];  // degenerate ramps now and then
    if (rng() % 4 == 0) p[3] = p[2];
    return MembershipFunction::trapezoid(p[0], p[1], p[2], p[3]);
  }
  return MembershipFunction::gaussian(u(rng), 0.01 + std::abs(u(rng)));
}

TskModel random_model(std::mt19937_64& rng, std::size_t dim, std::size_t rules) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<InputVariable> inputs(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    inputs[d].name = "x" + std::to_string(d);
    for (std::size_t r = 0; r < rules; ++r) {
      inputs[d].terms.push_back({"t" + std::to_string(r), MembershipFunction::gaussian(40.0 * u(rng), 5.0 + 10.0 * std::abs(u(rng)))});
    }
  }
  std::vector<TskRule> rs;
  for (std::size_t r = 0; r < rules; ++r) {
    TskRule rule;
    rule.antecedents.assign(dim, r);
    for (std::size_t d = 0; d < dim; ++d) rule.coefficients.push_back(u(rng));
    rule.bias = 5.0 * u(rng);
    rs.push_back(rule);
  }
  return TskModel(inputs, rs);
}

}  // namespace

TEST_CASE("trapezoid evaluation") {
  const auto mf = MembershipFunction::trapezoid(0, 1, 2, 3);
  CHECK(eval_mf(mf, 1.5) == 1.0);
  CHECK(eval_mf(mf, 0.5) == doctest::Approx(0.5));
  CHECK(eval_mf(mf, 2.5) == doctest::Approx(0.5));
  CHECK(eval_mf(mf, -1.0) == 0.0);
  CHECK(eval_mf(mf, 3.0) == 0.0);
  CHECK(eval_mf(mf, 1.0) == 1.0);
  CHECK(mf.center() == 1.5);
}

TEST_CASE("degenerate trapezoid ramps step straight to the plateau") {
  const auto left = MembershipFunction::trapezoid(1, 1, 2, 3);
  CHECK(eval_mf(left, 1.0) == 1.0);
  CHECK(eval_mf(left, 0.999) == 0.0);
  const auto right = MembershipFunction::trapezoid(0, 1, 2, 2);
  CHECK(eval_mf(right, 2.0) == 1.0);
  CHECK(eval_mf(right, 2.001) == 0.0);
  const auto spike = MembershipFunction::trapezoid(4, 4, 4, 4);
  CHECK(eval_mf(spike, 4.0) == 1.0);
  CHECK(eval_mf(spike, 4.5) == 0.0);
}

TEST_CASE("gaussian evaluation") {
  const auto mf = MembershipFunction::gaussian(0, 1);
  CHECK(eval_mf(mf, 0.0) == 1.0);
  CHECK(eval_mf(mf, 1.0) == doctest::Approx(std::exp(-0.5)));
  CHECK(eval_mf(mf, -2.0) == doctest::Approx(std::exp(-2.0)));
}

TEST_CASE("invalid membership functions are rejected") {
  CHECK_THROWS_AS(MembershipFunction::trapezoid(0, 2, 1, 3), ValidationError);
  CHECK_THROWS_AS(MembershipFunction::trapezoid(0, 1, 2, NAN), ValidationError);
  CHECK_THROWS_AS(MembershipFunction::gaussian(0, 0), ValidationError);
  CHECK_THROWS_AS(MembershipFunction::gaussian(0, -1), ValidationError);
}

TEST_CASE("assign restores trapezoid order and the sigma floor") {
  auto trap = MembershipFunction::trapezoid(0, 1, 2, 3);
  const std::array<double, 4> shuffled{2.0, 1.0, 4.0, 3.0};
  trap.assign(shuffled, 0.0);
  const auto p = trap.params();
  CHECK(p[0] <= p[1]);
  CHECK(p[1] <= p[2]);
  CHECK(p[2] <= p[3]);
  CHECK(p[1] == 2.0);
  CHECK(p[3] == 4.0);

  auto gauss = MembershipFunction::gaussian(0, 1);
  const std::array<double, 2> negative{0.5, -3.0};
  gauss.assign(negative, 1e-6);
  CHECK(gauss.params()[1] == 1e-6);
}

TEST_CASE("property: membership degree stays in [0, 1]") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> x(-200.0, 200.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto mf = random_mf(rng);
    for (int k = 0; k < 20; ++k) {
      const double v = eval_mf(mf, x(rng));
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
    }
  }
}

TEST_CASE("a single T-axis rule evaluates its consequent") {
  const auto model = single_rule_model(MembershipFunction::gaussian(20, 10));
  const std::array<double, 1> x{20.0};
  const auto inf = infer(model, x);
  CHECK(inf.estimate == doctest::Approx(5.9790).epsilon(1e-12));
  CHECK(inf.normalized[0] == 1.0);
  CHECK_FALSE(inf.zero_firing);
}

TEST_CASE("infer with one fully active rule returns that rule's consequent") {
  InputVariable in{"x", {{"a", MembershipFunction::trapezoid(0, 1, 2, 3)}, {"b", MembershipFunction::trapezoid(5, 6, 7, 8)}}};
  const TskModel model({in}, {TskRule{{0}, {2.0}, 1.0}, TskRule{{1}, {-1.0}, 3.0}});
  const std::array<double, 1> x{1.5};
  const auto inf = infer(model, x);
  CHECK(inf.firing[0] == 1.0);
  CHECK(inf.firing[1] == 0.0);
  CHECK(inf.estimate == doctest::Approx(4.0));
}

TEST_CASE("two equally firing rules average their consequents") {
  InputVariable in{"x", {{"a", MembershipFunction::gaussian(0, 1)}, {"b", MembershipFunction::gaussian(2, 1)}}};
  const TskModel model({in}, {TskRule{{0}, {0.0}, 3.0}, TskRule{{1}, {0.0}, 7.0}});
  const std::array<double, 1> x{1.0};
  const auto inf = infer(model, x);
  CHECK(inf.normalized[0] == doctest::Approx(0.5));
  CHECK(inf.estimate == doctest::Approx(5.0));
}

TEST_CASE("zero total firing falls back to the nearest rule and is flagged") {
  InputVariable in{"x", {{"a", MembershipFunction::trapezoid(0, 1, 2, 3)}, {"b", MembershipFunction::trapezoid(5, 6, 7, 8)}}};
  const TskModel model({in}, {TskRule{{0}, {2.0}, 1.0}, TskRule{{1}, {-1.0}, 3.0}});
  const std::array<double, 1> far_right{20.0};
  const auto inf = infer(model, far_right);
  CHECK(inf.zero_firing);
  REQUIRE(inf.fallback_rule.has_value());
  CHECK(*inf.fallback_rule == 1);
  CHECK(inf.estimate == doctest::Approx(-17.0));
}

TEST_CASE("infer rejects a wrong input dimension") {
  const auto model = single_rule_model(MembershipFunction::gaussian(0, 1));
  const std::array<double, 2> x{1.0, 2.0};
  CHECK_THROWS_AS(infer(model, x), ValidationError);
}

TEST_CASE("model validation") {
  InputVariable in{"x", {{"a", MembershipFunction::gaussian(0, 1)}}};
  CHECK_THROWS_AS(TskModel({in}, {}), ValidationError);
  CHECK_THROWS_AS(TskModel({in}, {TskRule{{1}, {0.0}, 0.0}}), ValidationError);
  CHECK_THROWS_AS(TskModel({in}, {TskRule{{0, 0}, {0.0, 0.0}, 0.0}}), ValidationError);
}

TEST_CASE("property: inference is a convex combination of rule consequents") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-60.0, 60.0);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t dim = 1 + rng() % 3;
    const auto model = random_model(rng, dim, 2 + rng() % 4);
    std::vector<double> x(dim);
    for (auto& v : x) v = u(rng);
    const auto inf = infer(model, x);
    if (inf.zero_firing) continue;
    double lo = INFINITY;
    double hi = -INFINITY;
    for (const auto& rule : model.rules()) {
      lo = std::min(lo, rule.consequent(x));
      hi = std::max(hi, rule.consequent(x));
    }
    const double slack = 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)));
    REQUIRE(inf.estimate >= lo - slack);
    REQUIRE(inf.estimate <= hi + slack);
    double total = 0.0;
    for (const double w : inf.normalized) total += w;
    REQUIRE(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("property: permuting rules leaves the estimate bit-identical") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-60.0, 60.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto model = random_model(rng, 2, 5);
    auto rules = model.rules();
    std::shuffle(rules.begin(), rules.end(), rng);
    const TskModel permuted(model.inputs(), rules);
    const std::array<double, 2> x{u(rng), u(rng)};
    REQUIRE(infer(model, x).estimate == infer(permuted, x).estimate);
  }
}

TEST_CASE("grid partition: two terms cover both range endpoints") {
  const auto mfs = grid_partition_1d(0, 10, 2);
  REQUIRE(mfs.size() == 2);
  CHECK(eval_mf(mfs[0], 0.0) == 1.0);
  CHECK(eval_mf(mfs[1], 10.0) == 1.0);
  CHECK(mfs[0].params()[1] <= 0.0);
  CHECK(mfs[1].params()[2] >= 10.0);
}

TEST_CASE("grid partition: plateau centers equally spaced") {
  const auto mfs = grid_partition_1d(0, 100, 5);
  REQUIRE(mfs.size() == 5);
  for (std::size_t j = 0; j < mfs.size(); ++j) {
    CHECK(mfs[j].center() == doctest::Approx(25.0 * static_cast<double>(j)));
  }
  for (std::size_t j = 1; j < mfs.size(); ++j) {
    CHECK(mfs[j].center() - mfs[j - 1].center() == doctest::Approx((100.0 - 0.0) / 4.0));
  }
}

TEST_CASE("grid partition: memberships sum to 1 across the range") {
  const auto mfs = grid_partition_1d(-37.0, 122.0, 5);
  for (int k = 0; k <= 1000; ++k) {
    const double x = -37.0 + 159.0 * k / 1000.0;
    double total = 0.0;
    for (const auto& mf : mfs) total += eval_mf(mf, x);
    REQUIRE(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("grid model rule counts") {
  const std::vector<std::pair<double, double>> one{{0.0, 1.0}};
  CHECK(make_grid_model(one, 5, {"t_axis_deg"}).rule_count() == 5);
  const std::vector<std::pair<double, double>> two{{0.0, 1.0}, {-5.0, 5.0}};
  const auto model = make_grid_model(two, 3, {"a", "b"});
  CHECK(model.rule_count() == 9);
  CHECK(model.rules()[1].antecedents == std::vector<std::size_t>{0, 1});
}

TEST_CASE("grid partition rejects degenerate input") {
  CHECK_THROWS_AS(grid_partition_1d(3.0, 3.0, 5), ValidationError);
  CHECK_THROWS_AS(grid_partition_1d(0.0, 1.0, 1), ValidationError);
}

TEST_CASE("grid model with zero consequents predicts zero") {
  const std::vector<std::pair<double, double>> ranges{{0.0, 10.0}, {100.0, 200.0}};
  const auto model = make_grid_model(ranges, 4, {"a", "b"});
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> a(0.0, 10.0);
  std::uniform_real_distribution<double> b(100.0, 200.0);
  for (int k = 0; k < 200; ++k) {
    const std::array<double, 2> x{a(rng), b(rng)};
    REQUIRE(infer(model, x).estimate == 0.0);
  }
}
