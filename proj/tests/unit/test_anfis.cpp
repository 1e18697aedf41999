#include <doctest.h>

#include <cmath>
#include <random>

#include "kalium/anfis.hpp"
#include "kalium/error.hpp"

using namespace kalium;

namespace {

Eigen::MatrixXd column(const std::vector<double>& v) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
  return m;
}

TskModel three_gaussian_rules(std::array<double, 3> centers, double sigma) {
  InputVariable in{"x", {}};
  for (std::size_t k = 0; k < 3; ++k) in.terms.push_back({"t" + std::to_string(k), MembershipFunction::gaussian(centers[k], sigma)});
  std::vector<TskRule> rules;
  for (std::size_t k = 0; k < 3; ++k) rules.push_back(TskRule{{k}, {0.0}, 0.0});
  return TskModel({in}, rules);
}

TskModel two_input_model(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<InputVariable> inputs(2);
  inputs[0] = {"a", {{"lo", MembershipFunction::trapezoid(-4.0, -1.5, 0.3, 2.2)},
                     {"hi", MembershipFunction::gaussian(2.0, 1.7)}}};
  inputs[1] = {"b", {{"lo", MembershipFunction::gaussian(-1.0, 1.3)},
                     {"hi", MembershipFunction::trapezoid(-1.8, 0.4, 1.9, 4.1)}}};
  std::vector<TskRule> rules;
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t b = 0; b < 2; ++b) rules.push_back(TskRule{{a, b}, {u(rng), u(rng)}, u(rng)});
  }
  return TskModel(inputs, rules);
}

// Three well separated blobs, each following its own line.
struct Blobs {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

Blobs three_blobs(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  const std::array<double, 3> centers{0.5, 10.5, 20.5};
  const std::array<double, 3> slope{1.0, -2.0, 0.5};
  const std::array<double, 3> bias{2.0, 30.0, -5.0};
  Blobs b;
  b.x.resize(60, 1);
  b.y.resize(60);
  for (Eigen::Index i = 0; i < 60; ++i) {
    const auto k = static_cast<std::size_t>(i % 3);
    b.x(i, 0) = centers[k] + g(rng);
    b.y(i) = slope[k] * b.x(i, 0) + bias[k];
  }
  return b;
}

}  // namespace

TEST_CASE("least squares reproduces an exact line") {
  const Eigen::MatrixXd x = column({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
  Eigen::VectorXd y(10);
  for (Eigen::Index i = 0; i < 10; ++i) y(i) = 2.0 * x(i, 0) + 1.0;
  InputVariable in{"x", {{"all", MembershipFunction::trapezoid(-100, -50, 50, 100)}}};
  TskModel model({in}, {TskRule{{0}, {0.0}, 0.0}});
  const auto fit = solve_consequents(model, x, y);
  CHECK(fit.sse < 1e-20);
  CHECK(model.rules()[0].coefficients[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(model.rules()[0].bias == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(fit.regularized);
}

TEST_CASE("least squares recovers three local lines under known antecedents") {
  // Narrow Gaussians make each blob essentially own its rule.
  auto model = three_gaussian_rules({0.0, 10.0, 20.0}, 1.0);
  std::vector<double> xs;
  std::vector<double> ys;
  const std::array<double, 3> slope{1.0, -2.0, 0.5};
  const std::array<double, 3> bias{2.0, 30.0, -5.0};
  // Generate targets from the true model so the system is exactly consistent.
  TskModel truth = model;
  for (std::size_t k = 0; k < 3; ++k) {
    truth.rules()[k].coefficients[0] = slope[k];
    truth.rules()[k].bias = bias[k];
  }
  for (int i = 0; i <= 40; ++i) {
    const double v = -1.0 + 0.55 * i;
    xs.push_back(v);
    const std::array<double, 1> row{v};
    ys.push_back(truth.infer(row).estimate);
  }
  const Eigen::MatrixXd x = column(xs);
  const Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  solve_consequents(model, x, y);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(model.rules()[k].coefficients[0] - slope[k]) < 1e-6);
    CHECK(std::abs(model.rules()[k].bias - bias[k]) < 1e-6);
  }
}

TEST_CASE("least squares is idempotent") {
  const auto blobs = three_blobs(3);
  auto model = three_gaussian_rules({0.5, 10.5, 20.5}, 2.0);
  const auto first = solve_consequents(model, blobs.x, blobs.y);
  const auto before = model.rules();
  const auto second = solve_consequents(model, blobs.x, blobs.y);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(model.rules()[k].bias == doctest::Approx(before[k].bias).epsilon(1e-9));
    CHECK(model.rules()[k].coefficients[0] == doctest::Approx(before[k].coefficients[0]).epsilon(1e-9));
  }
  CHECK(second.sse == doctest::Approx(first.sse).epsilon(1e-9));
}

TEST_CASE("rank-deficient design is regularized and flagged") {
  // Every sample at the same x: bias and slope cannot be separated.
  const Eigen::MatrixXd x = column({1.0, 1.0, 1.0, 1.0});
  Eigen::VectorXd y(4);
  y << 2.0, 2.0, 2.0, 2.0;
  InputVariable in{"x", {{"all", MembershipFunction::gaussian(0.0, 5.0)}}};
  TskModel model({in}, {TskRule{{0}, {0.0}, 0.0}});
  const auto fit = solve_consequents(model, x, y);
  CHECK(fit.regularized);
  CHECK(fit.rmse < 1e-6);
}

TEST_CASE("zero learning rate leaves the antecedents alone") {
  std::mt19937_64 rng(7);
  auto model = two_input_model(rng);
  Eigen::MatrixXd x(12, 2);
  Eigen::VectorXd y(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (Eigen::Index i = 0; i < 12; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y(i) = u(rng);
  }
  const auto before = antecedent_parameters(model);
  antecedent_gradient_step(model, x, y, 0.0);
  CHECK(antecedent_parameters(model) == before);
}

TEST_CASE("property: analytic gradient matches central differences") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  int checked = 0;
  for (int trial = 0; trial < 25; ++trial) {
    auto model = two_input_model(rng);
    Eigen::MatrixXd x(15, 2);
    Eigen::VectorXd y(15);
    for (Eigen::Index i = 0; i < 15; ++i) {
      x(i, 0) = u(rng);
      x(i, 1) = u(rng);
      y(i) = u(rng);
    }
    const auto grad = antecedent_gradient(model, x, y);
    const auto params = antecedent_parameters(model);
    for (std::size_t k = 0; k < params.size(); ++k) {
      const double h = 1e-6 * std::max(1.0, std::abs(params[k]));
      auto plus = params;
      auto minus = params;
      plus[k] += h;
      minus[k] -= h;
      TskModel mp = model;
      TskModel mm = model;
      set_antecedent_parameters(mp, plus, {});
      set_antecedent_parameters(mm, minus, {});
      // Skip perturbations that reorder a trapezoid or cross a kink.
      if (antecedent_parameters(mp) != plus || antecedent_parameters(mm) != minus) continue;
      const double fd = (0.5 * sum_squared_error(mp, x, y) - 0.5 * sum_squared_error(mm, x, y)) / (2.0 * h);
      const double scale = std::max({std::abs(fd), std::abs(grad[k]), 1e-6});
      if (std::abs(fd - grad[k]) / scale > 1e-4) {
        // a kink inside [p - h, p + h] makes the one-sided slopes disagree
        std::array<double, 2> one_sided{};
        TskModel m0 = model;
        const double e0 = 0.5 * sum_squared_error(m0, x, y);
        one_sided[0] = (0.5 * sum_squared_error(mp, x, y) - e0) / h;
        one_sided[1] = (e0 - 0.5 * sum_squared_error(mm, x, y)) / h;
        if (std::abs(one_sided[0] - one_sided[1]) > 1e-3 * scale) continue;
      }
      CHECK(std::abs(fd - grad[k]) / scale <= 1e-4);
      ++checked;
    }
  }
  CHECK(checked >= 300);
}

TEST_CASE("gradient on a Gaussian center points toward lower error") {
  // One rule with consequent 1 and a competing rule with consequent 0: moving
  // the first center toward a sample whose target is 1 reduces error.
  InputVariable in{"x", {{"a", MembershipFunction::gaussian(0.0, 1.0)}, {"b", MembershipFunction::gaussian(3.0, 1.0)}}};
  TskModel model({in}, {TskRule{{0}, {0.0}, 1.0}, TskRule{{1}, {0.0}, 0.0}});
  const Eigen::MatrixXd x = column({1.0});
  Eigen::VectorXd y(1);
  y << 1.0;
  const auto grad = antecedent_gradient(model, x, y);
  CHECK(grad[0] < 0.0);  // dE/dmu_a < 0 => step increases mu_a toward x
  CHECK(grad[2] < 0.0);  // dE/dmu_b < 0 => step raises mu_b, away from x
  const double before = sum_squared_error(model, x, y);
  antecedent_gradient_step(model, x, y, 0.1);
  CHECK(sum_squared_error(model, x, y) < before);
}

TEST_CASE("gradient step keeps trapezoids ordered and sigmas floored") {
  std::mt19937_64 rng(13);
  auto model = two_input_model(rng);
  Eigen::MatrixXd x(20, 2);
  Eigen::VectorXd y(20);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (Eigen::Index i = 0; i < 20; ++i) {
    x(i, 0) = u(rng);
    x(i, 1) = u(rng);
    y(i) = 50.0 * u(rng);
  }
  for (int s = 0; s < 10; ++s) antecedent_gradient_step(model, x, y, 5.0);
  for (std::size_t d = 0; d < 2; ++d) {
    const double floor = sigma_floor(x.col(static_cast<Eigen::Index>(d)).maxCoeff() - x.col(static_cast<Eigen::Index>(d)).minCoeff());
    for (const auto& term : model.inputs()[d].terms) {
      const auto p = term.mf.params();
      if (term.mf.kind() == MfKind::Trapezoid) {
        CHECK(p[0] <= p[1]);
        CHECK(p[1] <= p[2]);
        CHECK(p[2] <= p[3]);
      } else {
        CHECK(p[1] >= floor);
      }
    }
  }
}

TEST_CASE("conventional training builds the full grid") {
  const auto blobs = three_blobs(5);
  TrainConfig config;
  config.variant = Variant::Conventional;
  config.epochs = 5;
  const auto result = train(blobs.x, blobs.y, config);
  CHECK(result.model.rule_count() == 5);
  CHECK(result.model.inputs()[0].terms.size() == 5);
  CHECK(result.history.train_rmse.size() == 5);
  CHECK(result.history.validation_rmse.empty());
}

TEST_CASE("FCM-ANFIS training yields one rule per cluster") {
  const auto blobs = three_blobs(5);
  TrainConfig config;
  config.epochs = 6;
  config.phase_split = 3;
  const auto result = train(blobs.x, blobs.y, config);
  CHECK(result.model.rule_count() == 3);
  CHECK(result.model.inputs()[0].terms[0].name == "Low");
  CHECK(result.model.inputs()[0].terms[2].name == "High");
  for (std::size_t k = 0; k < 3; ++k) CHECK(result.model.inputs()[0].terms[k].mf.kind() == MfKind::Gaussian);
  // rules come out ordered by center
  CHECK(result.model.antecedent(0, 0).center() < result.model.antecedent(1, 0).center());
  CHECK(result.model.antecedent(1, 0).center() < result.model.antecedent(2, 0).center());
}

TEST_CASE("FCM-ANFIS recovers a known piecewise-linear system") {
  const auto blobs = three_blobs(21);
  TrainConfig config;
  config.epochs = 20;
  config.phase_split = 10;
  const auto result = train(blobs.x, blobs.y, config);
  const std::array<double, 3> slope{1.0, -2.0, 0.5};
  const std::array<double, 3> bias{2.0, 30.0, -5.0};
  const std::array<double, 3> centers{0.5, 10.5, 20.5};
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(std::abs(result.model.antecedent(k, 0).center() - centers[k]) < 0.5);
    CHECK(result.model.rules()[k].coefficients[0] == doctest::Approx(slope[k]).epsilon(0.05));
    CHECK(result.model.rules()[k].bias == doctest::Approx(bias[k]).epsilon(0.05));
  }
  CHECK(result.history.train_rmse.back() < 0.05);
}

TEST_CASE("history invariants") {
  const auto blobs = three_blobs(8);
  const auto val = three_blobs(9);
  TrainConfig config;
  config.epochs = 12;
  config.phase_split = 4;
  const ValidationSet vs{val.x, val.y};
  const auto result = train(blobs.x, blobs.y, config, &vs);
  const auto& h = result.history;
  REQUIRE(h.train_rmse.size() == 12);
  REQUIRE(h.validation_rmse.size() == 12);
  for (std::size_t e = 1; e < 4; ++e) CHECK(h.train_rmse[e] == h.train_rmse[0]);
  for (const double v : h.train_rmse) CHECK(std::isfinite(v));
  for (const double v : h.validation_rmse) CHECK(std::isfinite(v));
  CHECK(h.train_rmse.back() == doctest::Approx(rmse(result.model, blobs.x, blobs.y)).epsilon(1e-12));
  CHECK(h.validation_rmse.back() == doctest::Approx(rmse(result.model, val.x, val.y)).epsilon(1e-12));
}

TEST_CASE("training is deterministic") {
  const auto blobs = three_blobs(4);
  for (const auto variant : {Variant::Conventional, Variant::FcmAnfis}) {
    TrainConfig config;
    config.variant = variant;
    config.epochs = 15;
    config.phase_split = 5;
    const auto a = train(blobs.x, blobs.y, config);
    const auto b = train(blobs.x, blobs.y, config);
    CHECK(a.history.train_rmse == b.history.train_rmse);
    CHECK(antecedent_parameters(a.model) == antecedent_parameters(b.model));
    for (std::size_t r = 0; r < a.model.rule_count(); ++r) {
      CHECK(a.model.rules()[r].bias == b.model.rules()[r].bias);
      CHECK(a.model.rules()[r].coefficients == b.model.rules()[r].coefficients);
    }
  }
}

TEST_CASE("training rejects bad configuration and data") {
  const auto blobs = three_blobs(4);
  TrainConfig config;
  config.epochs = 10;
  config.phase_split = 10;
  CHECK_THROWS_AS(train(blobs.x, blobs.y, config), ValidationError);
  config.phase_split = 0;
  CHECK_THROWS_AS(train(blobs.x, blobs.y, config), ValidationError);
  config.phase_split = 5;
  config.learning_rate = -1.0;
  CHECK_THROWS_AS(train(blobs.x, blobs.y, config), ValidationError);
  config.learning_rate = 0.01;
  Eigen::VectorXd short_y = blobs.y.head(10);
  CHECK_THROWS_AS(train(blobs.x, short_y, config), ValidationError);
  Eigen::MatrixXd bad = blobs.x;
  bad(3, 0) = std::nan("");
  CHECK_THROWS_AS(train(bad, blobs.y, config), ValidationError);
}

TEST_CASE("divergent training is reported") {
  const auto blobs = three_blobs(4);
  TrainConfig config;
  config.variant = Variant::Conventional;
  config.epochs = 30;
  config.learning_rate = 1e6;
  bool diverged = false;
  try {
    train(blobs.x, blobs.y, config);
  } catch (const TrainingDiverged& e) {
    diverged = true;
    CHECK(e.kind() == ErrorKind::Validation);
  }
  // A huge step either collapses the partition (divergence) or is survived;
  // both are acceptable as long as nothing non-finite leaks into the history.
  if (!diverged) {
    const auto r = train(blobs.x, blobs.y, config);
    for (const double v : r.history.train_rmse) CHECK(std::isfinite(v));
  }
}

TEST_CASE("predict reports every inference") {
  const auto blobs = three_blobs(4);
  TrainConfig config;
  config.epochs = 4;
  config.phase_split = 2;
  const auto result = train(blobs.x, blobs.y, config);
  const auto p = predict(result.model, blobs.x);
  REQUIRE(p.estimates.size() == 60);
  REQUIRE(p.trace.size() == 60);
  for (std::size_t i = 0; i < 60; ++i) CHECK(p.trace[i].estimate == p.estimates[i]);
  CHECK_THROWS_AS(predict(result.model, Eigen::MatrixXd::Zero(2, 2)), ValidationError);
}
