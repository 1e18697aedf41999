#include "kalium/anfis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace kalium {
namespace {

std::vector<double> row_of(const Eigen::MatrixXd& x, Eigen::Index i) {
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) row[static_cast<std::size_t>(j)] = x(i, j);
  return row;
}

void check_xy(const TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() != y.size()) {
    throw ValidationError(fmt::format("{} input rows but {} targets", x.rows(), y.size()));
  }
  if (static_cast<std::size_t>(x.cols()) != model.input_dim()) {
    throw ValidationError(fmt::format("model expects {} inputs, data has {} columns", model.input_dim(), x.cols()));
  }
}

std::vector<double> feature_sigma_floors(const Eigen::MatrixXd& x) {
  std::vector<double> floors;
  for (Eigen::Index d = 0; d < x.cols(); ++d) floors.push_back(sigma_floor(x.col(d).maxCoeff() - x.col(d).minCoeff()));
  return floors;
}

// Weights actually used by the model output: normalized firing, or a one-hot
// on the fallback rule when nothing fired.
std::vector<double> output_weights(const Inference& inf) {
  if (!inf.zero_firing) return inf.normalized;
  std::vector<double> w(inf.firing.size(), 0.0);
  w[*inf.fallback_rule] = 1.0;
  return w;
}

TskModel build_fcm_model(const Eigen::MatrixXd& x, const TrainConfig& config, std::vector<std::string> names) {
  FcmConfig fcm = config.fcm;
  fcm.max_iter = config.phase_split;
  fcm.seed = config.seed;
  const FcmResult clusters = fcm_cluster(x, fcm);
  auto mfs = clusters_to_mfs(clusters, x);

  // Canonical rule order: clusters sorted by their first-input center.
  std::vector<std::size_t> order(mfs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return mfs[a][0].center() < mfs[b][0].center(); });

  const std::size_t c = mfs.size();
  const std::size_t dim = static_cast<std::size_t>(x.cols());
  const auto labels = term_labels(c);
  std::vector<InputVariable> inputs(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    inputs[d].name = names[d];
    // Term names follow the rank of the cluster center along this input.
    std::vector<std::size_t> rank_order = order;
    std::stable_sort(rank_order.begin(), rank_order.end(),
                     [&](std::size_t a, std::size_t b) { return mfs[a][d].center() < mfs[b][d].center(); });
    for (std::size_t k = 0; k < c; ++k) {
      const std::size_t cluster = order[k];
      const auto pos = static_cast<std::size_t>(std::find(rank_order.begin(), rank_order.end(), cluster) -
                                                rank_order.begin());
      inputs[d].terms.push_back({labels[pos], mfs[cluster][d]});
    }
  }
  std::vector<TskRule> rules(c);
  for (std::size_t k = 0; k < c; ++k) {
    rules[k].antecedents.assign(dim, k);
    rules[k].coefficients.assign(dim, 0.0);
  }
  return TskModel(std::move(inputs), std::move(rules));
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning rate must be finite and non-negative");
  }
  if (variant == Variant::Conventional && mfs_per_dim < 2) {
    throw ValidationError("conventional ANFIS needs at least 2 membership functions per input");
  }
  if (variant == Variant::FcmAnfis) {
    fcm.validate();
    if (phase_split < 1 || phase_split >= epochs) {
      throw ValidationError(fmt::format("phase split {} must lie in [1, epochs = {})", phase_split, epochs));
    }
  }
}

ConsequentFit solve_consequents(TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check_xy(model, x, y);
  const Eigen::Index n = x.rows();
  const Eigen::Index dim = x.cols();
  const Eigen::Index rules = static_cast<Eigen::Index>(model.rule_count());
  const Eigen::Index block = dim + 1;
  const Eigen::Index p = rules * block;

  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row = row_of(x, i);
    const auto w = output_weights(model.infer(row));
    for (Eigen::Index r = 0; r < rules; ++r) {
      const double wr = w[static_cast<std::size_t>(r)];
      design(i, r * block) = wr;
      for (Eigen::Index d = 0; d < dim; ++d) design(i, r * block + 1 + d) = wr * x(i, d);
    }
  }

  ConsequentFit fit;
  Eigen::VectorXd theta;
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (qr.rank() == p) {
    theta = qr.solve(y);
  } else {
    const Eigen::MatrixXd gram = design.transpose() * design;
    const double trace = gram.trace();
    const double lambda = 1e-8 * (trace > 0.0 ? trace / static_cast<double>(p) : 1.0);
    const Eigen::MatrixXd regularized = gram + lambda * Eigen::MatrixXd::Identity(p, p);
    theta = regularized.ldlt().solve(design.transpose() * y);
    fit.regularized = true;
  }

  for (Eigen::Index r = 0; r < rules; ++r) {
    auto& rule = model.rules()[static_cast<std::size_t>(r)];
    rule.bias = theta(r * block);
    for (Eigen::Index d = 0; d < dim; ++d) rule.coefficients[static_cast<std::size_t>(d)] = theta(r * block + 1 + d);
  }
  fit.sse = sum_squared_error(model, x, y);
  fit.rmse = std::sqrt(fit.sse / static_cast<double>(n));
  return fit;
}

double sum_squared_error(const TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  check_xy(model, x, y);
  double sse = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double e = model.infer(row_of(x, i)).estimate - y(i);
    sse += e * e;
  }
  return sse;
}

double rmse(const TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  if (x.rows() == 0) throw ValidationError("RMSE of an empty sample");
  return std::sqrt(sum_squared_error(model, x, y) / static_cast<double>(x.rows()));
}

std::vector<double> antecedent_parameters(const TskModel& model) {
  std::vector<double> out;
  for (const auto& in : model.inputs()) {
    for (const auto& term : in.terms) {
      const auto p = term.mf.params();
      out.insert(out.end(), p.begin(), p.end());
    }
  }
  return out;
}

void set_antecedent_parameters(TskModel& model, std::span<const double> values, std::span<const double> sigma_floors) {
  std::size_t offset = 0;
  for (std::size_t d = 0; d < model.input_dim(); ++d) {
    const double floor = d < sigma_floors.size() ? sigma_floors[d] : 0.0;
    for (auto& term : model.inputs()[d].terms) {
      const std::size_t count = term.mf.param_count();
      if (offset + count > values.size()) throw ValidationError("too few antecedent parameters");
      term.mf.assign(values.subspan(offset, count), floor);
      offset += count;
    }
  }
  if (offset != values.size()) throw ValidationError("too many antecedent parameters");
}

std::vector<double> antecedent_gradient(const TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                        std::size_t* zero_firing) {
  check_xy(model, x, y);
  const std::size_t dim = model.input_dim();
  const std::size_t n_rules = model.rule_count();

  // Offset of each (input, term) block inside the flat parameter vector.
  std::vector<std::vector<std::size_t>> offsets(dim);
  std::size_t total = 0;
  for (std::size_t d = 0; d < dim; ++d) {
    for (const auto& term : model.inputs()[d].terms) {
      offsets[d].push_back(total);
      total += term.mf.param_count();
    }
  }

  std::vector<double> grad(total, 0.0);
  std::vector<double> degrees(n_rules * dim);
  std::size_t skipped = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = row_of(x, i);
    const Inference inf = model.infer(row);
    if (inf.zero_firing) {
      ++skipped;
      continue;
    }
    const double s = ordered_sum(inf.firing);
    const double err = inf.estimate - y(i);
    for (std::size_t r = 0; r < n_rules; ++r) {
      for (std::size_t d = 0; d < dim; ++d) degrees[r * dim + d] = model.antecedent(r, d).degree(row[d]);
    }
    for (std::size_t r = 0; r < n_rules; ++r) {
      const auto& rule = model.rules()[r];
      const double factor = err * (rule.consequent(row) - inf.estimate) / s;
      if (factor == 0.0) continue;
      for (std::size_t d = 0; d < dim; ++d) {
        double others = 1.0;
        for (std::size_t e = 0; e < dim; ++e) {
          if (e != d) others *= degrees[r * dim + e];
        }
        if (others == 0.0) continue;
        const auto& mf = model.antecedent(r, d);
        const auto dmu = mf.param_gradient(row[d]);
        const std::size_t base = offsets[d][rule.antecedents[d]];
        for (std::size_t k = 0; k < mf.param_count(); ++k) grad[base + k] += factor * others * dmu[k];
      }
    }
  }
  if (zero_firing != nullptr) *zero_firing = skipped;
  return grad;
}

GradientStep antecedent_gradient_step(TskModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                      double learning_rate) {
  GradientStep step;
  auto grad = antecedent_gradient(model, x, y, &step.zero_firing_samples);
  auto params = antecedent_parameters(model);
  for (std::size_t k = 0; k < params.size(); ++k) {
    if (!std::isfinite(grad[k])) {
      grad[k] = 0.0;
      step.nonfinite = true;
    }
    params[k] -= learning_rate * grad[k];
  }
  set_antecedent_parameters(model, params, feature_sigma_floors(x));
  return step;
}

TrainResult train(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const TrainConfig& config,
                  const ValidationSet* validation) {
  config.validate();
  if (x.rows() != y.size()) throw ValidationError(fmt::format("{} input rows but {} targets", x.rows(), y.size()));
  if (x.rows() < 3) throw ValidationError("training needs at least 3 samples");
  if (x.cols() < 1) throw ValidationError("training needs at least one input column");
  if (!x.allFinite() || !y.allFinite()) throw ValidationError("training data contains non-finite values");

  std::vector<std::string> names = config.input_names;
  if (names.empty()) {
    for (Eigen::Index d = 0; d < x.cols(); ++d) names.push_back(fmt::format("x{}", d + 1));
  }
  if (names.size() != static_cast<std::size_t>(x.cols())) {
    throw ValidationError(fmt::format("{} input names for {} columns", names.size(), x.cols()));
  }

  TrainResult result;
  std::size_t first_tuned_epoch = 2;
  if (config.variant == Variant::Conventional) {
    std::vector<std::pair<double, double>> ranges;
    for (Eigen::Index d = 0; d < x.cols(); ++d) ranges.emplace_back(x.col(d).minCoeff(), x.col(d).maxCoeff());
    result.model = make_grid_model(ranges, config.mfs_per_dim, names);
  } else {
    result.model = build_fcm_model(x, config, names);
    first_tuned_epoch = config.phase_split + 1;
  }

  auto& history = result.history;
  double initial = 0.0;
  ConsequentFit fit;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    if (epoch == 1 || epoch >= first_tuned_epoch) {
      if (epoch >= first_tuned_epoch) {
        const auto step = antecedent_gradient_step(result.model, x, y, config.learning_rate);
        result.nonfinite_gradient = result.nonfinite_gradient || step.nonfinite;
      }
      fit = solve_consequents(result.model, x, y);
      if (fit.regularized) ++result.regularized_solves;
    }
    if (epoch == 1) initial = fit.rmse;
    if (!std::isfinite(fit.rmse) || fit.rmse > 10.0 * initial + 1e-12) {
      throw TrainingDiverged(
          fmt::format("training diverged at epoch {}: RMSE {} vs initial {}", epoch, fit.rmse, initial));
    }
    history.train_rmse.push_back(fit.rmse);
    if (validation != nullptr) history.validation_rmse.push_back(rmse(result.model, validation->x, validation->y));
  }
  return result;
}

Prediction predict(const TskModel& model, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != model.input_dim()) {
    throw ValidationError(fmt::format("model expects {} inputs, data has {} columns", model.input_dim(), x.cols()));
  }
  Prediction out;
  out.estimates.reserve(static_cast<std::size_t>(x.rows()));
  out.trace.reserve(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Inference inf = model.infer(row_of(x, i));
    out.estimates.push_back(inf.estimate);
    if (inf.zero_firing) ++out.zero_firing;
    out.trace.push_back(std::move(inf));
  }
  return out;
}

}  // namespace kalium
