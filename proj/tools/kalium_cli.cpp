#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "CLI11.hpp"
#include "json.hpp"
#include "kalium/kalium.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

struct Failure {
  int code;
  std::string message;
};

int exit_code(kalium_status s) {
  switch (s) {
    case KALIUM_OK: return kExitOk;
    case KALIUM_ERR_IO: return kExitIo;
    default: return kExitValidation;
  }
}

void check(kalium_status s) {
  if (s != KALIUM_OK) throw Failure{exit_code(s), kalium_last_error()};
}

struct StringFree {
  void operator()(char* s) const { kalium_string_free(s); }
};
struct CohortFree {
  void operator()(kalium_cohort* c) const { kalium_cohort_free(c); }
};
struct ModelFree {
  void operator()(kalium_model* m) const { kalium_model_free(m); }
};
struct EvalFree {
  void operator()(kalium_evaluation* e) const { kalium_evaluation_free(e); }
};
using Cohort = std::unique_ptr<kalium_cohort, CohortFree>;
using Model = std::unique_ptr<kalium_model, ModelFree>;
using Evaluation = std::unique_ptr<kalium_evaluation, EvalFree>;

template <typename Fn>
std::string take(Fn&& fn) {
  char* raw = nullptr;
  check(fn(&raw));
  std::unique_ptr<char, StringFree> owned(raw);
  return std::string(raw);
}

struct RunConfig {
  std::string ecg_path;
  std::string labs_path;
  std::int64_t window_s = 300;
  double alpha = 0.05;
  std::string variant = "fcm-anfis";
  std::size_t epochs = 200;
  double learning_rate = 0.01;
  std::size_t mfs = 5;
  std::size_t clusters = 3;
  double fuzziness = 2.0;
  double fcm_tol = 1e-5;
  std::size_t phase_split = 100;
  std::size_t folds = 10;
  bool stratified = true;
  std::uint64_t seed = 42;
  std::string features = "t_axis_deg";
  bool parallel = true;
  std::string out_dir = "kalium_out";

  std::string model_path;
  std::string input_csv;
  std::vector<std::string> values;
  bool json = false;

  std::size_t n = 42;
  double noise_sd = 24.0;
};

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitIo, "cannot open '" + path + "' for hashing"};
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    char b[3];
    std::snprintf(b, sizeof b, "%02x", digest[i]);
    hex += b;
  }
  return hex;
}

class Outputs {
 public:
  explicit Outputs(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Failure{kExitIo, "cannot create output directory '" + dir_ + "': " + ec.message()};
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path path = fs::path(dir_) / name;
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary);
    if (!out || !(out << content) || !out.flush()) throw Failure{kExitIo, "cannot write '" + path.string() + "'"};
    written_.push_back(name);
  }

  void manifest(const std::string& command, const Json& config, const std::vector<std::string>& inputs) {
    Json doc;
    doc["command"] = command;
    doc["library_version"] = kalium_version();
    doc["config"] = config;
    Json in = Json::array();
    for (const auto& path : inputs) {
      in.push_back(Json{{"path", path}, {"sha256", sha256_file(path)}});
    }
    doc["inputs"] = in;
    std::sort(written_.begin(), written_.end());
    doc["outputs"] = written_;
    const std::string text = doc.dump(2) + "\n";
    write("manifest.json", text);
  }

 private:
  std::string dir_;
  std::vector<std::string> written_;
};

Json data_config(const RunConfig& c) {
  return Json{{"ecg", c.ecg_path}, {"labs", c.labs_path}, {"window_s", c.window_s}};
}

Json train_config_json(const RunConfig& c) {
  Json j = data_config(c);
  j["alpha"] = c.alpha;
  j["variant"] = c.variant;
  j["features"] = c.features;
  j["epochs"] = c.epochs;
  j["learning_rate"] = c.learning_rate;
  j["mfs_per_dim"] = c.mfs;
  j["clusters"] = c.clusters;
  j["fuzziness"] = c.fuzziness;
  j["fcm_tol"] = c.fcm_tol;
  j["phase_split"] = c.phase_split;
  j["folds"] = c.folds;
  j["stratified"] = c.stratified;
  j["seed"] = c.seed;
  return j;
}

Cohort load_cohort(const RunConfig& c) {
  if (c.ecg_path.empty() || c.labs_path.empty()) throw Failure{kExitValidation, "--ecg and --labs are required"};
  kalium_cohort* raw = nullptr;
  check(kalium_cohort_join_files(c.ecg_path.c_str(), c.labs_path.c_str(), c.window_s, &raw));
  Cohort cohort(raw);
  for (std::size_t i = 0; i < kalium_cohort_diagnostic_count(raw); ++i) {
    std::cerr << "warning: " << kalium_cohort_diagnostic(raw, i) << "\n";
  }
  return cohort;
}

std::string class_summary(const kalium_cohort* cohort) {
  std::size_t counts[3];
  kalium_cohort_class_counts(cohort, counts);
  std::ostringstream s;
  s << kalium_cohort_size(cohort) << " samples: " << counts[0] << " hypo / " << counts[1] << " normal / " << counts[2]
    << " hyper";
  return s.str();
}

void cmd_cohort(const RunConfig& c) {
  auto cohort = load_cohort(c);
  Outputs out(c.out_dir);
  out.write("cohort.csv", take([&](char** o) { return kalium_cohort_csv(cohort.get(), o); }));
  out.write("cohort.json", take([&](char** o) { return kalium_cohort_json(cohort.get(), o); }));
  out.manifest("cohort", data_config(c), {c.ecg_path, c.labs_path});
  std::cout << class_summary(cohort.get()) << "\n";
}

void cmd_features(const RunConfig& c) {
  auto cohort = load_cohort(c);
  const std::string report = take([&](char** o) { return kalium_feature_report_json(cohort.get(), c.alpha, o); });
  const std::string boxes = take([&](char** o) { return kalium_boxplots_json(cohort.get(), c.alpha, o); });
  Outputs out(c.out_dir);
  out.write("feature_report.json", report);
  out.write("boxplots.json", boxes);
  Json config = data_config(c);
  config["alpha"] = c.alpha;
  out.manifest("features", config, {c.ecg_path, c.labs_path});

  const Json doc = Json::parse(report);
  std::cout << class_summary(cohort.get()) << "\n";
  std::printf("%-14s %10s %12s\n", "feature", "H", "p");
  for (const auto& f : doc["features"]) {
    std::printf("%-14s %10.2f %12.4g %s\n", f["feature"].get<std::string>().c_str(), f["H"].get<double>(),
                f["p"].get<double>(), f["significant"].get<bool>() ? "*" : "");
  }
}

kalium_train_config to_c_config(const RunConfig& c, kalium_variant variant) {
  kalium_train_config t;
  kalium_train_config_init(&t);
  t.variant = variant;
  t.epochs = c.epochs;
  t.learning_rate = c.learning_rate;
  t.mfs_per_dim = c.mfs;
  t.clusters = c.clusters;
  t.fuzziness = c.fuzziness;
  t.fcm_tol = c.fcm_tol;
  t.phase_split = c.phase_split;
  t.folds = c.folds;
  t.stratified = c.stratified ? 1 : 0;
  t.seed = c.seed;
  t.features = c.features.c_str();
  t.parallel = c.parallel ? 1 : 0;
  return t;
}

std::vector<std::pair<std::string, kalium_variant>> variants_of(const std::string& name) {
  if (name == "conventional") return {{"conventional", KALIUM_CONVENTIONAL}};
  if (name == "fcm-anfis" || name == "fcm") return {{"fcm-anfis", KALIUM_FCM_ANFIS}};
  if (name == "both") return {{"conventional", KALIUM_CONVENTIONAL}, {"fcm-anfis", KALIUM_FCM_ANFIS}};
  throw Failure{kExitValidation, "unknown variant '" + name + "' (conventional, fcm-anfis, both)"};
}

std::string fold_name(std::size_t fold, const char* suffix) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fold_%02zu_%s", fold + 1, suffix);
  return buf;
}

void cmd_train_eval(const RunConfig& c) {
  const auto variants = variants_of(c.variant);
  auto cohort = load_cohort(c);
  Outputs out(c.out_dir);
  std::vector<Evaluation> evaluations;
  for (const auto& [name, variant] : variants) {
    const auto config = to_c_config(c, variant);
    kalium_evaluation* raw = nullptr;
    check(kalium_evaluate(cohort.get(), &config, &raw));
    evaluations.emplace_back(raw);
    out.write(name + "/report.json", take([&](char** o) { return kalium_evaluation_report_json(raw, o); }));
    out.write(name + "/confusion.csv", take([&](char** o) { return kalium_evaluation_confusion_csv(raw, o); }));
    for (std::size_t f = 0; f < kalium_evaluation_fold_count(raw); ++f) {
      out.write(name + "/" + fold_name(f, "model.json"),
                take([&](char** o) { return kalium_evaluation_fold_model_json(raw, f, o); }));
      out.write(name + "/" + fold_name(f, "history.csv"),
                take([&](char** o) { return kalium_evaluation_fold_history_csv(raw, f, o); }));
    }
    kalium_model* model = nullptr;
    check(kalium_train(cohort.get(), &config, &model));
    Model owned(model);
    out.write(name + "/model.json", take([&](char** o) { return kalium_model_to_json(model, o); }));
  }
  std::vector<const kalium_evaluation*> list;
  for (const auto& e : evaluations) list.push_back(e.get());
  const std::string table = take([&](char** o) { return kalium_comparison_table(list.data(), list.size(), o); });
  out.write("comparison.txt", table);
  out.manifest("train-eval", train_config_json(c), {c.ecg_path, c.labs_path});
  std::cout << class_summary(cohort.get()) << "\n" << table;
}

std::string csv_from_values(const kalium_model* model, const std::vector<std::string>& values) {
  std::map<std::string, std::string> given;
  for (const auto& v : values) {
    const auto eq = v.find('=');
    if (eq == std::string::npos || eq == 0) throw Failure{kExitValidation, "--set expects name=value, got '" + v + "'"};
    given[v.substr(0, eq)] = v.substr(eq + 1);
  }
  std::string header;
  std::string row;
  for (std::size_t d = 0; d < kalium_model_input_count(model); ++d) {
    const std::string name = kalium_model_input_name(model, d);
    const auto it = given.find(name);
    if (it == given.end()) throw Failure{kExitValidation, "missing model input '" + name + "'"};
    header += (d > 0 ? "," : "") + name;
    row += (d > 0 ? "," : "") + it->second;
  }
  return header + "\n" + row + "\n";
}

std::string fmt_number(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{kExitIo, "cannot open '" + path + "': file not found or unreadable"};
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void print_predictions(const Json& rows) {
  for (const auto& row : rows) {
    std::string inputs;
    for (const auto& [name, value] : row["inputs"].items()) {
      inputs += (inputs.empty() ? "" : " ") + name + "=" + fmt_number(value.get<double>());
    }
    const auto& p = row["prediction"];
    std::printf("%s -> %.3f mM (%s)%s\n", inputs.c_str(), p["estimate_mM"].get<double>(),
                p["class"].get<std::string>().c_str(), p["zero_firing"].get<bool>() ? " [no rule fired]" : "");
    for (const auto& r : p["rules"]) {
      std::printf("  rule %zu  w=%.4f  %s\n", r["rule"].get<std::size_t>(), r["normalized"].get<double>(),
                  r["text"].get<std::string>().c_str());
    }
  }
}

void cmd_predict(const RunConfig& c, bool write_outputs) {
  if (c.model_path.empty()) throw Failure{kExitValidation, "--model is required"};
  if (c.input_csv.empty() == c.values.empty()) throw Failure{kExitValidation, "give either --input or --set"};
  kalium_model* raw = nullptr;
  check(kalium_model_load(c.model_path.c_str(), &raw));
  Model model(raw);
  const std::string csv = c.input_csv.empty() ? csv_from_values(raw, c.values) : read_text(c.input_csv);
  const std::string result = take([&](char** o) { return kalium_model_predict_csv(raw, csv.c_str(), o); });
  if (c.json) {
    std::cout << result << "\n";
  } else {
    print_predictions(Json::parse(result));
  }
  if (write_outputs) {
    Outputs out(c.out_dir);
    out.write("predictions.json", result);
    std::vector<std::string> inputs{c.model_path};
    if (!c.input_csv.empty()) inputs.push_back(c.input_csv);
    out.manifest("predict", Json{{"model", c.model_path}, {"input", c.input_csv}, {"set", c.values}}, inputs);
  }
}

void cmd_synthesize(const RunConfig& c) {
  char* ecg = nullptr;
  char* labs = nullptr;
  check(kalium_synthesize(c.n, c.noise_sd, c.seed, &ecg, &labs));
  std::unique_ptr<char, StringFree> e(ecg);
  std::unique_ptr<char, StringFree> l(labs);
  Outputs out(c.out_dir);
  out.write("ecg.csv", ecg);
  out.write("labs.csv", labs);
  out.manifest("synthesize", Json{{"n", c.n}, {"noise_sd", c.noise_sd}, {"seed", c.seed}}, {});
  std::cout << "wrote " << c.n << " patients to " << c.out_dir << "\n";
}

void add_data_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--config", "INI/TOML key = value file; flags override it");
  sub->add_option("--ecg", c.ecg_path, "ECG feature CSV");
  sub->add_option("--labs", c.labs_path, "potassium lab CSV");
  sub->add_option("--window", c.window_s, "join window in seconds")->check(CLI::NonNegativeNumber);
  sub->add_option("--out-dir", c.out_dir, "output directory");
}

void add_train_options(CLI::App* sub, RunConfig& c) {
  sub->add_option("--variant", c.variant, "conventional, fcm-anfis or both");
  sub->add_option("--features", c.features, "comma-separated input columns");
  sub->add_option("--epochs", c.epochs);
  sub->add_option("--lr", c.learning_rate, "antecedent learning rate");
  sub->add_option("--mfs", c.mfs, "membership functions per input (conventional)");
  sub->add_option("--clusters", c.clusters, "FCM clusters, i.e. rules (fcm-anfis)");
  sub->add_option("--fuzziness", c.fuzziness, "FCM exponent m");
  sub->add_option("--fcm-tol", c.fcm_tol, "FCM stopping tolerance");
  sub->add_option("--phase-split", c.phase_split, "epochs on the clustered rule base before tuning");
  sub->add_option("--folds", c.folds, "cross-validation folds");
  sub->add_flag("--stratified,!--no-stratified", c.stratified, "stratify folds by class");
  sub->add_option("--seed", c.seed);
  sub->add_flag("--parallel,!--serial", c.parallel, "train folds concurrently");
}

// --config FILE is expanded in place into --key value pairs placed right
// after the subcommand, so explicit flags later on the line take precedence.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string path;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      path = args[i + 1];
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      break;
    }
    if (args[i].rfind("--config=", 0) == 0) {
      path = args[i].substr(9);
      args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      break;
    }
  }
  if (path.empty()) return args;
  std::ifstream probe(path);
  if (!probe) throw Failure{kExitIo, "cannot open config file '" + path + "'"};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw Failure{kExitValidation, "config file '" + path + "': " + e.what()};
  }
  std::size_t at = 1;
  while (at < args.size() && args[at].rfind("-", 0) == 0) ++at;
  if (at == args.size()) throw Failure{kExitValidation, "--config needs a subcommand"};
  const std::string sub = args[at];
  std::vector<std::string> extra;
  for (const auto& item : items) {
    if (!item.parents.empty() && !(item.parents.size() == 1 && item.parents[0] == sub)) continue;
    if (item.name == "++" || item.name == "--") continue;
    std::string key = item.name;
    std::replace(key.begin(), key.end(), '_', '-');
    if (item.inputs.size() == 1) {
      extra.push_back("--" + key + "=" + item.inputs[0]);
    } else {
      for (const auto& v : item.inputs) extra.push_back("--" + key + "=" + v);
    }
  }
  args.insert(args.begin() + static_cast<std::ptrdiff_t>(at) + 1, extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Potassium estimation from ECG features with ANFIS and FCM-ANFIS"};
  app.set_version_flag("--version", std::string(kalium_version()));
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  RunConfig c;

  auto* cohort = app.add_subcommand("cohort", "join ECGs to potassium values and label them");
  add_data_options(cohort, c);

  auto* features = app.add_subcommand("features", "rank features by Kruskal-Wallis and emit box statistics");
  add_data_options(features, c);
  features->add_option("--alpha", c.alpha, "significance level");

  auto* train_eval = app.add_subcommand("train-eval", "k-fold cross-validation of one or both models");
  add_data_options(train_eval, c);
  add_train_options(train_eval, c);

  auto* predict = app.add_subcommand("predict", "estimate potassium with a saved model");
  predict->add_option("--model", c.model_path, "model JSON");
  predict->add_option("--input", c.input_csv, "CSV with the model's input columns");
  predict->add_option("--set", c.values, "name=value for a single row (repeatable)")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  predict->add_flag("--json", c.json, "print the raw JSON traces");
  auto* predict_out = predict->add_option("--out-dir", c.out_dir, "also write predictions and a manifest here");

  auto* synth = app.add_subcommand("synthesize", "write a synthetic ecg.csv / labs.csv pair");
  synth->add_option("--n", c.n, "patients");
  synth->add_option("--noise-sd", c.noise_sd, "T axis noise in degrees");
  synth->add_option("--seed", c.seed);
  synth->add_option("--out-dir", c.out_dir, "output directory");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  }
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (cohort->parsed()) cmd_cohort(c);
    if (features->parsed()) cmd_features(c);
    if (train_eval->parsed()) cmd_train_eval(c);
    if (predict->parsed()) cmd_predict(c, predict_out->count() > 0);
    if (synth->parsed()) cmd_synthesize(c);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  }
  return kExitOk;
}
