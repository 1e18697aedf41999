#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("kalium_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run run(const std::string& args) {
  const auto dir = scratch("_io");
  const auto out = dir / "stdout";
  const auto err = dir / "stderr";
  const std::string cmd = std::string(KALIUM_CLI) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  return Run{WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path synthetic(std::size_t n = 42) {
  const auto dir = scratch("data_" + std::to_string(n));
  const auto r = run("synthesize --n " + std::to_string(n) + " --out-dir " + dir.string());
  REQUIRE(r.code == 0);
  return dir;
}

std::string data_args(const fs::path& d) {
  return "--ecg " + (d / "ecg.csv").string() + " --labs " + (d / "labs.csv").string();
}

const std::string kFixture = std::string(KALIUM_FIXTURE_DIR) + "/t_axis_model.json";

const char* kEcgHeader = "patient_id,timestamp,rr_ms,pr_ms,qrs_ms,qt_ms,qtc_ms,p_axis_deg,qrs_axis_deg,t_axis_deg,acci\n";

}  // namespace

TEST_CASE("cohort summary on the default synthetic set") {
  const auto d = synthetic();
  const auto out = scratch("cohort");
  const auto r = run("cohort " + data_args(d) + " --out-dir " + out.string());
  CHECK(r.code == 0);
  CHECK(r.out == "42 samples: 10 hypo / 27 normal / 5 hyper\n");
  CHECK(fs::exists(out / "cohort.csv"));
  const auto manifest = slurp(out / "manifest.json");
  CHECK(manifest.find("\"sha256\"") != std::string::npos);
  CHECK(manifest.find("\"library_version\"") != std::string::npos);
}

TEST_CASE("train-eval reruns are byte-identical") {
  const auto d = synthetic();
  const auto a = scratch("rerun_a");
  const auto b = scratch("rerun_b");
  const std::string common = "train-eval " + data_args(d) + " --variant both --epochs 40 --phase-split 20 --out-dir ";
  REQUIRE(run(common + a.string()).code == 0);
  REQUIRE(run(common + b.string() + " --serial").code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), a);
    const auto other = b / rel;
    REQUIRE(fs::exists(other));
    if (rel == "manifest.json") continue;
    CHECK_MESSAGE(slurp(e.path()) == slurp(other), rel.string());
    ++files;
  }
  CHECK(files >= 2 * 21 + 1);
}

TEST_CASE("manifests differ only by the output directory") {
  const auto d = synthetic();
  const auto a = scratch("man_a");
  const auto b = scratch("man_b");
  REQUIRE(run("cohort " + data_args(d) + " --out-dir " + a.string()).code == 0);
  REQUIRE(run("cohort " + data_args(d) + " --out-dir " + b.string()).code == 0);
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
}

TEST_CASE("predict with the fixture model") {
  const auto r = run("predict --model " + kFixture + " --set t_axis_deg=20");
  CHECK(r.code == 0);
  CHECK(r.out.find("5.979 mM (hyper)") != std::string::npos);
  CHECK(r.out.find("If t_axis_deg is Low then") != std::string::npos);

  const auto dir = scratch("predict");
  spit(dir / "rows.csv", "t_axis_deg\n20\n50\n");
  const auto j = run("predict --json --model " + kFixture + " --input " + (dir / "rows.csv").string());
  CHECK(j.code == 0);
  CHECK(j.out.find("\"class\"") != std::string::npos);
}

TEST_CASE("a missing model column is a validation error naming it") {
  const auto dir = scratch("missing_col");
  spit(dir / "rows.csv", "qtc_ms\n400\n");
  const auto r = run("predict --model " + kFixture + " --input " + (dir / "rows.csv").string());
  CHECK(r.code == 1);
  CHECK(r.err.find("t_axis_deg") != std::string::npos);
  const auto s = run("predict --model " + kFixture + " --set qtc_ms=400");
  CHECK(s.code == 1);
  CHECK(s.err.find("t_axis_deg") != std::string::npos);
}

TEST_CASE("exit codes") {
  CHECK(run("").code == 1);
  CHECK(run("cohort --no-such-flag").code == 1);
  CHECK(run("train-eval --ecg a.csv --labs b.csv --epochs many").code == 1);
  CHECK(run("cohort --ecg /nonexistent/ecg.csv --labs /nonexistent/labs.csv --out-dir " + scratch("io").string()).code ==
        2);
  CHECK(run("predict --model /nonexistent/model.json --set t_axis_deg=1").code == 2);
  const auto d = synthetic();
  const auto bad = run("train-eval " + data_args(d) + " --features t_axis_deg,heart_rate --out-dir " +
                       scratch("bad").string());
  CHECK(bad.code == 1);
  CHECK(bad.err.find("heart_rate") != std::string::npos);
  CHECK(run("train-eval " + data_args(d) + " --variant svm --out-dir " + scratch("svm").string()).code == 1);
  CHECK(run("--version").code == 0);
  CHECK(run("--help").code == 0);
}

TEST_CASE("a zero window joins only simultaneous records") {
  const auto dir = scratch("window0");
  spit(dir / "ecg.csv", std::string(kEcgHeader) +
                            "A,2015-03-01T08:00:00,800,160,90,380,430,50,30,20,3\n"
                            "B,2015-03-01T08:00:00,800,160,90,380,430,50,30,60,3\n");
  spit(dir / "labs.csv",
       "patient_id,timestamp,potassium_mM\n"
       "A,2015-03-01T08:00:00,4.1\n"
       "B,2015-03-01T08:00:01,5.6\n");
  const auto args = "--ecg " + (dir / "ecg.csv").string() + " --labs " + (dir / "labs.csv").string();
  const auto zero = run("cohort " + args + " --window 0 --out-dir " + (dir / "o0").string());
  CHECK(zero.code == 0);
  CHECK(zero.out == "1 samples: 0 hypo / 1 normal / 0 hyper\n");
  const auto wide = run("cohort " + args + " --out-dir " + (dir / "o1").string());
  CHECK(wide.out == "2 samples: 0 hypo / 1 normal / 1 hyper\n");
  CHECK(run("cohort " + args + " --window -5 --out-dir " + (dir / "o2").string()).code == 1);
}

TEST_CASE("leave-one-out on a small cohort") {
  const auto d = synthetic(12);
  const auto out = scratch("loo");
  const auto r = run("train-eval " + data_args(d) + " --folds 12 --no-stratified --epochs 10 --phase-split 5 --out-dir " +
                     out.string());
  CHECK(r.code == 0);
  std::size_t models = 0;
  for (const auto& e : fs::directory_iterator(out / "fcm-anfis")) {
    const auto name = e.path().filename().string();
    if (name.rfind("fold_", 0) == 0 && name.find("model.json") != std::string::npos) ++models;
  }
  CHECK(models == 12);
  CHECK(run("train-eval " + data_args(d) + " --folds 13 --no-stratified --out-dir " + scratch("loo13").string()).code ==
        1);
}

TEST_CASE("a config file sets options and flags override it") {
  const auto d = synthetic();
  const auto dir = scratch("config");
  spit(dir / "run.ini", "epochs = 6\nphase-split = 3\nfolds = 5\n");
  const auto r = run("train-eval --config " + (dir / "run.ini").string() + " " + data_args(d) +
                     " --folds 3 --out-dir " + (dir / "o").string());
  REQUIRE(r.code == 0);
  const auto manifest = slurp(dir / "o" / "manifest.json");
  CHECK(manifest.find("\"epochs\": 6") != std::string::npos);
  CHECK(manifest.find("\"folds\": 3") != std::string::npos);
  CHECK(fs::exists(dir / "o" / "fcm-anfis" / "fold_03_model.json"));
  CHECK_FALSE(fs::exists(dir / "o" / "fcm-anfis" / "fold_04_model.json"));
  const auto history = slurp(dir / "o" / "fcm-anfis" / "fold_01_history.csv");
  CHECK(std::count(history.begin(), history.end(), '\n') == 7);
}
