#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "prdiv/io.hpp"

namespace fs = std::filesystem;
using namespace prdiv;

namespace {

struct CmdResult {
  int code = -1;
  std::string output;
};

CmdResult run_cli(const std::string& args, const std::string& env = "") {
  const fs::path out = fs::temp_directory_path() / "prdiv_cli_out.txt";
  const std::string cmd = env + " " + std::string(PRDIV_CLI_PATH) + " " + args + " > " +
                          out.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  CmdResult res;
  res.code = WEXITSTATUS(status);
  std::ifstream f(out);
  std::ostringstream ss;
  ss << f.rdbuf();
  res.output = ss.str();
  return res;
}

struct Fixture {
  fs::path dir;
  Fixture() {
    dir = fs::temp_directory_path() / "prdiv_cli_fixture";
    fs::remove_all(dir);
    fs::create_directories(dir);
    write_file((dir / "gauss.json").string(),
               R"({"kind":"gaussian_mixture_1d","components":[{"weight":1.0,"mean":[0.0],"cov":[1.0]}]})");
    write_file((dir / "gauss_shift.json").string(),
               R"({"kind":"gaussian_mixture_1d","components":[{"weight":1.0,"mean":[1.0],"cov":[1.0]}]})");
    write_file((dir / "train.json").string(), R"({
      "algo": "two_step", "target": "pr:1", "auxiliary": "chi2",
      "model_kind": "flow", "batch_size": 32, "steps": 40,
      "lr_T": 1e-3, "lr_G": 2e-4, "gamma": 0.1, "seed": 3,
      "flow_steps": 3, "flow_hidden": [8, 8], "disc_hidden": [16, 8],
      "density": {"kind": "gaussian_mixture_2d", "components": [
        {"weight": 0.5, "mean": [-1.0, 0.0], "cov": [[0.3, 0.0], [0.0, 0.3]]},
        {"weight": 0.5, "mean": [1.0, 0.0], "cov": [[0.3, 0.0], [0.0, 0.3]]}]}
    })");
  }
  ~Fixture() { fs::remove_all(dir); }
  std::string path(const char* name) const { return (dir / name).string(); }
  std::string root_env() const { return "PRDIV_EXPERIMENTS_ROOT=" + (dir / "exp").string(); }
};

}  // namespace

TEST_CASE("div subcommand") {
  Fixture fx;
  const auto same =
      run_cli("div --f pr:1 --p " + fx.path("gauss.json") + " --q " + fx.path("gauss.json"));
  CHECK(same.code == 0);
  CHECK(same.output.find("\"value\": 0") != std::string::npos);

  const auto kl = run_cli("div --f kl --p " + fx.path("gauss.json") + " --q " +
                          fx.path("gauss_shift.json") + " --out " + fx.path("kl.json"));
  CHECK(kl.code == 0);
  const std::string rec = read_file(fx.path("kl.json"));
  CHECK(rec.find("\"config_hash\"") != std::string::npos);
  CHECK(rec.find("\"grid\"") != std::string::npos);

  const auto bad = run_cli("div --f kl --p /nonexistent.json --q " + fx.path("gauss.json"));
  CHECK(bad.code == 2);
  const auto bad_gen =
      run_cli("div --f what --p " + fx.path("gauss.json") + " --q " + fx.path("gauss.json"));
  CHECK(bad_gen.code == 1);
  CHECK(run_cli("frobnicate").code == 1);
}

TEST_CASE("prcurve subcommand emits a monotone csv") {
  Fixture fx;
  const auto res = run_cli("prcurve --p " + fx.path("gauss.json") + " --q " +
                           fx.path("gauss_shift.json") + " --points 64 --out " +
                           fx.path("curve.csv"));
  CHECK(res.code == 0);
  std::ifstream f(fx.path("curve.csv"));
  std::string line;
  std::getline(f, line);
  CHECK(line.rfind("# config_hash=", 0) == 0);
  std::getline(f, line);
  CHECK(line == "lambda,alpha,beta");
  int rows = 0;
  double prev_alpha = -1.0;
  while (std::getline(f, line)) {
    ++rows;
    const double alpha = std::stod(line.substr(line.find(',') + 1));
    CHECK(alpha >= prev_alpha - 1e-12);
    prev_alpha = alpha;
  }
  CHECK(rows == 64);
  CHECK(fs::exists(fx.path("curve.csv") + std::string(".json")));
}

TEST_CASE("decompose subcommand reports the reconstruction") {
  Fixture fx;
  const auto res = run_cli("decompose --f kl --p " + fx.path("gauss.json") + " --q " +
                           fx.path("gauss_shift.json") + " --nlambda 256 --out " +
                           fx.path("dec.json"));
  CHECK(res.code == 0);
  const std::string rec = read_file(fx.path("dec.json"));
  const auto pos = rec.find("\"relative_error\": ");
  REQUIRE(pos != std::string::npos);
  const double rel = std::stod(rec.substr(pos + 18));
  CHECK(rel < 0.01);
}

TEST_CASE("verify quick passes and the injected bug trips only the auc check") {
  Fixture fx;
  const auto ok = run_cli("verify --quick");
  CHECK(ok.code == 0);
  CHECK(ok.output.find("FAIL") == std::string::npos);
  CHECK(ok.output.find("[PASS] thm1_alpha_identity") != std::string::npos);

  const auto bug = run_cli("verify --quick --inject-auc-bug");
  CHECK(bug.code == 3);
  CHECK(bug.output.find("[FAIL] auc_polar_area_crosscheck") != std::string::npos);
  CHECK(bug.output.find("[PASS] thm1_alpha_identity") != std::string::npos);
  CHECK(bug.output.find("[PASS] thm4_bregman_identity") != std::string::npos);
}

TEST_CASE("train, eval and replay round trip") {
  Fixture fx;
  // steps=0: manifest plus the initial checkpoint only
  const auto zero = run_cli("train --config " + fx.path("train.json") + " --id zero --steps 0",
                            fx.root_env());
  CHECK(zero.code == 0);
  CHECK(fs::exists(fx.dir / "exp" / "zero" / "manifest.json"));
  CHECK(fs::exists(fx.dir / "exp" / "zero" / "checkpoint_g.bin"));

  const auto t = run_cli("train --config " + fx.path("train.json") + " --id run1", fx.root_env());
  CHECK(t.code == 0);
  const std::string manifest = read_file((fx.dir / "exp" / "run1" / "manifest.json").string());
  CHECK(manifest.find("\"status\": \"done\"") != std::string::npos);

  // reruns refuse to clobber an existing manifest
  const auto dup = run_cli("train --config " + fx.path("train.json") + " --id run1", fx.root_env());
  CHECK(dup.code == 1);

  const auto ev = run_cli("eval --exp run1 --n 400 --k 3", fx.root_env());
  CHECK(ev.code == 0);
  const std::string metrics = read_file((fx.dir / "exp" / "run1" / "metrics.json").string());
  CHECK(metrics.find("\"knn_precision\"") != std::string::npos);
  CHECK(metrics.find("\"coverage\"") != std::string::npos);
  CHECK(metrics.find("\"mode_counts\"") != std::string::npos);

  const auto rep = run_cli("replay --exp run1", fx.root_env());
  CHECK(rep.code == 0);
  CHECK(rep.output.find("byte-identical") != std::string::npos);

  // tampering with the stored config breaks the manifest hash
  const auto cfg_path = (fx.dir / "exp" / "run1" / "config.json").string();
  write_file(cfg_path, read_file(cfg_path) + " ");
  const auto bad = run_cli("replay --exp run1", fx.root_env());
  CHECK(bad.code == 2);
}
