#include "meanfield/commands.hpp"

#include <json.hpp>

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

using namespace meanfield;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

fs::path write_config(const TempDir& dir, const std::string& body) {
  const fs::path p = dir.path / "config.json";
  std::ofstream f(p);
  f << body;
  return p;
}

int cli(std::vector<std::string> args) {
  std::vector<char*> argv;
  args.insert(args.begin(), "mfresnet");
  for (std::string& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

const std::string kQuickTrain = R"({
  "model": {"d1": 3, "d2": 3},
  "train": {"n_particles": 4, "epochs": 2, "batch_size": 8, "lr": 0.05,
            "eval_fraction": 0.25},
  "data": {"n_samples": 16, "teacher_n": 3},
  "checkpoint_every": 1
})";

}  // namespace

TEST_CASE("cmd_train with zero epochs writes the initial checkpoint and exits 0") {
  TempDir dir("mf_cmd_train0");
  const auto cfg = write_config(dir, R"({
    "model": {"d1": 2, "d2": 2},
    "train": {"n_particles": 2, "epochs": 0},
    "data": {"n_samples": 8, "teacher_n": 2}
  })");
  const int rc = cli({"train", "--config", cfg.string(), "--out", dir.path.string()});
  CHECK(rc == 0);
  CHECK(fs::exists(dir.path / "checkpoint.json"));
  CHECK(fs::exists(dir.path / "config.json"));
}

TEST_CASE("cmd_train writes parseable metrics lines") {
  TempDir dir("mf_cmd_train");
  const auto cfg = write_config(dir, kQuickTrain);
  CHECK(cli({"train", "--config", cfg.string(), "--out", dir.path.string(),
             "--deterministic"}) == 0);

  std::ifstream metrics(dir.path / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(metrics, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("step"));
    CHECK(j.contains("epoch"));
    CHECK(j.contains("train_loss"));
    CHECK(j.contains("eval_loss"));
    CHECK(j.contains("wallclock"));
    ++lines;
  }
  CHECK(lines == 2);
}

TEST_CASE("config errors exit with code 2 and name the field") {
  TempDir dir("mf_cmd_badcfg");
  const auto bad_value = write_config(dir, R"({"train": {"lr": -1.0}})");
  CHECK(cli({"train", "--config", bad_value.string(), "--out", dir.path.string()}) == 2);

  const auto bad_key = write_config(dir, R"({"train": {"lrr": 0.1}})");
  CHECK(cli({"diag", "gradcheck", "--config", bad_key.string(), "--out", dir.path.string()}) ==
        2);

  CHECK(cli({"train", "--config", (dir.path / "missing.json").string()}) == 2);
}

TEST_CASE("diag gradcheck passes on a smooth model and rejects ReLU") {
  TempDir dir("mf_cmd_gradcheck");
  const auto cfg = write_config(dir, R"({
    "model": {"d1": 4, "d2": 4, "activation": "tanh"},
    "train": {"n_particles": 8, "theta_init_scale": 0.7},
    "data": {"n_samples": 20, "teacher_n": 4},
    "diag": {"batch_size": 16}
  })");
  CHECK(cli({"diag", "gradcheck", "--config", cfg.string(), "--out", dir.path.string()}) == 0);

  std::ifstream rep(dir.path / "report_gradcheck.json");
  REQUIRE(rep.good());
  nlohmann::json j;
  rep >> j;
  CHECK(j.at("verdict").get<bool>());
  CHECK(j.at("max_rel_err").get<double>() < 1e-5);

  const auto relu = write_config(dir, R"({"model": {"activation": "relu"}})");
  CHECK(cli({"diag", "gradcheck", "--config", relu.string(), "--out", dir.path.string()}) == 2);
}

TEST_CASE("diag homogeneity separates ReLU from tanh by exit code") {
  TempDir dir("mf_cmd_homog");
  const auto relu = write_config(dir, R"({"model": {"d1": 3, "d2": 3, "activation": "relu"}})");
  CHECK(cli({"diag", "homogeneity", "--config", relu.string(), "--out", dir.path.string()}) ==
        0);
  const auto tanh_cfg =
      write_config(dir, R"({"model": {"d1": 3, "d2": 3, "activation": "tanh"}})");
  CHECK(cli({"diag", "homogeneity", "--config", tanh_cfg.string(), "--out",
             dir.path.string()}) == 1);
  CHECK(cli({"diag", "nonsense", "--config", relu.string(), "--out", dir.path.string()}) == 2);
}

TEST_CASE("diag descent exits 2 at a global minimum") {
  TempDir dir("mf_cmd_descent0");
  // Zero teacher and zero init: the student already interpolates.
  const auto cfg = write_config(dir, R"({
    "model": {"d1": 2, "d2": 2},
    "train": {"n_particles": 2, "theta_init_scale": 0.0, "weight_decay": 0.0},
    "data": {"n_samples": 8, "teacher_n": 0},
    "diag": {"descent_pretrain_steps": 2, "descent_candidates": 4}
  })");
  CHECK(cli({"diag", "descent", "--config", cfg.string(), "--out", dir.path.string()}) == 2);
}

TEST_CASE("cmd_compare rejects an empty seed list and emits both columns") {
  TempDir dir("mf_cmd_compare");
  const auto empty = write_config(dir, R"({"compare": {"seeds": []}})");
  CHECK(cli({"compare", "--config", empty.string(), "--out", dir.path.string()}) == 2);

  // Mean-field with tau frozen on the grid is exactly the vanilla run.
  const auto frozen = write_config(dir, R"({
    "model": {"d1": 2, "d2": 2},
    "train": {"n_particles": 3, "epochs": 2, "batch_size": 8, "lr": 0.05,
              "tau_init": "uniform_grid", "tau_lr_scale": 0.0, "eval_fraction": 0.25},
    "data": {"n_samples": 16, "teacher_n": 2},
    "compare": {"seeds": [1, 2]}
  })");
  CHECK(cli({"compare", "--config", frozen.string(), "--out", dir.path.string()}) == 0);

  std::ifstream table(dir.path / "compare.json");
  REQUIRE(table.good());
  nlohmann::json j;
  table >> j;
  const auto mf = j.at("meanfield").at("final_eval_losses").get<std::vector<double>>();
  const auto va = j.at("vanilla").at("final_eval_losses").get<std::vector<double>>();
  REQUIRE(mf.size() == 2);
  REQUIRE(va.size() == 2);
  for (std::size_t i = 0; i < mf.size(); ++i) CHECK(mf[i] == va[i]);
}

TEST_CASE("gen-data writes a loadable csv") {
  TempDir dir("mf_cmd_gendata");
  const auto cfg = write_config(dir, R"({
    "model": {"d1": 3, "d2": 3},
    "data": {"n_samples": 12, "teacher_n": 2}
  })");
  CHECK(cli({"gen-data", "--config", cfg.string(), "--out", dir.path.string()}) == 0);
  CHECK(cli({"train", "--config",
             write_config(dir, R"({
               "model": {"d1": 3, "d2": 3},
               "train": {"n_particles": 2, "epochs": 1, "eval_fraction": 0.25},
               "data": {"csv_path": ")" + (dir.path / "data.csv").string() + R"("}
             })").string(),
             "--out", (dir.path / "run").string()}) == 0);
}
