// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <doctest.h>

#include "lpclip/cli.hpp"
#include "test_util.hpp"

using namespace lpclip;
using namespace lpclip::cli;
namespace fs = std::filesystem;

namespace {

using Table = std::vector<std::vector<std::string>>;

Table read_csv(const fs::path& path) {
  Table rows;
  std::istringstream in(lpclip::testing::read_text(path));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

bool numeric(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return *end == '\0';
}

void check_tables_close(const Table& got, const Table& want, double tol) {
  REQUIRE(got.size() == want.size());
  for (std::size_t r = 0; r < want.size(); ++r) {
    REQUIRE(got[r].size() == want[r].size());
    for (std::size_t c = 0; c < want[r].size(); ++c) {
      INFO("row " << r << " col " << c);
      if (numeric(want[r][c]) && r > 0 && c > 1) {
        CHECK(std::abs(std::stod(got[r][c]) - std::stod(want[r][c])) <= tol);
      } else {
        CHECK(got[r][c] == want[r][c]);
      }
    }
  }
}

PipelineConfig golden_config(const fs::path& out) {
  PipelineConfig c = load_config(fs::path(LPCLIP_CONFIG_DIR) / "golden.json");
  c.out_dir = out.string();
  return c;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + LPCLIP_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("default config values") {
  const PipelineConfig c;
  CHECK(c.seeds == std::vector<std::uint64_t>{42, 36, 12});
  CHECK(c.dataset.toy.classes == 10);
  CHECK(c.dataset.toy.per_class == 200);
  CHECK(c.dataset.views == 4);
  CHECK(c.train.lr0 == 0.1);
  CHECK(c.eval.bins == 15);
  CHECK(c.eval.corruptions.size() == 7);
  for (const auto& s : c.eval.corruptions) CHECK(s.severity == 3);
  CHECK(config_to_json(load_config(fs::path(LPCLIP_CONFIG_DIR) / "default.json")) == config_to_json(c));
}

TEST_CASE("config parsing: partial documents keep defaults; resolved config round-trips") {
  const PipelineConfig c = parse_config(R"({"train": {"lr0": 0.05}, "seeds": [1, 2]})");
  CHECK(c.train.lr0 == 0.05);
  CHECK(c.train.total_steps == 15000);
  CHECK(c.seeds == std::vector<std::uint64_t>{1, 2});
  const nlohmann::json resolved = config_to_json(c);
  CHECK(config_to_json(parse_config(resolved.dump(2))) == resolved);
  CHECK(resolved.at("train").contains("momentum"));
  CHECK(resolved.at("eval").at("corruptions").size() == 7);
}

TEST_CASE("config errors are anchored to a line and name the field") {
  const std::string neg = "{\n  \"train\": {\n    \"lr0\": -0.5\n  }\n}\n";
  CHECK_THROWS_WITH_AS(parse_config(neg, "run.json"), "run.json:3: train.lr0: must be positive", ConfigError);

  const std::string unknown = "{\n  \"dataset\": {\n    \"clases\": 3\n  }\n}\n";
  CHECK_THROWS_WITH_AS(parse_config(unknown, "u.json"), "u.json:3: dataset.clases: unknown key", ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"extra": 1})"), doctest::Contains("extra: unknown key"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"train": {"learning_rate": 1}})"),
                       doctest::Contains("learning_rate"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("{\n\"seeds\": 5\n}"), doctest::Contains(":2: seeds:"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("{\n  \"dataset\": {\"per_class\": -3}\n}"),
                       doctest::Contains(":2: dataset.per_class: must be a non-negative integer"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"dataset": {"jitter": 2.0}})"), doctest::Contains("dataset.jitter"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"encoder": {"kind": "external"}})"), doctest::Contains("encoder.kind"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"dataset": {"kind": "stores"}, "encoder": {"kind": "external"}})"),
                       doctest::Contains("dataset.root"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"eval": {"corruptions": ["fog:2"]}})"),
                       doctest::Contains("eval.corruptions"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"prompts": {"mode": "median"}})"), doctest::Contains("prompts.mode"),
                       ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("{\n\n  \"train\": [1,"), doctest::Contains("invalid JSON"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("overrides and variants") {
  PipelineConfig c;
  Overrides o;
  o.seeds = std::vector<std::uint64_t>{1, 2, 3};
  o.seed = 9;
  o.out_dir = "elsewhere";
  o.corruptions = "pixelate:5";
  o.views = 2;
  o.no_weighting = true;
  apply_overrides(c, o);
  CHECK(c.seeds == std::vector<std::uint64_t>{9});
  CHECK(c.out_dir == "elsewhere");
  CHECK(c.eval.corruptions == std::vector<augment::CorruptionSpec>{{augment::CorruptionKind::pixelate, 5}});
  CHECK(c.dataset.views == 2);
  CHECK(variant_name(c.train) == "no_weighting");
  Overrides bad;
  bad.corruptions = "snow:1";
  CHECK_THROWS_WITH_AS(apply_overrides(c, bad), doctest::Contains("--corrupt"), ConfigError);

  for (const std::string& v : all_variant_names()) CHECK(variant_name(variant_config(c.train, v)) == v);
  CHECK_THROWS_AS(variant_config(c.train, "lp"), PipelineError);
}

TEST_CASE("mean_std and summary CSV format") {
  const auto [m, s] = mean_std({1.0, 2.0, 3.0});
  CHECK(m == 2.0);
  CHECK(s == 1.0);
  CHECK(mean_std({0.5}).second == 0.0);

  lpclip::testing::TempDir dir("csv");
  std::vector<ModelEval> rows{{"teacher", std::nullopt, {{"clean", 0.5, 0.25}}},
                              {"lpclip", 42, {{"clean", 0.75, 0.125}}},
                              {"lpclip", 36, {{"clean", 0.25, 0.125}}}};
  write_eval_csv(rows, dir / "m.csv");
  CHECK(lpclip::testing::read_text(dir / "m.csv") ==
        "model,seed,split,accuracy,ece\n"
        "teacher,-,clean,0.5,0.25\n"
        "lpclip,42,clean,0.75,0.125\n"
        "lpclip,36,clean,0.25,0.125\n"
        "lpclip,mean,clean,0.5,0.125\n"
        "lpclip,std,clean,0.3535533905932738,0\n");
  write_ood_csv({{"teacher", std::nullopt, 0.5, 0.6, 0.7}}, dir / "o.csv");
  CHECK(lpclip::testing::read_text(dir / "o.csv") == "model,seed,auroc,aupr,fpr95\nteacher,-,0.5,0.6,0.7\n");
}

TEST_CASE("golden toy pipeline: artifacts, pinned metrics, determinism") {
  lpclip::testing::TempDir a("golden_a");
  lpclip::testing::TempDir b("golden_b");
  for (const fs::path& out : {a.path(), b.path()}) {
    Pipeline p(golden_config(out));
    p.write_resolved_config();
    p.synth();
    p.zeroshot();
    p.prompt_select();
    p.train();
    p.eval();
    p.ood();
    p.plot();
  }
  const std::vector<std::string> artifacts{
      "resolved_config.json",
      "data/train/weak.lpce",
      "data/train/strong_3.lpce",
      "data/train/group.manifest.json",
      "data/test.lpce",
      "data/ood.lpce",
      "data/prompts.lpce",
      "data/corrupt/gaussian_noise_3.lpce",
      "data/corrupt/impulse_noise_5.lpce",
      "zeroshot/metrics.csv",
      "zeroshot/calibration.csv",
      "zeroshot/histogram.csv",
      "prompt_select/prompt_accuracy.csv",
      "train/lpclip/seed_42/probe.lpce",
      "train/lpclip/seed_36/history.csv",
      "train/lpclip/seed_12/train_config.json",
      "eval/lpclip/metrics.csv",
      "eval/lpclip/seed_42/calibration.csv",
      "ood/lpclip/ood.csv",
      "ood/lpclip/seed_42/roc.csv",
      "plots/teacher/reliability.svg",
      "plots/lpclip/seed_42/reliability.svg",
      "plots/lpclip/seed_42/histogram.svg",
      "plots/pca.svg",
  };
  for (const auto& f : artifacts) {
    INFO(f);
    CHECK(fs::exists(a / f));
  }
  CHECK(tensorio::validate_view_group(a / "data/train").valid);

  const fs::path golden = lpclip::testing::data_dir() / "golden_pipeline";
  check_tables_close(read_csv(a / "eval/lpclip/metrics.csv"), read_csv(golden / "eval_lpclip.csv"), 1e-9);
  check_tables_close(read_csv(a / "zeroshot/metrics.csv"), read_csv(golden / "zeroshot.csv"), 1e-9);
  check_tables_close(read_csv(a / "ood/lpclip/ood.csv"), read_csv(golden / "ood_lpclip.csv"), 1e-9);

  for (const std::string f : {"train/lpclip/seed_42/probe.lpce", "train/lpclip/seed_12/probe.lpce",
                              "eval/lpclip/metrics.csv", "ood/lpclip/ood.csv", "zeroshot/metrics.csv",
                              "plots/pca.svg"}) {
    INFO(f);
    CHECK(lpclip::testing::read_bytes(a / f) == lpclip::testing::read_bytes(b / f));
  }

  SUBCASE("external stores run the same stages as toy data") {
    lpclip::testing::TempDir c("stores");
    fs::copy(a / "data", c / "data", fs::copy_options::recursive);
    PipelineConfig cfg = golden_config(c / "out");
    cfg.dataset.kind = "stores";
    cfg.dataset.root = (c / "data").string();
    cfg.encoder.kind = "external";
    cfg.seeds = {42};
    Pipeline p(cfg);
    CHECK_THROWS_AS(p.synth(), PipelineError);
    p.zeroshot();
    p.train();
    p.eval();
    CHECK(lpclip::testing::read_bytes(c / "out/train/lpclip/seed_42/probe.lpce") ==
          lpclip::testing::read_bytes(a / "train/lpclip/seed_42/probe.lpce"));
  }
}

TEST_CASE("missing stores are reported") {
  lpclip::testing::TempDir dir("missing");
  PipelineConfig c;
  c.out_dir = dir.path().string();
  Pipeline p(c);
  CHECK_THROWS_WITH_AS(p.zeroshot(), doctest::Contains("missing store"), PipelineError);
  CHECK_THROWS(p.train());
}

TEST_CASE("command-line tool: exit codes and messages") {
  lpclip::testing::TempDir dir("tool");
  const fs::path cfg = dir / "bad.json";
  {
    std::ofstream out(cfg);
    out << "{\n  \"train\": {\n    \"lr0\": -1\n  }\n}\n";
  }
  const fs::path log = dir / "log.txt";
  CHECK(run_cli("--config \"" + cfg.string() + "\" train", log) == 2);
  CHECK(lpclip::testing::read_text(log).find("train.lr0") != std::string::npos);

  CHECK(run_cli("--out \"" + (dir / "empty").string() + "\" zeroshot", log) == 1);
  CHECK(lpclip::testing::read_text(log).find("missing store") != std::string::npos);
  CHECK(fs::exists(dir / "empty/resolved_config.json"));

  CHECK(run_cli("--corrupt fog:1 --out \"" + (dir / "x").string() + "\" eval", log) == 2);
  CHECK(run_cli("validate \"" + (lpclip::testing::data_dir() / "bridge_group").string() + "\"", log) == 0);
  CHECK(lpclip::testing::read_text(log).find("\"valid\": true") != std::string::npos);
  CHECK(run_cli("validate \"" + dir.path().string() + "\"", log) == 1);
}
