// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

// lpclip: synthesize toy data, evaluate the zero-shot teacher, distil it into
// a linear probe and evaluate calibration, corruption robustness and OOD
// detection.

#include <cstdint>
#include <exception>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpclip/cli.hpp"
#include "lpclip/tensorio.hpp"

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || item.front() == '-') {
      throw lpclip::cli::ConfigError("--seeds: \"" + item + "\" is not an unsigned integer");
    }
    out.push_back(v);
  }
  if (out.empty()) throw lpclip::cli::ConfigError("--seeds: must not be empty");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LP-CLIP: distil a zero-shot teacher into a linear probe"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::string seeds;
  std::string out;
  std::string corrupt;
  std::size_t views = 0;
  bool no_weighting = false;
  bool no_strong_aug = false;
  auto* seed_opt = app.add_option("--seed", seed, "Run a single seed");
  auto* seeds_opt = app.add_option("--seeds", seeds, "Comma-separated seed list (default 42,36,12)");
  app.add_option("--config", config_path, "Pipeline config (JSON)");
  auto* out_opt = app.add_option("--out", out, "Output directory");
  auto* corrupt_opt = app.add_option("--corrupt", corrupt, "Corruptions as kind:severity[,...]");
  auto* views_opt = app.add_option("--views", views, "Number of strong views K");
  app.add_flag("--no-weighting", no_weighting, "Force every confidence weight to 1");
  app.add_flag("--no-strong-aug", no_strong_aug, "Train the student on the weak view");

  const std::vector<std::pair<std::string, std::string>> stages{
      {"synth", "Generate toy view group, test, OOD, prompt and corrupted stores"},
      {"zeroshot", "Evaluate the zero-shot teacher"},
      {"prompt-select", "Per-prompt zero-shot accuracy table"},
      {"train", "Train the probe for every seed"},
      {"eval", "Clean and corrupted accuracy / ECE of trained probes"},
      {"ood", "AUROC, AUPR and FPR95 against the OOD store"},
      {"plot", "Reliability, histogram and PCA figures (SVG)"},
      {"all", "Every stage, all ablation variants and a summary table"}};
  for (const auto& [name, help] : stages) app.add_subcommand(name, help);
  std::string group_dir;
  auto* validate = app.add_subcommand("validate", "Check a view-group directory");
  validate->add_option("dir", group_dir, "View-group directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      const auto report = lpclip::tensorio::validate_view_group(group_dir);
      std::cout << lpclip::tensorio::report_to_json(report).dump(2) << '\n';
      return report.valid ? 0 : 1;
    }

    lpclip::cli::PipelineConfig config =
        config_path.empty() ? lpclip::cli::PipelineConfig{} : lpclip::cli::load_config(config_path);
    lpclip::cli::Overrides o;
    if (*seeds_opt) o.seeds = parse_seed_list(seeds);
    if (*seed_opt) o.seed = seed;
    if (*out_opt) o.out_dir = out;
    if (*corrupt_opt) o.corruptions = corrupt;
    if (*views_opt) o.views = views;
    o.no_weighting = no_weighting;
    o.no_strong_aug = no_strong_aug;
    lpclip::cli::apply_overrides(config, o);

    lpclip::cli::Pipeline pipeline(config, &std::cerr);
    pipeline.write_resolved_config();
    const std::string stage = app.get_subcommands().front()->get_name();
    if (stage == "synth") pipeline.synth();
    if (stage == "zeroshot") pipeline.zeroshot();
    if (stage == "prompt-select") pipeline.prompt_select();
    if (stage == "train") pipeline.train();
    if (stage == "eval") pipeline.eval();
    if (stage == "ood") pipeline.ood();
    if (stage == "plot") pipeline.plot();
    if (stage == "all") pipeline.all();
  } catch (const lpclip::cli::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
