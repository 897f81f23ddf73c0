// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

/// Pipeline configuration and the stages behind the `lpclip` subcommands.
///
/// Output layout under `out_dir`:
///
///   resolved_config.json
///   data/train/                 view group (weak + strong_k)
///   data/test.lpce, data/ood.lpce, data/prompts.lpce
///   data/corrupt/<kind>_<severity>.lpce
///   zeroshot/                   teacher metrics
///   prompt_select/              per-prompt accuracy table
///   train/<variant>/seed_<s>/   probe.lpce, history.csv
///   eval/<variant>/             metrics.csv (+ per-seed reports)
///   ood/<variant>/              ood.csv (+ per-seed curves)
///   plots/                      SVG figures
///   summary/table.csv           written by `all`

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "lpclip/augment.hpp"
#include "lpclip/probe.hpp"
#include "lpclip/tensorio.hpp"
#include "lpclip/toyworld.hpp"
#include "lpclip/zeroshot.hpp"

namespace lpclip::cli {

/// Message format: `<source>:<line>: <field>: <reason>`.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetSection {
  /// "toy" or "stores".
  std::string kind = "toy";
  toyworld::ToyDatasetSpec toy;
  std::size_t test_per_class = 100;
  std::uint64_t test_seed = 1007;
  std::size_t ood_count = 500;
  std::size_t views = 4;
  std::uint64_t view_seed = 99;
  /// Directory laid out like `<out_dir>/data`; used when kind is "stores".
  std::string root;
};

struct EncoderSection {
  /// "toy" or "external".
  std::string kind = "toy";
  toyworld::ToyEncoderSpec toy;
};

struct PromptSection {
  std::size_t count = 8;
  std::size_t anchor_samples = 2;
  /// "best", "mean" or "single".
  std::string mode = "best";
  std::size_t index = 0;
  /// Labelled set used by "best": "test" or "train".
  std::string selection_set = "test";
};

struct EvalSection {
  std::size_t bins = 15;
  std::vector<augment::CorruptionSpec> corruptions;
  std::uint64_t corruption_seed = 5;
  /// Empty: `data/ood.lpce` of the dataset.
  std::string ood_store;
};

struct PipelineConfig {
  DatasetSection dataset;
  EncoderSection encoder;
  PromptSection prompts;
  probe::TrainConfig train;
  EvalSection eval;
  std::vector<std::uint64_t> seeds{42, 36, 12};
  std::string out_dir = "runs/default";

  PipelineConfig();
};

PipelineConfig parse_config(std::string_view text, std::string_view source = "<config>");
PipelineConfig load_config(const std::filesystem::path& path);
/// Every field, defaults included.
nlohmann::json config_to_json(const PipelineConfig& config);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<std::uint64_t>> seeds;
  std::optional<std::string> out_dir;
  std::optional<std::string> corruptions;
  bool no_weighting = false;
  bool no_strong_aug = false;
  std::optional<std::size_t> views;
};

/// Flags win over the file; `--seed` replaces the seed list with one seed.
void apply_overrides(PipelineConfig& config, const Overrides& overrides);

/// lpclip, no_weighting, no_aug or no_weighting_no_aug.
std::string variant_name(const probe::TrainConfig& train);
std::vector<std::string> all_variant_names();
probe::TrainConfig variant_config(const probe::TrainConfig& base, std::string_view variant);

struct DataLayout {
  std::filesystem::path train_group;
  std::filesystem::path test_store;
  std::filesystem::path ood_store;
  std::filesystem::path prompt_store;
  std::filesystem::path corrupt_dir;

  std::filesystem::path corrupt_store(const augment::CorruptionSpec& spec) const;
};

DataLayout data_layout(const PipelineConfig& config);

struct SplitMetrics {
  std::string split;  // "clean" or "<kind>:<severity>"
  double accuracy = 0.0;
  double ece = 0.0;
};

struct ModelEval {
  std::string model;  // "teacher" or a variant name
  std::optional<std::uint64_t> seed;
  std::vector<SplitMetrics> splits;

  const SplitMetrics& split(std::string_view name) const;
};

struct OodRow {
  std::string model;
  std::optional<std::uint64_t> seed;
  double auroc = 0.0;
  double aupr = 0.0;
  double fpr95 = 0.0;
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config, std::ostream* log = nullptr);

  const PipelineConfig& config() const noexcept { return config_; }
  std::filesystem::path out_dir() const { return config_.out_dir; }

  void write_resolved_config() const;

  /// Toy data only: view group, test, OOD, prompt bank and corrupted test stores.
  void synth();
  ModelEval zeroshot();
  zeroshot::PromptSelection prompt_select();
  /// One probe per seed for the variant selected by `config.train`.
  std::vector<probe::TrainResult> train();
  std::vector<ModelEval> eval();
  std::vector<OodRow> ood();
  void plot();
  /// synth, zeroshot, then train/eval/ood for every variant, plot and summary.
  void all();

  /// Anchors of the teacher per `prompts.mode`.
  const zeroshot::ClassAnchors& anchors();

 private:
  const tensorio::EmbeddingStore& test_store();
  const zeroshot::PromptSelection& selection();
  std::filesystem::path run_dir(std::uint64_t seed) const;
  std::filesystem::path ood_path() const;
  void note(const std::string& message) const;

  PipelineConfig config_;
  std::ostream* log_;
  std::optional<zeroshot::ClassAnchors> anchors_;
  std::optional<zeroshot::PromptSelection> selection_;
  std::optional<tensorio::EmbeddingStore> test_;
};

/// Mean and sample standard deviation (n - 1; 0 for one value).
std::pair<double, double> mean_std(const std::vector<double>& values);

void write_eval_csv(const std::vector<ModelEval>& rows, const std::filesystem::path& path);
void write_ood_csv(const std::vector<OodRow>& rows, const std::filesystem::path& path);

}  // namespace lpclip::cli
