// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

#include <Eigen/Dense>

#include "lpclip/cli.hpp"
#include "lpclip/metrics.hpp"
#include "lpclip/numeric.hpp"
#include "lpclip/probe.hpp"
#include "lpclip/rng.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace lpclip;
using Clock = std::chrono::steady_clock;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
  if (!pass) ++failures;
}

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

double reference_loss(const std::vector<double>& logits, std::size_t y, double phi) {
  long double peak = logits[0];
  for (double v : logits) peak = std::max<long double>(peak, v);
  long double sum = 0.0L;
  for (double v : logits) sum += std::exp(static_cast<long double>(v) - peak);
  return static_cast<double>(-phi * (logits[y] - peak - std::log(sum)));
}

void gradient_oracle() {
  const auto start = Clock::now();
  CounterRng rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t c = std::array<std::size_t, 3>{2, 5, 17}[static_cast<std::size_t>(t) % 3];
    std::vector<double> logits(c);
    for (double& v : logits) v = 2.0 * rng.normal();
    const std::size_t y = rng.index(c);
    const double phi = rng.uniform(0.05, 1.0);
    const auto lg = probe::consistency_loss(logits, y, phi);
    for (std::size_t k = 0; k < c; ++k) {
      std::vector<double> up = logits, down = logits;
      up[k] += 1e-4;
      down[k] -= 1e-4;
      const double fd = (reference_loss(up, y, phi) - reference_loss(down, y, phi)) / 2e-4;
      worst = std::max(worst, std::abs(fd - lg.grad[k]) / std::max({std::abs(fd), std::abs(lg.grad[k]), 1e-8}));
    }
  }
  const double elapsed = seconds_since(start);
  report("gradient-oracle", worst < 1e-4 && elapsed < 1.0,
         "max relative error " + fmt(worst) + " over 100 cases, " + fmt(elapsed) + " s");
}

void zero_weight() {
  CounterRng rng(7);
  bool exact = true;
  for (int t = 0; t < 100; ++t) {
    std::vector<double> logits(1 + rng.index(20));
    for (double& v : logits) v = 5.0 * rng.normal();
    const auto lg = probe::consistency_loss(logits, rng.index(logits.size()), 0.0);
    exact = exact && lg.loss == 0.0;
    for (double g : lg.grad) exact = exact && g == 0.0;
  }

  const std::size_t n = 64, d = 16, c = 5;
  MatrixF x(n, d);
  for (float& v : x.values()) v = static_cast<float>(rng.normal());
  tensorio::ViewGroup group;
  group.weak.matrix = x;
  for (int k = 0; k < 2; ++k) {
    tensorio::EmbeddingStore s;
    s.matrix = x;
    for (float& v : s.matrix.values()) v += static_cast<float>(0.1 * rng.normal());
    group.strong.push_back(s);
  }
  zeroshot::TeacherOutput teacher;
  teacher.logits = MatrixD(n, c, 0.0);
  teacher.probs = MatrixD(n, c, 1.0 / static_cast<double>(c));
  for (std::size_t i = 0; i < n; ++i) teacher.pseudo_label.push_back(i % c);
  teacher.confidence.assign(n, 0.0);
  probe::TrainConfig cfg;
  cfg.total_steps = 500;
  cfg.batch_size = 16;
  const probe::TrainResult r = probe::train_with_teacher(group, teacher, cfg);
  const probe::ProbeParams init = probe::init_probe(d, c);
  const bool bitwise =
      std::memcmp(r.params.weights.values().data(), init.weights.values().data(), c * d * sizeof(double)) == 0 &&
      std::memcmp(r.params.bias.data(), init.bias.data(), c * sizeof(double)) == 0;
  report("zero-weight-annihilation", exact && bitwise,
         std::string("per-sample zeros ") + (exact ? "exact" : "violated") + ", probe after 500 steps " +
             (bitwise ? "bitwise at init" : "moved"));
}

void metric_oracles() {
  CounterRng rng(99);
  double ece_err = 0.0;
  {
    std::vector<double> conf(1000);
    std::vector<bool> correct(1000);
    for (std::size_t i = 0; i < 1000; ++i) {
      conf[i] = rng.uniform();
      correct[i] = rng.bernoulli(conf[i]);
    }
    ece_err = std::abs(metrics::calibration_report(conf, correct).ece - testing::oracle_ece(conf, correct, 15));
  }
  double ood_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n_id = 1 + rng.index(100);
    const std::size_t n_ood = 1 + rng.index(100);
    std::vector<double> id(n_id), ood(n_ood);
    const bool coarse = t % 2 == 0;
    for (double& v : id) v = coarse ? std::floor(10 * rng.uniform()) / 10 : rng.uniform();
    for (double& v : ood) v = coarse ? std::floor(10 * rng.uniform()) / 10 : rng.uniform();
    ood_err = std::max({ood_err, std::abs(metrics::auroc(id, ood) - testing::oracle_auroc(id, ood)),
                        std::abs(metrics::aupr(id, ood) - testing::oracle_aupr(id, ood)),
                        std::abs(metrics::fpr_at_95_tpr(id, ood) - testing::oracle_fpr95(id, ood))});
  }

  const std::size_t n = 50, d = 8;
  MatrixD data(n, d);
  Eigen::MatrixXd x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      data(i, j) = rng.normal() * static_cast<double>(j + 1);
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = data(i, j);
    }
  }
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ref(centered.transpose() * centered);
  const metrics::PcaProjection p = metrics::pca_project(data, 3);
  double pca_err = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const Eigen::VectorXd v = ref.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - c));
    double dot = 0.0;
    for (std::size_t j = 0; j < d; ++j) dot += p.components(c, j) * v(static_cast<Eigen::Index>(j));
    const double sign = dot < 0 ? -1.0 : 1.0;
    for (std::size_t j = 0; j < d; ++j) {
      pca_err = std::max(pca_err, std::abs(p.components(c, j) - sign * v(static_cast<Eigen::Index>(j))));
    }
  }
  report("metric-oracles", ece_err <= 1e-12 && ood_err <= 1e-12 && pca_err <= 1e-8,
         "ECE error " + fmt(ece_err) + ", AUROC/AUPR/FPR95 error " + fmt(ood_err) + ", PCA error " +
             fmt(pca_err));
}

void optimizer_contracts() {
  CounterRng rng(5);
  double worst_norm = 0.0;
  for (int t = 0; t < 1000; ++t) {
    probe::ProbeGrads g = probe::init_probe(1 + rng.index(64), 2 + rng.index(16));
    const double scale = std::pow(10.0, rng.uniform(-4, 8));
    for (double& v : g.weights.values()) v = scale * rng.normal();
    for (double& v : g.bias) v = scale * rng.normal();
    probe::clip_global_norm(g, 1.0);
    double sq = 0.0;
    for (double v : g.weights.values()) sq += v * v;
    for (double v : g.bias) sq += v * v;
    worst_norm = std::max(worst_norm, std::sqrt(sq));
  }
  const bool schedule = probe::cosine_lr(0, 15000, 0.1) == 0.1 && probe::cosine_lr(15000, 15000, 0.1) == 0.0 &&
                        std::abs(probe::cosine_lr(7500, 15000, 0.1) - 0.05) <= 1e-15;
  double worst_mom = 0.0;
  for (double m : {0.0, 0.5, 0.9, 0.99}) {
    probe::TrainConfig cfg;
    cfg.momentum = m;
    probe::ProbeParams p = probe::init_probe(1, 1);
    probe::OptimizerState s = probe::init_optimizer(p);
    probe::ProbeGrads g = probe::init_probe(1, 1);
    g.weights(0, 0) = 1.0;
    probe::sgd_step_with_clip(p, g, s, 0.1, cfg);
    probe::sgd_step_with_clip(p, g, s, 0.1, cfg);
    worst_mom = std::max(worst_mom, std::abs(p.weights(0, 0) - (-0.1 * (1.0 + (1.0 + m)))));
  }
  report("optimizer-contracts", worst_norm <= 1.0 + 1e-9 && schedule && worst_mom <= 1e-15,
         "max post-clip norm " + fmt(worst_norm) + ", schedule endpoints " + (schedule ? "exact" : "wrong") +
             ", momentum closed-form error " + fmt(worst_mom));
}

struct Outcome {
  cli::ModelEval teacher;
  std::vector<cli::ModelEval> student;
  std::vector<cli::ModelEval> ablation;
};

double mean_accuracy(const std::vector<cli::ModelEval>& rows, const std::string& split) {
  double s = 0.0;
  for (const auto& r : rows) s += r.split(split).accuracy;
  return s / static_cast<double>(rows.size());
}

double mean_ece(const std::vector<cli::ModelEval>& rows, const std::string& split) {
  double s = 0.0;
  for (const auto& r : rows) s += r.split(split).ece;
  return s / static_cast<double>(rows.size());
}

}  // namespace

int main() {
  gradient_oracle();
  zero_weight();
  metric_oracles();
  optimizer_contracts();

  const fs::path root = fs::temp_directory_path() / ("lpclip_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(root);

  cli::PipelineConfig config;
  config.out_dir = (root / "run").string();
  config.eval.corruptions = augment::parse_corruption_list(
      "gaussian_noise:3,gaussian_noise:1,gaussian_noise:5,shot_noise:1,shot_noise:5,impulse_noise:1,impulse_noise:5");

  const auto start = Clock::now();
  cli::Pipeline pipeline(config);
  pipeline.synth();
  Outcome out;
  out.teacher = pipeline.zeroshot();
  pipeline.train();
  for (const auto& row : pipeline.eval()) {
    if (row.model != "teacher") out.student.push_back(row);
  }
  const double method_seconds = seconds_since(start);

  cli::PipelineConfig ablation_config = config;
  ablation_config.train = cli::variant_config(config.train, "no_weighting_no_aug");
  cli::Pipeline ablation(ablation_config);
  ablation.train();
  for (const auto& row : ablation.eval()) {
    if (row.model != "teacher") out.ablation.push_back(row);
  }

  // Method-level claim.
  {
    const double teacher_acc = out.teacher.split("clean").accuracy;
    bool every_seed = out.student.size() == config.seeds.size();
    std::string per_seed;
    for (const auto& row : out.student) {
      every_seed = every_seed && row.split("clean").accuracy >= teacher_acc;
      per_seed += (per_seed.empty() ? "" : "/") + fmt(row.split("clean").accuracy);
    }
    const double student_ece = mean_ece(out.student, "clean");
    const double teacher_ece = out.teacher.split("clean").ece;
    const double noisy_student = mean_accuracy(out.student, "gaussian_noise:3");
    const double noisy_teacher = out.teacher.split("gaussian_noise:3").accuracy;
    const bool pass = every_seed && student_ece <= teacher_ece + 0.02 && noisy_student >= noisy_teacher - 0.01 &&
                      method_seconds < 300.0;
    report("method-level-claim", pass,
           "clean accuracy student " + per_seed + " vs teacher " + fmt(teacher_acc) + "; ECE student " +
               fmt(student_ece) + " vs teacher " + fmt(teacher_ece) + "; gaussian_noise:3 accuracy student " +
               fmt(noisy_student) + " vs teacher " + fmt(noisy_teacher) + "; " + fmt(method_seconds) + " s");
  }

  // Ablation ordering.
  {
    const double full = mean_accuracy(out.student, "clean");
    const double plain = mean_accuracy(out.ablation, "clean");
    report("ablation-ordering", full - plain >= -0.005,
           "mean accuracy lpclip " + fmt(full) + " vs no weighting and no strong views " + fmt(plain));
  }

  // Corruption monotonicity.
  {
    bool pass = true;
    std::string detail;
    for (const std::string kind : {"gaussian_noise", "shot_noise", "impulse_noise"}) {
      const double s1 = out.teacher.split(kind + ":1").accuracy;
      const double s5 = out.teacher.split(kind + ":5").accuracy;
      pass = pass && s5 <= s1;
      detail += (detail.empty() ? "" : "; ") + kind + " " + fmt(s1) + " -> " + fmt(s5);
    }
    report("corruption-monotonicity", pass, "teacher accuracy severity 1 -> 5: " + detail);
  }

  // Determinism: rerun the same config on the same stores.
  {
    cli::PipelineConfig again = config;
    again.out_dir = (root / "rerun").string();
    fs::create_directories(root / "rerun");
    fs::copy(root / "run" / "data", root / "rerun" / "data", fs::copy_options::recursive);
    cli::Pipeline rerun(again);
    rerun.zeroshot();
    rerun.train();
    rerun.eval();
    rerun.ood();
    pipeline.ood();
    bool same = true;
    std::string diff;
    for (std::uint64_t seed : config.seeds) {
      const fs::path rel = fs::path("train/lpclip") / ("seed_" + std::to_string(seed)) / "probe.lpce";
      const bool eq = probe::read_checkpoint(root / "run" / rel) == probe::read_checkpoint(root / "rerun" / rel);
      same = same && eq;
      if (!eq) diff += " " + rel.string();
    }
    for (const std::string rel : {"zeroshot/metrics.csv", "eval/lpclip/metrics.csv", "ood/lpclip/ood.csv"}) {
      const bool eq = testing::read_bytes(root / "run" / rel) == testing::read_bytes(root / "rerun" / rel);
      same = same && eq;
      if (!eq) diff += " " + rel;
    }
    report("determinism", same,
           same ? "probe parameters and metric CSVs bitwise identical across two runs" : "differs:" + diff);
  }

  std::error_code ec;
  fs::remove_all(root, ec);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
