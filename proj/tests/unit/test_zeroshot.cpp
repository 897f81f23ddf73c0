// Copyright 2026 The lpclip Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include <doctest.h>

#include "lpclip/probe.hpp"
#include "lpclip/rng.hpp"
#include "lpclip/zeroshot.hpp"
#include "test_util.hpp"

using namespace lpclip;
using namespace lpclip::zeroshot;

namespace {

std::vector<double> unit(std::vector<double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  for (double& x : v) x /= std::sqrt(s);
  return v;
}

PromptBank bank_from(std::size_t c, std::size_t p, const std::vector<std::vector<double>>& rows) {
  std::vector<double> values;
  for (const auto& r : rows) values.insert(values.end(), r.begin(), r.end());
  return PromptBank(c, p, rows.front().size(), values);
}

MatrixF to_f(const std::vector<std::vector<double>>& rows) {
  MatrixF m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = static_cast<float>(rows[i][j]);
  }
  return m;
}

}  // namespace

TEST_CASE("ensemble: one prompt, identical prompts and the analytic mean") {
  const auto a = unit({1, 2, 2});
  const auto b = unit({0, 3, 4});
  const ClassAnchors one = ensemble_class_embeddings(bank_from(2, 1, {a, b}), EnsembleMode::mean());
  for (int d = 0; d < 3; ++d) {
    CHECK(one.matrix(0, d) == doctest::Approx(a[d]).epsilon(1e-15));
    CHECK(one.matrix(1, d) == doctest::Approx(b[d]).epsilon(1e-15));
  }

  const ClassAnchors copies =
      ensemble_class_embeddings(bank_from(2, 3, {a, a, a, b, b, b}), EnsembleMode::mean());
  for (int d = 0; d < 3; ++d) {
    CHECK(copies.matrix(0, d) == doctest::Approx(a[d]).epsilon(1e-15));
    CHECK(copies.matrix(1, d) == doctest::Approx(b[d]).epsilon(1e-15));
  }

  const ClassAnchors mean =
      ensemble_class_embeddings(bank_from(2, 2, {{1, 0}, {0, 1}, {1, 0}, {1, 0}}), EnsembleMode::mean());
  CHECK(mean.matrix(0, 0) == doctest::Approx(std::sqrt(2.0) / 2));
  CHECK(mean.matrix(0, 1) == doctest::Approx(std::sqrt(2.0) / 2));
  CHECK(mean.matrix(1, 0) == doctest::Approx(1.0));

  const ClassAnchors pick =
      ensemble_class_embeddings(bank_from(2, 2, {{1, 0}, {0, 1}, {1, 0}, {0.6, 0.8}}), EnsembleMode::single(1));
  CHECK(pick.matrix(0, 1) == doctest::Approx(1.0));
  CHECK(pick.matrix(1, 1) == doctest::Approx(0.8));
  CHECK_THROWS_AS(ensemble_class_embeddings(bank_from(2, 1, {a, b}), EnsembleMode::single(1)),
                  ZeroShotError);
}

TEST_CASE("antipodal prompts are a degenerate ensemble") {
  const PromptBank bank = bank_from(2, 2, {{1, 0}, {-1, 0}, {0, 1}, {0, 1}});
  CHECK_THROWS_WITH_AS(ensemble_class_embeddings(bank, EnsembleMode::mean()),
                       doctest::Contains("degenerate ensemble"), ZeroShotError);
}

TEST_CASE("prompt bank invariants") {
  CHECK_THROWS_AS(bank_from(2, 1, {{1, 0}, {2, 0}}), ZeroShotError);
  CHECK_THROWS_AS(bank_from(1, 1, {{1, 0}}), ZeroShotError);
  CHECK_THROWS_AS(PromptBank(2, 0, 2, {}), ZeroShotError);
}

TEST_CASE("compute_logits: basis projection, orthogonality, naive oracle, linearity") {
  ClassAnchors basis{MatrixD(2, 2, {1, 0, 0, 1})};
  const MatrixD l = compute_logits(MatrixF(1, 2, {0.6f, 0.8f}), basis);
  CHECK(l(0, 0) == doctest::Approx(0.6).epsilon(1e-7));
  CHECK(l(0, 1) == doctest::Approx(0.8).epsilon(1e-7));

  ClassAnchors flat{MatrixD(2, 3, {1, 0, 0, 0, 1, 0})};
  const MatrixD zero = compute_logits(MatrixF(1, 3, {0, 0, 1}), flat);
  CHECK(zero(0, 0) == 0.0);
  CHECK(zero(0, 1) == 0.0);

  CounterRng rng(8);
  MatrixF z(2, 3);
  for (float& v : z.values()) v = static_cast<float>(rng.normal());
  MatrixD anchors(4, 3);
  for (double& v : anchors.values()) v = rng.normal();
  const MatrixD got = compute_logits(z, ClassAnchors{anchors});
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 4; ++c) {
      double acc = 0.0;
      for (std::size_t d = 0; d < 3; ++d) acc += double(z(i, d)) * anchors(c, d);
      CHECK(got(i, c) == doctest::Approx(acc).epsilon(1e-12));
    }
  }

  MatrixF scaled = z;
  for (float& v : scaled.values()) v *= 2.0f;
  const MatrixD twice = compute_logits(scaled, ClassAnchors{anchors});
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(twice.values()[i] == doctest::Approx(2.0 * got.values()[i]).epsilon(1e-12));
  }

  CHECK_THROWS_AS(compute_logits(MatrixF(1, 2, {1, 0}), flat), ZeroShotError);
}

TEST_CASE("compute_logits on a store requires the unit-norm flag") {
  ClassAnchors basis{MatrixD(2, 2, {1, 0, 0, 1})};
  tensorio::EmbeddingStore s;
  s.matrix = MatrixF(1, 2, {0.6f, 0.8f});
  CHECK_THROWS_AS(compute_logits(s, basis), ZeroShotError);
  s.header.flags = tensorio::kFlagUnitNorm;
  CHECK_NOTHROW(compute_logits(s, basis));
}

TEST_CASE("teacher_predict: default temperature, uniform rows, closed form") {
  CHECK(kDefaultTemperature == 0.01);
  CHECK(probe::TrainConfig{}.temperature == 0.01);

  const TeacherOutput uniform = teacher_predict(MatrixD(1, 4, 0.3));
  CHECK(uniform.confidence[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(uniform.pseudo_label[0] == 0);
  CHECK(uniform.temperature == 0.01);

  const TeacherOutput two = teacher_predict(MatrixD(1, 2, {1.0, 0.0}), 1.0);
  CHECK(two.confidence[0] == doctest::Approx(std::numbers::e / (1.0 + std::numbers::e)).epsilon(1e-15));
  CHECK(two.confidence[0] == doctest::Approx(0.731059).epsilon(1e-6));
  CHECK(two.pseudo_label[0] == 0);
  CHECK_THROWS_AS(teacher_predict(MatrixD(1, 2, 0.0), 0.0), ZeroShotError);
}

TEST_CASE("teacher_predict invariants over random logits") {
  CounterRng rng(21);
  for (int t = 0; t < 50; ++t) {
    const std::size_t c = 2 + rng.index(15);
    MatrixD logits(3, c);
    for (double& v : logits.values()) v = rng.uniform(-1, 1);
    const TeacherOutput out = teacher_predict(logits);
    MatrixD shifted = logits;
    for (std::size_t j = 0; j < c; ++j) shifted(1, j) += 0.37;
    const TeacherOutput sh = teacher_predict(shifted);
    const TeacherOutput warm = teacher_predict(logits, 0.05);
    const TeacherOutput hot = teacher_predict(logits, 0.5);
    for (std::size_t i = 0; i < 3; ++i) {
      double sum = 0.0;
      double best = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        sum += out.probs(i, j);
        best = std::max(best, out.probs(i, j));
        CHECK(sh.probs(i, j) == doctest::Approx(out.probs(i, j)).epsilon(1e-9));
      }
      CHECK(std::abs(sum - 1.0) < 1e-6);
      CHECK(out.confidence[i] == best);
      CHECK(out.confidence[i] == out.probs(i, out.pseudo_label[i]));
      CHECK(warm.pseudo_label[i] == out.pseudo_label[i]);
      CHECK(hot.pseudo_label[i] == out.pseudo_label[i]);
      CHECK(out.confidence[i] >= warm.confidence[i]);
      CHECK(warm.confidence[i] > hot.confidence[i]);
    }
  }
}

TEST_CASE("select_best_prompt: single prompt, constructed fixture, ties, missing labels") {
  const auto a = unit({1, 0.2, 0});
  const auto b = unit({0.1, 1, 0});
  const MatrixF embs = to_f({a, b});
  const std::vector<std::int64_t> labels{0, 1};
  CHECK(select_best_prompt(bank_from(2, 1, {a, b}), embs, labels).best == 0);

  // Separable set: class c clusters around axis c. Prompt 0 anchors are the
  // class means shifted one class over; prompt 1 anchors are the class means.
  CounterRng rng(4);
  std::vector<std::vector<double>> points;
  std::vector<std::int64_t> y;
  std::vector<std::vector<double>> means(3, std::vector<double>(3, 0.0));
  for (int i = 0; i < 30; ++i) {
    const int c = i % 3;
    std::vector<double> p(3);
    for (int d = 0; d < 3; ++d) p[d] = (d == c ? 1.0 : 0.0) + 0.1 * rng.uniform(-1, 1);
    p = unit(p);
    for (int d = 0; d < 3; ++d) means[c][d] += p[d];
    points.push_back(p);
    y.push_back(c);
  }
  for (auto& m : means) m = unit(m);
  const PromptBank bank = bank_from(3, 2, {means[1], means[0], means[2], means[1], means[0], means[2]});
  const PromptSelection sel = select_best_prompt(bank, to_f(points), y);
  CHECK(sel.best == 1);
  REQUIRE(sel.accuracy.size() == 2);
  for (std::size_t p = 0; p < 2; ++p) {
    int hits = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      std::size_t pred = 0;
      double best = -2.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const auto anchor = bank.embedding(c, p);
        double dot = 0.0;
        for (int d = 0; d < 3; ++d) dot += float(points[i][d]) * anchor[d];
        if (dot > best) {
          best = dot;
          pred = c;
        }
      }
      hits += pred == static_cast<std::size_t>(y[i]) ? 1 : 0;
    }
    CHECK(sel.accuracy[p] == doctest::Approx(hits / 30.0).epsilon(1e-15));
  }
  CHECK(sel.accuracy[1] == 1.0);

  const PromptSelection tie = select_best_prompt(bank_from(2, 2, {a, a, b, b}), embs, labels);
  CHECK(tie.best == 0);
  CHECK(tie.accuracy[0] == tie.accuracy[1]);

  const std::vector<std::int64_t> unknown{0, -1};
  CHECK_THROWS_WITH_AS(select_best_prompt(bank_from(2, 1, {a, b}), embs, unknown),
                       doctest::Contains("selection requires labels"), ZeroShotError);
}

TEST_CASE("per-prompt accuracy table CSV and prompt bank store round trip") {
  lpclip::testing::TempDir dir("pa");
  write_prompt_accuracy_csv({1, {0.5, 0.75}}, dir / "t.csv");
  CHECK(lpclip::testing::read_text(dir / "t.csv") == "prompt_index,accuracy\n0,0.5\n1,0.75\n");

  const PromptBank bank = bank_from(2, 2, {{1, 0}, {0, 1}, {0.6, 0.8}, {0.8, 0.6}});
  const tensorio::EmbeddingStore s = bank.to_store({"a", "b"});
  tensorio::write_store(s.matrix, s.manifest, dir / "p.lpce");
  const PromptBank back = PromptBank::from_store(tensorio::read_store(dir / "p.lpce"));
  CHECK(back.prompts() == 2);
  CHECK(back.embedding(1, 0)[1] == doctest::Approx(0.8).epsilon(1e-7));
}
