// tests/unit/distributions-test.cc

// Copyright 2026  seqrep authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "seqrep/distributions.h"
#include "seqrep/error.h"
#include "seqrep/gradcheck.h"
#include "seqrep/ops.h"
#include "seqrep/rng.h"

using namespace seqrep;

TEST_CASE("reparameterised sample") {
  DiagGaussian q{Tensor::Row({1, 2}), Tensor::Row({0, 0})};
  CHECK(ReparamSample(q, Tensor::Row({0, 0}), 1.0) == Tensor::Row({1, 2}));
  DiagGaussian z{Tensor::Row({0, 0}), Tensor::Row({0, 0})};
  Tensor s = ReparamSample(z, Tensor::Row({1, -1}), 0.1);
  CHECK(s[0] == doctest::Approx(0.1));
  CHECK(s[1] == doctest::Approx(-0.1));
  CHECK_THROWS_AS(ReparamSample(q, Tensor::Row({0, 0, 0}), 1.0), ShapeError);
}

TEST_CASE("sample mean converges to mu") {
  Rng rng(21);
  DiagGaussian q{Tensor::Row({0.3}), Tensor::Row({std::log(2.0)})};
  const int n = 1000000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += ReparamSample(q, Tensor::Row({rng.Normal()}), 1.0)[0];
  CHECK(std::abs(s / n - 0.3) <= 4.0 * std::sqrt(2.0) / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("closed-form KL values") {
  CHECK(KlToStandard(DiagGaussian::Standard(1, 5)) == 0.0);
  CHECK(KlToStandard(DiagGaussian{Tensor::Row({1}), Tensor::Row({0})}) == doctest::Approx(0.5));
  DiagGaussian q{Tensor::Row({1}), Tensor::Row({0})};
  CHECK(KlDiagDiag(q, DiagGaussian::Standard(1, 1)) == doctest::Approx(0.5));
  CHECK(KlDiagDiag(q, q) == 0.0);
  CHECK_THROWS_AS(KlDiagDiag(q, DiagGaussian::Standard(1, 2)), ShapeError);
}

TEST_CASE("kl to standard equals kl against an explicit standard normal") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    DiagGaussian q{rng.NormalTensor(1, 6), rng.UniformTensor(1, 6, -3, 3)};
    CHECK(std::abs(KlToStandard(q) - KlDiagDiag(q, DiagGaussian::Standard(1, 6))) <= 1e-12);
    CHECK(KlToStandard(q) >= -1e-12);
  }
}

TEST_CASE("gaussian log-likelihood") {
  CHECK(GaussianLogLik(Tensor::Row({1, 2}), Tensor::Row({1, 2})) == 0.0);
  CHECK(GaussianLogLik(Tensor::Row({1, 0}), Tensor::Row({0, 0})) == -0.5);
  Rng rng(3);
  Tensor x = rng.NormalTensor(4, 5), m = rng.NormalTensor(4, 5);
  double s = 0.0;
  for (int64_t r = 0; r < 4; ++r)
    for (int64_t c = 0; c < 5; ++c) s += (x(r, c) - m(r, c)) * (x(r, c) - m(r, c));
  CHECK(GaussianLogLik(x, m) == doctest::Approx(-0.5 * s).epsilon(1e-14));
}

TEST_CASE("graph KL ops match value versions and pass gradcheck") {
  Rng rng(8);
  Tensor mu = rng.NormalTensor(3, 4), lv = rng.UniformTensor(3, 4, -1, 1);
  Tensor mu2 = rng.NormalTensor(3, 4), lv2 = rng.UniformTensor(3, 4, -1, 1);
  Graph g;
  GaussianVar q{g.Constant(mu), g.Constant(lv)}, p{g.Constant(mu2), g.Constant(lv2)};
  CHECK(Sum(KlToStandard(q)).value().item() == doctest::Approx(KlToStandard({mu, lv})).epsilon(1e-14));
  CHECK(Sum(KlDiagDiag(q, p)).value().item() ==
        doctest::Approx(KlDiagDiag({mu, lv}, {mu2, lv2})).epsilon(1e-14));
  Var var_only = Sum(KlVarianceTerm(q));
  CHECK(var_only.value().item() ==
        doctest::Approx(KlToStandard({mu, lv}) - 0.5 * [&] {
          double s = 0;
          for (double v : mu.values()) s += v * v;
          return s;
        }()).epsilon(1e-13));

  Tensor packed = ConcatCols(std::vector<const Tensor *>{&mu, &lv});
  auto kl_std = [](Graph &, const Var &x) {
    return Sum(KlToStandard({SliceCols(x, 0, 4), ClampLogVar(SliceCols(x, 4, 8))}));
  };
  CHECK(GradCheck(kl_std, packed, 1e-6).max_rel_error <= 1e-4);
  auto kl_pair = [&](Graph &g2, const Var &x) {
    GaussianVar pp{g2.Constant(mu2), g2.Constant(lv2)};
    return Sum(KlDiagDiag({SliceCols(x, 0, 4), SliceCols(x, 4, 8)}, pp));
  };
  CHECK(GradCheck(kl_pair, packed, 1e-6).max_rel_error <= 1e-4);
  auto kl_prior_side = [&](Graph &g2, const Var &x) {
    GaussianVar qq{g2.Constant(mu2), g2.Constant(lv2)};
    return Sum(KlDiagDiag(qq, {SliceCols(x, 0, 4), SliceCols(x, 4, 8)}));
  };
  CHECK(GradCheck(kl_prior_side, packed, 1e-6).max_rel_error <= 1e-4);
}

TEST_CASE("gaussian dropout is a reparameterised sample") {
  Rng rng(12);
  const double gamma = 0.7;
  Tensor mu = rng.NormalTensor(1, 6);
  Tensor delta(1, 6);
  for (auto &d : delta.values()) d = 1.0 + gamma * rng.Normal();
  Tensor eps(1, 6), lv(1, 6);
  // sigma = gamma * |mu|, so the standard-normal noise carries the sign of mu.
  for (int64_t i = 0; i < 6; ++i) {
    eps[i] = (mu[i] < 0 ? -1.0 : 1.0) * (delta[i] - 1.0) / gamma;
    lv[i] = std::log(gamma * gamma * mu[i] * mu[i]);
  }
  for (int64_t i = 0; i < 6; ++i) {
    const double lhs = mu[i] * delta[i];
    CHECK(lhs == doctest::Approx(mu[i] + gamma * mu[i] * ((delta[i] - 1.0) / gamma)).epsilon(1e-15));
  }
  Tensor s = ReparamSample(DiagGaussian{mu, lv}, eps, 1.0);
  for (int64_t i = 0; i < 6; ++i) CHECK(s[i] == doctest::Approx(mu[i] * delta[i]).epsilon(1e-13));
}

TEST_CASE("prior store write-once, lookup and round trip") {
  PriorStore::Builder b(3);
  Rng rng(1);
  DiagGaussian q{rng.NormalTensor(4, 2), rng.NormalTensor(4, 2)};
  b.PutRows("utt1", q);
  b.Put("utt2", 0, {1.0, 2.0}, {0.0, 0.5});
  CHECK_THROWS_AS(b.Put("utt2", 0, {1.0, 2.0}, {0.0, 0.5}), ConfigError);
  PriorStore s = std::move(b).Finish();
  CHECK(s.size() == 5);
  CHECK(s.epoch_tag() == 3);
  CHECK_THROWS_AS(s.Lookup("utt2", 1), Error);
  CHECK_THROWS_AS(s.LookupSequence("utt1", 5), Error);
  DiagGaussian back = s.LookupSequence("utt1", 4);
  CHECK(back.mu == q.mu);
  CHECK(back.logvar == q.logvar);

  const auto path = std::filesystem::temp_directory_path() / "seqrep_prior_store_test.bin";
  s.Save(path.string());
  PriorStore loaded = PriorStore::Load(path.string());
  CHECK(loaded == s);
  std::filesystem::remove(path);
}
