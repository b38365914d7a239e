// Copyright 2026 The gatedctr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gatedctr/sparse_gated_attention.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "gatedctr/gradcheck.h"
#include "test_util.h"

namespace gatedctr {
namespace {

using Matrix = std::vector<std::vector<double>>;

Matrix ToMatrix(const Tensor& t) {
  const std::size_t r = t.dim(0), c = t.dim(1);
  Matrix m(r, std::vector<double>(c));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) m[i][j] = t.data()[i * c + j];
  }
  return m;
}

std::vector<double> RowTimes(const std::vector<double>& x, const Matrix& w) {
  std::vector<double> y(w[0].size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += x[i] * w[i][j];
  }
  return y;
}

// Straight-loop evaluation of gated multi-head target attention for one
// query, written from the definition.
std::vector<double> LoopAttention(const AttentionParams& p,
                                  const std::vector<double>& query,
                                  const Matrix& seq,
                                  const std::vector<bool>& mask, bool gated,
                                  bool softmax) {
  const std::size_t H = p.num_heads, dk = p.head_dim;
  const Matrix wq = ToMatrix(p.w_query), wk = ToMatrix(p.w_key),
               wv = ToMatrix(p.w_value), wo = ToMatrix(p.w_out);
  const auto qp = RowTimes(query, wq);
  std::vector<double> concat(H * dk, 0.0);
  for (std::size_t h = 0; h < H; ++h) {
    std::vector<double> scores(seq.size());
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto k = RowTimes(seq[t], wk);
      double s = 0;
      for (std::size_t j = 0; j < dk; ++j) s += qp[2 * h * dk + j] * k[h * dk + j];
      scores[t] = s / std::sqrt(double(dk));
    }
    std::vector<double> w(seq.size(), 0.0);
    if (softmax) {
      double mx = -1e300, z = 0;
      for (std::size_t t = 0; t < seq.size(); ++t) {
        if (mask[t]) mx = std::max(mx, scores[t]);
      }
      for (std::size_t t = 0; t < seq.size(); ++t) {
        if (mask[t]) z += std::exp(scores[t] - mx);
      }
      for (std::size_t t = 0; t < seq.size(); ++t) {
        if (mask[t]) w[t] = std::exp(scores[t] - mx) / z;
      }
    } else {
      for (std::size_t t = 0; t < seq.size(); ++t) {
        if (mask[t]) w[t] = 1.0 / (1.0 + std::exp(-scores[t]));
      }
    }
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const auto v = RowTimes(seq[t], wv);
      for (std::size_t j = 0; j < dk; ++j) concat[h * dk + j] += w[t] * v[h * dk + j];
    }
    if (gated) {
      for (std::size_t j = 0; j < dk; ++j) {
        concat[h * dk + j] *= 1.0 / (1.0 + std::exp(-qp[2 * h * dk + dk + j]));
      }
    }
  }
  return RowTimes(concat, wo);
}

struct Fixture {
  AttentionParams params;
  Tensor query;
  Tensor sequence;
  std::vector<bool> mask;
};

Fixture MakeFixture(std::uint64_t seed, std::size_t len, std::size_t d = 6,
                    std::size_t heads = 2, std::size_t dk = 3) {
  Rng rng(seed);
  Fixture f;
  f.params = AttentionParams::Create(d, heads, dk, rng);
  std::mt19937_64 r(seed + 100);
  f.query = Tensor::FromData({d}, testing::RandomValues(d, r, -2, 2));
  f.sequence = Tensor::FromData({len, d}, testing::RandomValues(len * d, r, -2, 2));
  f.mask.assign(len, true);
  return f;
}

TEST(AttentionTest, ProjectionShapes) {
  Rng rng(1);
  const AttentionParams p = AttentionParams::Create(8, 2, 4, rng);
  EXPECT_EQ(p.w_query.shape(), (Shape{8, 16}));
  EXPECT_EQ(p.w_key.shape(), (Shape{8, 8}));
  EXPECT_EQ(p.w_value.shape(), (Shape{8, 8}));
  EXPECT_EQ(p.w_out.shape(), (Shape{8, 8}));
  EXPECT_THROW(AttentionParams::Create(8, 0, 4, rng), std::invalid_argument);
}

TEST(AttentionTest, MatchesLoopOracleForAllModes) {
  for (std::uint64_t seed : {1, 2, 3}) {
    Fixture f = MakeFixture(seed, 5);
    f.mask = {true, false, true, true, false};
    const std::vector<double> q(f.query.data().begin(), f.query.data().end());
    const Matrix seq = ToMatrix(f.sequence);
    for (bool gated : {true, false}) {
      for (bool softmax : {true, false}) {
        AttentionOptions o;
        o.output_gate = gated;
        o.normalization = softmax ? AttentionNormalization::kSoftmax
                                  : AttentionNormalization::kSigmoid;
        const auto out = AttendSequence(f.params, f.query, f.sequence, f.mask, o);
        const auto want = LoopAttention(f.params, q, seq, f.mask, gated, softmax);
        for (std::size_t j = 0; j < want.size(); ++j) {
          EXPECT_NEAR(out.pooled.data()[j], want[j], 1e-12);
        }
      }
    }
  }
}

TEST(AttentionTest, WeightsAreZeroAtPaddingAndSumToOne) {
  Fixture f = MakeFixture(4, 6);
  f.mask = {true, true, false, true, false, false};
  const auto out = AttendSequence(f.params, f.query, f.sequence, f.mask);
  ASSERT_EQ(out.weights.shape(), (Shape{2, 6}));
  for (std::size_t h = 0; h < 2; ++h) {
    double s = 0;
    for (std::size_t t = 0; t < 6; ++t) {
      const double w = out.weights.data()[h * 6 + t];
      if (!f.mask[t]) EXPECT_EQ(w, 0.0);
      s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(AttentionTest, PaddedContentDoesNotLeak) {
  Fixture f = MakeFixture(5, 4);
  f.mask = {true, true, false, true};
  const auto a = AttendSequence(f.params, f.query, f.sequence, f.mask);
  Tensor changed = f.sequence.Clone();
  for (std::size_t j = 0; j < 6; ++j) changed.mutable_data()[2 * 6 + j] = 1e3;
  const auto b = AttendSequence(f.params, f.query, changed, f.mask);
  EXPECT_LT(testing::MaxAbsDiff(a.pooled.data(), b.pooled.data()), 1e-12);
}

TEST(AttentionTest, EmptyAndFullyMaskedSequencesPoolToZero) {
  Fixture f = MakeFixture(6, 3);
  const auto empty = AttendSequence(f.params, f.query, Tensor(), {});
  for (double v : empty.pooled.data()) EXPECT_EQ(v, 0.0);
  const auto masked =
      AttendSequence(f.params, f.query, f.sequence, {false, false, false});
  for (double v : masked.pooled.data()) EXPECT_EQ(v, 0.0);
}

TEST(AttentionTest, PermutationInvariant) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Fixture f = MakeFixture(10 + trial, 7);
    std::vector<std::size_t> perm(7);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> shuffled;
    for (std::size_t t : perm) {
      const auto row = f.sequence.data().subspan(t * 6, 6);
      shuffled.insert(shuffled.end(), row.begin(), row.end());
    }
    const auto a = AttendSequence(f.params, f.query, f.sequence, f.mask);
    const auto b = AttendSequence(f.params, f.query,
                                  Tensor::FromData({7, 6}, shuffled), f.mask);
    EXPECT_LT(testing::MaxAbsDiff(a.pooled.data(), b.pooled.data()), 1e-12);
  }
}

TEST(AttentionTest, ClosedGateSilencesAnySequence) {
  AttentionOptions closed;
  closed.gate_logit_override = -30.0;
  Fixture f = MakeFixture(8, 5);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor seq =
        Tensor::FromData({5, 6}, testing::RandomValues(30, rng, -5, 5));
    const auto out = AttendSequence(f.params, f.query, seq, f.mask, closed);
    for (double v : out.pooled.data()) EXPECT_LT(std::abs(v), 1e-9);
  }
}

TEST(AttentionTest, OpenGateEqualsUngated) {
  Fixture f = MakeFixture(9, 4);
  AttentionOptions open;
  open.gate_logit_override = 800.0;
  AttentionOptions ungated;
  ungated.output_gate = false;
  const auto a = AttendSequence(f.params, f.query, f.sequence, f.mask, open);
  const auto b = AttendSequence(f.params, f.query, f.sequence, f.mask, ungated);
  EXPECT_LT(testing::MaxAbsDiff(a.pooled.data(), b.pooled.data()), 1e-15);
  for (double g : b.gates.data()) EXPECT_EQ(g, 1.0);
}

TEST(AttentionTest, BatchedFormMatchesPerRow) {
  Rng rng(3);
  const AttentionParams p = AttentionParams::Create(4, 2, 2, rng);
  std::mt19937_64 r(1);
  const Tensor table = Tensor::FromData({6, 4}, testing::RandomValues(24, r));
  const Tensor queries = Tensor::FromData({3, 4}, testing::RandomValues(12, r));
  const std::vector<std::vector<std::size_t>> rows = {{0, 5, 2}, {}, {3}};
  const auto out =
      GatedTargetAttention(p, queries, table, SequenceView::FromRows(rows));
  ASSERT_EQ(out.pooled.shape(), (Shape{3, 4}));
  for (std::size_t b = 0; b < 3; ++b) {
    std::vector<double> seq;
    for (std::size_t id : rows[b]) {
      const auto row = table.data().subspan(id * 4, 4);
      seq.insert(seq.end(), row.begin(), row.end());
    }
    const Tensor q = Tensor::FromData(
        {4}, {queries.data().begin() + b * 4, queries.data().begin() + b * 4 + 4});
    const auto single = AttendSequence(
        p, q,
        rows[b].empty() ? Tensor() : Tensor::FromData({rows[b].size(), 4}, seq),
        std::vector<bool>(rows[b].size(), true));
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(out.pooled.data()[b * 4 + j], single.pooled.data()[j], 1e-12);
    }
  }
}

TEST(AttentionTest, RejectsMismatchedShapes) {
  Fixture f = MakeFixture(1, 3);
  EXPECT_THROW(AttendSequence(f.params, f.query, f.sequence, {true}), ShapeError);
  EXPECT_THROW(AttendSequence(f.params, Tensor::Zeros({5}), f.sequence, f.mask),
               ShapeError);
}

TEST(AttentionTest, GradientsCheck) {
  Rng rng(21);
  AttentionParams p = AttentionParams::Create(4, 2, 2, rng);
  SwiGluFfn ts = SwiGluFfn::Create(4, 4, 0, rng);
  SwiGluFfn ss = SwiGluFfn::Create(4, 4, 0, rng);
  ParamList params;
  p.CollectParams("att", params);
  ts.CollectParams("ts", params);
  ss.CollectParams("ss", params);
  std::mt19937_64 r(2);
  Tensor target = testing::RandomTensor({4}, r, -2, 2);
  Tensor seq = testing::RandomTensor({5, 4}, r, -2, 2);
  params.emplace_back("target", target);
  params.emplace_back("seq", seq);
  for (auto& [n, t] : params) Tensor(t).set_requires_grad(true);
  const std::vector<bool> mask = {true, true, false, true, true};
  for (bool gated : {true, false}) {
    AttentionOptions o;
    o.output_gate = gated;
    auto loss = [&] {
      return Sum(Mul(SiftAndAttend(p, ts, ss, target, seq, mask, o).pooled,
                     Tensor::FromData({4}, {0.3, -1.1, 0.7, 2.0})));
    };
    for (const auto& res : CheckGradients(loss, params)) {
      EXPECT_TRUE(res.passed) << res.path << " gated=" << gated;
    }
  }
}

}  // namespace
}  // namespace gatedctr
