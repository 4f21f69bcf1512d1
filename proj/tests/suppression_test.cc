// Copyright 2026 The NES Authors
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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nes/suppression.h"
#include "test_support.h"

namespace nes {
namespace {

using testing::code_of;
using testing::Gen;

SuppressionConfig fixed(double tau) { return {SuppressionStrategy::kFixedThreshold, tau}; }
SuppressionConfig top_k() { return {SuppressionStrategy::kTopK}; }
SuppressionConfig top_k_minus_one() { return {SuppressionStrategy::kTopKMinusOne}; }
SuppressionConfig proportional(double p) {
  return {SuppressionStrategy::kProportional, std::nullopt, kDefaultLambda, p};
}

// Stable ranking oracle: sort indices by (score desc, index asc).
std::vector<std::size_t> oracle_top(const std::vector<double>& s, std::size_t n) {
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return s[a] > s[b]; });
  idx.resize(std::min(n, idx.size()));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<double> oracle_scores(const PrefixFeatures& p, const std::vector<Embedding>& neg) {
  std::vector<double> best(p.length(), 0.0);
  for (const auto& q : neg) {
    std::vector<double> e(p.length());
    double z = 0;
    for (std::size_t t = 0; t < p.length(); ++t) {
      double s = 0;
      for (std::size_t c = 0; c < p.width(); ++c) s += q[c] * p.token(t)[c];
      e[t] = std::exp(s / std::sqrt(double(p.width())));
      z += e[t];
    }
    for (std::size_t t = 0; t < p.length(); ++t) best[t] = std::max(best[t], e[t] / z);
  }
  return best;
}

TEST(Select, TopKExample) {
  const std::vector<double> s = {0.1, 0.4, 0.3, 0.2};
  EXPECT_EQ(select_tokens(s, 2, top_k()), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(select_tokens(s, 2, top_k_minus_one()), (std::vector<std::size_t>{1}));
  EXPECT_EQ(select_tokens(s, 2, fixed(0.25)), (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(select_tokens(s, 2, proportional(0.5)), (std::vector<std::size_t>{1, 2}));
}

TEST(Select, FixedThresholdIsStrict) {
  const std::vector<double> s = {0.25, 0.5, 0.25000001};
  EXPECT_EQ(select_tokens(s, 1, fixed(0.25)), (std::vector<std::size_t>{1, 2}));
  EXPECT_TRUE(select_tokens(s, 1, fixed(0.5)).empty());
}

TEST(Select, TiesGoToLowerIndex) {
  const std::vector<double> s = {0.2, 0.5, 0.2, 0.5, 0.2};
  EXPECT_EQ(select_tokens(s, 1, top_k()), (std::vector<std::size_t>{1}));
  EXPECT_EQ(select_tokens(s, 3, top_k()), (std::vector<std::size_t>{0, 1, 3}));
}

TEST(Select, ProportionalRounding) {
  std::vector<double> s(100, 0.0);
  s[42] = 1.0;
  EXPECT_EQ(select_tokens(s, 1, proportional(0.01)), (std::vector<std::size_t>{42}));
  EXPECT_EQ(select_tokens(std::vector<double>(10, 0.0), 1, proportional(0.01)).size(), 1u);
  EXPECT_EQ(select_tokens(std::vector<double>(10, 0.0), 1, proportional(0.11)).size(), 2u);
  EXPECT_EQ(select_tokens(std::vector<double>(10, 0.0), 1, proportional(1.0)).size(), 10u);
}

TEST(Select, CardinalityContracts) {
  Gen g(1);
  for (int i = 0; i < 3000; ++i) {
    const std::size_t l = g.range(1, 40), n = g.range(0, 12);
    std::vector<double> s(l);
    for (auto& x : s) x = g.coin(0.3) ? 0.5 : g.uniform();
    EXPECT_EQ(select_tokens(s, n, top_k()), oracle_top(s, n));
    EXPECT_EQ(select_tokens(s, n, top_k_minus_one()), oracle_top(s, n == 0 ? 0 : n - 1));
    const double p = g.uniform(1e-3, 1.0);
    const auto prop = select_tokens(s, n, proportional(p));
    const std::size_t want =
        std::clamp<std::size_t>(std::size_t(std::ceil(p * l - 1e-9)), 1, l);
    EXPECT_EQ(prop, oracle_top(s, want));
    const double tau = g.uniform();
    const auto thr = select_tokens(s, n, fixed(tau));
    for (std::size_t t = 0; t < l; ++t) {
      EXPECT_EQ(std::binary_search(thr.begin(), thr.end(), t), s[t] > tau);
    }
  }
}

TEST(Config, Validation) {
  EXPECT_EQ(code_of([] { SuppressionConfig{}.validate(); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { SuppressionConfig{SuppressionStrategy::kTopK, 0.3}.validate(); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { proportional(0.0).validate(); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { proportional(1.5).validate(); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { SuppressionConfig{SuppressionStrategy::kProportional}.validate(); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] {
              SuppressionConfig{SuppressionStrategy::kTopK, std::nullopt, 1.2}.validate();
            }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { fixed(NAN).validate(); }), ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { select_tokens(std::vector<double>{1}, 1, SuppressionConfig{}); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([] { parse_suppression_strategy("top-3"); }), ErrorCode::kInvalidConfig);
  for (auto s : {SuppressionStrategy::kFixedThreshold, SuppressionStrategy::kTopK,
                 SuppressionStrategy::kTopKMinusOne, SuppressionStrategy::kProportional}) {
    EXPECT_EQ(parse_suppression_strategy(to_string(s)), s);
  }
}

TEST(Score, SingleTokenPrefixScoresOne) {
  Gen g(2);
  const auto p = g.prefix(1, 6);
  const auto s = score_negative_attention(p, std::vector<Embedding>{g.unit(6), g.unit(6)});
  EXPECT_EQ(s, (std::vector<double>{1.0}));
}

TEST(Score, AlignedTokenScoresHighest) {
  // Orthonormal tokens; the negative entity is token 2.
  std::vector<double> v(4 * 4, 0.0);
  for (int t = 0; t < 4; ++t) v[t * 4 + t] = 1.0;
  const PrefixFeatures p(4, 4, v);
  const Embedding neg(std::vector<float>{0, 0, 1, 0});
  const auto s = score_negative_attention(p, std::vector<Embedding>{neg});
  const double hi = std::exp(0.5) / (std::exp(0.5) + 3.0), lo = 1.0 / (std::exp(0.5) + 3.0);
  ASSERT_EQ(s.size(), 4u);
  for (int t = 0; t < 4; ++t) EXPECT_NEAR(s[t], t == 2 ? hi : lo, 1e-12);
  EXPECT_EQ(select_tokens(s, 1, top_k()), (std::vector<std::size_t>{2}));
}

TEST(Score, MatchesOracleAndBounds) {
  Gen g(3);
  for (int i = 0; i < 500; ++i) {
    const std::size_t l = g.range(1, 12), d = g.range(1, 16), n = g.range(0, 5);
    const auto p = g.prefix(l, d);
    std::vector<Embedding> neg;
    for (std::size_t j = 0; j < n; ++j) neg.push_back(g.unit(d));
    const auto s = score_negative_attention(p, neg);
    const auto want = oracle_scores(p, neg);
    ASSERT_EQ(s.size(), l);
    for (std::size_t t = 0; t < l; ++t) {
      EXPECT_NEAR(s[t], want[t], 1e-9);
      EXPECT_GE(s[t], 0.0);
      EXPECT_LE(s[t], 1.0);
    }
    if (n == 0) EXPECT_EQ(s, std::vector<double>(l, 0.0));
    for (const auto& row : negative_attention(p, neg)) {
      EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
    }
  }
  EXPECT_EQ(code_of([&] {
              score_negative_attention(g.prefix(2, 3), std::vector<Embedding>{g.unit(4)});
            }),
            ErrorCode::kDimMismatch);
}

TEST(Suppress, IdentityAnnihilationLocality) {
  Gen g(4);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t l = g.range(1, 12), d = g.range(1, 8);
    const auto p = g.prefix(l, d);
    std::vector<std::size_t> sel;
    for (std::size_t t = 0; t < l; ++t)
      if (g.coin()) sel.push_back(t);
    EXPECT_EQ(suppress(p, sel, 1.0), p);
    const auto zero = suppress(p, sel, 0.0);
    const double lambda = g.uniform();
    const auto out = suppress(p, sel, lambda);
    for (std::size_t t = 0; t < l; ++t) {
      const bool hit = std::binary_search(sel.begin(), sel.end(), t);
      for (std::size_t c = 0; c < d; ++c) {
        if (hit) {
          EXPECT_EQ(zero.token(t)[c], 0.0);
          EXPECT_NEAR(out.token(t)[c], lambda * p.token(t)[c], 1e-12);
        } else {
          EXPECT_EQ(out.token(t)[c], p.token(t)[c]);
        }
      }
    }
  }
}

TEST(Suppress, Composition) {
  Gen g(5);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t l = g.range(1, 10);
    const auto p = g.prefix(l, 4);
    std::vector<std::size_t> sel;
    for (std::size_t t = 0; t < l; ++t)
      if (g.coin()) sel.push_back(t);
    const double a = g.uniform(), b = g.uniform();
    const auto twice = suppress(suppress(p, sel, a), sel, b);
    const auto once = suppress(p, sel, a * b);
    for (std::size_t k = 0; k < p.flat().size(); ++k) EXPECT_NEAR(twice.flat()[k], once.flat()[k], 1e-7);
  }
}

TEST(Suppress, Errors) {
  const auto p = PrefixFeatures::zeros(3, 2);
  EXPECT_EQ(code_of([&] { suppress(p, std::vector<std::size_t>{3}, 0.5); }),
            ErrorCode::kIndexOutOfRange);
  EXPECT_EQ(code_of([&] { suppress(p, std::vector<std::size_t>{0}, -0.1); }),
            ErrorCode::kInvalidConfig);
  EXPECT_EQ(code_of([&] { suppress(p, std::vector<std::size_t>{}, 1.01); }),
            ErrorCode::kInvalidConfig);
}

TEST(Report, JsonAndInvariants) {
  SuppressionReport r{{0.1, 0.9}, {1}, 0.3};
  EXPECT_EQ(to_json(r).dump(), R"({"lambda":0.3,"scores":[0.1,0.9],"selected":[1]})");
  EXPECT_EQ(check_invariants(r, 2), "");
  EXPECT_NE(check_invariants(r, 3), "");
  r.selected = {1, 1};
  EXPECT_NE(check_invariants(r, 2), "");
  r.selected = {2};
  EXPECT_NE(check_invariants(r, 2), "");
  r.selected = {};
  r.lambda_applied = 1.5;
  EXPECT_NE(check_invariants(r, 2), "");
}

}  // namespace
}  // namespace nes
