/*
 * Copyright 2026 The semmatch Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "semmatch/losses.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "semmatch/error.h"

namespace semmatch {
namespace {

LossSpec Spec(LossKind kind, int m = 2) {
  LossSpec s;
  s.kind = kind;
  s.m = m;
  return s;
}

constexpr Label3 kLabels[] = {Label3::kPurchased, Label3::kImpressed,
                              Label3::kRandom};

TEST(Hinge2, WorkedValues) {
  EXPECT_EQ(Hinge2(0.95, 1, Spec(LossKind::kHinge2)), 0.0);
  EXPECT_NEAR(Hinge2(0.5, 1, Spec(LossKind::kHinge2, 2)), 0.16, 1e-15);
  EXPECT_NEAR(Hinge2(0.5, 0, Spec(LossKind::kHinge2, 1)), 0.3, 1e-15);
}

TEST(Hinge3, WorkedValues) {
  const LossSpec s = Spec(LossKind::kHinge3, 2);
  EXPECT_EQ(Hinge3(0.4, Label3::kImpressed, s), 0.0);
  EXPECT_NEAR(Hinge3(0.75, Label3::kImpressed, s), 0.04, 1e-15);
  EXPECT_EQ(Hinge3(0.1, Label3::kRandom, s), 0.0);
  EXPECT_NEAR(LossGrad(0.75, Label3::kImpressed, s), 0.4, 1e-15);
}

TEST(Pointwise, WorkedValues) {
  EXPECT_EQ(Pointwise(1.0, 1, Spec(LossKind::kMse)), 0.0);
  EXPECT_NEAR(Pointwise(0.3, 1, Spec(LossKind::kMae)), 0.7, 1e-15);
  EXPECT_NEAR(Pointwise(0.0, 1, Spec(LossKind::kBce)), std::log(2.0), 1e-15);
  EXPECT_NEAR(Pointwise(0.0, 0, Spec(LossKind::kBce)), std::log(2.0), 1e-15);
  EXPECT_NEAR(LossGrad(0.5, Label3::kPurchased, Spec(LossKind::kMse)), -1.0,
              1e-15);
}

TEST(Pointwise, BceClampsProbability) {
  const LossSpec s = Spec(LossKind::kBce);
  EXPECT_NEAR(Pointwise(-1.0, 1, s), -std::log(1e-7), 1e-9);
  EXPECT_TRUE(std::isfinite(Pointwise(1.0, 0, s)));
}

TEST(LossSpec, Validation) {
  LossSpec s;
  EXPECT_NO_THROW(s.Validate());
  s.m = 3;
  EXPECT_THROW(s.Validate(), Error);
  s = LossSpec();
  s.eps_zero = 0.1;  // below eps_minus
  EXPECT_THROW(s.Validate(), Error);
  s = Spec(LossKind::kHinge2);
  s.eps_zero = 0.1;  // irrelevant for the 2-part loss
  EXPECT_NO_THROW(s.Validate());
  s.eps_plus = 0.1;
  EXPECT_THROW(s.Validate(), Error);
}

TEST(LossNames, RoundTrip) {
  for (LossKind k : {LossKind::kMse, LossKind::kMae, LossKind::kBce,
                     LossKind::kHinge2, LossKind::kHinge3}) {
    EXPECT_EQ(ParseLossKind(LossKindName(k)), k);
  }
  for (Label3 l : kLabels) EXPECT_EQ(ParseLabel3(Label3Name(l)), l);
  EXPECT_THROW(ParseLossKind("hinge4"), Error);
  EXPECT_THROW(ParseLabel3("clicked"), Error);
}

TEST(LossProperties, ZeroBandsOfHinge3) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int m : {1, 2}) {
    const LossSpec s = Spec(LossKind::kHinge3, m);
    for (int i = 0; i < 20000; ++i) {
      const double y = u(rng);
      for (Label3 l : kLabels) {
        const bool zero = (l == Label3::kPurchased && y >= s.eps_plus) ||
                          (l == Label3::kImpressed && y <= s.eps_zero) ||
                          (l == Label3::kRandom && y <= s.eps_minus);
        EXPECT_EQ(Hinge3(y, l, s) == 0.0, zero) << y;
      }
    }
  }
}

TEST(LossProperties, ZeroBandsOfHinge2) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int m : {1, 2}) {
    const LossSpec s = Spec(LossKind::kHinge2, m);
    for (int i = 0; i < 20000; ++i) {
      const double y = u(rng);
      EXPECT_EQ(Hinge2(y, 1, s) == 0.0, y >= s.eps_plus);
      EXPECT_EQ(Hinge2(y, 0, s) == 0.0, y <= s.eps_minus);
    }
  }
}

TEST(LossProperties, MonotoneAndNonNegative) {
  for (LossKind k : {LossKind::kMse, LossKind::kMae, LossKind::kBce,
                     LossKind::kHinge2, LossKind::kHinge3}) {
    for (int m : {1, 2}) {
      const LossSpec s = Spec(k, m);
      for (Label3 l : kLabels) {
        double prev = Loss(-1.0, l, s);
        for (int i = 1; i <= 2000; ++i) {
          const double y = -1.0 + i / 1000.0;
          const double cur = Loss(y, l, s);
          EXPECT_GE(cur, 0.0);
          const bool hinge = k == LossKind::kHinge2 || k == LossKind::kHinge3;
          if (hinge && l == Label3::kPurchased) EXPECT_LE(cur, prev);
          if (hinge && l != Label3::kPurchased) EXPECT_GE(cur, prev);
          prev = cur;
        }
      }
    }
  }
}

TEST(LossProperties, Hinge3DegeneratesToHinge2) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int m : {1, 2}) {
    LossSpec h3 = Spec(LossKind::kHinge3, m);
    h3.eps_zero = h3.eps_minus;
    LossSpec h2 = Spec(LossKind::kHinge2, m);
    for (int i = 0; i < 5000; ++i) {
      const double y = u(rng);
      EXPECT_EQ(Hinge3(y, Label3::kRandom, h3), Hinge2(y, 0, h2));
      EXPECT_EQ(Hinge3(y, Label3::kPurchased, h3), Hinge2(y, 1, h2));
      // Impressed relabeled Random.
      EXPECT_EQ(Hinge3(y, Label3::kRandom, h3),
                Loss(y, Label3::kImpressed, h2));
    }
  }
}

TEST(LossProperties, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-0.98, 0.98);
  const double h = 1e-6;
  for (LossKind k : {LossKind::kMse, LossKind::kMae, LossKind::kBce,
                     LossKind::kHinge2, LossKind::kHinge3}) {
    for (int m : {1, 2}) {
      const LossSpec s = Spec(k, m);
      const double kinks[] = {s.eps_plus, s.eps_minus, s.eps_zero, 0.0, 1.0};
      for (int i = 0; i < 3000; ++i) {
        const double y = u(rng);
        bool near_kink = false;
        for (double kink : kinks) near_kink |= std::abs(y - kink) < 1e-4;
        if (near_kink) continue;
        for (Label3 l : kLabels) {
          const double fd = (Loss(y + h, l, s) - Loss(y - h, l, s)) / (2 * h);
          const double g = LossGrad(y, l, s);
          EXPECT_NEAR(g, fd, 1e-8 * std::max(1.0, std::abs(g)))
              << LossKindName(k) << y;
        }
      }
    }
  }
}

TEST(LossProperties, KinkReturnsFlatSide) {
  const LossSpec s = Spec(LossKind::kHinge3, 1);
  EXPECT_EQ(LossGrad(s.eps_plus, Label3::kPurchased, s), 0.0);
  EXPECT_EQ(LossGrad(s.eps_zero, Label3::kImpressed, s), 0.0);
  EXPECT_EQ(LossGrad(s.eps_minus, Label3::kRandom, s), 0.0);
}

}  // namespace
}  // namespace semmatch
