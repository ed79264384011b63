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

#include <algorithm>
#include <cmath>
#include <string>

#include "semmatch/error.h"

namespace semmatch {
namespace {

constexpr double kProbClamp = 1e-7;

double Power(double v, int m) { return m == 1 ? v : v * v; }

// Violation below `eps` (positive side) or above it (negative side).
double Below(double s, double eps) { return std::max(0.0, eps - s); }
double Above(double s, double eps) { return std::max(0.0, s - eps); }

// d/ds of Below(s, eps)^m and Above(s, eps)^m; 0 on the flat side and at the
// kink itself.
double BelowGrad(double s, double eps, int m) {
  const double v = Below(s, eps);
  if (v <= 0.0) return 0.0;
  return m == 1 ? -1.0 : -2.0 * v;
}
double AboveGrad(double s, double eps, int m) {
  const double v = Above(s, eps);
  if (v <= 0.0) return 0.0;
  return m == 1 ? 1.0 : 2.0 * v;
}

double BceProbability(double score) {
  return std::clamp((score + 1.0) / 2.0, kProbClamp, 1.0 - kProbClamp);
}

}  // namespace

std::string_view Label3Name(Label3 label) {
  switch (label) {
    case Label3::kPurchased:
      return "purchased";
    case Label3::kImpressed:
      return "impressed";
    case Label3::kRandom:
      return "random";
  }
  return "?";
}

Label3 ParseLabel3(std::string_view name) {
  if (name == "purchased") return Label3::kPurchased;
  if (name == "impressed") return Label3::kImpressed;
  if (name == "random") return Label3::kRandom;
  Fail(ErrorCode::kInvalidArgument, "unknown label '" + std::string(name) + "'");
}

std::string_view LossKindName(LossKind kind) {
  switch (kind) {
    case LossKind::kMse:
      return "mse";
    case LossKind::kMae:
      return "mae";
    case LossKind::kBce:
      return "bce";
    case LossKind::kHinge2:
      return "hinge2";
    case LossKind::kHinge3:
      return "hinge3";
  }
  return "?";
}

LossKind ParseLossKind(std::string_view name) {
  if (name == "mse") return LossKind::kMse;
  if (name == "mae") return LossKind::kMae;
  if (name == "bce") return LossKind::kBce;
  if (name == "hinge2") return LossKind::kHinge2;
  if (name == "hinge3") return LossKind::kHinge3;
  Fail(ErrorCode::kInvalidArgument,
       "unknown loss kind '" + std::string(name) + "'");
}

void LossSpec::Validate() const {
  if (kind != LossKind::kHinge2 && kind != LossKind::kHinge3) return;
  Require(m == 1 || m == 2, ErrorCode::kInvalidArgument,
          "loss: m must be 1 or 2");
  Require(-1.0 <= eps_minus && eps_plus <= 1.0 && eps_minus < eps_plus,
          ErrorCode::kInvalidArgument,
          "loss: thresholds must satisfy -1 <= eps_minus < eps_plus <= 1");
  if (kind == LossKind::kHinge3) {
    Require(eps_minus < eps_zero && eps_zero < eps_plus,
            ErrorCode::kInvalidArgument,
            "loss: hinge3 needs eps_minus < eps_zero < eps_plus");
  }
}

double Hinge2(double score, int y, const LossSpec& spec) {
  return y == 1 ? Power(Below(score, spec.eps_plus), spec.m)
                : Power(Above(score, spec.eps_minus), spec.m);
}

double Hinge3(double score, Label3 label, const LossSpec& spec) {
  switch (label) {
    case Label3::kPurchased:
      return Power(Below(score, spec.eps_plus), spec.m);
    case Label3::kImpressed:
      return Power(Above(score, spec.eps_zero), spec.m);
    case Label3::kRandom:
      return Power(Above(score, spec.eps_minus), spec.m);
  }
  return 0.0;
}

double Pointwise(double score, int y, const LossSpec& spec) {
  const double target = static_cast<double>(y);
  switch (spec.kind) {
    case LossKind::kMse:
      return (score - target) * (score - target);
    case LossKind::kMae:
      return std::abs(score - target);
    case LossKind::kBce: {
      const double p = BceProbability(score);
      return -(target * std::log(p) + (1.0 - target) * std::log(1.0 - p));
    }
    default:
      Fail(ErrorCode::kInvalidArgument,
           "Pointwise: loss kind must be mse, mae or bce");
  }
}

double Loss(double score, Label3 label, const LossSpec& spec) {
  switch (spec.kind) {
    case LossKind::kHinge2:
      return Hinge2(score, BinaryTarget(label), spec);
    case LossKind::kHinge3:
      return Hinge3(score, label, spec);
    default:
      return Pointwise(score, BinaryTarget(label), spec);
  }
}

double LossGrad(double score, Label3 label, const LossSpec& spec) {
  const int y = BinaryTarget(label);
  switch (spec.kind) {
    case LossKind::kHinge2:
      return y == 1 ? BelowGrad(score, spec.eps_plus, spec.m)
                    : AboveGrad(score, spec.eps_minus, spec.m);
    case LossKind::kHinge3:
      switch (label) {
        case Label3::kPurchased:
          return BelowGrad(score, spec.eps_plus, spec.m);
        case Label3::kImpressed:
          return AboveGrad(score, spec.eps_zero, spec.m);
        case Label3::kRandom:
          return AboveGrad(score, spec.eps_minus, spec.m);
      }
      return 0.0;
    case LossKind::kMse:
      return 2.0 * (score - y);
    case LossKind::kMae:
      if (score == y) return 0.0;
      return score > y ? 1.0 : -1.0;
    case LossKind::kBce: {
      const double raw = (score + 1.0) / 2.0;
      if (raw <= kProbClamp || raw >= 1.0 - kProbClamp) return 0.0;
      // dp/ds = 1/2.
      return 0.5 * (y == 1 ? -1.0 / raw : 1.0 / (1.0 - raw));
    }
  }
  return 0.0;
}

}  // namespace semmatch
