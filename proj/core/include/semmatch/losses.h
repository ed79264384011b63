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

// Pointwise losses on a cosine score in [-1, 1].
//
// Hinge losses with violation exponent m:
//   l+(s) = (-min(0, s - eps_plus))^m     purchased
//   l-(s) = max(0, s - eps_minus)^m       random (and impressed in Hinge2)
//   l0(s) = max(0, s - eps_zero)^m        impressed (Hinge3 only)
// Binary baselines treat impressed as a negative (y = 0). BCE maps the score
// to a probability with p = (s + 1) / 2.

#ifndef SEMMATCH_LOSSES_H_
#define SEMMATCH_LOSSES_H_

#include <cstdint>
#include <string_view>

namespace semmatch {

enum class Label3 : uint8_t { kPurchased = 0, kImpressed = 1, kRandom = 2 };

std::string_view Label3Name(Label3 label);
Label3 ParseLabel3(std::string_view name);

enum class LossKind { kMse, kMae, kBce, kHinge2, kHinge3 };

std::string_view LossKindName(LossKind kind);
LossKind ParseLossKind(std::string_view name);

struct LossSpec {
  LossKind kind = LossKind::kHinge3;
  int m = 2;
  double eps_plus = 0.9;
  double eps_minus = 0.2;
  double eps_zero = 0.55;

  void Validate() const;
};

// y = 1 for purchased, 0 otherwise.
inline int BinaryTarget(Label3 label) {
  return label == Label3::kPurchased ? 1 : 0;
}

double Hinge2(double score, int y, const LossSpec& spec);
double Hinge3(double score, Label3 label, const LossSpec& spec);
// MSE, MAE or BCE.
double Pointwise(double score, int y, const LossSpec& spec);

// Dispatches on spec.kind.
double Loss(double score, Label3 label, const LossSpec& spec);

// dLoss/dscore. At a hinge kink the flat side (0) is returned.
double LossGrad(double score, Label3 label, const LossSpec& spec);

}  // namespace semmatch

#endif  // SEMMATCH_LOSSES_H_
