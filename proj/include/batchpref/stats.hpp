// Copyright 2026 The Authors.
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

#pragma once

#include <span>

namespace batchpref {

struct WilcoxonResult {
  int n_used = 0;          // pairs with nonzero difference
  double w_plus = 0.0;     // sum of ranks of positive differences
  double p_greater = 1.0;  // one-sided: differences tend to be positive
  bool exact = true;
};

// Wilcoxon signed-rank test on paired differences. Zero differences are
// dropped; tied magnitudes get average ranks. Exact null distribution up to
// `exact_limit` pairs, normal approximation with continuity and tie
// correction above it. No usable pairs gives p = 1.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences,
                                    int exact_limit = 25);

}  // namespace batchpref
