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

#include "batchpref/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace batchpref {

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences,
                                    int exact_limit) {
  std::vector<double> d;
  for (double x : differences)
    if (x != 0.0) d.push_back(x);

  WilcoxonResult out;
  out.n_used = static_cast<int>(d.size());
  const int n = out.n_used;
  if (n == 0) return out;

  std::vector<int> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return std::abs(d[a]) < std::abs(d[b]); });

  // Doubled average ranks are integers, which keeps the exact null a
  // distribution over integer sums.
  std::vector<int> rank2(d.size());
  double tie_term = 0.0;
  for (int i = 0; i < n;) {
    int j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const int doubled = (i + 1) + (j + 1);  // 2 * average of ranks i+1..j+1
    for (int k = i; k <= j; ++k) rank2[order[k]] = doubled;
    const double t = j - i + 1;
    tie_term += t * t * t - t;
    i = j + 1;
  }

  int w2_plus = 0;
  for (int i = 0; i < n; ++i)
    if (d[i] > 0.0) w2_plus += rank2[i];
  out.w_plus = w2_plus / 2.0;

  if (n <= exact_limit) {
    const int total = std::accumulate(rank2.begin(), rank2.end(), 0);
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (int r : rank2) {
      for (int s = total; s >= r; --s) count[s] += count[s - r];
    }
    double tail = 0.0;
    for (int s = w2_plus; s <= total; ++s) tail += count[s];
    out.p_greater = tail / std::ldexp(1.0, n);
    out.exact = true;
    return out;
  }

  const double nn = n;
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  out.exact = false;
  if (var <= 0.0) {
    out.p_greater = out.w_plus > mean ? 0.0 : 1.0;
    return out;
  }
  const double z = (out.w_plus - mean - 0.5) / std::sqrt(var);
  out.p_greater = 0.5 * std::erfc(z / std::sqrt(2.0));
  return out;
}

}  // namespace batchpref
