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

#include "batchpref/acquisition.hpp"

#include <algorithm>

namespace batchpref {

std::string_view to_string(ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kEntropy:
      return "entropy";
    case ScoreKind::kVolume:
      return "volume";
    case ScoreKind::kInformationGain:
      return "information_gain";
    case ScoreKind::kClippedVolume:
      return "clipped_volume";
  }
  return "?";
}

ScoreKind score_kind_from_string(std::string_view name) {
  if (name == "entropy") return ScoreKind::kEntropy;
  if (name == "volume") return ScoreKind::kVolume;
  if (name == "information_gain" || name == "information-gain")
    return ScoreKind::kInformationGain;
  if (name == "clipped_volume" || name == "clipped-volume")
    return ScoreKind::kClippedVolume;
  throw ConfigurationError("unknown score kind '" + std::string(name) + "'");
}

std::vector<QueryScore> score_pool(const PointSet& pool_psi,
                                   const PosteriorSamples& posterior) {
  require(pool_psi.rows() > 0, "score_pool: empty pool");
  require(posterior.count() > 0, "score_pool: empty posterior sample set");
  require(pool_psi.cols() == posterior.dim(), "score_pool: dimension mismatch");

  const Eigen::Index num_candidates = pool_psi.rows();
  const auto num_samples = static_cast<double>(posterior.count());
  std::vector<QueryScore> out(static_cast<std::size_t>(num_candidates));

  // Margins are formed a block of candidates at a time to bound memory at
  // large K: block is (samples x candidates).
  constexpr Eigen::Index kBlock = 256;
  Eigen::MatrixXd margins;
  for (Eigen::Index start = 0; start < num_candidates; start += kBlock) {
    const Eigen::Index n = std::min(kBlock, num_candidates - start);
    margins.noalias() =
        posterior.samples * pool_psi.middleRows(start, n).transpose();
    for (Eigen::Index c = 0; c < n; ++c) {
      double prob_sum = 0.0;
      double entropy_sum = 0.0;
      double removed_pos = 0.0;  // sum of 1 - min(1, exp(x))
      double removed_neg = 0.0;  // sum of 1 - min(1, exp(-x))
      for (Eigen::Index m = 0; m < margins.rows(); ++m) {
        const double x = margins(m, c);
        const double z = std::abs(x);
        const double tail = std::exp(-z);  // e^{-|x|}
        const double p_minor = tail / (1.0 + tail);
        prob_sum += x >= 0.0 ? 1.0 - p_minor : p_minor;
        entropy_sum += std::log1p(tail) + p_minor * z;
        // 1 - min(1, e^{x}) is nonzero only on the side where x < 0.
        if (x < 0.0)
          removed_pos += 1.0 - tail;
        else
          removed_neg += 1.0 - tail;
      }
      QueryScore& s = out[static_cast<std::size_t>(start + c)];
      s.mean_prob_positive = prob_sum / num_samples;
      s.volume_removal =
          std::min(s.mean_prob_positive, 1.0 - s.mean_prob_positive);
      s.entropy_bits = entropy_sum / num_samples / std::numbers::ln2;
      s.information_gain_bits = std::max(
          0.0, binary_entropy_bits(s.mean_prob_positive) - s.entropy_bits);
      s.clipped_volume_removal =
          std::min(removed_pos, removed_neg) / num_samples;
    }
  }
  return out;
}

double ranking_value(const QueryScore& score, ScoreKind kind) {
  switch (kind) {
    case ScoreKind::kEntropy:
      return score.entropy_bits;
    case ScoreKind::kVolume:
      return score.volume_removal;
    case ScoreKind::kInformationGain:
      return score.information_gain_bits;
    case ScoreKind::kClippedVolume:
      return score.clipped_volume_removal;
  }
  return score.entropy_bits;
}

std::vector<double> ranking_values(const std::vector<QueryScore>& scores,
                                   ScoreKind kind) {
  std::vector<double> out;
  out.reserve(scores.size());
  for (const auto& s : scores) out.push_back(ranking_value(s, kind));
  return out;
}

}  // namespace batchpref
