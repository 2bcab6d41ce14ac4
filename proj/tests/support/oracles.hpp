// Copyright 2026 The simulst Authors
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

// Independent reference evaluations used by the tests. Each one follows the
// definitional sum directly (expanding commits token by token) rather than
// the closed forms in metrics.hpp, and none of them calls into metrics.hpp.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "simulst/timeline.hpp"

namespace simulst::oracle {

struct TokenTimes {
  std::vector<double> ideal;
  std::vector<double> wall;
  double source_ms = 0.0;
  std::size_t reference_len = 0;
};

inline TokenTimes expand(const EmissionLog& log) {
  TokenTimes t;
  t.source_ms = log.source_duration_ms();
  t.reference_len = log.reference_tokens() ? log.reference_tokens()->size() : 0;
  for (const auto& c : log.commits())
    for (std::size_t i = 0; i < c.tokens.size(); ++i) {
      t.ideal.push_back(c.ideal_delay_ms);
      t.wall.push_back(c.wall_delay_ms);
    }
  return t;
}

inline const std::vector<double>& pick(const TokenTimes& t, bool wall) { return wall ? t.wall : t.ideal; }

/// AL with normalizer length `len`: lag_j = d_j - (j-1) * T / len, averaged
/// over j = 1..tau where tau is the first ideal delay reaching T.
inline double al(const TokenTimes& t, bool wall, double len) {
  const auto& d = pick(t, wall);
  const std::size_t n = d.size();
  std::size_t tau = n;
  for (std::size_t j = 1; j <= n; ++j)
    if (t.ideal[j - 1] >= t.source_ms) {
      tau = j;
      break;
    }
  double total = 0.0;
  for (std::size_t j = 1; j <= tau; ++j) total += d[j - 1] - (static_cast<double>(j) - 1.0) * t.source_ms / len;
  return total / static_cast<double>(tau);
}

inline double ap(const TokenTimes& t, bool wall) {
  const auto& d = pick(t, wall);
  double total = 0.0;
  for (double x : d) total += x / t.source_ms;
  return total / static_cast<double>(d.size());
}

/// Unrolled DAL recursion: g_j = max over i <= j of d_i + (j - i) * T / N.
inline double dal(const TokenTimes& t, bool wall) {
  const auto& d = pick(t, wall);
  const double n = static_cast<double>(d.size());
  double total = 0.0;
  for (std::size_t j = 1; j <= d.size(); ++j) {
    double g = -1e300;
    for (std::size_t i = 1; i <= j; ++i)
      g = std::max(g, d[i - 1] + static_cast<double>(j - i) * t.source_ms / n);
    total += g - (static_cast<double>(j) - 1.0) * t.source_ms / n;
  }
  return total / n;
}

/// Source pseudo-token end times by walking the source in fixed steps.
inline std::vector<double> source_segment_ends(double source_ms, double segment_ms) {
  std::vector<double> ends;
  double t = 0.0;
  while (t < source_ms - 1e-9) {
    t += segment_ms;
    ends.push_back(std::min(t, source_ms));
  }
  return ends;
}

/// ATD with the capped one-to-one pairing: target j pairs with source min(j, |X|).
inline double atd(const std::vector<double>& source_ends, const std::vector<double>& target_ends) {
  double total = 0.0;
  for (std::size_t j = 0; j < target_ends.size(); ++j) {
    const std::size_t a = std::min(j, source_ends.size() - 1);
    total += target_ends[j] - source_ends[a];
  }
  return total / static_cast<double>(target_ends.size());
}

/// Random finalized log: N <= max_tokens tokens, T <= max_source_ms.
inline EmissionLog random_log(std::mt19937_64& rng, std::size_t max_tokens = 6, double max_source_ms = 3000.0,
                              bool with_reference = true) {
  std::uniform_real_distribution<double> t_dist(1.0, max_source_ms);
  const double T = std::round(t_dist(rng) * 1000.0) / 1000.0;
  std::uniform_int_distribution<std::size_t> n_dist(1, max_tokens);
  const std::size_t n = n_dist(rng);
  std::vector<double> ideal(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& d : ideal) d = u(rng) < 0.2 ? T : std::round(u(rng) * T * 1000.0) / 1000.0;
  std::sort(ideal.begin(), ideal.end());
  std::optional<TokenSeq> ref;
  if (with_reference) ref = TokenSeq(std::uniform_int_distribution<std::size_t>(1, 8)(rng), "r");
  EmissionLog log("rand", ref);
  double wall = 0.0;
  std::size_t j = 0;
  while (j < n) {
    // Group equal-or-adjacent delays into commits of 1..3 tokens.
    const std::size_t take = std::min<std::size_t>(n - j, std::uniform_int_distribution<std::size_t>(1, 3)(rng));
    const double d = ideal[j + take - 1];
    wall = std::max(wall, d) + std::round(u(rng) * 200.0);
    log.record_commit(TokenSeq(take, "t" + std::to_string(j)), d, wall);
    j += take;
  }
  log.finalize(T);
  return log;
}

}  // namespace simulst::oracle
