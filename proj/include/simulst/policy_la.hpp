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

// Local Agreement (LA-n): commit the longest common prefix of the n most
// recent chunk-level hypotheses.

#pragma once

#include <deque>
#include <string_view>

#include "simulst/errors.hpp"
#include "simulst/timeline.hpp"

namespace simulst {

struct LaConfig {
  std::size_t n = 2;
  double chunk_ms = 1000.0;

  void validate() const {
    if (n < 1) throw Error(Errc::kInvalidArgument, "LA window n must be >= 1");
    if (!(chunk_ms > 0.0)) throw Error(Errc::kInvalidArgument, "chunk_ms must be positive");
  }
};

struct LaState {
  std::deque<TokenSeq> recent_hypotheses;  // at most n, oldest first
  TokenSeq committed;
};

/// Pushes `hypothesis` and returns the tokens that became agreed on.
/// Nothing is committed until n hypotheses have been seen.
inline TokenSeq la_commit_step(LaState& state, TokenSeq hypothesis, const LaConfig& cfg) {
  if (!is_prefix(state.committed, hypothesis))
    throw Error(Errc::kPrefixConflict, "hypothesis does not extend the committed prefix");
  state.recent_hypotheses.push_back(std::move(hypothesis));
  while (state.recent_hypotheses.size() > cfg.n) state.recent_hypotheses.pop_front();
  if (state.recent_hypotheses.size() < cfg.n) return {};

  TokenSeq agreed = lcp_all(state.recent_hypotheses);
  if (agreed.size() <= state.committed.size()) return {};
  TokenSeq fresh(agreed.begin() + static_cast<std::ptrdiff_t>(state.committed.size()), agreed.end());
  state.committed = std::move(agreed);
  return fresh;
}

class LocalAgreementPolicy {
 public:
  static constexpr bool kRequiresAttention = false;
  static constexpr std::string_view kName = "la";

  explicit LocalAgreementPolicy(LaConfig cfg = {}) : cfg_(cfg) { cfg_.validate(); }

  double chunk_ms() const { return cfg_.chunk_ms; }
  double param() const { return static_cast<double>(cfg_.n); }
  const TokenSeq& committed() const { return state_.committed; }
  const LaState& state() const { return state_; }

  /// On the final chunk the whole hypothesis is committed without agreement.
  TokenSeq step(const Hypothesis& hyp, std::size_t /*frames*/, bool final_chunk) {
    if (!final_chunk) return la_commit_step(state_, hyp.tokens, cfg_);
    if (!is_prefix(state_.committed, hyp.tokens))
      throw Error(Errc::kPrefixConflict, "final hypothesis does not extend the committed prefix");
    TokenSeq fresh(hyp.tokens.begin() + static_cast<std::ptrdiff_t>(state_.committed.size()), hyp.tokens.end());
    state_.committed = hyp.tokens;
    state_.recent_hypotheses.clear();
    return fresh;
  }

 private:
  LaConfig cfg_;
  LaState state_;
};

}  // namespace simulst
