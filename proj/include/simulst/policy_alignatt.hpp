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

// AlignAtt: emit tokens in order while their attention argmax stays clear
// of the last f received frames; pause at the first token that does not.

#pragma once

#include <optional>
#include <string_view>

#include "simulst/agents.hpp"
#include "simulst/errors.hpp"
#include "simulst/protocol.hpp"
#include "simulst/timeline.hpp"

namespace simulst {

struct AlignAttConfig {
  std::size_t f = 1;
  double chunk_ms = 800.0;
  protocol::HeadAggregation attention_aggregation = protocol::HeadAggregation::kGiven;
  /// Never committed before the final chunk; treated as a stop.
  std::optional<Token> eos = Token("</s>");

  void validate() const {
    if (f < 1) throw Error(Errc::kInvalidArgument, "AlignAtt margin f must be >= 1");
    if (!(chunk_ms > 0.0)) throw Error(Errc::kInvalidArgument, "chunk_ms must be positive");
  }
};

struct AlignAttRoundResult {
  TokenSeq emitted;
  bool stopped = false;
  std::optional<std::size_t> stop_token_alignment;  // 1-based frame; unset for EOS stops
};

/// One AlignAtt decision over a hypothesis decoded from `frames` frames.
inline AlignAttRoundResult alignatt_round(const Hypothesis& hyp, std::size_t frames, const TokenSeq& committed,
                                          const AlignAttConfig& cfg) {
  if (!hyp.attention) throw Error(Errc::kMissingAttention, "AlignAtt needs attention rows");
  if (!is_prefix(committed, hyp.tokens))
    throw Error(Errc::kPrefixConflict, "hypothesis does not extend the committed prefix");
  const auto& att = *hyp.attention;
  if (att.size() != hyp.tokens.size())
    throw Error(Errc::kBadAttentionShape, "attention row count differs from token count");

  AlignAttRoundResult out;
  // Frames 1..limit may be attended; the last f are still considered unstable.
  const std::size_t limit = frames > cfg.f ? frames - cfg.f : 0;
  for (std::size_t j = committed.size(); j < hyp.tokens.size(); ++j) {
    if (cfg.eos && hyp.tokens[j] == *cfg.eos) {
      out.stopped = true;
      break;
    }
    if (att[j].size() != frames)
      throw Error(Errc::kBadAttentionShape, "attention row has " + std::to_string(att[j].size()) +
                                                " columns for " + std::to_string(frames) + " frames");
    const std::size_t aligned = argmax_frame(att[j]);
    if (aligned > limit) {
      out.stopped = true;
      out.stop_token_alignment = aligned;
      break;
    }
    out.emitted.push_back(hyp.tokens[j]);
  }
  return out;
}

class AlignAttPolicy {
 public:
  static constexpr bool kRequiresAttention = true;
  static constexpr std::string_view kName = "alignatt";

  explicit AlignAttPolicy(AlignAttConfig cfg = {}) : cfg_(std::move(cfg)) { cfg_.validate(); }

  double chunk_ms() const { return cfg_.chunk_ms; }
  double param() const { return static_cast<double>(cfg_.f); }
  const TokenSeq& committed() const { return committed_; }
  const AlignAttConfig& config() const { return cfg_; }

  /// The stop rule is disabled on the final chunk; trailing EOS is dropped.
  TokenSeq step(const Hypothesis& hyp, std::size_t frames, bool final_chunk) {
    TokenSeq fresh;
    if (final_chunk) {
      if (!is_prefix(committed_, hyp.tokens))
        throw Error(Errc::kPrefixConflict, "final hypothesis does not extend the committed prefix");
      for (std::size_t j = committed_.size(); j < hyp.tokens.size(); ++j) {
        if (cfg_.eos && hyp.tokens[j] == *cfg_.eos) break;
        fresh.push_back(hyp.tokens[j]);
      }
    } else {
      fresh = alignatt_round(hyp, frames, committed_, cfg_).emitted;
    }
    committed_.insert(committed_.end(), fresh.begin(), fresh.end());
    return fresh;
  }

 private:
  AlignAttConfig cfg_;
  TokenSeq committed_;
};

}  // namespace simulst
