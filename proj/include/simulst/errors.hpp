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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace simulst {

enum class Errc {
  kInvalidArgument,
  // timeline
  kNonMonotoneDelay,
  kEmptyCommit,
  kFinalized,
  kNotFinalized,
  kDelayExceedsSource,
  kWallBeforeIdeal,
  // agents
  kPrefixConflict,
  kProtocolError,
  kAgentCrashed,
  kTimeout,
  kBadAttentionShape,
  kNonStochasticRow,
  kMissingAttention,
  // metrics
  kEmptyLog,
  kMissingReference,
  kZeroDuration,
  kEmptyTimeline,
  kSizeMismatch,
  // cascade
  kMissingAgent,
  kNonMonotoneRequests,
  kTrackLengthMismatch,
  // corpus
  kParseError,
  kDuplicateId,
  kZeroTokens,
  kIoError,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kInvalidArgument: return "InvalidArgument";
    case Errc::kNonMonotoneDelay: return "NonMonotoneDelay";
    case Errc::kEmptyCommit: return "EmptyCommit";
    case Errc::kFinalized: return "Finalized";
    case Errc::kNotFinalized: return "NotFinalized";
    case Errc::kDelayExceedsSource: return "DelayExceedsSource";
    case Errc::kWallBeforeIdeal: return "WallBeforeIdeal";
    case Errc::kPrefixConflict: return "PrefixConflict";
    case Errc::kProtocolError: return "ProtocolError";
    case Errc::kAgentCrashed: return "AgentCrashed";
    case Errc::kTimeout: return "Timeout";
    case Errc::kBadAttentionShape: return "BadAttentionShape";
    case Errc::kNonStochasticRow: return "NonStochasticRow";
    case Errc::kMissingAttention: return "MissingAttention";
    case Errc::kEmptyLog: return "EmptyLog";
    case Errc::kMissingReference: return "MissingReference";
    case Errc::kZeroDuration: return "ZeroDuration";
    case Errc::kEmptyTimeline: return "EmptyTimeline";
    case Errc::kSizeMismatch: return "SizeMismatch";
    case Errc::kMissingAgent: return "MissingAgent";
    case Errc::kNonMonotoneRequests: return "NonMonotoneRequests";
    case Errc::kTrackLengthMismatch: return "TrackLengthMismatch";
    case Errc::kParseError: return "ParseError";
    case Errc::kDuplicateId: return "DuplicateId";
    case Errc::kZeroTokens: return "ZeroTokens";
    case Errc::kIoError: return "IoError";
  }
  return "Unknown";
}

/// Failures reported by an agent process or the wire protocol, as opposed
/// to validation failures of local inputs.
constexpr bool is_agent_failure(Errc code) {
  return code == Errc::kProtocolError || code == Errc::kAgentCrashed ||
         code == Errc::kTimeout || code == Errc::kPrefixConflict ||
         code == Errc::kBadAttentionShape || code == Errc::kNonStochasticRow ||
         code == Errc::kMissingAttention || code == Errc::kTrackLengthMismatch;
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace simulst
