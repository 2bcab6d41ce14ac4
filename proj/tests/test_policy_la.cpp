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

#include <random>

#include <gtest/gtest.h>

#include "simulst/simulator.hpp"
#include "test_util.hpp"
#include "toy_sessions.hpp"

namespace simulst {
namespace {

TEST(LaCommitStep, Examples) {
  LaConfig two{2, 1000};
  LaState s;
  s.recent_hypotheses = {{"A", "B", "C"}};
  EXPECT_EQ(la_commit_step(s, {"A", "B", "D"}, two), (TokenSeq{"A", "B"}));
  EXPECT_EQ(s.committed, (TokenSeq{"A", "B"}));

  LaState one;
  EXPECT_EQ(la_commit_step(one, {"A", "B", "C"}, {1, 1000}), (TokenSeq{"A", "B", "C"}));

  LaState s3;
  s3.committed = {"A", "B"};
  s3.recent_hypotheses = {{"A", "B", "D"}};
  EXPECT_EQ(la_commit_step(s3, {"A", "B", "D", "E"}, two), (TokenSeq{"D"}));
  EXPECT_EQ(s3.committed, (TokenSeq{"A", "B", "D"}));
}

TEST(LaCommitStep, NothingBeforeNHypotheses) {
  LaState s;
  LaConfig three{3, 500};
  EXPECT_TRUE(la_commit_step(s, {"A"}, three).empty());
  EXPECT_TRUE(la_commit_step(s, {"A"}, three).empty());
  EXPECT_EQ(la_commit_step(s, {"A", "B"}, three), (TokenSeq{"A"}));
  EXPECT_EQ(s.recent_hypotheses.size(), 3u);
}

TEST(LaCommitStep, RejectsHypothesisNotExtendingCommitted) {
  LaState s;
  s.committed = {"A"};
  EXPECT_ERRC(la_commit_step(s, {"B"}, {}), Errc::kPrefixConflict);
  EXPECT_ERRC(LaConfig({0, 100}).validate(), Errc::kInvalidArgument);
  EXPECT_ERRC(LocalAgreementPolicy(LaConfig{2, 0}), Errc::kInvalidArgument);
}

ToyTransducerSpec three_tokens(std::size_t k) { return {{{1, 3, "A"}, {4, 7, "B"}, {8, 9, "C"}}, 10, k, 0}; }

TEST(RunLa, StableToyMatchesOfflineForAnyChunk) {
  const auto spec = three_tokens(0);
  const auto src = SourceStream::uniform(1000, 100, spec.offline());
  for (double chunk : {100.0, 200.0, 300.0, 500.0, 700.0, 1000.0, 5000.0}) {
    for (std::size_t n : {1u, 2u, 3u}) {
      ToyTransducerAgent agent(spec);
      EXPECT_EQ(run_la(src, agent, {n, chunk}).output_tokens(), spec.offline()) << chunk << " n=" << n;
    }
  }
}

TEST(RunLa, UnstableToyTwoChunks) {
  const auto spec = three_tokens(1);
  ToyTransducerAgent agent(spec);
  const auto log = run_la(SourceStream::uniform(1000, 100, spec.offline()), agent, {2, 500});
  // First chunk (F=5) alone cannot agree; everything lands with the second.
  ASSERT_EQ(log.commits().size(), 1u);
  EXPECT_EQ(log.commits()[0].tokens, spec.offline());
  EXPECT_EQ(log.commits()[0].ideal_delay_ms, 1000);
}

TEST(RunLa, SingleChunkIsOffline) {
  const auto spec = three_tokens(2);
  ToyTransducerAgent agent(spec);
  const auto log = run_la(SourceStream::uniform(1000, 100, spec.offline()), agent, {2, 4000});
  EXPECT_EQ(log.output_tokens(), spec.offline());
  for (double d : log.token_delays(DelayMode::kIdeal)) EXPECT_EQ(d, 1000);
}

TEST(RunLa, CommitsAtChunkBoundaries) {
  const auto spec = three_tokens(0);
  ToyTransducerAgent agent(spec);
  const auto log = run_la(SourceStream::uniform(1000, 100, spec.offline()), agent, {1, 200});
  // LA-1: A is ready at F=4 (t=400), B at F=8 (t=800), C at F=10.
  ASSERT_EQ(log.commits().size(), 3u);
  EXPECT_EQ(log.commits()[0].ideal_delay_ms, 400);
  EXPECT_EQ(log.commits()[1].ideal_delay_ms, 800);
  EXPECT_EQ(log.commits()[2].ideal_delay_ms, 1000);
}

TEST(RunLa, RandomSessionInvariants) {
  std::mt19937_64 rng(2024);
  for (int it = 0; it < 200; ++it) {
    const std::size_t k = it % 4;
    const auto s = oracle::random_toy_session(rng, k, it);
    const auto src = s.source();
    for (double chunk : {200.0, 500.0, 1000.0}) {
      for (std::size_t n : {1u, 2u, 3u}) {
        ToyTransducerAgent agent(s.spec);
        LocalAgreementPolicy policy({n, chunk});
        TokenSeq prev;
        SessionOptions so;
        so.observer = [&](const RoundRecord& r) {
          TokenSeq now = r.committed_before;
          now.insert(now.end(), r.emitted.begin(), r.emitted.end());
          ASSERT_TRUE(is_prefix(prev, now));
          ASSERT_EQ(r.committed_before, prev);
          if (n == 1 || r.final_chunk) ASSERT_EQ(now, r.hypothesis.tokens);
          prev = now;
        };
        const auto log = run_session_detailed(src, agent, policy, ClockModel::ideal(), so).log;
        ASSERT_EQ(log.output_tokens(), prev);
        if (k == 0) ASSERT_EQ(log.output_tokens(), s.spec.offline());
      }
    }
  }
}

}  // namespace
}  // namespace simulst
