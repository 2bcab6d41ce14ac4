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
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "simulst/log_io.hpp"
#include "test_util.hpp"

namespace simulst {
namespace {

TEST(LogIo, SessionLineFormat) {
  EmissionLog log("s1", TokenSeq{"a", "b"});
  log.record_commit({"a"}, 1000, 1050);
  log.record_commit({"b"}, 3000, 3100.25);
  log.finalize(3000);
  EXPECT_EQ(encode_session(log),
            R"({"id":"s1","source_duration_ms":3000.0,"commits":[{"tokens":["a"],"d":1000.0,"c":1050.0},)"
            R"({"tokens":["b"],"d":3000.0,"c":3100.25}],"reference_tokens":["a","b"]})");
  EXPECT_EQ(decode_session(encode_session(log)), log);
}

TEST(LogIo, RandomLogsRoundTripByteIdentically) {
  std::mt19937_64 rng(55);
  LogFile file{{"la", 950, 2, 7, "computation_aware", "fixed:50"}, {}};
  for (int i = 0; i < 300; ++i) file.sessions.push_back(oracle::random_log(rng, 6, 3000, i % 3 != 0));
  std::ostringstream out;
  write_log_file(out, file);
  std::istringstream in(out.str());
  const auto back = read_log_file(in);
  EXPECT_EQ(back.header, file.header);
  ASSERT_EQ(back.sessions.size(), file.sessions.size());
  for (std::size_t i = 0; i < back.sessions.size(); ++i) ASSERT_EQ(back.sessions[i], file.sessions[i]);
  std::ostringstream again;
  write_log_file(again, back);
  EXPECT_EQ(again.str(), out.str());
}

TEST(LogIo, UnicodeTokensSurvive) {
  EmissionLog log("ja");
  log.record_commit({"フォーミュラワン", "\"quoted\""}, 100, 100);
  log.finalize(100);
  EXPECT_EQ(decode_session(encode_session(log)), log);
}

TEST(LogIo, FileRoundTrip) {
  const auto dir = testing::temp_dir("logio");
  EmissionLog log("x");
  log.finalize(10);
  const LogFile f{{"alignatt", 800, 3, 0, "ideal", "none"}, {log}};
  save_log_file((dir / "l.jsonl").string(), f);
  const auto back = load_log_file((dir / "l.jsonl").string());
  EXPECT_EQ(back.header, f.header);
  EXPECT_EQ(back.sessions, f.sessions);
  std::filesystem::remove_all(dir);
}

TEST(LogIo, RejectsBadInput) {
  EmissionLog open("o");
  EXPECT_ERRC(encode_session(open), Errc::kNotFinalized);
  EXPECT_ERRC(decode_session("{"), Errc::kParseError);
  EXPECT_ERRC(decode_session(R"({"id":"a","source_duration_ms":5,"commits":[{"tokens":["a"],"d":9,"c":9}]})"),
              Errc::kParseError);
  EXPECT_ERRC(decode_session(R"({"id":"a","source_duration_ms":9,"commits":[{"tokens":[],"d":9,"c":9}]})"),
              Errc::kParseError);
  std::istringstream empty("");
  EXPECT_ERRC(read_log_file(empty), Errc::kParseError);
  std::istringstream headless(R"({"id":"a","source_duration_ms":1,"commits":[]})");
  EXPECT_ERRC(read_log_file(headless), Errc::kParseError);
  std::istringstream future(R"({"simulst_log":2,"policy":"la"})");
  EXPECT_ERRC(read_log_file(future), Errc::kParseError);
  EXPECT_ERRC(load_log_file("/nonexistent/l.jsonl"), Errc::kIoError);
}

}  // namespace
}  // namespace simulst
