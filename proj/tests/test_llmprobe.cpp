// Copyright 2026 The Analogy Lab Authors.
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

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>

#include "analogy/llmprobe.hpp"

namespace analogy::probe {
namespace {

constexpr const char* kKeyVar = "ANALOGY_PROBE_TEST_KEY";

std::string ChatBody(const std::string& content) {
  return Json{{"choices", Json::array({{{"message", {{"role", "assistant"}, {"content", content}}}}})}}
      .dump();
}

// Chat-completions stand-in. `respond` sees the request count (from 0) and
// the prompt text.
class MockEndpoint {
 public:
  using Responder = std::function<void(int n, const std::string& prompt, httplib::Response&)>;

  explicit MockEndpoint(Responder r) : respond_(std::move(r)) {
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                httplib::Response& res) {
      const int n = count_++;
      auth_ = req.get_header_value("Authorization");
      std::string prompt;
      try {
        prompt = Json::parse(req.body).at("messages").at(0).at("content").get<std::string>();
      } catch (const std::exception&) {
      }
      respond_(n, prompt, res);
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }

  ProbeConfig Config() const {
    ProbeConfig c;
    c.endpoint = "http://127.0.0.1:" + std::to_string(port_);
    c.credential_env = kKeyVar;
    c.timeout_s = 5;
    c.max_retries = 3;
    c.max_concurrency = 1;
    return c;
  }
  int count() const { return count_; }
  std::string auth() const { return auth_; }

 private:
  Responder respond_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> count_{0};
  std::string auth_;
};

std::vector<AnalogyTask> Suite(int n) {
  DatasetConfig d;
  d.n_train = 0;
  d.n_val = 0;
  d.n_test = 0;
  d.n_ood = n;
  return BuildDataset(d).splits.at(kSuiteNewTransform);
}

class ProbeTest : public ::testing::Test {
 protected:
  void SetUp() override { ::setenv(kKeyVar, "test-key", 1); }
  void TearDown() override { ::unsetenv(kKeyVar); }
  std::vector<double> sleeps_;
  SleepFn Recorder() {
    return [this](double s) { sleeps_.push_back(s); };
  }
};

TEST(Answer, ParsesCommonShapes) {
  EXPECT_EQ(ToSpaced(ParseAnswer("a c d")), "a c d");
  EXPECT_EQ(ToSpaced(ParseAnswer("The answer is:\n\"a c d\".")), "a c d");
  EXPECT_EQ(ToSpaced(ParseAnswer("[a, b, c]")), "a b c");
  EXPECT_EQ(ToSpaced(ParseAnswer("Step 1: b becomes a\nSo: a c d")), "a c d");
  EXPECT_EQ(ToSpaced(ParseAnswer("Thinking...\nacd")), "a c d");
  EXPECT_EQ(ToSpaced(ParseAnswer("**x y z**")), "x y z");
  for (const char* bad : {"", "   ", "I cannot answer that.", "ABC"}) {
    try {
      ParseAnswer(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseFailure);
    }
  }
}

TEST(Prompt, RoundTrip) {
  for (const AnalogyTask& t : Suite(30)) {
    const std::string p = RenderPrompt(t);
    const PromptFields f = ParsePrompt(p);
    EXPECT_EQ(f.alphabet, t.alphabet);
    EXPECT_EQ(f.examples, t.examples);
    EXPECT_EQ(f.query, t.query);
    EXPECT_NE(p.find("Query: " + ToSpaced(t.query) + " -> ?\n"), std::string::npos);
  }
  EXPECT_THROW(ParsePrompt("nothing here"), Error);
}

TEST(Config, JsonRoundTrip) {
  ProbeConfig c;
  c.model = "m";
  c.max_concurrency = 2;
  const ProbeConfig back = ProbeConfigFromJson(Json::parse(ProbeConfigToJson(c).dump()));
  EXPECT_EQ(back.model, "m");
  EXPECT_EQ(back.max_concurrency, 2);
  EXPECT_THROW(ProbeConfigFromJson(Json{{"modle", "x"}}), Error);
  EXPECT_THROW(ProbeConfigFromJson(Json{{"max_concurrency", 0}}), Error);
}

TEST_F(ProbeTest, CannedAnswerAndHeaders) {
  MockEndpoint mock([](int, const std::string&, httplib::Response& res) {
    res.set_content(ChatBody("Answer: b c e"), "application/json");
  });
  const QueryOutcome q = QueryModel(mock.Config(), "prompt", Recorder());
  EXPECT_EQ(q.text, "Answer: b c e");
  EXPECT_EQ(q.retries, 0);
  EXPECT_EQ(mock.auth(), "Bearer test-key");
  EXPECT_TRUE(sleeps_.empty());
}

TEST_F(ProbeTest, RetriesServerErrorsWithBackoff) {
  MockEndpoint mock([](int n, const std::string&, httplib::Response& res) {
    if (n < 2) {
      res.status = 500;
      return;
    }
    res.set_content(ChatBody("a b"), "application/json");
  });
  const QueryOutcome q = QueryModel(mock.Config(), "prompt", Recorder());
  EXPECT_EQ(q.retries, 2);
  EXPECT_EQ(mock.count(), 3);
  EXPECT_EQ(sleeps_, (std::vector<double>{1.0, 2.0}));
}

TEST_F(ProbeTest, PersistentFailuresSurfaceTyped) {
  struct Case {
    int status;
    ErrorCode code;
    int requests;
  };
  for (const Case& k : {Case{429, ErrorCode::kRateLimited, 4}, Case{503, ErrorCode::kTimeout, 4},
                        Case{401, ErrorCode::kAuthFailure, 1},
                        Case{404, ErrorCode::kMalformedResponse, 1}}) {
    MockEndpoint mock([&](int, const std::string&, httplib::Response& res) { res.status = k.status; });
    try {
      QueryModel(mock.Config(), "prompt", Recorder());
      FAIL() << k.status;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), k.code) << k.status;
    }
    EXPECT_EQ(mock.count(), k.requests) << k.status;
  }
}

TEST_F(ProbeTest, MalformedBody) {
  MockEndpoint mock([](int, const std::string&, httplib::Response& res) {
    res.set_content("{\"choices\": []}", "application/json");
  });
  try {
    QueryModel(mock.Config(), "prompt", Recorder());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMalformedResponse);
  }
}

TEST_F(ProbeTest, UnreachableEndpointTimesOut) {
  ProbeConfig c;
  c.endpoint = "http://127.0.0.1:1";
  c.credential_env = kKeyVar;
  c.max_retries = 1;
  c.timeout_s = 1;
  try {
    QueryModel(c, "prompt", Recorder());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
  }
  EXPECT_EQ(sleeps_.size(), 1u);
}

TEST_F(ProbeTest, MissingCredential) {
  ::unsetenv(kKeyVar);
  MockEndpoint mock([](int, const std::string&, httplib::Response& res) {
    res.set_content(ChatBody("a"), "application/json");
  });
  try {
    RunProbe(mock.Config(), Suite(3), "", Recorder());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAuthFailure);
  }
  EXPECT_EQ(mock.count(), 0);
}

TEST_F(ProbeTest, AlwaysCorrectEndpoint) {
  const auto suite = Suite(24);
  std::map<std::string, std::string> answers;
  for (const auto& t : suite) answers[RenderPrompt(t)] = ToSpaced(t.target);
  MockEndpoint mock([&](int, const std::string& prompt, httplib::Response& res) {
    res.set_content(ChatBody("Final answer:\n" + answers.at(prompt)), "application/json");
  });
  ProbeConfig c = mock.Config();
  c.max_concurrency = 4;
  const auto log = std::filesystem::temp_directory_path() / ("probe_" + std::to_string(::getpid()));
  std::filesystem::remove(log);
  const ProbeRun run = RunProbe(c, suite, log.string(), Recorder());
  EXPECT_FALSE(run.aborted);
  ASSERT_EQ(run.results.size(), suite.size());
  EXPECT_EQ(Accuracy(run.eval), 1.0);
  EXPECT_EQ(run.parse_failure_rate(), 0.0);
  for (std::size_t i = 0; i < suite.size(); ++i) {
    EXPECT_EQ(run.results[i].task_id, suite[i].id);
    EXPECT_EQ(run.results[i].prompt_version, std::string(kPromptVersion));
  }
  std::ifstream in(log);
  int lines = 0;
  for (std::string l; std::getline(in, l);) {
    const Json j = Json::parse(l);
    EXPECT_TRUE(j.at("correct").get<bool>());
    ++lines;
  }
  EXPECT_EQ(lines, 24);
  std::filesystem::remove(log);
}

TEST_F(ProbeTest, AlwaysEmptyEndpoint) {
  const auto suite = Suite(10);
  MockEndpoint mock([](int, const std::string&, httplib::Response& res) {
    res.set_content(ChatBody(""), "application/json");
  });
  const ProbeRun run = RunProbe(mock.Config(), suite, "", Recorder());
  ASSERT_EQ(run.results.size(), 10u);
  EXPECT_EQ(run.parse_failure_rate(), 1.0);
  EXPECT_EQ(Accuracy(run.eval), 0.0);
  for (const auto& e : run.eval) {
    EXPECT_TRUE(e.malformed);
    EXPECT_EQ(e.error_label.value(), kOtherIncorrect);
  }
}

TEST_F(ProbeTest, AbortKeepsCompletedRows) {
  const auto suite = Suite(10);
  MockEndpoint mock([](int n, const std::string&, httplib::Response& res) {
    if (n >= 4) {
      res.status = 401;
      return;
    }
    res.set_content(ChatBody("a b c"), "application/json");
  });
  const ProbeRun run = RunProbe(mock.Config(), suite, "", Recorder());
  EXPECT_TRUE(run.aborted);
  EXPECT_NE(run.abort_reason.find("AuthFailure"), std::string::npos);
  EXPECT_EQ(run.results.size(), 4u);
}

TEST(Joined, CsvLayout) {
  AccuracyRow a;
  a.group = "seen_alphabet/compositional";
  a.mean = 0.25;
  a.n_tasks = 8;
  AccuracyRow b = a;
  b.mean = 0.5;
  std::ostringstream out;
  WriteJoinedCsv(out, {{"transformer", {a}}, {"gpt", {b}}});
  EXPECT_EQ(out.str(),
            "model,group,accuracy,n_tasks\n"
            "transformer,seen_alphabet/compositional,0.25,8\n"
            "gpt,seen_alphabet/compositional,0.5,8\n");
}

}  // namespace
}  // namespace analogy::probe
