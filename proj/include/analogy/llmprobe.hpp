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

// Probing external chat-completion models on the same task suites.
//
// Define CPPHTTPLIB_OPENSSL_SUPPORT before including this header (and link
// OpenSSL) to reach https endpoints.

#pragma once

#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "analogy/eval.hpp"
#include "analogy/io.hpp"
#include "analogy/taskgen.hpp"
#include "httplib.h"

namespace analogy::probe {

inline constexpr const char* kPromptVersion = "letter-analogy-v1";

struct ProbeConfig {
  std::string endpoint = "https://api.openai.com";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o-mini";
  std::string credential_env = "OPENAI_API_KEY";
  double timeout_s = 60;
  int max_retries = 4;
  double backoff_initial_s = 1.0;
  double backoff_factor = 2.0;
  double temperature = 0.0;
  int max_concurrency = 4;
};

inline OrderedJson ProbeConfigToJson(const ProbeConfig& c) {
  return {{"endpoint", c.endpoint},
          {"path", c.path},
          {"model", c.model},
          {"credential_env", c.credential_env},
          {"timeout_s", c.timeout_s},
          {"max_retries", c.max_retries},
          {"backoff_initial_s", c.backoff_initial_s},
          {"backoff_factor", c.backoff_factor},
          {"temperature", c.temperature},
          {"max_concurrency", c.max_concurrency}};
}

inline ProbeConfig ProbeConfigFromJson(const Json& j) {
  static const std::vector<std::string> kKeys = {
      "endpoint", "path", "model", "credential_env", "timeout_s", "max_retries",
      "backoff_initial_s", "backoff_factor", "temperature", "max_concurrency"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(kKeys.begin(), kKeys.end(), it.key()) == kKeys.end()) {
      throw Error(ErrorCode::kInvalidConfig, "probe: unknown field '" + it.key() + "'");
    }
  }
  ProbeConfig c;
  c.endpoint = j.value("endpoint", c.endpoint);
  c.path = j.value("path", c.path);
  c.model = j.value("model", c.model);
  c.credential_env = j.value("credential_env", c.credential_env);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.backoff_initial_s = j.value("backoff_initial_s", c.backoff_initial_s);
  c.backoff_factor = j.value("backoff_factor", c.backoff_factor);
  c.temperature = j.value("temperature", c.temperature);
  c.max_concurrency = j.value("max_concurrency", c.max_concurrency);
  if (c.max_concurrency < 1) throw Error(ErrorCode::kInvalidConfig, "max_concurrency must be >= 1");
  if (c.max_retries < 0) throw Error(ErrorCode::kInvalidConfig, "max_retries must be >= 0");
  return c;
}

// ---------------------------------------------------------------------------
// Prompts

inline std::string RenderPrompt(const AnalogyTask& t) {
  std::ostringstream os;
  os << "Solve the letter-string analogy. Letters follow this alphabet order:\n"
     << ToSpaced(LetterString(t.alphabet.order().begin(), t.alphabet.order().end())) << "\n\n";
  for (std::size_t i = 0; i < t.examples.size(); ++i) {
    os << "Example " << i + 1 << ": " << ToSpaced(t.examples[i].input) << " -> "
       << ToSpaced(t.examples[i].output) << '\n';
  }
  os << "Query: " << ToSpaced(t.query) << " -> ?\n\n"
     << "Reply with the answer as space-separated letters on the final line.\n";
  return os.str();
}

struct PromptFields {
  Alphabet alphabet;
  std::vector<ExamplePair> examples;
  LetterString query;
};

// Inverse of RenderPrompt.
inline PromptFields ParsePrompt(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  PromptFields f;
  bool have_alphabet = false, have_query = false;
  while (std::getline(in, line)) {
    if (!have_alphabet && line.size() == 51 && line.find("->") == std::string::npos &&
        line.find(':') == std::string::npos) {
      f.alphabet = Alphabet::FromString(ToCompact(ParseLetters(line)));
      have_alphabet = true;
    } else if (line.rfind("Example ", 0) == 0) {
      const auto colon = line.find(": ");
      const auto arrow = line.find(" -> ");
      if (colon == std::string::npos || arrow == std::string::npos) {
        throw Error(ErrorCode::kParseError, "bad example line: " + line);
      }
      f.examples.push_back({ParseLetters(line.substr(colon + 2, arrow - colon - 2)),
                            ParseLetters(line.substr(arrow + 4))});
    } else if (line.rfind("Query: ", 0) == 0) {
      const auto arrow = line.find(" -> ");
      f.query = ParseLetters(line.substr(7, arrow - 7));
      have_query = true;
    }
  }
  if (!have_alphabet || !have_query) throw Error(ErrorCode::kParseError, "prompt lacks fields");
  return f;
}

// Last run of single lowercase letters separated by spaces or commas, with
// quotes, brackets and trailing punctuation stripped. Falls back to an
// unspaced word when the final non-empty line is a single word.
inline LetterString ParseAnswer(const std::string& raw) {
  auto strip = [](std::string w) {
    const std::string junk = "\"'`.,;:!?()[]{}*";
    while (!w.empty() && junk.find(w.front()) != std::string::npos) w.erase(w.begin());
    while (!w.empty() && junk.find(w.back()) != std::string::npos) w.pop_back();
    return w;
  };
  std::vector<std::string> words;
  std::string cur;
  for (char c : raw) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == ',') {
      if (!cur.empty()) words.push_back(strip(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) words.push_back(strip(cur));

  LetterString best, run;
  for (const std::string& w : words) {
    if (w.size() == 1 && w[0] >= 'a' && w[0] <= 'z') {
      run.push_back(Letter::FromChar(w[0]));
    } else if (!w.empty()) {
      if (!run.empty()) best = run;
      run.clear();
    }
  }
  if (!run.empty()) best = run;
  if (!best.empty()) return best;

  std::istringstream in(raw);
  std::string line, last;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") != std::string::npos) last = line;
  }
  std::istringstream ls(last);
  std::vector<std::string> lw;
  for (std::string w; ls >> w;) lw.push_back(strip(w));
  if (lw.size() == 1 && !lw[0].empty() &&
      std::all_of(lw[0].begin(), lw[0].end(), [](char c) { return c >= 'a' && c <= 'z'; })) {
    return ParseLetters(lw[0]);
  }
  throw Error(ErrorCode::kParseFailure, "no letter sequence in response");
}

// ---------------------------------------------------------------------------
// Transport

struct QueryOutcome {
  std::string text;
  int retries = 0;
  double latency_s = 0;
};

// Sleep hook so tests can skip real backoff delays.
using SleepFn = std::function<void(double seconds)>;

inline void RealSleep(double s) {
  std::this_thread::sleep_for(std::chrono::duration<double>(s));
}

inline std::string ReadCredential(const ProbeConfig& c) {
  const char* v = std::getenv(c.credential_env.c_str());
  if (!v || !*v) {
    throw Error(ErrorCode::kAuthFailure, "environment variable " + c.credential_env + " is unset");
  }
  return v;
}

inline QueryOutcome QueryModel(const ProbeConfig& c, const std::string& prompt,
                               const SleepFn& sleep = RealSleep) {
  const std::string key = ReadCredential(c);
  httplib::Client cli(c.endpoint);
  const auto secs = static_cast<time_t>(c.timeout_s);
  const auto usecs = static_cast<time_t>((c.timeout_s - secs) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  const httplib::Headers headers = {{"Authorization", "Bearer " + key}};
  const Json body = {{"model", c.model},
                     {"messages", Json::array({{{"role", "user"}, {"content", prompt}}})},
                     {"temperature", c.temperature}};
  const std::string payload = body.dump();

  QueryOutcome out;
  const auto start = std::chrono::steady_clock::now();
  double delay = c.backoff_initial_s;
  for (int attempt = 0;; ++attempt) {
    auto res = cli.Post(c.path, headers, payload, "application/json");
    ErrorCode transient;
    std::string why;
    if (!res) {
      transient = ErrorCode::kTimeout;
      why = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 401 || res->status == 403) {
      throw Error(ErrorCode::kAuthFailure, "endpoint rejected credentials (HTTP " +
                                               std::to_string(res->status) + ")");
    } else if (res->status == 429) {
      transient = ErrorCode::kRateLimited;
      why = "HTTP 429";
    } else if (res->status >= 500) {
      transient = ErrorCode::kTimeout;
      why = "HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw Error(ErrorCode::kMalformedResponse, "unexpected HTTP " + std::to_string(res->status));
    } else {
      try {
        const Json j = Json::parse(res->body);
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const std::exception& e) {
        throw Error(ErrorCode::kMalformedResponse, std::string("response body: ") + e.what());
      }
      out.retries = attempt;
      out.latency_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      return out;
    }
    if (attempt >= c.max_retries) {
      throw Error(transient, why + " after " + std::to_string(attempt) + " retries");
    }
    sleep(delay);
    delay *= c.backoff_factor;
  }
}

// ---------------------------------------------------------------------------
// Probe runs

struct ProbeResult {
  std::uint64_t task_id = 0;
  std::string split;
  TransformTag tag = TransformTag::kSuccessor;
  AlphabetSet alphabet_set = AlphabetSet::kSeen;
  std::string raw;
  std::optional<LetterString> parsed;
  bool parse_failure = false;
  bool correct = false;
  double latency_s = 0;
  int retries = 0;
  std::string model;
  std::string prompt_version = kPromptVersion;
};

inline OrderedJson ProbeResultToJson(const ProbeResult& r) {
  OrderedJson j;
  j["task_id"] = r.task_id;
  j["split"] = r.split;
  j["transformation"] = TransformName(r.tag);
  j["alphabet_set"] = AlphabetSetName(r.alphabet_set);
  j["model"] = r.model;
  j["prompt_version"] = r.prompt_version;
  j["raw"] = r.raw;
  j["parsed"] = r.parsed ? Json(ToSpaced(*r.parsed)) : Json(nullptr);
  j["parse_failure"] = r.parse_failure;
  j["correct"] = r.correct;
  j["latency_s"] = r.latency_s;
  j["retries"] = r.retries;
  return j;
}

inline EvalResult ToEvalResult(const ProbeResult& p, const AnalogyTask& t) {
  EvalResult r;
  r.task_id = p.task_id;
  r.split = p.split;
  r.tag = p.tag;
  r.alphabet_set = p.alphabet_set;
  r.predicted = p.parsed.value_or(LetterString{});
  r.target = t.target;
  r.correct = p.correct;
  r.finished = !p.parse_failure;
  r.malformed = p.parse_failure;
  if (!r.correct) r.error_label = ClassifyError(t, r.predicted);
  return r;
}

struct ProbeRun {
  std::vector<ProbeResult> results;  // suite order, completed tasks only
  std::vector<EvalResult> eval;      // same rows in eval schema
  bool aborted = false;
  std::string abort_reason;

  double parse_failure_rate() const {
    if (results.empty()) return 0.0;
    std::size_t f = 0;
    for (const auto& r : results) f += r.parse_failure;
    return static_cast<double>(f) / results.size();
  }
};

// Queries every non-copy task with at most max_concurrency requests in
// flight. A persistent endpoint failure stops new requests; finished rows are
// kept. When `log_path` is set, rows are appended as they complete.
inline ProbeRun RunProbe(const ProbeConfig& c, const std::vector<AnalogyTask>& suite,
                         const std::string& log_path = "", const SleepFn& sleep = RealSleep) {
  ReadCredential(c);
  std::vector<const AnalogyTask*> tasks;
  for (const AnalogyTask& t : suite) {
    if (!t.is_copy) tasks.push_back(&t);
  }
  std::vector<std::optional<ProbeResult>> slots(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::mutex mu;
  std::string reason;
  std::ofstream log;
  if (!log_path.empty()) log.open(log_path, std::ios::app);

  auto worker = [&] {
    while (!stop) {
      const std::size_t i = next++;
      if (i >= tasks.size()) return;
      const AnalogyTask& t = *tasks[i];
      ProbeResult r;
      r.task_id = t.id;
      r.split = t.split;
      r.tag = t.transformation.tag;
      r.alphabet_set = t.alphabet_set;
      r.model = c.model;
      try {
        const QueryOutcome q = QueryModel(c, RenderPrompt(t), sleep);
        r.raw = q.text;
        r.retries = q.retries;
        r.latency_s = q.latency_s;
      } catch (const Error& e) {
        std::lock_guard<std::mutex> lock(mu);
        if (!stop.exchange(true)) reason = std::string(ErrorCodeName(e.code())) + ": " + e.what();
        return;
      }
      try {
        r.parsed = ParseAnswer(r.raw);
      } catch (const Error&) {
        r.parse_failure = true;
      }
      r.correct = r.parsed && *r.parsed == t.target;
      std::lock_guard<std::mutex> lock(mu);
      if (log.is_open()) log << ProbeResultToJson(r).dump() << '\n' << std::flush;
      slots[i] = std::move(r);
    }
  };
  std::vector<std::thread> pool;
  const int n = std::max(1, std::min<int>(c.max_concurrency, static_cast<int>(tasks.size())));
  for (int k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  ProbeRun run;
  run.aborted = stop;
  run.abort_reason = reason;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i]) continue;
    run.eval.push_back(ToEvalResult(*slots[i], *tasks[i]));
    run.results.push_back(std::move(*slots[i]));
  }
  return run;
}

// Long-format table joining several models' accuracy rows:
// model,group,accuracy,n_tasks.
inline void WriteJoinedCsv(std::ostream& out,
                           const std::vector<std::pair<std::string, std::vector<AccuracyRow>>>& t) {
  out << "model,group,accuracy,n_tasks\n";
  for (const auto& [model, rows] : t) {
    for (const AccuracyRow& r : rows) {
      out << model << ',' << r.group << ',' << r.mean << ',' << r.n_tasks << '\n';
    }
  }
}

}  // namespace analogy::probe
