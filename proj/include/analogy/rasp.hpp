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

// A small select/aggregate sequence language and the symbolic predecessor
// program written in it.
//
// Program text has one statement per line:
//
//   name = select(keys, queries, equals|gt, causal|noncausal)
//   name = aggregate(selector, values, min|max|mean [, default])
//   name = add(a, b) | sub(a, b)        operands: sequences or integer literals
//   name = and(s1, s2) | or(s1, s2)     selectors
//   name = const(<int> | '<char>')
//   output name
//
// `tokens` (character codes) and `indices` are predefined. select applies the
// predicate as pred(key, query): entry (i, j) is pred(keys[j], queries[i]),
// so `gt` selects keys greater than the query.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "analogy/core.hpp"
#include "analogy/taskgen.hpp"

namespace analogy::rasp {

// Values are doubles so that mean aggregation is exact for the small
// integers the programs manipulate.
using SeqVal = std::vector<double>;

struct SelectorMatrix {
  int rows = 0;  // query positions
  int cols = 0;  // key positions
  bool causal = false;
  std::vector<char> cells;

  bool at(int i, int j) const { return cells[static_cast<std::size_t>(i) * cols + j] != 0; }
  void set(int i, int j, bool v) { cells[static_cast<std::size_t>(i) * cols + j] = v; }
  int CountRow(int i) const {
    int c = 0;
    for (int j = 0; j < cols; ++j) c += at(i, j);
    return c;
  }
};

enum class Predicate { kEquals, kGreaterThan };
enum class Reduction { kMean, kMin, kMax };

inline SeqVal Indices(int n) {
  SeqVal v(n);
  for (int i = 0; i < n; ++i) v[i] = i;
  return v;
}

inline SeqVal Tokens(const std::string& s) {
  SeqVal v;
  for (unsigned char c : s) v.push_back(c);
  return v;
}

inline SelectorMatrix Select(const SeqVal& keys, const SeqVal& queries, Predicate pred,
                             bool causal) {
  if (keys.size() != queries.size()) {
    throw Error(ErrorCode::kLengthMismatch, "select: keys and queries differ in length");
  }
  SelectorMatrix m;
  m.rows = m.cols = static_cast<int>(keys.size());
  m.causal = causal;
  m.cells.assign(static_cast<std::size_t>(m.rows) * m.cols, 0);
  for (int i = 0; i < m.rows; ++i) {
    for (int j = 0; j < m.cols; ++j) {
      if (causal && j > i) continue;
      const bool hit = pred == Predicate::kEquals ? keys[j] == queries[i] : keys[j] > queries[i];
      m.set(i, j, hit);
    }
  }
  return m;
}

inline SelectorMatrix Combine(const SelectorMatrix& a, const SelectorMatrix& b, bool conj) {
  if (a.rows != b.rows || a.cols != b.cols) {
    throw Error(ErrorCode::kLengthMismatch, "selector shapes differ");
  }
  SelectorMatrix m = a;
  m.causal = conj ? (a.causal || b.causal) : (a.causal && b.causal);
  for (std::size_t k = 0; k < m.cells.size(); ++k) {
    m.cells[k] = conj ? (a.cells[k] && b.cells[k]) : (a.cells[k] || b.cells[k]);
  }
  return m;
}

inline SeqVal Aggregate(const SelectorMatrix& s, const SeqVal& values, Reduction r,
                        double fallback = 0.0) {
  if (static_cast<int>(values.size()) != s.cols) {
    throw Error(ErrorCode::kLengthMismatch, "aggregate: value length differs from selector");
  }
  SeqVal out(s.rows, fallback);
  for (int i = 0; i < s.rows; ++i) {
    int n = 0;
    double acc = r == Reduction::kMin   ? std::numeric_limits<double>::infinity()
                 : r == Reduction::kMax ? -std::numeric_limits<double>::infinity()
                                        : 0.0;
    for (int j = 0; j < s.cols; ++j) {
      if (!s.at(i, j)) continue;
      ++n;
      if (r == Reduction::kMin) acc = std::min(acc, values[j]);
      else if (r == Reduction::kMax) acc = std::max(acc, values[j]);
      else acc += values[j];
    }
    if (n > 0) out[i] = r == Reduction::kMean ? acc / n : acc;
  }
  return out;
}

// Mean attention mass on selected cells, over rows with at least one
// selected cell. In [0, 1] for row-stochastic attention.
template <typename Matrix>
double CompareSelectorToHead(const SelectorMatrix& s, const Matrix& attention) {
  if (attention.rows() != s.rows || attention.cols() != s.cols) {
    throw Error(ErrorCode::kShapeMismatch, "selector and attention shapes differ");
  }
  double total = 0;
  int counted = 0;
  for (int i = 0; i < s.rows; ++i) {
    if (s.CountRow(i) == 0) continue;
    double mass = 0;
    for (int j = 0; j < s.cols; ++j) {
      if (s.at(i, j)) mass += static_cast<double>(attention(i, j));
    }
    total += std::clamp(mass, 0.0, 1.0);
    ++counted;
  }
  return counted ? total / counted : 0.0;
}

// ---------------------------------------------------------------------------
// Interpreter

struct Statement {
  std::string target;  // empty for `output`
  std::string op;
  std::vector<std::string> args;
  int line = 0;
};

struct Program {
  std::string name;
  std::vector<Statement> statements;
  std::string output;
};

namespace detail {

inline std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] inline void ParseFail(int line, const std::string& m) {
  throw Error(ErrorCode::kParseError, "line " + std::to_string(line) + ": " + m);
}

inline std::vector<std::string> SplitArgs(const std::string& body, int line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : body) {
    if (c == '\'') quoted = !quoted;
    if (c == ',' && !quoted) {
      out.push_back(Trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) ParseFail(line, "unterminated character literal");
  if (!Trim(cur).empty() || !out.empty()) out.push_back(Trim(cur));
  for (const std::string& a : out) {
    if (a.empty()) ParseFail(line, "empty argument");
  }
  return out;
}

}  // namespace detail

inline Program ParseProgram(const std::string& text, const std::string& name = "program") {
  Program p;
  p.name = name;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    // '#' inside a character literal is not a comment.
    std::string s = raw;
    if (hash != std::string::npos && !(hash > 0 && raw[hash - 1] == '\'')) s = raw.substr(0, hash);
    s = detail::Trim(s);
    if (s.empty()) continue;
    if (s.rfind("output ", 0) == 0) {
      p.output = detail::Trim(s.substr(7));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) detail::ParseFail(line, "expected 'name = op(...)'");
    Statement st;
    st.line = line;
    st.target = detail::Trim(s.substr(0, eq));
    const std::string rhs = detail::Trim(s.substr(eq + 1));
    const auto open = rhs.find('(');
    if (open == std::string::npos || rhs.back() != ')') {
      detail::ParseFail(line, "expected op(args)");
    }
    st.op = detail::Trim(rhs.substr(0, open));
    st.args = detail::SplitArgs(rhs.substr(open + 1, rhs.size() - open - 2), line);
    if (st.target.empty()) detail::ParseFail(line, "missing target name");
    p.statements.push_back(std::move(st));
  }
  if (p.output.empty()) throw Error(ErrorCode::kParseError, "program has no output statement");
  return p;
}

struct SelectorDump {
  std::string name;
  int layer = 0;
  SelectorMatrix matrix;
};

struct Trace {
  std::map<std::string, SeqVal> values;
  std::map<std::string, int> depth;  // attention layers feeding each value
  std::vector<SelectorDump> selectors;
  SeqVal output;
};

inline Trace RunProgram(const Program& prog, const std::string& input) {
  Trace tr;
  const int n = static_cast<int>(input.size());
  tr.values["tokens"] = Tokens(input);
  tr.values["indices"] = Indices(n);
  tr.depth["tokens"] = tr.depth["indices"] = 0;
  std::map<std::string, std::size_t> selectors;

  for (const Statement& st : prog.statements) {
    auto want = [&](std::size_t lo, std::size_t hi) {
      if (st.args.size() < lo || st.args.size() > hi) detail::ParseFail(st.line, st.op + ": wrong argument count");
    };
    auto literal = [&](const std::string& a) -> std::optional<double> {
      if (a.size() == 3 && a.front() == '\'' && a.back() == '\'') {
        return static_cast<double>(static_cast<unsigned char>(a[1]));
      }
      try {
        std::size_t pos = 0;
        const double v = std::stod(a, &pos);
        if (pos == a.size()) return v;
      } catch (const std::exception&) {
      }
      return std::nullopt;
    };
    auto seq = [&](const std::string& a) -> std::pair<SeqVal, int> {
      if (auto it = tr.values.find(a); it != tr.values.end()) return {it->second, tr.depth[a]};
      if (auto v = literal(a)) return {SeqVal(n, *v), 0};
      detail::ParseFail(st.line, "unknown sequence '" + a + "'");
    };
    auto sel = [&](const std::string& a) -> const SelectorDump& {
      auto it = selectors.find(a);
      if (it == selectors.end()) detail::ParseFail(st.line, "unknown selector '" + a + "'");
      return tr.selectors[it->second];
    };
    auto put_selector = [&](SelectorMatrix m, int layer) {
      selectors[st.target] = tr.selectors.size();
      tr.selectors.push_back({st.target, layer, std::move(m)});
    };

    if (st.op == "const") {
      want(1, 1);
      auto v = literal(st.args[0]);
      if (!v) detail::ParseFail(st.line, "const expects an integer or character literal");
      tr.values[st.target] = SeqVal(n, *v);
      tr.depth[st.target] = 0;
    } else if (st.op == "add" || st.op == "sub") {
      want(2, 2);
      auto [a, da] = seq(st.args[0]);
      auto [b, db] = seq(st.args[1]);
      SeqVal out(n);
      for (int i = 0; i < n; ++i) out[i] = st.op == "add" ? a[i] + b[i] : a[i] - b[i];
      tr.values[st.target] = std::move(out);
      tr.depth[st.target] = std::max(da, db);
    } else if (st.op == "select") {
      want(4, 4);
      auto [k, dk] = seq(st.args[0]);
      auto [q, dq] = seq(st.args[1]);
      Predicate pred;
      if (st.args[2] == "equals") pred = Predicate::kEquals;
      else if (st.args[2] == "gt") pred = Predicate::kGreaterThan;
      else detail::ParseFail(st.line, "unknown predicate '" + st.args[2] + "'");
      bool causal;
      if (st.args[3] == "causal") causal = true;
      else if (st.args[3] == "noncausal") causal = false;
      else detail::ParseFail(st.line, "expected causal or noncausal");
      put_selector(Select(k, q, pred, causal), std::max(dk, dq) + 1);
    } else if (st.op == "and" || st.op == "or") {
      want(2, 2);
      const SelectorDump& a = sel(st.args[0]);
      const SelectorDump& b = sel(st.args[1]);
      const int layer = std::max(a.layer, b.layer);
      SelectorMatrix m = Combine(a.matrix, b.matrix, st.op == "and");
      put_selector(std::move(m), layer);
    } else if (st.op == "aggregate") {
      want(3, 4);
      const SelectorDump& s = sel(st.args[0]);
      auto [v, dv] = seq(st.args[1]);
      Reduction r;
      if (st.args[2] == "min") r = Reduction::kMin;
      else if (st.args[2] == "max") r = Reduction::kMax;
      else if (st.args[2] == "mean") r = Reduction::kMean;
      else detail::ParseFail(st.line, "unknown reduction '" + st.args[2] + "'");
      double fallback = 0;
      if (st.args.size() == 4) {
        auto d = literal(st.args[3]);
        if (!d) detail::ParseFail(st.line, "default must be a literal");
        fallback = *d;
      }
      tr.values[st.target] = Aggregate(s.matrix, v, r, fallback);
      tr.depth[st.target] = std::max(s.layer, dv);
    } else {
      detail::ParseFail(st.line, "unknown op '" + st.op + "'");
    }
  }
  auto it = tr.values.find(prog.output);
  if (it == tr.values.end()) {
    throw Error(ErrorCode::kParseError, "output '" + prog.output + "' is not a sequence");
  }
  tr.output = it->second;
  return tr;
}

// ---------------------------------------------------------------------------
// Predecessor program

inline const char* PredecessorProgramText() {
  return R"(# layer 1: separators and first occurrences
ppslct = select(tokens, '|', equals, noncausal)
gtslct = select(tokens, '>', equals, noncausal)
smslct = select(tokens, tokens, equals, noncausal)
next = add(indices, 1)
x1_ind = aggregate(ppslct, next, min)
x2_ind = aggregate(gtslct, next, min)
qy_ind = aggregate(ppslct, next, max)
fstind = aggregate(smslct, indices, min)

# layer 2: locate x1, x2 and the query start in the alphabet
x1slct = select(indices, x1_ind, equals, noncausal)
x2slct = select(indices, x2_ind, equals, noncausal)
qyslct = select(indices, qy_ind, equals, noncausal)
x1_fst = aggregate(x1slct, fstind, mean)
x2_fst = aggregate(x2slct, fstind, mean)
qy_fst = aggregate(qyslct, fstind, mean)
delta = sub(x2_fst, x1_fst)
out_ind = add(delta, qy_fst)

# layer 3: emit the mapped first letter, then copy the rest of the query
id = select(indices, indices, equals, causal)
o_eq = select(indices, out_ind, equals, causal)
cpslct = select(indices, qy_ind, gt, causal)
o_any = or(o_eq, cpslct)
o_slct = and(o_any, id)
out = aggregate(o_slct, tokens, mean, 0)
output out
)";
}

inline const Program& PredecessorProgram() {
  static const Program p = ParseProgram(PredecessorProgramText(), "predecessor");
  return p;
}

// Parsed "alphabet|ex_in>ex_out|query".
struct TaskString {
  std::string alphabet, ex_in, ex_out, query;
};

inline TaskString ParseTaskString(const std::string& s) {
  auto fail = [&](const std::string& m) -> TaskString {
    throw Error(ErrorCode::kParseError, "task string '" + s + "': " + m);
  };
  const auto p1 = s.find('|');
  const auto gt = s.find('>');
  const auto p2 = s.rfind('|');
  if (p1 == std::string::npos || gt == std::string::npos || p2 == p1 || !(p1 < gt && gt < p2)) {
    return fail("expected alphabet|ex_in>ex_out|query");
  }
  if (std::count(s.begin(), s.end(), '|') != 2 || std::count(s.begin(), s.end(), '>') != 1) {
    return fail("expected exactly two '|' and one '>'");
  }
  TaskString t{s.substr(0, p1), s.substr(p1 + 1, gt - p1 - 1), s.substr(gt + 1, p2 - gt - 1),
               s.substr(p2 + 1)};
  for (const std::string* part : {&t.alphabet, &t.ex_in, &t.ex_out, &t.query}) {
    if (part->empty()) return fail("empty field");
    for (char c : *part) {
      if (c < 'a' || c > 'z') return fail(std::string("invalid character '") + c + "'");
    }
  }
  std::string sorted = t.alphabet;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    return fail("alphabet repeats a letter");
  }
  for (const std::string* part : {&t.ex_in, &t.ex_out, &t.query}) {
    for (char c : *part) {
      if (t.alphabet.find(c) == std::string::npos) {
        return fail(std::string("letter '") + c + "' is not in the alphabet");
      }
    }
  }
  return t;
}

inline std::string FormatTaskString(const Alphabet& a, const LetterString& ex_in,
                                    const LetterString& ex_out, const LetterString& query) {
  return a.ToString() + "|" + ToCompact(ex_in) + ">" + ToCompact(ex_out) + "|" + ToCompact(query);
}

struct ProgramResult {
  std::string answer;  // compact letters
  Trace trace;
};

inline ProgramResult RunPredecessorProgram(const std::string& task_string) {
  ParseTaskString(task_string);
  ProgramResult r;
  r.trace = RunProgram(PredecessorProgram(), task_string);
  const SeqVal& out_ind = r.trace.values.at("out_ind");
  if (out_ind[0] < 0) {
    throw Error(ErrorCode::kIndexUnderflow, "computed alphabet index " +
                                                std::to_string(static_cast<long>(out_ind[0])) +
                                                " is negative");
  }
  for (double c : r.trace.output) {
    if (c != 0) r.answer += static_cast<char>(static_cast<int>(std::lround(c)));
  }
  return r;
}

// The algorithm's named index sequences, computed directly.
struct SymbolicState {
  std::vector<int> ex_in_inds, ex_out_inds, query_inds, ans_inds;
  std::string answer;
};

inline SymbolicState SymbolicPredecessor(const std::string& task_string) {
  const TaskString t = ParseTaskString(task_string);
  auto inds = [&](const std::string& s) {
    std::vector<int> v;
    for (char c : s) v.push_back(static_cast<int>(t.alphabet.find(c)));
    return v;
  };
  SymbolicState st;
  st.ex_in_inds = inds(t.ex_in);
  st.ex_out_inds = inds(t.ex_out);
  st.query_inds = inds(t.query);
  st.ans_inds = st.query_inds;
  st.ans_inds[0] = st.ex_out_inds[0] - st.ex_in_inds[0] + st.query_inds[0];
  for (int i : st.ans_inds) {
    if (i < 0 || i >= static_cast<int>(t.alphabet.size())) {
      throw Error(ErrorCode::kIndexUnderflow, "answer index outside the alphabet");
    }
    st.answer += t.alphabet[i];
  }
  return st;
}

// Runs the predecessor program on every (example, query) pair of letter runs
// with start >= 1 and length 2..6 on each alphabet, against the oracle.
struct OracleCheck {
  long checked = 0;
  long mismatched = 0;
  std::vector<std::string> first_mismatches;  // at most 5
};

inline OracleCheck CheckPredecessorAgainstOracle(const std::vector<Alphabet>& alphabets) {
  const Transformation pred{TransformTag::kPredecessor, 3};
  OracleCheck r;
  for (const Alphabet& a : alphabets) {
    for (int es = 1; es < kAlphabetSize; ++es) {
      for (int el = 2; el <= 6 && es + el <= kAlphabetSize; ++el) {
        const LetterString in = Run(a, es, el);
        const LetterString out = OracleAnswer(pred, a, in);
        for (int qs = 1; qs < kAlphabetSize; ++qs) {
          for (int ql = 2; ql <= 6 && qs + ql <= kAlphabetSize; ++ql) {
            const LetterString q = Run(a, qs, ql);
            const std::string s = FormatTaskString(a, in, out, q);
            ++r.checked;
            std::string got;
            try {
              got = RunPredecessorProgram(s).answer;
            } catch (const Error&) {
            }
            if (got != ToCompact(OracleAnswer(pred, a, q))) {
              if (r.first_mismatches.size() < 5) r.first_mismatches.push_back(s);
              ++r.mismatched;
            }
          }
        }
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Export

inline void WriteSelectorCsv(std::ostream& out, const SelectorMatrix& m,
                             const std::string& labels = "") {
  if (!labels.empty()) {
    out << "query\\key";
    for (char c : labels) out << ',' << c;
    out << '\n';
  }
  for (int i = 0; i < m.rows; ++i) {
    if (!labels.empty()) out << labels[i] << ',';
    for (int j = 0; j < m.cols; ++j) out << (j ? "," : "") << (m.at(i, j) ? 1 : 0);
    out << '\n';
  }
}

}  // namespace analogy::rasp
