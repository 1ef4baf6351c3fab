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

#include <Eigen/Dense>
#include <sstream>

#include "analogy/rasp.hpp"
#include "analogy/taskgen.hpp"

namespace analogy::rasp {
namespace {

constexpr const char* kExample = "abcdefghij|ghi>fhi|bcd";

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

TEST(Select, KeyComparedAgainstQuery) {
  const SeqVal keys = {1, 2, 3};
  const SeqVal queries = {2, 2, 2};
  const SelectorMatrix gt = Select(keys, queries, Predicate::kGreaterThan, false);
  for (int i = 0; i < 3; ++i) {
    EXPECT_FALSE(gt.at(i, 0));
    EXPECT_FALSE(gt.at(i, 1));
    EXPECT_TRUE(gt.at(i, 2));
  }
  const SelectorMatrix eq = Select(keys, queries, Predicate::kEquals, true);
  EXPECT_FALSE(eq.at(0, 1));  // causal mask hides j > i
  EXPECT_TRUE(eq.at(1, 1));
  EXPECT_TRUE(eq.at(2, 1));
  EXPECT_EQ(eq.CountRow(0), 0);
  EXPECT_EQ(CodeOf([] { Select({1, 2}, {1}, Predicate::kEquals, false); }),
            ErrorCode::kLengthMismatch);
}

TEST(Aggregate, ReductionsAndDefault) {
  const SeqVal v = {4, 1, 7};
  SelectorMatrix s = Select({0, 0, 1}, {0, 1, 5}, Predicate::kEquals, false);
  EXPECT_EQ(Aggregate(s, v, Reduction::kMean, -1), (SeqVal{2.5, 7, -1}));
  EXPECT_EQ(Aggregate(s, v, Reduction::kMin), (SeqVal{1, 7, 0}));
  EXPECT_EQ(Aggregate(s, v, Reduction::kMax), (SeqVal{4, 7, 0}));
  EXPECT_EQ(CodeOf([&] { Aggregate(s, {1, 2}, Reduction::kMax); }), ErrorCode::kLengthMismatch);
}

TEST(Combine, AndOr) {
  const SelectorMatrix a = Select({0, 1}, {0, 1}, Predicate::kEquals, false);
  const SelectorMatrix b = Select({0, 1}, {0, 0}, Predicate::kGreaterThan, false);
  const SelectorMatrix o = Combine(a, b, false);
  const SelectorMatrix n = Combine(a, b, true);
  EXPECT_TRUE(o.at(0, 0));
  EXPECT_TRUE(o.at(0, 1));
  EXPECT_FALSE(n.at(0, 1));
  EXPECT_TRUE(n.at(1, 1));
}

TEST(Compare, SelectorMassOnAttention) {
  const SelectorMatrix id = Select(Indices(4), Indices(4), Predicate::kEquals, false);
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(4, 4);
  EXPECT_DOUBLE_EQ(CompareSelectorToHead(id, eye), 1.0);
  Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(4, 4, 0.25);
  EXPECT_DOUBLE_EQ(CompareSelectorToHead(id, uniform), 0.25);
  EXPECT_EQ(CodeOf([&] { CompareSelectorToHead(id, Eigen::MatrixXd::Zero(3, 4)); }),
            ErrorCode::kShapeMismatch);
}

TEST(Predecessor, WorkedExample) {
  const ProgramResult r = RunPredecessorProgram(kExample);
  EXPECT_EQ(r.answer, "acd");
  const SeqVal expected = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 6, 7, 8, 14, 5, 7, 8, 10, 1, 2, 3};
  EXPECT_EQ(r.trace.values.at("fstind"), expected);
  const SymbolicState st = SymbolicPredecessor(kExample);
  EXPECT_EQ(st.ans_inds, (std::vector<int>{0, 2, 3}));
  EXPECT_EQ(st.ex_in_inds, (std::vector<int>{6, 7, 8}));
  EXPECT_EQ(st.ex_out_inds, (std::vector<int>{5, 7, 8}));
  EXPECT_EQ(st.answer, "acd");
}

TEST(Predecessor, SelectorLayers) {
  const ProgramResult r = RunPredecessorProgram(kExample);
  std::map<std::string, int> layers;
  for (const SelectorDump& d : r.trace.selectors) {
    layers[d.name] = d.layer;
    EXPECT_EQ(d.matrix.rows, 22);
  }
  for (const char* n : {"ppslct", "gtslct", "smslct", "id"}) EXPECT_EQ(layers.at(n), 1) << n;
  for (const char* n : {"x1slct", "x2slct", "qyslct", "cpslct"}) EXPECT_EQ(layers.at(n), 2) << n;
  for (const char* n : {"o_eq", "o_any", "o_slct"}) EXPECT_EQ(layers.at(n), 3) << n;
  int deepest = 0;
  for (const auto& [n, l] : layers) deepest = std::max(deepest, l);
  EXPECT_EQ(deepest, 3);
}

TEST(Predecessor, FirstLetterUnderflows) {
  EXPECT_EQ(CodeOf([] { RunPredecessorProgram("abcdefghij|ghi>fhi|abc"); }),
            ErrorCode::kIndexUnderflow);
  EXPECT_EQ(CodeOf([] { SymbolicPredecessor("abcdefghij|ghi>fhi|abc"); }),
            ErrorCode::kIndexUnderflow);
}

TEST(Predecessor, MalformedTaskStrings) {
  for (const char* bad : {"abc|ab>aa", "abc|ab>aa|", "abcd|ab>|bc", "abcd|ab>ab|bc|c",
                          "abcd|ab>>ab|bc", "abcA|ab>ab|bc", "abca|ab>ab|bc", "abcd|ab>ab|be",
                          "abcd>ab|ab|bc"}) {
    EXPECT_EQ(CodeOf([&] { RunPredecessorProgram(bad); }), ErrorCode::kParseError) << bad;
  }
}

// The program agrees with the transformation oracle on every valid
// predecessor task over several alphabets.
TEST(Predecessor, MatchesOracleExhaustively) {
  const auto pool = BuildAlphabetPool(10, 9);
  const Transformation pred{TransformTag::kPredecessor, 3};
  long checked = 0;
  for (std::size_t ai = 0; ai < 3; ++ai) {
    const Alphabet& a = pool[ai];
    for (int es = 1; es < 26; ++es) {
      for (int el = 2; el <= 6 && es + el <= 26; ++el) {
        const LetterString ex_in = analogy::Run(a, es, el);
        const LetterString ex_out = OracleAnswer(pred, a, ex_in);
        for (int qs = 1; qs < 26; qs += 3) {
          for (int ql = 2; ql <= 6 && qs + ql <= 26; ++ql) {
            const LetterString q = analogy::Run(a, qs, ql);
            if (q == ex_in) continue;
            const std::string s = FormatTaskString(a, ex_in, ex_out, q);
            ASSERT_EQ(RunPredecessorProgram(s).answer, ToCompact(OracleAnswer(pred, a, q))) << s;
            ++checked;
          }
        }
      }
    }
  }
  EXPECT_GT(checked, 5000);
}

TEST(Interpreter, CustomProgram) {
  const Program p = ParseProgram(
      "# shift every token by one\n"
      "one = const(1)\n"
      "nxt = add(tokens, one)\n"
      "prev = select(indices, indices, equals, causal)\n"
      "cnt = aggregate(prev, nxt, max)\n"
      "output cnt\n");
  const Trace t = RunProgram(p, "abc");
  EXPECT_EQ(t.output, (SeqVal{'b', 'c', 'd'}));
  EXPECT_EQ(t.depth.at("cnt"), 1);
  EXPECT_EQ(t.depth.at("nxt"), 0);
}

TEST(Interpreter, CharacterLiteralHash) {
  const Program p = ParseProgram("s = select(tokens, '#', equals, noncausal)\n"
                                 "o = aggregate(s, indices, max, -1)\noutput o\n");
  EXPECT_EQ(RunProgram(p, "a#b").output, (SeqVal{1, 1, 1}));
}

TEST(Interpreter, ParseErrors) {
  const std::vector<std::string> bad = {
      "x = add(tokens, 1)\n",                                   // no output
      "x add(tokens)\noutput x\n",                              // no '='
      "x = add(tokens, 1\noutput x\n",                          // unbalanced
      "x = frobnicate(tokens)\noutput x\n",                     // unknown op
      "x = add(tokens, nothere)\noutput x\n",                   // unknown sequence
      "s = select(tokens, tokens, less, causal)\noutput tokens\n",
      "s = select(tokens, tokens, equals, sideways)\noutput tokens\n",
      "x = aggregate(nosel, tokens, max)\noutput x\n",
      "s = select(tokens, tokens, equals, causal)\nx = aggregate(s, tokens, median)\noutput x\n",
      "x = add(tokens)\noutput x\n",
      "x = const(q)\noutput x\n",
      "s = select(tokens, tokens, equals, causal)\noutput s\n",  // output is a selector
  };
  for (const std::string& text : bad) {
    EXPECT_EQ(CodeOf([&] { RunProgram(ParseProgram(text), "abc"); }), ErrorCode::kParseError)
        << text;
  }
}

TEST(Export, SelectorCsv) {
  const SelectorMatrix id = Select(Indices(2), Indices(2), Predicate::kEquals, false);
  std::ostringstream plain, labelled;
  WriteSelectorCsv(plain, id);
  WriteSelectorCsv(labelled, id, "ab");
  EXPECT_EQ(plain.str(), "1,0\n0,1\n");
  EXPECT_EQ(labelled.str(), "query\\key,a,b\na,1,0\nb,0,1\n");
}

}  // namespace
}  // namespace analogy::rasp
