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

#include <set>

#include "analogy/io.hpp"
#include "analogy/taskgen.hpp"

namespace analogy {
namespace {

LetterString S(const char* s) { return ParseLetters(s); }

std::string Oracle(TransformTag tag, const char* query, const Alphabet& a = Alphabet::Standard(),
                   int offset = 3) {
  return ToSpaced(OracleAnswer({tag, offset}, a, S(query)));
}

template <typename F>
ErrorCode CodeOf(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kIo;
}

// Worked examples for every transformation on the standard alphabet.
TEST(Oracle, TableExamples) {
  using T = TransformTag;
  EXPECT_EQ(Oracle(T::kExtend, "a b c"), "a b c d");
  EXPECT_EQ(Oracle(T::kSuccessor, "a b c"), "a b d");
  EXPECT_EQ(Oracle(T::kPredecessor, "b c d"), "a c d");
  EXPECT_EQ(Oracle(T::kRemoveRedundant, "a b b c"), "a b c");
  EXPECT_EQ(Oracle(T::kFix, "a b w d"), "a b c d");
  EXPECT_EQ(Oracle(T::kSort, "a d c b"), "a b c d");
  EXPECT_EQ(Oracle(T::kSortGroup, "d d c c b b"), "b b c c d d");
  EXPECT_EQ(Oracle(T::kRmRedInterleave, "a x b x b x c"), "a x b x c");
  EXPECT_EQ(Oracle(T::kRmRedSucc, "a b b c"), "a b d");
  EXPECT_EQ(Oracle(T::kFixExt, "a b w d"), "a b c d e");
  EXPECT_EQ(Oracle(T::kRmRedSort, "a d d c b"), "a b c d");
  EXPECT_EQ(Oracle(T::kExtPred, "b c d"), "a c d e");
  EXPECT_EQ(Oracle(T::kFixIL, "a f b f w"), "a f b f c");
  EXPECT_EQ(Oracle(T::kExtGp, "a a b b"), "a a b b c c");
  EXPECT_EQ(Oracle(T::kExtExtSucc, "a b c"), "a b c d f");
  EXPECT_EQ(Oracle(T::kFixPredSucc, "b c w e"), "a c d f");
  EXPECT_EQ(Oracle(T::kReverse, "a b c"), "c b a");
  EXPECT_EQ(Oracle(T::kShift, "a b c"), "d e f");
  EXPECT_EQ(Oracle(T::kReplicate, "a b c"), "a b c a b c");
}

TEST(Oracle, RunningPredecessorExample) {
  EXPECT_EQ(Oracle(TransformTag::kPredecessor, "g h i"), "f h i");
  EXPECT_EQ(Oracle(TransformTag::kPredecessor, "b c d"), "a c d");
  EXPECT_EQ(Oracle(TransformTag::kSort, "m l n o"), "l m n o");
  EXPECT_EQ(Oracle(TransformTag::kSort, "d f e g"), "d e f g");
}

TEST(Oracle, RespectsPermutedOrder) {
  const Alphabet a = Alphabet::FromString("bacdefghijklmnopqrstuvwxyz");
  EXPECT_EQ(Oracle(TransformTag::kSuccessor, "d e f", a), "d e g");
  EXPECT_EQ(Oracle(TransformTag::kPredecessor, "a c d", a), "b c d");
  EXPECT_EQ(Oracle(TransformTag::kSort, "c a b", a), "b a c");
}

TEST(Oracle, MalformedQueries) {
  const Alphabet a = Alphabet::Standard();
  EXPECT_EQ(CodeOf([&] { OracleAnswer({TransformTag::kSuccessor, 3}, a, S("a c e")); }),
            ErrorCode::kMalformedQuery);
  EXPECT_EQ(CodeOf([&] { OracleAnswer({TransformTag::kPredecessor, 3}, a, S("a b c")); }),
            ErrorCode::kMalformedQuery);
  EXPECT_EQ(CodeOf([&] { OracleAnswer({TransformTag::kExtend, 3}, a, S("x y z")); }),
            ErrorCode::kMalformedQuery);
  EXPECT_EQ(CodeOf([&] { OracleAnswer({TransformTag::kRemoveRedundant, 3}, a, S("a b c")); }),
            ErrorCode::kMalformedQuery);
}

TEST(Oracle, ReverseIsInvolution) {
  std::mt19937_64 rng(4);
  for (int i = 0; i < 200; ++i) {
    const Alphabet a = PermuteAlphabet(Alphabet::Standard(), 10, i);
    const Instance inst = MakeInstance({TransformTag::kReverse, 3}, a, rng);
    EXPECT_EQ(OracleAnswer({TransformTag::kReverse, 3}, a, inst.output), inst.input);
  }
}

TEST(Instance, SortOutputIsFixedPoint) {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 200; ++i) {
    const Alphabet a = PermuteAlphabet(Alphabet::Standard(), 20, i);
    const Instance inst = MakeInstance({TransformTag::kSort, 3}, a, rng);
    EXPECT_EQ(OracleAnswer({TransformTag::kSort, 3}, a, inst.output), inst.output);
  }
}

// Constructive generation and query-only inference must agree everywhere.
class InstanceOracle : public ::testing::TestWithParam<TransformTag> {};

TEST_P(InstanceOracle, GeneratedOutputMatchesOracle) {
  const Transformation t{GetParam(), 3};
  std::mt19937_64 rng(static_cast<std::uint64_t>(GetParam()) + 100);
  const auto pool = BuildAlphabetPool(20, 3);
  for (int i = 0; i < 500; ++i) {
    const Alphabet& a = pool[i % pool.size()];
    SharedParams shared;
    shared.interleave = Letter(static_cast<int>(UniformIndex(rng, 26)));
    Instance inst;
    try {
      inst = MakeInstance(t, a, rng, shared);
    } catch (const Error& e) {
      ASSERT_EQ(e.code(), ErrorCode::kInapplicable);
      continue;
    }
    ASSERT_EQ(OracleAnswer(t, a, inst.input), inst.output)
        << TransformName(t.tag) << " on " << a.ToString() << ": " << ToSpaced(inst.input);
  }
}

INSTANTIATE_TEST_SUITE_P(AllTags, InstanceOracle, ::testing::ValuesIn(kAllTransforms),
                         [](const auto& info) { return std::string(TransformName(info.param)); });

TEST(Instance, FixedExampleReplicate) {
  EXPECT_EQ(Oracle(TransformTag::kReplicate, "a b c"), "a b c a b c");
  EXPECT_EQ(Oracle(TransformTag::kExtExtSucc, "a b c"), "a b c d f");
  EXPECT_EQ(Oracle(TransformTag::kFixPredSucc, "b c w e"), "a c d f");
}

TEST(Instance, InterleaveLetterSharedWithinTask) {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 100; ++i) {
    const AnalogyTask t =
        BuildTask({TransformTag::kRmRedInterleave, 3}, Alphabet::Standard(), rng, 3, false);
    const Letter x = t.examples[0].input[1];
    for (const auto& ex : t.examples) EXPECT_EQ(ex.input[1], x);
    EXPECT_EQ(t.query[1], x);
  }
}

TEST(BuildTask, CopyTaskRepeatsExample) {
  std::mt19937_64 rng(1);
  const AnalogyTask t =
      BuildTask({TransformTag::kPredecessor, 3}, Alphabet::Standard(), rng, 1, true);
  EXPECT_TRUE(t.is_copy);
  EXPECT_EQ(t.query, t.examples[0].input);
  EXPECT_EQ(t.target, t.examples[0].output);
}

TEST(BuildTask, QueryDiffersFromExamples) {
  std::mt19937_64 rng(2);
  for (TransformTag tag : kAllTransforms) {
    for (int n = 1; n <= 5; n += 2) {
      const AnalogyTask t = BuildTask({tag, 3}, Alphabet::Standard(), rng, n, false);
      ASSERT_EQ(static_cast<int>(t.examples.size()), n);
      for (const auto& ex : t.examples) EXPECT_NE(ex.input, t.query);
      EXPECT_EQ(OracleAnswer({tag, 3}, t.alphabet, t.query), t.target);
    }
  }
}

TEST(BuildTask, RejectsExampleCount) {
  std::mt19937_64 rng(2);
  EXPECT_EQ(CodeOf([&] { BuildTask({TransformTag::kSort, 3}, Alphabet::Standard(), rng, 0, false); }),
            ErrorCode::kInvalidConfig);
}

TEST(Pool, LevelsAndUniqueness) {
  const auto pool = BuildAlphabetPool(20, 1);
  ASSERT_EQ(pool.size(), 20u);
  EXPECT_EQ(pool[0], Alphabet::Standard());
  std::map<int, int> per_level;
  std::set<std::string> orders;
  for (const Alphabet& a : pool) {
    ++per_level[a.permutation_count()];
    orders.insert(a.ToString());
  }
  EXPECT_EQ(orders.size(), 20u);
  EXPECT_EQ(per_level[0], 1);
  EXPECT_EQ(per_level[2], 7);
  EXPECT_EQ(per_level[5], 4);
  EXPECT_EQ(per_level[10], 4);
  EXPECT_EQ(per_level[20], 4);
}

TEST(Pool, NewAlphabetsDisjointFromTraining) {
  for (int size : {20, 200}) {
    const auto pool = BuildAlphabetPool(size, 1);
    const auto fresh = BuildNewAlphabets(pool, 1);
    ASSERT_EQ(fresh.size(), 20u);
    std::set<std::string> train;
    for (const auto& a : pool) train.insert(a.ToString());
    for (const auto& a : fresh) EXPECT_EQ(train.count(a.ToString()), 0u);
  }
}

TEST(Dataset, DefaultSplitSizes) {
  const DatasetConfig c = DatasetConfig::Default(false);
  EXPECT_EQ(c.n_train, 180000);
  EXPECT_EQ(c.n_val, 25000);
  EXPECT_EQ(c.n_test, 25000);
  const DatasetConfig cc = DatasetConfig::Default(true);
  EXPECT_EQ(cc.n_train + cc.n_val + cc.n_test, 400000);
}

TEST(Dataset, SmallBuildIsDeterministicAndTagged) {
  DatasetConfig c;
  c.include_copy = true;
  c.n_train = 400;
  c.n_val = 100;
  c.n_test = 100;
  c.n_ood = 100;
  const Dataset a = BuildDataset(c);
  const Dataset b = BuildDataset(c);
  for (const auto& [name, tasks] : a.splits) {
    ASSERT_EQ(tasks.size(), b.splits.at(name).size());
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      EXPECT_EQ(TaskToJson(tasks[i]).dump(), TaskToJson(b.splits.at(name)[i]).dump());
    }
  }
  int copies = 0;
  for (const auto& t : a.splits.at(kSplitTrain)) copies += t.is_copy;
  EXPECT_EQ(copies, 200);
  for (const auto& t : a.splits.at(kSuiteNewAlphabet)) {
    EXPECT_FALSE(t.is_copy);
    EXPECT_EQ(t.alphabet_set, AlphabetSet::kNew);
    EXPECT_EQ(SplitOf(t.transformation.tag), TransformSplit::kSeen);
  }
  for (const auto& t : a.splits.at(kSuiteNewTransform)) {
    EXPECT_NE(SplitOf(t.transformation.tag), TransformSplit::kSeen);
    EXPECT_EQ(t.alphabet_set, AlphabetSet::kSeen);
  }
  for (const auto& t : a.splits.at(kSuiteNewBoth)) {
    EXPECT_NE(SplitOf(t.transformation.tag), TransformSplit::kSeen);
    EXPECT_EQ(t.alphabet_set, AlphabetSet::kNew);
  }
}

TEST(Dataset, SplitStreamsIndependentOfSizes) {
  DatasetConfig c;
  c.n_train = 50;
  c.n_val = 10;
  c.n_test = 30;
  c.n_ood = 0;
  DatasetConfig d = c;
  d.n_train = 500;
  const Dataset a = BuildDataset(c, false), b = BuildDataset(d, false);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(TaskToJson(a.splits.at(kSplitTest)[i]).dump(),
              TaskToJson(b.splits.at(kSplitTest)[i]).dump());
  }
}

TEST(Dataset, ConfigValidation) {
  DatasetConfig c;
  c.alphabet_pool_size = 7;
  EXPECT_EQ(CodeOf([&] { c.Validate(); }), ErrorCode::kInvalidConfig);
  c = DatasetConfig();
  c.n_examples = 6;
  EXPECT_EQ(CodeOf([&] { c.Validate(); }), ErrorCode::kInvalidConfig);
}

}  // namespace
}  // namespace analogy
