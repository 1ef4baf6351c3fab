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

#include "analogy/taskgen.hpp"
#include "analogy/tokenizer.hpp"

namespace analogy {
namespace {

AnalogyTask Fixed() {
  AnalogyTask t;
  t.alphabet = Alphabet::Standard();
  t.examples = {{ParseLetters("ghi"), ParseLetters("fhi")}};
  t.query = ParseLetters("bcd");
  t.target = ParseLetters("acd");
  t.transformation.tag = TransformTag::kPredecessor;
  return t;
}

TEST(Vocab, LayoutAndNames) {
  EXPECT_EQ(kVocabSize, 29);
  EXPECT_EQ(LetterToken(Letter::FromChar('a')), 1);
  EXPECT_EQ(LetterToken(Letter::FromChar('z')), 26);
  EXPECT_EQ(EncoderTokenName(kEncSep), "|");
  EXPECT_EQ(EncoderTokenName(kEncArrow), "->");
  EXPECT_EQ(DecoderTokenName(kDecEos), "EOS");
  EXPECT_FALSE(IsLetterToken(kPad));
  EXPECT_FALSE(IsLetterToken(27));
  EXPECT_THROW(TokenLetter(kPad), Error);
}

TEST(Encode, SerializationLayout) {
  const EncodedTask e = EncodeTask(Fixed());
  // 26 alphabet + sep + 3 + arrow + 3 + sep + 3 + arrow.
  ASSERT_EQ(e.encoder.size(), 39u);
  for (int i = 0; i < 26; ++i) EXPECT_EQ(e.encoder[i], i + 1);
  EXPECT_EQ(e.encoder[26], kEncSep);
  EXPECT_EQ(e.encoder[27], 7);  // g
  EXPECT_EQ(e.encoder[30], kEncArrow);
  EXPECT_EQ(e.encoder[31], 6);  // f
  EXPECT_EQ(e.encoder[34], kEncSep);
  EXPECT_EQ(e.encoder[35], 2);  // b
  EXPECT_EQ(e.encoder.back(), kEncArrow);
  EXPECT_EQ(e.decoder_input, (TokenSeq{kDecStart, 1, 3, 4}));
  EXPECT_EQ(e.decoder_target, (TokenSeq{1, 3, 4, kDecEos}));
}

TEST(Encode, RoundTripOnGeneratedTasks) {
  DatasetConfig c;
  c.n_train = 0;
  c.n_val = 300;
  c.n_test = 0;
  c.n_examples = 3;
  c.include_copy = true;
  const Dataset ds = BuildDataset(c, false);
  for (const AnalogyTask& t : ds.splits.at(kSplitVal)) {
    const EncodedTask e = EncodeTask(t);
    const DecodedEncoder d = DecodeEncoder(e.encoder);
    EXPECT_EQ(d.alphabet, t.alphabet);
    EXPECT_EQ(d.examples, t.examples);
    EXPECT_EQ(d.query, t.query);
    EXPECT_EQ(DecodeTarget(e.decoder_target), t.target);
  }
}

TEST(Encode, RejectsMalformedStreams) {
  TokenSeq e = EncodeTask(Fixed()).encoder;
  TokenSeq no_arrow(e.begin(), e.end() - 1);
  EXPECT_THROW(DecodeEncoder(no_arrow), Error);
  TokenSeq bad = e;
  bad[26] = 5;
  EXPECT_THROW(DecodeEncoder(bad), Error);
  EXPECT_THROW(DecodeEncoder(TokenSeq{1, 2, 3}), Error);
}

TEST(Pad, RoundTripAndMask) {
  const std::vector<TokenSeq> seqs = {{1, 2, 3}, {4}, {5, 6}};
  const PaddedBatch b = PadBatch(seqs, 5);
  EXPECT_EQ(b.width, 5);
  EXPECT_EQ(b.at(1, 1), kPad);
  EXPECT_FALSE(b.real(1, 1));
  EXPECT_TRUE(b.real(2, 1));
  EXPECT_EQ(Unpad(b), seqs);
}

TEST(Roles, FollowGrammar) {
  const TokenSeq e = EncodeTask(Fixed()).encoder;
  const auto roles = EncoderRoles(e);
  EXPECT_EQ(roles[0], Role::kAlphabet);
  EXPECT_EQ(roles[26], Role::kSeparator);
  EXPECT_EQ(roles[27], Role::kExampleIn);
  EXPECT_EQ(roles[30], Role::kArrow);
  EXPECT_EQ(roles[31], Role::kExampleOut);
  EXPECT_EQ(roles[35], Role::kQuery);
  EXPECT_EQ(roles[38], Role::kArrow);
}

}  // namespace
}  // namespace analogy
