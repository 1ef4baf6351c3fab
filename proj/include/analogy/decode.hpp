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

// Greedy decoding with frozen weights.

#pragma once

#include <vector>

#include "analogy/model.hpp"
#include "analogy/tokenizer.hpp"

namespace analogy {

// Letters allowed beyond the target length before decoding is cut off.
inline constexpr int kDecodeSlack = 4;

struct Decoded {
  LetterString letters;
  bool finished = false;   // EOS was produced
  bool malformed = false;  // a non-letter, non-EOS token was produced
};

// Index of the largest entry; ties go to the lowest token id.
template <typename Row>
int ArgmaxLowestId(const Row& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j) {
    if (row(j) > row(best)) best = static_cast<int>(j);
  }
  return best;
}

// Decodes every encoder stream of the batch. `max_letters[b]` bounds the
// number of letters emitted for sequence b. The encoder runs once; finished
// sequences drop out of later decoder passes.
template <typename T>
std::vector<Decoded> GreedyDecode(const ModelParams<T>& p, const std::vector<TokenSeq>& enc,
                                  const std::vector<int>& max_letters,
                                  const AttentionPatch<T>* patch = nullptr) {
  if (enc.size() != max_letters.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one length bound per sequence required");
  }
  ForwardOptions<T> opt;
  opt.mode = Mode::kEval;
  opt.patch = patch;
  const EncoderState<T> full = EncoderForward(p, enc, opt);
  opt.patch = nullptr;

  const int n = static_cast<int>(enc.size());
  std::vector<Decoded> out(n);
  std::vector<TokenSeq> prefixes(n, TokenSeq{kDecStart});
  std::vector<int> active(n);
  for (int i = 0; i < n; ++i) active[i] = i;

  while (!active.empty()) {
    // Encoder rows of the still-active sequences.
    EncoderState<T> sub;
    std::vector<TokenSeq> dec;
    int rows = 0;
    for (int i : active) rows += full.layout.lengths[i];
    sub.out.resize(rows, full.out.cols());
    int r = 0;
    for (int i : active) {
      const int len = full.layout.lengths[i];
      sub.out.middleRows(r, len) = full.out.middleRows(full.layout.offsets[i], len);
      sub.layout.offsets.push_back(r);
      sub.layout.lengths.push_back(len);
      r += len;
      dec.push_back(prefixes[i]);
    }
    sub.layout.total = rows;
    const DecoderState<T> ds = DecoderForward(p, sub, dec, opt);

    std::vector<int> still;
    for (std::size_t k = 0; k < active.size(); ++k) {
      const int i = active[k];
      const int last = ds.layout.offsets[k] + ds.layout.lengths[k] - 1;
      const int tok = ArgmaxLowestId(ds.logits.row(last));
      if (tok == kDecEos) {
        out[i].finished = true;
        continue;
      }
      if (!IsLetterToken(tok)) {
        out[i].malformed = true;
        continue;
      }
      out[i].letters.push_back(TokenLetter(tok));
      prefixes[i].push_back(tok);
      if (static_cast<int>(out[i].letters.size()) < max_letters[i]) still.push_back(i);
    }
    active = std::move(still);
  }
  return out;
}

}  // namespace analogy
