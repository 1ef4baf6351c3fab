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

// Token streams for the encoder and decoder.
//
// Encoder: alphabet | in -> out | ... | query ->
// Decoder input:  START t1 ... tn
// Decoder target: t1 ... tn EOS
//
// Both vocabularies use PAD = 0 and letters 1..26 in standard order. The
// encoder adds "|" = 27 and "->" = 28; the decoder adds START = 27 ("->")
// and EOS = 28.

#pragma once

#include <string>
#include <vector>

#include "analogy/core.hpp"
#include "analogy/taskgen.hpp"

namespace analogy {

using TokenId = int;
using TokenSeq = std::vector<TokenId>;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kEncSep = 27;
inline constexpr TokenId kEncArrow = 28;
inline constexpr TokenId kDecStart = 27;
inline constexpr TokenId kDecEos = 28;
inline constexpr int kVocabSize = 29;

inline TokenId LetterToken(Letter l) { return l.id() + 1; }
inline bool IsLetterToken(TokenId t) { return t >= 1 && t <= kAlphabetSize; }
inline Letter TokenLetter(TokenId t) {
  if (!IsLetterToken(t)) {
    throw Error(ErrorCode::kVocabViolation, "token " + std::to_string(t) + " is not a letter");
  }
  return Letter(t - 1);
}

inline std::string EncoderTokenName(TokenId t) {
  if (t == kPad) return "PAD";
  if (t == kEncSep) return "|";
  if (t == kEncArrow) return "->";
  if (IsLetterToken(t)) return std::string(1, TokenLetter(t).symbol());
  throw Error(ErrorCode::kVocabViolation, "encoder token " + std::to_string(t));
}

inline std::string DecoderTokenName(TokenId t) {
  if (t == kPad) return "PAD";
  if (t == kDecStart) return "->";
  if (t == kDecEos) return "EOS";
  if (IsLetterToken(t)) return std::string(1, TokenLetter(t).symbol());
  throw Error(ErrorCode::kVocabViolation, "decoder token " + std::to_string(t));
}

// Persisted next to checkpoints so token ids stay interpretable.
inline std::string VocabManifest() {
  return R"({"version":1,"pad":0,"letters":"1-26 standard order",)"
         R"("encoder":{"|":27,"->":28},"decoder":{"start":27,"eos":28},"size":29})";
}

struct EncodedTask {
  TokenSeq encoder;
  TokenSeq decoder_input;
  TokenSeq decoder_target;
};

inline void AppendLetters(TokenSeq& out, const LetterString& s) {
  for (Letter l : s) out.push_back(LetterToken(l));
}

inline TokenSeq EncodeEncoder(const Alphabet& alphabet,
                              const std::vector<ExamplePair>& examples,
                              const LetterString& query) {
  TokenSeq enc;
  for (Letter l : alphabet.order()) enc.push_back(LetterToken(l));
  enc.push_back(kEncSep);
  for (const ExamplePair& ex : examples) {
    AppendLetters(enc, ex.input);
    enc.push_back(kEncArrow);
    AppendLetters(enc, ex.output);
    enc.push_back(kEncSep);
  }
  AppendLetters(enc, query);
  enc.push_back(kEncArrow);
  return enc;
}

inline EncodedTask EncodeTask(const AnalogyTask& task) {
  EncodedTask e;
  e.encoder = EncodeEncoder(task.alphabet, task.examples, task.query);
  e.decoder_input.push_back(kDecStart);
  AppendLetters(e.decoder_input, task.target);
  AppendLetters(e.decoder_target, task.target);
  e.decoder_target.push_back(kDecEos);
  return e;
}

struct DecodedEncoder {
  Alphabet alphabet;
  std::vector<ExamplePair> examples;
  LetterString query;
};

// Inverse of EncodeEncoder.
inline DecodedEncoder DecodeEncoder(const TokenSeq& enc) {
  auto fail = [](const std::string& m) -> DecodedEncoder {
    throw Error(ErrorCode::kVocabViolation, "malformed encoder stream: " + m);
  };
  if (enc.size() < kAlphabetSize + 3) return fail("too short");
  std::array<Letter, kAlphabetSize> order;
  for (int i = 0; i < kAlphabetSize; ++i) order[i] = TokenLetter(enc[i]);
  DecodedEncoder d;
  d.alphabet = Alphabet::FromOrder(order);
  if (enc[kAlphabetSize] != kEncSep) return fail("missing alphabet separator");
  if (enc.back() != kEncArrow) return fail("missing final arrow");

  // Split the remainder into "|"-separated segments.
  std::vector<TokenSeq> segments(1);
  for (std::size_t i = kAlphabetSize + 1; i + 1 < enc.size(); ++i) {
    if (enc[i] == kEncSep) {
      segments.emplace_back();
    } else {
      segments.back().push_back(enc[i]);
    }
  }
  for (std::size_t s = 0; s + 1 < segments.size(); ++s) {
    ExamplePair ex;
    bool after_arrow = false;
    for (TokenId t : segments[s]) {
      if (t == kEncArrow) {
        if (after_arrow) return fail("two arrows in one example");
        after_arrow = true;
        continue;
      }
      (after_arrow ? ex.output : ex.input).push_back(TokenLetter(t));
    }
    if (!after_arrow) return fail("example without arrow");
    d.examples.push_back(std::move(ex));
  }
  for (TokenId t : segments.back()) d.query.push_back(TokenLetter(t));
  if (d.examples.empty()) return fail("no examples");
  return d;
}

inline LetterString DecodeTarget(const TokenSeq& target) {
  LetterString out;
  for (TokenId t : target) {
    if (t == kDecEos || t == kPad) break;
    out.push_back(TokenLetter(t));
  }
  return out;
}

struct PaddedBatch {
  int rows = 0;
  int width = 0;
  std::vector<TokenId> tokens;  // row-major rows x width
  std::vector<bool> mask;       // true for real tokens

  TokenId at(int r, int c) const { return tokens[r * width + c]; }
  bool real(int r, int c) const { return mask[r * width + c]; }
};

// Right-pads to the longest sequence (or `min_width` if larger).
inline PaddedBatch PadBatch(const std::vector<TokenSeq>& seqs, int min_width = 0) {
  PaddedBatch b;
  b.rows = static_cast<int>(seqs.size());
  b.width = min_width;
  for (const TokenSeq& s : seqs) b.width = std::max(b.width, static_cast<int>(s.size()));
  b.tokens.assign(static_cast<std::size_t>(b.rows) * b.width, kPad);
  b.mask.assign(static_cast<std::size_t>(b.rows) * b.width, false);
  for (int r = 0; r < b.rows; ++r) {
    for (std::size_t c = 0; c < seqs[r].size(); ++c) {
      b.tokens[r * b.width + c] = seqs[r][c];
      b.mask[r * b.width + c] = seqs[r][c] != kPad;
    }
  }
  return b;
}

// Strips PAD positions, recovering the variable-length rows.
inline std::vector<TokenSeq> Unpad(const PaddedBatch& b) {
  std::vector<TokenSeq> out(b.rows);
  for (int r = 0; r < b.rows; ++r) {
    for (int c = 0; c < b.width; ++c) {
      if (b.real(r, c)) out[r].push_back(b.at(r, c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Roles of encoder positions

enum class Role { kAlphabet, kExampleIn, kExampleOut, kQuery, kSeparator, kArrow };

inline const char* RoleName(Role r) {
  switch (r) {
    case Role::kAlphabet: return "alphabet";
    case Role::kExampleIn: return "example_in";
    case Role::kExampleOut: return "example_out";
    case Role::kQuery: return "query";
    case Role::kSeparator: return "separator";
    case Role::kArrow: return "arrow";
  }
  return "?";
}

// One role per encoder position, read off the serialization grammar.
inline std::vector<Role> EncoderRoles(const TokenSeq& enc) {
  std::vector<Role> roles(enc.size());
  int separators = 0;
  bool after_arrow = false;
  // The last "|" starts the query block.
  int last_sep = -1;
  for (std::size_t i = 0; i < enc.size(); ++i) {
    if (enc[i] == kEncSep) last_sep = static_cast<int>(i);
  }
  for (std::size_t i = 0; i < enc.size(); ++i) {
    const TokenId t = enc[i];
    if (t == kEncSep) {
      roles[i] = Role::kSeparator;
      ++separators;
      after_arrow = false;
    } else if (t == kEncArrow) {
      roles[i] = Role::kArrow;
      after_arrow = true;
    } else if (separators == 0) {
      roles[i] = Role::kAlphabet;
    } else if (static_cast<int>(i) > last_sep) {
      roles[i] = Role::kQuery;
    } else {
      roles[i] = after_arrow ? Role::kExampleOut : Role::kExampleIn;
    }
  }
  return roles;
}

}  // namespace analogy
