#pragma once

#include <string>
#include <vector>

namespace crl {

// Token layout: per-language blocks of 13 symbols (digits 0-9 at local ids
// 0-9, then + at 10, * at 11, - at 12). Token id = 13 * language + local id.
// The multilingual vocabulary has 5 blocks plus a trailing STOP token at id
// 65 (width 66); the numerical vocabulary is a single block (width 13).
struct Vocab {
  int languages = 1;

  static constexpr int kBlock = 13;
  static constexpr int kStopId = 65;
  static constexpr int kPlusLocal = 10;
  static constexpr int kTimesLocal = 11;
  static constexpr int kMinusLocal = 12;

  bool multilingual() const { return languages > 1; }
  int width() const { return multilingual() ? kBlock * languages + 1 : kBlock; }

  int token(int lang, int local) const;
  int lang_of(int id) const { return id / kBlock; }
  int local_of(int id) const { return id % kBlock; }

  bool is_stop(int id) const { return multilingual() && id == kStopId; }
  bool is_digit(int id) const { return !is_stop(id) && local_of(id) <= 9; }
  bool is_operator(int id) const { return !is_stop(id) && local_of(id) >= kPlusLocal; }
};

// Display names for trace rendering only; internal computation never touches
// surface strings. Blocks: 0 numerals, 1 English, 2 Spanish, 3 Pig Latin,
// 4 a synthetic fifth language.
std::string token_text(int id, const Vocab& vocab);

// Compact rendering of an argmax-decoded state: numerals concatenate
// ("3+4*7"), other languages join words with spaces.
std::string render_tokens(const std::vector<int>& ids, const Vocab& vocab,
                          int highlight_begin = -1, int highlight_len = 0);

}  // namespace crl
