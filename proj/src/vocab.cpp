#include "crl/vocab.hpp"

#include "crl/error.hpp"

namespace crl {

namespace {

const char* kWords[5][13] = {
    {"0", "1", "2", "3", "4", "5", "6", "7", "8", "9", "+", "*", "-"},
    {"zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
     "nine", "plus", "times", "minus"},
    {"cero", "uno", "dos", "tres", "cuatro", "cinco", "seis", "siete", "ocho",
     "nueve", "mas", "por", "menos"},
    {"erozay", "oneway", "otway", "eethray", "ourfay", "ivefay", "ixsay",
     "evensay", "eightway", "inenay", "usplay", "imestay", "inusmay"},
    {"nul", "unu", "du", "tri", "kvar", "kvin", "ses", "sep", "ok", "nau",
     "plu", "oble", "min"},
};

}  // namespace

int Vocab::token(int lang, int local) const {
  if (lang < 0 || lang >= languages || local < 0 || local >= kBlock) {
    fail("vocab", "token (" + std::to_string(lang) + ", " + std::to_string(local) +
                      ") outside vocabulary");
  }
  return kBlock * lang + local;
}

std::string token_text(int id, const Vocab& vocab) {
  if (vocab.is_stop(id)) return "STOP";
  const int lang = vocab.lang_of(id);
  const int local = vocab.local_of(id);
  if (id < 0 || lang >= vocab.languages) return "?";
  return kWords[lang][local];
}

std::string render_tokens(const std::vector<int>& ids, const Vocab& vocab,
                          int highlight_begin, int highlight_len) {
  bool all_numerals = true;
  for (const int id : ids) {
    if (vocab.is_stop(id) || vocab.lang_of(id) != 0) all_numerals = false;
  }
  std::string out;
  const int hl_end = highlight_begin + highlight_len;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int pos = static_cast<int>(i);
    if (!all_numerals && i > 0) out += " ";
    if (pos == highlight_begin) out += "[";
    out += token_text(ids[i], vocab);
    if (highlight_len > 0 && pos == hl_end - 1) out += "]";
  }
  return out;
}

}  // namespace crl
