#include "stance/text.hpp"

#include <cctype>

namespace stance {

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) tokens.emplace_back(text.substr(start, i - start));
  }
  return tokens;
}

int count_words(std::string_view text) {
  int n = 0;
  bool in_token = false;
  for (char ch : text) {
    bool ws = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!ws && !in_token) ++n;
    in_token = !ws;
  }
  return n;
}

double ascii_letter_fraction(std::string_view text) {
  long ascii_letters = 0;
  long letterish = 0;
  for (unsigned char c : text) {
    if (std::isalpha(c) && c < 0x80) {
      ++ascii_letters;
      ++letterish;
    } else if (c >= 0x80) {
      ++letterish;
    }
  }
  if (letterish == 0) return 1.0;
  return static_cast<double>(ascii_letters) / static_cast<double>(letterish);
}

}  // namespace stance
