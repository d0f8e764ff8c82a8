#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace stance {

// Whitespace tokenization: maximal runs of non-whitespace bytes.
std::vector<std::string> split_whitespace(std::string_view text);

// Number of whitespace-separated tokens.
int count_words(std::string_view text);

// Fraction of byte values that are ASCII letters among all letter-like bytes
// (ASCII letters plus bytes >= 0x80). Returns 1.0 when no such byte occurs.
double ascii_letter_fraction(std::string_view text);

}  // namespace stance
