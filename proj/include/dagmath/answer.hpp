#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

namespace dagmath {

using Rational = boost::multiprecision::cpp_rational;

// A final answer. `canonical` is the comparison key; `numeric_value` is set
// whenever the canonical text denotes an integer, decimal or fraction.
struct Answer {
  std::string raw;
  std::string canonical;
  std::optional<Rational> numeric_value;

  bool operator==(const Answer&) const = default;
};

// Normalizes a boxed answer:
//  - strips whitespace, outer $..$, \(..\), \[..\], \boxed{..}, \text{..}
//  - removes thousands separators (1,234  1{,}234  1\,234)
//  - reads integers, decimals, a/b and \frac{a}{b} as exact rationals
//  - lowercases whatever text remains
// normalize_answer(normalize_answer(x).canonical) == normalize_answer(x)
// holds for every x, up to the `raw` field.
Answer normalize_answer(std::string_view raw);

// Contents of every \boxed{...} in `text`, in order of appearance. Nested
// braces are balanced; an unterminated box is ignored.
std::vector<std::string> find_boxed(std::string_view text);

std::string rational_to_string(const Rational& value);

}  // namespace dagmath
