#include "dagmath/answer.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>

namespace dagmath {
namespace {

using boost::multiprecision::cpp_int;

std::string trim(std::string_view s) {
  size_t b = 0;
  size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

bool starts_with(const std::string& s, std::string_view p) {
  return s.size() >= p.size() && s.compare(0, p.size(), p) == 0;
}

bool ends_with(const std::string& s, std::string_view p) {
  return s.size() >= p.size() && s.compare(s.size() - p.size(), p.size(), p) == 0;
}

// Index of the brace closing the one at `open`, or npos.
size_t matching_brace(std::string_view s, size_t open) {
  int depth = 0;
  for (size_t i = open; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      ++i;
      continue;
    }
    if (s[i] == '{') ++depth;
    if (s[i] == '}' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

// "\cmd{body}" spanning the whole string -> body.
std::optional<std::string> unwrap_command(const std::string& s, std::string_view cmd) {
  if (!starts_with(s, cmd)) return std::nullopt;
  size_t open = cmd.size();
  while (open < s.size() && s[open] == ' ') ++open;
  if (open >= s.size() || s[open] != '{') return std::nullopt;
  if (matching_brace(s, open) != s.size() - 1) return std::nullopt;
  return s.substr(open + 1, s.size() - open - 2);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string strip_once(std::string s) {
  s = trim(s);
  static constexpr std::array<std::pair<std::string_view, std::string_view>, 4> kDelims{{
      {"$$", "$$"}, {"$", "$"}, {"\\(", "\\)"}, {"\\[", "\\]"}}};
  for (const auto& [open, close] : kDelims) {
    if (s.size() >= open.size() + close.size() && starts_with(s, open) && ends_with(s, close)) {
      return s.substr(open.size(), s.size() - open.size() - close.size());
    }
  }
  for (std::string_view cmd : {"\\boxed", "\\text", "\\textbf", "\\mathrm", "\\mbox"}) {
    if (auto inner = unwrap_command(s, cmd)) return *inner;
  }
  if (s.size() > 1 && s.front() == '{' && matching_brace(s, 0) == s.size() - 1) {
    return s.substr(1, s.size() - 2);
  }
  if (s.size() > 1 && s.back() == '.') s.pop_back();
  for (std::string_view suffix : {"^{\\circ}", "^\\circ", "\\%", "%"}) {
    if (s.size() > suffix.size() && ends_with(s, suffix)) {
      s.resize(s.size() - suffix.size());
      break;
    }
  }
  for (std::string_view spacing : {"\\left", "\\right", "\\!", "\\,", "\\;", "\\:", "\\ "}) {
    replace_all(s, spacing, "");
  }
  replace_all(s, "\\dfrac", "\\frac");
  replace_all(s, "\\tfrac", "\\frac");
  replace_all(s, "{,}", ",");
  s.erase(std::remove_if(s.begin(), s.end(),
                         [](unsigned char c) { return std::isspace(c) != 0; }),
          s.end());
  static const std::regex kThousands(R"(^[+-]?\d{1,3}(,\d{3})+(\.\d+)?$)");
  if (std::regex_match(s, kThousands)) replace_all(s, ",", "");
  return s;
}

std::optional<Rational> parse_decimal(const std::string& s) {
  static const std::regex kDecimal(R"(^([+-]?)(\d*)(?:\.(\d*))?$)");
  std::smatch m;
  if (!std::regex_match(s, m, kDecimal)) return std::nullopt;
  const std::string whole = m[2].str();
  const std::string frac = m[3].matched ? m[3].str() : std::string();
  if (whole.empty() && frac.empty()) return std::nullopt;
  // Digit by digit: cpp_int's string constructor reads a leading 0 as octal.
  cpp_int numerator = 0;
  for (char c : whole) numerator = numerator * 10 + (c - '0');
  cpp_int denominator = 1;
  for (char c : frac) {
    numerator = numerator * 10 + (c - '0');
    denominator *= 10;
  }
  if (m[1].str() == "-") numerator = -numerator;
  return Rational(numerator, denominator);
}

std::optional<Rational> parse_numeric(const std::string& s) {
  if (auto v = parse_decimal(s)) return v;

  static const std::regex kSlash(R"(^([+-]?[\d.]+)/([+-]?[\d.]+)$)");
  static const std::regex kFrac(R"(^([+-]?)\\frac\{([^{}]+)\}\{([^{}]+)\}$)");
  static const std::regex kFracShort(R"(^([+-]?)\\frac(\d)(\d)$)");
  std::smatch m;
  std::optional<Rational> num;
  std::optional<Rational> den;
  bool negate = false;
  if (std::regex_match(s, m, kSlash)) {
    num = parse_decimal(m[1].str());
    den = parse_decimal(m[2].str());
  } else if (std::regex_match(s, m, kFrac) || std::regex_match(s, m, kFracShort)) {
    negate = m[1].str() == "-";
    num = parse_decimal(m[2].str());
    den = parse_decimal(m[3].str());
  }
  if (!num || !den || *den == 0) return std::nullopt;
  Rational value = *num / *den;
  return negate ? Rational(-value) : value;
}

}  // namespace

std::string rational_to_string(const Rational& value) { return value.str(); }

Answer normalize_answer(std::string_view raw) {
  Answer answer;
  answer.raw = std::string(raw);
  std::string s(raw);
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (;;) {
    std::string next = strip_once(s);
    if (next == s) break;
    s = std::move(next);
  }
  if (auto value = parse_numeric(s)) {
    answer.numeric_value = *value;
    answer.canonical = rational_to_string(*value);
  } else {
    answer.canonical = s;
  }
  return answer;
}

std::vector<std::string> find_boxed(std::string_view text) {
  std::vector<std::string> out;
  constexpr std::string_view kTag = "\\boxed";
  size_t pos = 0;
  while ((pos = text.find(kTag, pos)) != std::string_view::npos) {
    size_t open = pos + kTag.size();
    while (open < text.size() && text[open] == ' ') ++open;
    if (open < text.size() && text[open] == '{') {
      size_t close = matching_brace(text, open);
      if (close != std::string_view::npos) {
        out.emplace_back(text.substr(open + 1, close - open - 1));
        pos = close + 1;
        continue;
      }
    }
    pos += kTag.size();
  }
  return out;
}

}  // namespace dagmath
