#include "depest/types.hpp"

#include <charconv>

#include "depest/errors.hpp"

namespace depest {

std::string_view to_string(Gender g) { return g == Gender::female ? "female" : "male"; }

Gender parse_gender(std::string_view text) {
  if (text == "female" || text == "f" || text == "F") return Gender::female;
  if (text == "male" || text == "m" || text == "M") return Gender::male;
  throw FormatError("unknown gender tag '" + std::string(text) + "'");
}

void validate_subscores(const Subscores& s) {
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] < 0 || s[i] >= kSubscoreClasses) {
      throw DomainError("subscore " + std::to_string(i + 1) + " = " + std::to_string(s[i]) + " outside [0, 3]");
    }
  }
}

std::string format_subscores(const Subscores& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(s[i]);
  }
  return out;
}

Subscores parse_subscores(std::string_view text) {
  Subscores s{};
  std::size_t i = 0;
  while (true) {
    const auto comma = text.find(',');
    const std::string_view item = text.substr(0, comma);
    if (i == s.size()) throw FormatError("more than 8 subscores in '" + std::string(text) + "'");
    int v = 0;
    auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (ec != std::errc() || p != item.data() + item.size()) {
      throw FormatError("subscore '" + std::string(item) + "' is not an integer");
    }
    s[i++] = v;
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (i != s.size()) throw FormatError("expected 8 subscores, got " + std::to_string(i));
  validate_subscores(s);
  return s;
}

}  // namespace depest
