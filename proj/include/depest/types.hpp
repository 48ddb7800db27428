#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>

namespace depest {

inline constexpr std::size_t kNumSubscores = 8;
inline constexpr int kSubscoreClasses = 4;

/// PHQ-8 item ratings, each in {0, 1, 2, 3}.
using Subscores = std::array<int, kNumSubscores>;

enum class Gender { female, male };

std::string_view to_string(Gender g);
/// Accepts "female"/"f"/"F" and "male"/"m"/"M"; throws FormatError otherwise.
Gender parse_gender(std::string_view text);

/// Throws DomainError unless every subscore is in [0, 3].
void validate_subscores(const Subscores& s);

/// "a,b,c,d,e,f,g,h"
std::string format_subscores(const Subscores& s);
/// Parses the format_subscores() form; throws FormatError / DomainError.
Subscores parse_subscores(std::string_view text);

}  // namespace depest
