#pragma once

#include <string_view>

#include "asiv/predictor.hpp"

namespace asiv {

/// Splits on ASCII whitespace, optionally lowercasing. Throws DomainError when
/// the text holds no tokens.
TokenSequence tokenize(std::string_view text, bool lowercase = false);

}  // namespace asiv
