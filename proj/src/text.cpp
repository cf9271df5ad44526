#include "asiv/text.hpp"

#include <cctype>

#include "asiv/error.hpp"

namespace asiv {

TokenSequence tokenize(std::string_view text, bool lowercase) {
    TokenSequence out;
    std::string current;
    auto flush = [&] {
        if (!current.empty()) out.push_back(std::move(current));
        current.clear();
    };
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            flush();
        } else {
            current.push_back(lowercase ? static_cast<char>(std::tolower(c)) : ch);
        }
    }
    flush();
    if (out.empty()) throw DomainError("text is empty after trimming whitespace");
    return out;
}

}  // namespace asiv
