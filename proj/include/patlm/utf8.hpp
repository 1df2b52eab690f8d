#pragma once

#include <string>
#include <string_view>

namespace patlm::utf8 {

// Decodes UTF-8 into code points. Throws InputError("invalid_utf8", ...)
// naming the byte offset of the first malformed sequence.
std::u32string decode(std::string_view bytes);

void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view cps);

}  // namespace patlm::utf8
