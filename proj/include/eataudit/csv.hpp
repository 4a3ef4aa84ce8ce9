#pragma once

// Minimal RFC 4180 reading and writing.

#include <string>
#include <string_view>
#include <vector>

namespace eataudit::csv {

using Row = std::vector<std::string>;

// Parses a whole document. Accepts LF or CRLF line endings and quoted fields
// with embedded commas, quotes ("") and newlines. Blank lines are skipped.
// Throws DataError on an unterminated quote.
std::vector<Row> parse(std::string_view text);

// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

// Joins escaped fields with commas and terminates the record with CRLF.
std::string format_row(const Row& fields);

}  // namespace eataudit::csv
