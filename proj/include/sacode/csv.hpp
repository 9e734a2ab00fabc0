#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sacode::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: comma separated, double-quote quoting with "" escapes,
/// CRLF or LF record ends, embedded newlines inside quotes. A UTF-8 BOM is skipped.
std::vector<Row> parse(std::string_view text);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace sacode::csv
