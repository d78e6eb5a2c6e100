#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace hsdir {

/// Quotes a field when it contains a comma, quote, CR or LF (RFC 4180).
std::string csv_escape(std::string_view field);

/// Writes one CRLF-terminated record.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

/// Reads one record, honouring quoted fields that span lines. Returns false
/// at end of input. Throws ParseError on an unterminated quote.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields);

}  // namespace hsdir
