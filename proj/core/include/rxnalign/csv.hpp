#pragma once

// Minimal CSV reading/writing: quoted fields, doubled-quote escapes,
// embedded newlines, CRLF tolerated.  First row is the header.

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rxnalign {

class CsvError : public std::runtime_error {
 public:
  explicit CsvError(std::string message)
      : std::runtime_error(std::move(message)) {}
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index, or -1 when the header lacks the name.
  int col(const std::string& name) const;
  int col_or_throw(const std::string& name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);
std::string csv_field(std::string_view value);  // quoted when needed

}  // namespace rxnalign
