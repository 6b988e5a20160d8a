#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace textrisk::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields may hold separators, quotes ("") and newlines.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Next record, or nullopt at end of input. Throws Errc::truncated on an
  // unterminated quoted field.
  std::optional<Row> next();

  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

}  // namespace textrisk::csv
