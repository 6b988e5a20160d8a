#include "textrisk/common/csv.hpp"

#include "textrisk/common/error.hpp"

namespace textrisk::csv {

std::optional<Row> Reader::next() {
  Row row;
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int ch;
  while ((ch = in_.get()) != std::char_traits<char>::eof()) {
    any = true;
    char c = static_cast<char>(ch);
    if (in_quotes) {
      if (c == '"') {
        if (in_.peek() == '"') {
          in_.get();
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line_;
        field.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\r') {
      if (in_.peek() == '\n') continue;
      field.push_back(c);
    } else if (c == '\n') {
      ++line_;
      row.push_back(std::move(field));
      return row;
    } else {
      field.push_back(c);
    }
  }
  if (in_quotes) fail(Errc::truncated, "unterminated quoted field near line " + std::to_string(line_ + 1));
  if (!any) return std::nullopt;
  ++line_;
  row.push_back(std::move(field));
  return row;
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out << ',';
    out << escape(row[i]);
  }
  out << '\n';
}

}  // namespace textrisk::csv
