#include "strel/csv.hpp"

#include "strel/error.hpp"

namespace strel::csv {

Reader::Reader(std::string_view text) : text_(text) {
  if (text_.substr(0, 3) == "\xEF\xBB\xBF") pos_ = 3;
}

bool Reader::next(std::vector<std::string>& fields) {
  fields.clear();
  if (pos_ >= text_.size()) return false;
  record_line_ = line_;

  std::string field;
  bool quoted = false;
  bool after_quote = false;  // closing quote seen; only , or EOL may follow
  bool field_started = false;

  while (pos_ < text_.size()) {
    const char c = text_[pos_];
    if (quoted) {
      if (c == '"') {
        if (pos_ + 1 < text_.size() && text_[pos_ + 1] == '"') {
          field.push_back('"');
          pos_ += 2;
          continue;
        }
        quoted = false;
        after_quote = true;
        ++pos_;
        continue;
      }
      if (c == '\n') ++line_;
      field.push_back(c);
      ++pos_;
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      after_quote = false;
      field_started = false;
      ++pos_;
      continue;
    }
    if (c == '\r' || c == '\n') {
      if (c == '\r' && pos_ + 1 < text_.size() && text_[pos_ + 1] == '\n') {
        ++pos_;
      }
      ++pos_;
      ++line_;
      fields.push_back(std::move(field));
      return true;
    }
    if (after_quote) {
      throw ParseError(line_, "unexpected character after closing quote");
    }
    if (c == '"') {
      if (field_started) {
        throw ParseError(line_, "quote inside unquoted field");
      }
      quoted = true;
      field_started = true;
      ++pos_;
      continue;
    }
    field_started = true;
    field.push_back(c);
    ++pos_;
  }
  if (quoted) throw ParseError(record_line_, "unterminated quoted field");
  fields.push_back(std::move(field));
  return true;
}

bool needs_quoting(std::string_view field) {
  return field.find_first_of(",\"\r\n") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view field, bool always_quote) {
  if (!always_quote && !needs_quoting(field)) {
    out.append(field);
    return;
  }
  out.push_back('"');
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

}  // namespace strel::csv
