#pragma once

// Minimal RFC 4180 reader and writer helpers.

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace strel::csv {

class Reader {
 public:
  // The reader keeps a view into `text`; the caller owns the storage.
  explicit Reader(std::string_view text);

  // Reads the next record into `fields`. Returns false at end of input.
  // Throws ParseError (with the record's starting line) on malformed quoting.
  bool next(std::vector<std::string>& fields);

  // 1-based line on which the most recently returned record started.
  std::size_t record_line() const noexcept { return record_line_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

// True when the field must be quoted to survive a round trip.
bool needs_quoting(std::string_view field);

// Appends `field` to `out`, quoted when `always_quote` is set or required.
void append_field(std::string& out, std::string_view field,
                  bool always_quote = false);

}  // namespace strel::csv
