#pragma once

#include <string>
#include <vector>

#include "shrinkfit/dataset.hpp"

namespace shrinkfit::csv {

// Shortest decimal representation that round-trips to the same double.
std::string format_double(double value);

// Strict parse of a full field; throws parse_error (with the given line
// number) on empty fields, trailing characters, or non-finite values.
double parse_double(const std::string& field, long line);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // each row matches header size

  long column_index(const std::string& name) const;  // -1 when absent
};

// Comma-delimited UTF-8 with a mandatory header row. No quoting: fields
// must not contain commas or newlines.
Table read_file(const std::string& path);

// All-numeric table as a Dataset (roles unset).
Dataset read_dataset(const std::string& path);

}  // namespace shrinkfit::csv
