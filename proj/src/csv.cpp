#include "shrinkfit/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "shrinkfit/errors.hpp"

namespace shrinkfit::csv {

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& field, long line) {
  if (field.empty()) throw parse_error("empty numeric field", line);
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw parse_error("cannot parse '" + field + "' as a number", line);
  }
  if (!std::isfinite(value)) {
    throw parse_error("non-finite value '" + field + "' (missing data is rejected)", line);
  }
  return value;
}

long Table::column_index(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == name) return static_cast<long>(c);
  }
  return -1;
}

namespace {
std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  fields.push_back(cur);
  return fields;
}
}  // namespace

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open '" + path + "'");

  Table table;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      table.header = split_line(line);
      if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty())) {
        throw parse_error("missing header row", 1);
      }
      continue;
    }
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != table.header.size()) {
      throw parse_error("expected " + std::to_string(table.header.size()) + " fields, found " +
                            std::to_string(fields.size()),
                        line_no);
    }
    table.rows.push_back(std::move(fields));
  }
  if (line_no == 0) throw parse_error("empty file '" + path + "'");
  return table;
}

Dataset read_dataset(const std::string& path) {
  const Table table = read_file(path);
  if (table.rows.empty()) throw parse_error("'" + path + "' has a header but no data rows");

  std::vector<Eigen::VectorXd> cols(table.header.size(),
                                    Eigen::VectorXd(static_cast<long>(table.rows.size())));
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t c = 0; c < table.header.size(); ++c) {
      cols[c][static_cast<long>(r)] = parse_double(table.rows[r][c], static_cast<long>(r) + 2);
    }
  }
  return Dataset(table.header, std::move(cols));
}

}  // namespace shrinkfit::csv
