#include "hopm/text_io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hopm {

namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

void write_header(std::ostream& out, const FileHeader& header, const std::vector<std::string>& names) {
  for (const auto& [k, v] : header.entries) out << "# " << k << ": " << v << '\n';
  out << "#";
  for (const auto& n : names) out << ' ' << n;
  out << '\n';
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

FileHeader& FileHeader::add(std::string key, std::string value) {
  entries.emplace_back(std::move(key), std::move(value));
  return *this;
}

FileHeader& FileHeader::add(std::string key, double value) {
  return add(std::move(key), format_number(value));
}

std::string hex_hash(std::uint64_t hash) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, hash);
  return buf;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

void write_columns(const std::filesystem::path& path, const FileHeader& header,
                   const std::vector<std::string>& names,
                   const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) throw std::invalid_argument("write_columns: name count mismatch");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns) {
    if (c.size() != rows) throw std::invalid_argument("write_columns: ragged columns");
  }
  auto out = open_output(path);
  write_header(out, header, names);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (c) out << ' ';
      out << format_number(columns[c][r]);
    }
    out << '\n';
  }
  finish(out, path);
}

void write_rows(const std::filesystem::path& path, const FileHeader& header,
                const std::vector<std::string>& names,
                const std::vector<std::vector<std::string>>& rows) {
  auto out = open_output(path);
  write_header(out, header, names);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << ' ';
      out << row[c];
    }
    out << '\n';
  }
  finish(out, path);
}

std::vector<std::vector<double>> read_columns(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<double>> cols;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    double v = 0.0;
    while (ss >> v) row.push_back(v);
    if (cols.empty()) cols.resize(row.size());
    if (row.size() != cols.size()) throw IoError("ragged row in " + path.string());
    for (std::size_t c = 0; c < row.size(); ++c) cols[c].push_back(row[c]);
  }
  return cols;
}

}  // namespace hopm
