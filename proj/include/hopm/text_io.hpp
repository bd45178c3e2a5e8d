#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hopm {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// '#'-prefixed key/value lines written at the top of every output file.
struct FileHeader {
  std::vector<std::pair<std::string, std::string>> entries;

  FileHeader& add(std::string key, std::string value);
  FileHeader& add(std::string key, double value);
};

std::string hex_hash(std::uint64_t hash);

/// Fixed-precision number formatting shared by all writers, so reruns are
/// byte-identical.
std::string format_number(double v);

/// Writes numeric columns; `names` carry units, e.g. "freq_hz".
void write_columns(const std::filesystem::path& path, const FileHeader& header,
                   const std::vector<std::string>& names,
                   const std::vector<std::vector<double>>& columns);

/// Writes whitespace-separated rows of preformatted cells.
void write_rows(const std::filesystem::path& path, const FileHeader& header,
                const std::vector<std::string>& names,
                const std::vector<std::vector<std::string>>& rows);

/// Reads the numeric columns of a file written by write_columns.
std::vector<std::vector<double>> read_columns(const std::filesystem::path& path);

}  // namespace hopm
