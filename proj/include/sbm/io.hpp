#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sbm {

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

// $SBM_CACHE_DIR, else $XDG_CACHE_HOME/sbm, else ~/.cache/sbm.
std::filesystem::path cache_dir();

// Writes through a temporary file and renames, so concurrent writers of the
// same content never leave a torn file behind.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::optional<std::string> read_file(const std::filesystem::path& path);

// Shortest round-trip decimal form, fixed across platforms.
std::string fmt_double(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row(const std::vector<std::string>& cells);
  CsvWriter& row_numbers(const std::vector<double>& cells);
  std::string str() const { return out_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::string out_;
};

// Minimal reader for the numeric CSVs this library writes itself.
std::vector<std::vector<double>> parse_numeric_csv(const std::string& text, bool has_header = true);

}  // namespace sbm
