#include "sbm/io.hpp"

#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <system_error>

#include "sbm/errors.hpp"

namespace sbm {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::filesystem::path cache_dir() {
  if (const char* p = std::getenv("SBM_CACHE_DIR"); p && *p) return p;
  if (const char* p = std::getenv("XDG_CACHE_HOME"); p && *p)
    return std::filesystem::path(p) / "sbm";
  if (const char* p = std::getenv("HOME"); p && *p)
    return std::filesystem::path(p) / ".cache" / "sbm";
  return std::filesystem::temp_directory_path() / "sbm-cache";
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::random_device rd;
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(rd());
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DomainError("cannot write " + tmp.string());
    f << content;
    if (!f) throw DomainError("write failed: " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw DomainError("cannot move output into place: " + path.string());
  }
}

std::optional<std::string> read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) return std::nullopt;
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) { row(header); }

CsvWriter& CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) throw DomainError("csv row has wrong number of cells");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ += ',';
    const auto& c = cells[i];
    if (c.find_first_of(",\"\n") != std::string::npos) {
      out_ += '"';
      for (char ch : c) {
        if (ch == '"') out_ += '"';
        out_ += ch;
      }
      out_ += '"';
    } else {
      out_ += c;
    }
  }
  out_ += '\n';
  return *this;
}

CsvWriter& CsvWriter::row_numbers(const std::vector<double>& cells) {
  std::vector<std::string> s;
  s.reserve(cells.size());
  for (double v : cells) s.push_back(fmt_double(v));
  return row(s);
}

void CsvWriter::save(const std::filesystem::path& path) const { write_file_atomic(path, out_); }

std::vector<std::vector<double>> parse_numeric_csv(const std::string& text, bool has_header) {
  std::vector<std::vector<double>> rows;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && has_header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    std::vector<double> r;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      auto next = line.find(',', pos);
      if (next == std::string::npos) next = line.size();
      double v = 0;
      auto res = std::from_chars(line.data() + pos, line.data() + next, v);
      if (res.ec != std::errc()) throw DomainError("malformed numeric csv line: " + line);
      r.push_back(v);
      pos = next + 1;
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace sbm
