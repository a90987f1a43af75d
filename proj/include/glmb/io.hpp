#pragma once

// Result files. Each CSV starts with a "# <schema>" line followed by the
// column header. Files are written to a temporary sibling and renamed into
// place, so a reader never sees a partial file.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <system_error>
#include <vector>

#include "glmb/error.hpp"

namespace glmb::io {

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

class CsvWriter {
 public:
  CsvWriter(std::string schema, std::vector<std::string> columns) : columns_(columns.size()) {
    text_ = "# " + schema + "\n";
    append(columns);
  }

  template <class... Cells>
  void row(const Cells&... cells) {
    static_assert(sizeof...(Cells) > 0);
    std::vector<std::string> v{cell(cells)...};
    if (v.size() != columns_) throw std::logic_error("CSV row width does not match the header");
    append(v);
  }

  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const { write_atomic(path, text_); }

 private:
  static std::string cell(double v) { return format_double(v); }
  static std::string cell(const std::string& s) { return s; }
  static std::string cell(const char* s) { return s; }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  void append(const std::vector<std::string>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) text_ += ',';
      text_ += v[i];
    }
    text_ += '\n';
  }

  std::size_t columns_;
  std::string text_;
};

}  // namespace glmb::io
