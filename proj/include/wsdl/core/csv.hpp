#pragma once

#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include "wsdl/core/error.hpp"

namespace wsdl {

/// Shortest text that reads back to the same double.
inline std::string format_real(double x) { return fmt::format("{}", x); }

inline std::string format_optional(const std::optional<double>& x) { return x ? format_real(*x) : std::string(); }

/// Line-oriented CSV writer; the header is written on construction.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, std::string_view header) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw Error("cannot write " + path.string());
    out_ << header << '\n';
  }

  void row(std::initializer_list<std::string> fields) {
    bool first = true;
    for (const auto& f : fields) {
      if (!first) out_ << ',';
      out_ << f;
      first = false;
    }
    out_ << '\n';
  }

  void raw_line(const std::string& line) { out_ << line << '\n'; }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

}  // namespace wsdl
