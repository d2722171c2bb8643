#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "fdia/errors.hpp"

namespace fdia {

// Shortest-round-trip numeric formatting so repeated runs produce
// byte-identical files.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw ConfigError("cannot open output file: " + path);
    columns_ = header.size();
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }

  class Row {
   public:
    explicit Row(CsvWriter& w) : w_(w) {}
    Row& add(double v) { return raw(format_number(v)); }
    Row& add(int v) { return raw(std::to_string(v)); }
    Row& add(std::uint64_t v) { return raw(std::to_string(v)); }
    Row& add(const std::string& v) { return raw(v); }
    // Missing statistics are written as "na", never as a fabricated zero.
    Row& add(const std::optional<double>& v) { return v ? add(*v) : raw("na"); }
    ~Row() {
      if (cells_ != w_.columns_) {
        // Destructors must not throw; surface schema bugs loudly instead.
        std::fprintf(stderr, "csv row has %zu cells, header has %zu\n", cells_, w_.columns_);
        std::abort();
      }
      w_.out_ << '\n';
    }

   private:
    Row& raw(const std::string& cell) {
      if (cells_) w_.out_ << ',';
      w_.out_ << cell;
      ++cells_;
      return *this;
    }
    CsvWriter& w_;
    std::size_t cells_ = 0;
  };

  Row row() { return Row(*this); }

 private:
  std::ofstream out_;
  std::size_t columns_ = 0;
};

}  // namespace fdia
