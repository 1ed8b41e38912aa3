#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "predict/errors.hpp"

namespace predict::csv {

// Fixed formatting so reruns with the same seed produce byte-identical files.
inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return std::string(buf);
}

class Writer {
public:
  Writer(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary | std::ios::trunc), path_(path) {
    require(out_.is_open(), ErrorCode::io, "cannot open '" + path + "' for writing");
    require(!header.empty(), ErrorCode::invalid_input, "CSV header must not be empty");
    columns_ = header.size();
    write_fields(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> fields;
    fields.reserve(values.size());
    for (double v : values) fields.push_back(format_number(v));
    row(fields);
  }

  void row(const std::vector<std::string>& fields) {
    require(fields.size() == columns_, ErrorCode::invalid_input,
            "CSV row width does not match header in '" + path_ + "'");
    write_fields(fields);
  }

  void close() {
    out_.close();
    require(out_.good(), ErrorCode::io, "failed writing '" + path_ + "'");
  }

private:
  void write_fields(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
    require(out_.good(), ErrorCode::io, "failed writing '" + path_ + "'");
  }

  std::ofstream out_;
  std::string path_;
  std::size_t columns_ = 0;
};

} // namespace predict::csv
