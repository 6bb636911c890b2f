#include "foldcore/csv.hpp"

#include "foldcore/types.hpp"

#include <charconv>
#include <cmath>

namespace foldcore {

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::string& path, std::vector<std::string> header)
    : out_(path, std::ios::binary), header_(std::move(header)) {
  if (!out_) throw Error(ErrorCode::InvalidArgument, "cannot open " + path + " for writing");
  for (size_t i = 0; i < header_.size(); ++i) out_ << (i ? "," : "") << header_[i];
  out_ << '\n';
}

void CsvWriter::row(const std::vector<double>& values) {
  if (values.size() != header_.size()) throw Error(ErrorCode::ShapeMismatch, "csv row width differs from header");
  for (size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_real(values[i]);
  out_ << '\n';
  if (!out_) throw Error(ErrorCode::InvalidArgument, "csv write failed");
}

}  // namespace foldcore
