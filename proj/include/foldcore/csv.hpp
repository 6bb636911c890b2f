#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace foldcore {

// Shortest round-trip decimal form; independent of the C locale.
std::string format_real(double v);

// Comma-separated file with a fixed header; numbers via format_real.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::vector<std::string> header);
  void row(const std::vector<double>& values);
  const std::vector<std::string>& header() const { return header_; }

 private:
  std::ofstream out_;
  std::vector<std::string> header_;
};

}  // namespace foldcore
