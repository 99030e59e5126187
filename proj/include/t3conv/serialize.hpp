#pragma once

#include <string>
#include <vector>

#include "t3conv/tensor.hpp"

namespace t3conv {

// .tsr format: one UTF-8 JSON header line {"shape":[...],"dtype":"f64"}
// terminated by '\n', followed by the raw little-endian f64 payload.
void save_tsr(const std::string& path, const Tensor& t);
Tensor load_tsr(const std::string& path);  // rejects non-finite payloads

// Round-trip decimal formatting for CSV output.
std::string fmt_double(double v);

void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable load_csv(const std::string& path);

}  // namespace t3conv
