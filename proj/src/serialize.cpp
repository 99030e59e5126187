#include "t3conv/serialize.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace t3conv {

static_assert(std::endian::native == std::endian::little,
              "tsr payload is little-endian; add byte swapping for this target");

void save_tsr(const std::string& path, const Tensor& t) {
  nlohmann::json header;
  header["shape"] = t.shape();
  header["dtype"] = "f64";
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("save_tsr: cannot open " + path);
  out << header.dump() << '\n';
  out.write(reinterpret_cast<const char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
  if (!out) throw std::runtime_error("save_tsr: write failed for " + path);
}

Tensor load_tsr(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_tsr: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_tsr: missing header in " + path);
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.contains("shape") || !header.contains("dtype"))
    throw std::runtime_error("load_tsr: malformed header in " + path);
  if (header["dtype"] != "f64")
    throw std::runtime_error("load_tsr: unsupported dtype in " + path);
  Shape shape = header["shape"].get<Shape>();
  const int64_t n = numel(shape);
  std::vector<double> payload(static_cast<size_t>(n));
  in.read(reinterpret_cast<char*>(payload.data()),
          static_cast<std::streamsize>(payload.size() * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(payload.size() * sizeof(double)))
    throw std::runtime_error("load_tsr: truncated payload in " + path);
  return Tensor::from_vector(std::move(shape), std::move(payload));
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void save_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  for (size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << '\n';
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_csv: write failed for " + path);
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.rows.push_back(std::move(cells));
    }
  }
  return table;
}

}  // namespace t3conv
