#include "dynbath/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dynbath/error.hpp"

namespace dynbath {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::filesystem::path& path, std::vector<std::string> header)
    : file_(std::fopen(path.c_str(), "w")), columns_(header.size()), path_(path) {
  if (!file_)
    throw ValidationError("cannot write " + path.string() + ": " + std::strerror(errno));
  for (std::size_t k = 0; k < header.size(); ++k)
    std::fprintf(file_, "%s%s", k ? "," : "", header[k].c_str());
  std::fputc('\n', file_);
}

CsvWriter::~CsvWriter() {
  if (file_) std::fclose(file_);
}

void CsvWriter::row(std::initializer_list<double> values) {
  row(std::span<const double>(values.begin(), values.size()));
}

void CsvWriter::row(std::span<const double> values) {
  if (values.size() != columns_) throw ValidationError("CSV row width mismatch in " + path_.string());
  for (std::size_t k = 0; k < values.size(); ++k)
    std::fprintf(file_, "%s%.17g", k ? "," : "", values[k]);
  std::fputc('\n', file_);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t k = 0; k < header.size(); ++k)
    if (header[k] == name) return k;
  throw ValidationError("CSV has no column '" + name + "'");
}

std::vector<double> CsvTable::values(const std::string& name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r[c]);
  return out;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("cannot read " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(path.string() + " is empty");
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) table.header.push_back(cell);
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": not a number: '" + cell + "'");
      row.push_back(v);
    }
    if (row.size() != table.header.size())
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": wrong column count");
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace dynbath
