#ifndef SGSKI_IO_H_
#define SGSKI_IO_H_

#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "sgski/matrix.h"

namespace sgski {

// Raw little-endian IEEE doubles, base64 encoded.
std::string encode_doubles(std::span<const double> values);
std::vector<double> decode_doubles(const std::string& text);

struct Dataset {
  RowMatrix x;
  std::vector<double> y;
  std::vector<std::string> columns;  // empty when the file had no header
};

struct CsvTable {
  RowMatrix values;
  std::vector<std::string> columns;  // empty when the file had no header
};

// Numeric CSV with an optional header line (a first line that does not parse
// as numbers). Errors name the offending line.
CsvTable read_csv_table(const std::string& path);

// Numeric CSV, last column is the target. A first line that does not parse
// as numbers is taken as a header. Errors name the offending line.
Dataset read_csv_dataset(const std::string& path);
void write_csv_dataset(const std::string& path, const Dataset& data);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace sgski

#endif  // SGSKI_IO_H_
