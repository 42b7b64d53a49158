#include "sgski/io.h"

#include <sodium.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace sgski {

static_assert(std::endian::native == std::endian::little, "model encoding assumes little-endian");

std::string encode_doubles(std::span<const double> values) {
  const std::size_t bytes = values.size() * sizeof(double);
  const int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(bytes, variant), '\0');
  sodium_bin2base64(out.data(), out.size(), reinterpret_cast<const unsigned char*>(values.data()),
                    bytes, variant);
  out.resize(std::strlen(out.c_str()));
  return out;
}

std::vector<double> decode_doubles(const std::string& text) {
  std::vector<unsigned char> raw(text.size() / 4 * 3 + 3);
  std::size_t len = 0;
  if (sodium_base642bin(raw.data(), raw.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0 ||
      len % sizeof(double) != 0) {
    throw InputError("invalid base64 double array");
  }
  std::vector<double> out(len / sizeof(double));
  std::memcpy(out.data(), raw.data(), len);
  return out;
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& field, double& out) {
  const std::string t = trim(field);
  if (t.empty()) return false;
  const char* begin = t.data();
  if (*begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, t.data() + t.size(), out);
  return ec == std::errc() && ptr == t.data() + t.size();
}

}  // namespace

CsvTable read_csv_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open CSV file '" + path + "'");
  CsvTable table;
  std::vector<double> values;
  std::size_t width = 0;
  Index rows = 0;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    std::vector<double> row(fields.size());
    bool numeric = true;
    for (std::size_t k = 0; k < fields.size() && numeric; ++k) {
      numeric = parse_double(fields[k], row[k]);
    }
    if (!numeric) {
      if (rows == 0 && table.columns.empty()) {
        for (const auto& f : fields) table.columns.push_back(trim(f));
        width = fields.size();
        continue;
      }
      throw InputError(path + ":" + std::to_string(line_no) + ": non-numeric field");
    }
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw InputError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(width) + " fields, found " + std::to_string(row.size()));
    }
    for (double v : row) {
      if (!std::isfinite(v)) {
        throw InputError(path + ":" + std::to_string(line_no) + ": non-finite value");
      }
    }
    values.insert(values.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw InputError(path + ": no data rows");
  table.values = RowMatrix(rows, static_cast<Index>(width), std::move(values));
  return table;
}

Dataset read_csv_dataset(const std::string& path) {
  CsvTable table = read_csv_table(path);
  const Index width = table.values.cols();
  if (width < 2) throw InputError(path + ": need at least one feature column and a target");
  Dataset data;
  data.columns = std::move(table.columns);
  const Index rows = table.values.rows();
  const Index d = width - 1;
  data.x = RowMatrix(rows, d);
  data.y.resize(static_cast<std::size_t>(rows));
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < d; ++c) data.x(r, c) = table.values(r, c);
    data.y[r] = table.values(r, d);
  }
  return data;
}

void write_csv_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out.precision(17);
  if (!data.columns.empty()) {
    for (std::size_t k = 0; k < data.columns.size(); ++k) {
      out << (k ? "," : "") << data.columns[k];
    }
    out << '\n';
  }
  for (Index r = 0; r < data.x.rows(); ++r) {
    for (Index c = 0; c < data.x.cols(); ++c) out << data.x(r, c) << ',';
    out << data.y[r] << '\n';
  }
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace sgski
