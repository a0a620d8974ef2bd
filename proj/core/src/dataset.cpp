#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "homeofit/errors.hpp"
#include "homeofit/targets.hpp"

namespace homeofit {
namespace {

void append_number(std::string& out, double v) {
  char buf[40];
  const int n = std::snprintf(buf, sizeof buf, "%.17g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view field, long line) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = field.data() + field.size();
  if (!field.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError("line " + std::to_string(line) + ": '" + std::string(field) + "' is not a number", line);
  }
  return v;
}

}  // namespace

std::string dataset_to_csv(const Dataset& data) {
  std::string out;
  out.reserve(static_cast<std::size_t>(data.size()) * static_cast<std::size_t>(data.dim() + 1) * 24 + 32);
  for (int k = 0; k < data.dim(); ++k) {
    out += 'x';
    out += std::to_string(k);
    out += ',';
  }
  out += "value\n";
  for (long p = 0; p < data.size(); ++p) {
    for (int k = 0; k < data.dim(); ++k) {
      append_number(out, data.x(k, p));
      out += ',';
    }
    append_number(out, data.y(p));
    out += '\n';
  }
  return out;
}

Dataset dataset_from_csv(std::string_view text) {
  long line_no = 0;
  std::size_t pos = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw ParseError("line 1: missing header", 1);
  const auto header = split_fields(line);
  const int dim = static_cast<int>(header.size()) - 1;
  bool header_ok = dim >= 1 && header.back() == "value";
  for (int k = 0; header_ok && k < dim; ++k) header_ok = header[static_cast<std::size_t>(k)] == "x" + std::to_string(k);
  if (!header_ok) throw ParseError("line 1: expected header x0[,x1...],value", 1);

  std::vector<double> xs, ys;
  while (next_line(line)) {
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != header.size()) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(fields.size()),
                       line_no);
    }
    for (int k = 0; k < dim; ++k) xs.push_back(parse_number(fields[static_cast<std::size_t>(k)], line_no));
    ys.push_back(parse_number(fields.back(), line_no));
  }
  if (ys.empty()) throw Error(ErrorCode::kEmptyDataset, "dataset has no rows");
  Dataset data;
  data.x = Eigen::Map<const Eigen::MatrixXd>(xs.data(), dim, static_cast<Eigen::Index>(ys.size()));
  data.y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  const std::string text = dataset_to_csv(data);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv(buf.str());
}

}  // namespace homeofit
