#include "spartan/metrics.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "spartan/error.hpp"

namespace spartan {

std::string format_metrics_row(const MetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%zu,%s,%.9g,%.9g,%.9g", row.epoch, row.split.c_str(), row.loss,
                row.top1, row.lr);
  return buf;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path, ec) || std::filesystem::file_size(path, ec) == 0;
  out_.open(path, std::ios::app);
  if (!out_) throw DataError("cannot open metrics file '" + path.string() + "'");
  if (fresh) out_ << kMetricsHeader << '\n' << std::flush;
}

void MetricsWriter::write(const MetricsRow& row) {
  if (row.split.find_first_of(",\n") != std::string::npos) {
    throw DataError("metrics split name '" + row.split + "' contains a separator");
  }
  out_ << format_metrics_row(row) << '\n' << std::flush;
}

namespace {

template <class N>
N parse_number(const std::string& field, std::size_t line, const char* column) {
  N v{};
  const char* end = field.data() + field.size();
  auto [p, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc{} || p != end) {
    throw DataError("metrics line " + std::to_string(line) + ": bad " + column + " '" + field + "'");
  }
  return v;
}

}  // namespace

std::vector<MetricsRow> parse_metrics_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kMetricsHeader) throw DataError("metrics: expected header '" + std::string(kMetricsHeader) + "'");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 5) {
      throw DataError("metrics line " + std::to_string(line_no) + ": expected 5 fields, got " +
                      std::to_string(fields.size()));
    }
    MetricsRow row;
    row.epoch = parse_number<std::size_t>(fields[0], line_no, "epoch");
    row.split = fields[1];
    row.loss = parse_number<double>(fields[2], line_no, "loss");
    row.top1 = parse_number<double>(fields[3], line_no, "top1");
    row.lr = parse_number<double>(fields[4], line_no, "lr");
    rows.push_back(std::move(row));
  }
  if (line_no == 0) throw DataError("metrics: empty input");
  return rows;
}

}  // namespace spartan
