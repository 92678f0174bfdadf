#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace spartan {

struct MetricsRow {
  std::size_t epoch = 0;
  std::string split;
  double loss = 0.0;
  double top1 = 0.0;
  double lr = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

inline constexpr std::string_view kMetricsHeader = "epoch,split,loss,top1,lr";

std::string format_metrics_row(const MetricsRow& row);

/// Appends rows to a CSV, writing the header when the file is new or empty.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::filesystem::path& path);
  void write(const MetricsRow& row);

 private:
  std::ofstream out_;
};

/// Parses a metrics CSV (header required). Throws DataError on malformed input.
std::vector<MetricsRow> parse_metrics_csv(std::string_view text);

}  // namespace spartan
