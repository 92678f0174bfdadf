#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace spartan {

/// Channel count and spatial extent of a feature map flowing through the model.
struct Extent {
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::uint64_t volume() const { return static_cast<std::uint64_t>(c) * h * w; }
};

/// One accounting row. `spatial` rows scale with the input resolution; the
/// others (SE excitation FCs, the classifier head) have a fixed cost.
struct CostRow {
  std::string name;
  std::string kind;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  std::uint64_t mem_access = 0;
  bool spatial = true;
  std::vector<std::string> tensors;  // learnable tensors owned by this row
};

struct CostReport {
  std::vector<CostRow> rows;
  std::size_t height = 0;
  std::size_t width = 0;
  bool double_flops = false;  // report FLOPs as 2·MACs instead of MACs

  void add(CostRow row) { rows.push_back(std::move(row)); }

  std::uint64_t total_params() const;
  std::uint64_t total_macs() const;
  std::uint64_t total_mem_access() const;
  std::uint64_t spatial_macs() const;
  std::uint64_t fixed_macs() const;
  double flops() const;
  std::size_t learnable_tensor_count() const;

  /// "layer,params,macs,mem_access" with one row per layer plus a "total" row.
  std::string to_csv() const;
  std::string to_table() const;
};

/// MAC count of a convolution: (Cin/groups)·Cout·KH·KW·Hout·Wout.
std::uint64_t conv_macs(std::size_t cin, std::size_t cout, std::size_t kh, std::size_t kw,
                        std::size_t groups, std::size_t hout, std::size_t wout);

/// Memory access of a convolution: kernel weights + input map + output map.
std::uint64_t conv_mem_access(std::size_t cin, std::size_t cout, std::size_t kh, std::size_t kw,
                              std::size_t groups, const Extent& in, const Extent& out);

/// Row for a pass touching every element once (norm, activation, residual add...).
CostRow elementwise_row(std::string name, std::string kind, const Extent& e,
                        std::uint64_t passes = 1, std::uint64_t params = 0,
                        std::vector<std::string> tensors = {});

}  // namespace spartan
