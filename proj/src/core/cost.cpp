#include "spartan/cost.hpp"

#include <iomanip>
#include <sstream>

namespace spartan {

std::uint64_t CostReport::total_params() const {
  std::uint64_t s = 0;
  for (const auto& r : rows) s += r.params;
  return s;
}

std::uint64_t CostReport::total_macs() const {
  std::uint64_t s = 0;
  for (const auto& r : rows) s += r.macs;
  return s;
}

std::uint64_t CostReport::total_mem_access() const {
  std::uint64_t s = 0;
  for (const auto& r : rows) s += r.mem_access;
  return s;
}

std::uint64_t CostReport::spatial_macs() const {
  std::uint64_t s = 0;
  for (const auto& r : rows)
    if (r.spatial) s += r.macs;
  return s;
}

std::uint64_t CostReport::fixed_macs() const { return total_macs() - spatial_macs(); }

double CostReport::flops() const {
  return static_cast<double>(total_macs()) * (double_flops ? 2.0 : 1.0);
}

std::size_t CostReport::learnable_tensor_count() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.tensors.size();
  return n;
}

std::string CostReport::to_csv() const {
  std::ostringstream os;
  os << "layer,params,macs,mem_access\n";
  for (const auto& r : rows) {
    os << r.name << ',' << r.params << ',' << r.macs << ',' << r.mem_access << '\n';
  }
  os << "total," << total_params() << ',' << total_macs() << ',' << total_mem_access() << '\n';
  return os.str();
}

std::string CostReport::to_table() const {
  std::size_t width_name = 5;
  for (const auto& r : rows) width_name = std::max(width_name, r.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width_name)) << "layer" << std::right
     << std::setw(12) << "params" << std::setw(16) << "macs" << std::setw(16) << "mem_access"
     << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width_name)) << r.name << std::right
       << std::setw(12) << r.params << std::setw(16) << r.macs << std::setw(16) << r.mem_access
       << '\n';
  }
  os << std::left << std::setw(static_cast<int>(width_name)) << "total" << std::right
     << std::setw(12) << total_params() << std::setw(16) << total_macs() << std::setw(16)
     << total_mem_access() << '\n';
  os << std::fixed << std::setprecision(3) << "params: " << total_params() / 1e6 << " M, "
     << (double_flops ? "FLOPs (2*MACs): " : "FLOPs (MACs): ") << flops() / 1e9 << " G at "
     << height << "x" << width << '\n';
  return os.str();
}

std::uint64_t conv_macs(std::size_t cin, std::size_t cout, std::size_t kh, std::size_t kw,
                        std::size_t groups, std::size_t hout, std::size_t wout) {
  return static_cast<std::uint64_t>(cin / groups) * cout * kh * kw * hout * wout;
}

std::uint64_t conv_mem_access(std::size_t cin, std::size_t cout, std::size_t kh, std::size_t kw,
                              std::size_t groups, const Extent& in, const Extent& out) {
  return static_cast<std::uint64_t>(cin / groups) * cout * kh * kw + in.volume() + out.volume();
}

CostRow elementwise_row(std::string name, std::string kind, const Extent& e, std::uint64_t passes,
                        std::uint64_t params, std::vector<std::string> tensors) {
  CostRow row;
  row.name = std::move(name);
  row.kind = std::move(kind);
  row.params = params;
  row.macs = passes * e.volume();
  row.mem_access = params + passes * 2 * e.volume();
  row.tensors = std::move(tensors);
  return row;
}

}  // namespace spartan
