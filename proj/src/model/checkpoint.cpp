#include "spartan/checkpoint.hpp"

#include <algorithm>
#include <cmath>

namespace spartan {

template <class T>
std::vector<ArchiveEntry> checkpoint_entries(const Model<T>& model) {
  std::vector<ArchiveEntry> entries;
  for (const auto& nt : model.named_tensors()) {
    entries.push_back(ArchiveEntry::from_values<T>(nt.name, nt.tensor.shape(), nt.tensor.data()));
  }
  return entries;
}

template <class T>
void checkpoint_save(const Model<T>& model, const std::filesystem::path& path) {
  for (const auto& nt : model.named_tensors()) {
    for (T v : nt.tensor.data()) {
      if (!std::isfinite(v)) throw NumericError("refusing to save non-finite tensor '" + nt.name + "'");
    }
  }
  write_archive(path, checkpoint_entries(model));
}

template <class T>
void checkpoint_load_into(Model<T>& model, const std::filesystem::path& path) {
  const auto entries = read_archive(path);
  auto named = model.named_tensors();
  std::vector<std::string> problems;
  const std::size_t n = std::max(entries.size(), named.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= entries.size()) {
      problems.push_back("'" + named[i].name + "' missing from checkpoint");
      continue;
    }
    if (i >= named.size()) {
      problems.push_back("'" + entries[i].name + "' not present in model");
      continue;
    }
    const auto& e = entries[i];
    const auto& t = named[i];
    if (e.name != t.name) {
      problems.push_back("'" + t.name + "' expected, checkpoint has '" + e.name + "'");
    } else if (e.shape != t.tensor.shape()) {
      problems.push_back("'" + t.name + "' shape " + shape_str(e.shape) + " in checkpoint, model expects " +
                         shape_str(t.tensor.shape()));
    } else if (e.dtype != archive_dtype_of<T>()) {
      problems.push_back("'" + t.name + "' dtype " + std::string(archive_dtype_name(e.dtype)) +
                         " in checkpoint, model expects " +
                         std::string(archive_dtype_name(archive_dtype_of<T>())));
    }
  }
  if (!problems.empty()) {
    std::string msg = "checkpoint '" + path.string() + "' does not match the model: " + problems.front();
    if (problems.size() > 1) msg += " (and " + std::to_string(problems.size() - 1) + " more)";
    throw CheckpointError(msg);
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto values = entries[i].values<T>();
    auto dst = named[i].tensor.mutable_data();
    std::copy(values.begin(), values.end(), dst.begin());
  }
}

template <class T>
Model<T> checkpoint_load(const std::filesystem::path& path, const ModelConfig& cfg) {
  auto model = Model<T>::build(cfg, 0);
  checkpoint_load_into(model, path);
  return model;
}

#define SPARTAN_INSTANTIATE_CHECKPOINT(T)                                               \
  template std::vector<ArchiveEntry> checkpoint_entries(const Model<T>&);               \
  template void checkpoint_save(const Model<T>&, const std::filesystem::path&);         \
  template void checkpoint_load_into(Model<T>&, const std::filesystem::path&);          \
  template Model<T> checkpoint_load(const std::filesystem::path&, const ModelConfig&);

SPARTAN_INSTANTIATE_CHECKPOINT(float)
SPARTAN_INSTANTIATE_CHECKPOINT(double)

}  // namespace spartan
