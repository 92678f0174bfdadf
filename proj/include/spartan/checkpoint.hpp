#pragma once

#include <filesystem>
#include <vector>

#include "spartan/archive.hpp"
#include "spartan/model.hpp"

namespace spartan {

/// Every named tensor of the model (parameters and norm buffers) in model order.
template <class T>
std::vector<ArchiveEntry> checkpoint_entries(const Model<T>& model);

template <class T>
void checkpoint_save(const Model<T>& model, const std::filesystem::path& path);

/// Copies archive contents into an already-built model. The manifest must
/// list exactly the model's tensors in order with matching shapes and dtype;
/// otherwise CheckpointError names the first offending tensor.
template <class T>
void checkpoint_load_into(Model<T>& model, const std::filesystem::path& path);

template <class T>
Model<T> checkpoint_load(const std::filesystem::path& path, const ModelConfig& cfg);

}  // namespace spartan
