#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "helpers.hpp"
#include "spartan/archive.hpp"
#include "spartan/checkpoint.hpp"
#include "spartan/config.hpp"
#include "spartan/cost.hpp"
#include "spartan/model.hpp"

using namespace spartan;
using testing_util::randn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / "spartan_model_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST(Presets, StageTable) {
  struct Want {
    const char* name;
    std::array<std::size_t, 4> channels, blocks;
  };
  for (const Want& w : {Want{"spartan-xt", {32, 64, 96, 192}, {3, 3, 10, 2}},
                        Want{"spartan-t", {32, 64, 128, 256}, {3, 3, 12, 2}}}) {
    auto cfg = preset(w.name);
    for (std::size_t s = 0; s < 4; ++s) {
      EXPECT_EQ(cfg.stages[s].channels, w.channels[s]) << w.name << " stage " << s;
      EXPECT_EQ(cfg.stages[s].num_blocks, w.blocks[s]);
      EXPECT_EQ(cfg.stages[s].conv_type, s < 2 ? ConvType::full : ConvType::depthwise);
      EXPECT_EQ(cfg.stages[s].embed_variant, s == 0 ? EmbedVariant::overlapping : EmbedVariant::nonoverlapping);
    }
    EXPECT_NO_THROW(validate(cfg));
  }
  EXPECT_THROW(preset("spartan-huge"), ConfigError);
}

TEST(Model, StructureFollowsConfig) {
  auto cfg = preset("spartan-xt");
  auto m = Model<float>::build(cfg, 0);
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(m.stages()[s].blocks.size(), cfg.stages[s].num_blocks);
    for (const auto& b : m.stages()[s].blocks) {
      EXPECT_EQ(b.channels, cfg.stages[s].channels);
      const std::size_t groups = b.smixer.high.conv.opts.groups;
      EXPECT_EQ(groups, s < 2 ? 1u : cfg.stages[s].channels / 2);
    }
  }
  auto ext = m.stage_extents(224, 224);
  const std::size_t want[] = {56, 28, 14, 7};
  for (std::size_t s = 0; s < 4; ++s) {
    EXPECT_EQ(ext[s].h, want[s]);
    EXPECT_EQ(ext[s].w, want[s]);
  }
}

TEST(Model, InitialValues) {
  auto m = Model<double>::build(preset("spartan-tiny"), 3);
  for (const auto& nt : m.named_tensors()) {
    const auto& n = nt.name;
    auto all = [&](double v) {
      for (double x : nt.tensor.data())
        if (x != v) return false;
      return true;
    };
    if (n.ends_with(".gamma") && n.find(".fd.") != std::string::npos) EXPECT_TRUE(all(0.0)) << n;
    else if (n.ends_with(".gamma") || n.ends_with("wave.a") || n.ends_with(".running_var")) EXPECT_TRUE(all(1.0)) << n;
    else if (n.ends_with(".beta") || n.ends_with("wave.b") || n.ends_with(".running_mean")) EXPECT_TRUE(all(0.0)) << n;
    else if (n.ends_with(".weight")) {
      for (double x : nt.tensor.data()) EXPECT_LE(std::abs(x), 0.04) << n;
    }
  }
}

TEST(Model, SeedDeterminism) {
  auto cfg = preset("spartan-tiny");
  auto a = Model<float>::build(cfg, 42), b = Model<float>::build(cfg, 42), c = Model<float>::build(cfg, 43);
  EXPECT_EQ(parameter_checksum(a), parameter_checksum(b));
  EXPECT_NE(parameter_checksum(a), parameter_checksum(c));
}

TEST(Model, ForwardShapes) {
  auto cfg = preset("spartan-xt");
  auto m = Model<float>::build(cfg, 0);
  std::mt19937_64 rng(1);
  auto x = randn<float>({2, 3, 224, 224}, rng);
  EXPECT_EQ(m.forward(x, false).shape(), (Shape{2, 1000}));
  auto x256 = randn<float>({2, 3, 256, 256}, rng);
  auto outs = m.stage_outputs(x256, false);
  EXPECT_EQ(outs[3].shape(), (Shape{2, 192, 8, 8}));
}

TEST(Model, HeadWidthAndEvalDeterminism) {
  auto cfg = preset("spartan-tiny");
  auto m = Model<float>::build(cfg, 0);
  std::mt19937_64 rng(2);
  auto x = randn<float>({3, 3, 32, 32}, rng);
  auto y1 = m.forward(x, false), y2 = m.forward(x, false);
  EXPECT_EQ(y1.shape(), (Shape{3, 10}));
  for (std::size_t i = 0; i < y1.numel(); ++i) EXPECT_EQ(y1.data()[i], y2.data()[i]);
}

TEST(Model, InputErrors) {
  auto m = Model<float>::build(preset("spartan-tiny"), 0);
  EXPECT_THROW(m.forward(TensorF({1, 3, 48, 32}), false), InputError);
  EXPECT_THROW(m.forward(TensorF({1, 4, 32, 32}), false), ShapeError);
  EXPECT_THROW(m.costs(100, 100), InputError);
}

TEST(Costs, ConvRowsMatchShapeFormula) {
  auto m = Model<float>::build(preset("spartan-xt"), 0);
  auto report = m.costs(224, 224);
  std::map<std::string, Shape> shapes;
  for (const auto& nt : m.named_tensors()) shapes[nt.name] = nt.tensor.shape();
  const std::size_t side[] = {56, 28, 14, 7};
  std::size_t checked = 0;
  for (const auto& row : report.rows) {
    if (row.kind != "conv" && row.kind != "dwconv") continue;
    const auto pos = row.name.find(".blocks.");
    if (pos == std::string::npos) continue;
    const std::size_t s = row.name[7] - '0';
    const auto& w = shapes.at(row.name + ".weight");
    const std::uint64_t hw = side[s] * side[s];
    EXPECT_EQ(row.macs, w[0] * w[1] * w[2] * w[3] * hw) << row.name;
    ++checked;
  }
  EXPECT_GT(checked, 100u);
  // stem: 3x3 stride 2 pad 1 twice, 224 -> 112 -> 56
  for (const auto& row : report.rows) {
    if (row.name == "stages.0.embed.conv1") {
      EXPECT_EQ(row.macs, 3ull * 16 * 9 * 112 * 112);
    }
    if (row.name == "stages.0.embed.conv2") {
      EXPECT_EQ(row.macs, 16ull * 32 * 9 * 56 * 56);
    }
  }
}

TEST(Costs, SingleConvExample) {
  EXPECT_EQ(conv_macs(3, 16, 3, 3, 1, 32, 32), 442368u);
}

TEST(Costs, TotalsAndOwnership) {
  auto m = Model<float>::build(preset("spartan-xt"), 0);
  auto report = m.costs(224, 224);
  std::uint64_t params = 0, macs = 0, spatial = 0;
  std::map<std::string, int> owners;
  for (const auto& row : report.rows) {
    params += row.params;
    macs += row.macs;
    if (row.spatial) spatial += row.macs;
    for (const auto& t : row.tensors) ++owners[t];
  }
  EXPECT_EQ(report.total_params(), params);
  EXPECT_EQ(report.total_macs(), macs);
  EXPECT_EQ(report.spatial_macs() + report.fixed_macs(), macs);

  std::uint64_t learnable = 0;
  std::size_t learnable_count = 0, buffers = 0;
  std::map<std::string, std::uint64_t> numel;
  for (const auto& nt : m.named_tensors()) {
    if (!nt.learnable) {
      ++buffers;
      continue;
    }
    ++learnable_count;
    learnable += nt.tensor.numel();
    numel[nt.name] = nt.tensor.numel();
    EXPECT_EQ(owners[nt.name], 1) << nt.name;
  }
  EXPECT_EQ(owners.size(), learnable_count);
  EXPECT_EQ(learnable, params);
  EXPECT_EQ(report.learnable_tensor_count(), learnable_count);
  for (const auto& row : report.rows) {
    std::uint64_t p = 0;
    for (const auto& t : row.tensors) p += numel.at(t);
    EXPECT_EQ(p, row.params) << row.name;
  }
  // checkpoint manifest: learnable rows plus norm buffers
  EXPECT_EQ(checkpoint_entries(m).size(), learnable_count + buffers);
}

TEST(Costs, ResolutionScalesSpatialRowsOnly) {
  auto m = Model<float>::build(preset("spartan-t"), 0);
  auto a = m.costs(224, 224), b = m.costs(256, 256);
  EXPECT_EQ(a.spatial_macs() * 64, b.spatial_macs() * 49);
  EXPECT_EQ(a.fixed_macs(), b.fixed_macs());
  EXPECT_EQ(a.total_params(), b.total_params());
}

TEST(Costs, CsvRoundsToRows) {
  auto m = Model<float>::build(preset("spartan-tiny"), 0);
  auto csv = m.costs(32, 32).to_csv();
  EXPECT_EQ(csv.rfind("layer,params,macs,mem_access", 0), 0u);
  EXPECT_NE(csv.find("\ntotal,"), std::string::npos);
}

TEST(Config, JsonRoundTrip) {
  for (const auto& name : preset_names()) {
    auto cfg = preset(name);
    EXPECT_EQ(from_json(to_json(cfg)), cfg) << name;
  }
  auto cfg = preset("spartan-t");
  cfg.se_reduction = 8;
  cfg.block_activation = Activation::silu;
  cfg.stages[2].expand_ratio = 3;
  EXPECT_EQ(from_json(to_json(cfg)), cfg);
}

TEST(Config, UnknownKeyNamed) {
  auto j = to_json(preset("spartan-xt"));
  j["stages"][1]["chanels"] = 4;
  try {
    from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("stages.1.chanels"), std::string::npos) << e.what();
  }
}

TEST(Config, ValidationEnumeratesErrors) {
  auto cfg = preset("spartan-xt");
  cfg.stages[0].channels = 33;
  cfg.num_classes = 0;
  try {
    validate(cfg);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("stages.0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("num_classes"), std::string::npos) << msg;
  }
}

TEST(Config, Overrides) {
  auto cfg = preset("spartan-xt");
  apply_override(cfg, "stages.3.conv_type=full");
  EXPECT_EQ(cfg.stages[3].conv_type, ConvType::full);
  EXPECT_EQ(cfg.stages[2].conv_type, ConvType::depthwise);
  apply_override(cfg, "stages.*.conv_type=depthwise");
  for (const auto& s : cfg.stages) EXPECT_EQ(s.conv_type, ConvType::depthwise);
  apply_override(cfg, "kernel_variant=single5");
  EXPECT_EQ(cfg.kernel_variant, KernelVariant::single5);
  apply_override(cfg, "input_resolution=256x192");
  EXPECT_EQ(cfg.input_height, 256u);
  EXPECT_EQ(cfg.input_width, 192u);
  EXPECT_THROW(apply_override(cfg, "stages.7.channels=8"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "nonsense=1"), ConfigError);
  EXPECT_THROW(apply_override(cfg, "num_classes"), ConfigError);
}

TEST(Archive, RejectsCorruption) {
  std::vector<ArchiveEntry> entries;
  std::vector<float> v{1, 2, 3, 4};
  entries.push_back(ArchiveEntry::from_values<float>("a", {2, 2}, v));
  std::vector<std::int64_t> l{7, -1};
  entries.push_back(ArchiveEntry::from_values<std::int64_t>("labels", {2}, l));
  const auto bytes = serialize_archive(entries);
  auto back = parse_archive(bytes);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].values<float>(), v);
  EXPECT_EQ(back[1].values<std::int64_t>(), l);
  EXPECT_EQ(serialize_archive(back), bytes);
  EXPECT_THROW(parse_archive(bytes.substr(0, bytes.size() - 1)), CheckpointError);
  EXPECT_THROW(parse_archive(bytes + "x"), CheckpointError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(parse_archive(bad), CheckpointError);
}

TEST(Checkpoint, ByteIdenticalRoundTrip) {
  auto cfg = preset("spartan-tiny");
  auto m = Model<float>::build(cfg, 5);
  // move the BN buffers off their defaults
  std::mt19937_64 rng(5);
  m.forward(randn<float>({4, 3, 32, 32}, rng), true);
  const auto p1 = scratch("a.sprt"), p2 = scratch("b.sprt");
  checkpoint_save(m, p1);
  auto loaded = checkpoint_load<float>(p1, cfg);
  checkpoint_save(loaded, p2);
  EXPECT_EQ(slurp(p1), slurp(p2));
  EXPECT_EQ(parameter_checksum(m), parameter_checksum(loaded));
}

TEST(Checkpoint, MismatchNamesTensor) {
  auto xt = Model<float>::build(preset("spartan-xt"), 0);
  const auto p = scratch("xt.sprt");
  checkpoint_save(xt, p);
  try {
    checkpoint_load<float>(p, preset("spartan-t"));
    FAIL();
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("stages."), std::string::npos) << msg;
  }
  EXPECT_THROW(checkpoint_load<float>(scratch("missing.sprt"), preset("spartan-xt")), CheckpointError);
}

TEST(Checkpoint, RefusesNonFinite) {
  auto m = Model<float>::build(preset("spartan-tiny"), 0);
  m.stages()[0].embed.conv1.weight.mutable_data()[0] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(checkpoint_save(m, scratch("inf.sprt")), NumericError);
}
