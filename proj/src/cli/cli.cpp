#include "spartan/cli.hpp"

#include <algorithm>
#include <charconv>
#include <optional>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>

#include "spartan/checkpoint.hpp"
#include "spartan/metrics.hpp"
#include "spartan/parallel.hpp"
#include "spartan/trainer.hpp"

namespace spartan {

namespace {

struct CommonArgs {
  std::string config;
  std::vector<std::string> overrides;
  std::size_t threads = 1;
};

void add_common(CLI::App* cmd, CommonArgs& c, const std::string& default_config) {
  c.config = default_config;
  cmd->add_option("-c,--config", c.config, "preset name or JSON config file")->capture_default_str();
  cmd->add_option("-s,--set", c.overrides, "override, e.g. stages.3.conv_type=full (repeatable)");
  cmd->add_option("--threads", c.threads, "worker threads inside ops")->capture_default_str();
}

ModelConfig resolve(const CommonArgs& c) {
  if (c.threads == 0) throw ConfigError("--threads must be >= 1");
  set_num_threads(c.threads);
  auto cfg = resolve_config(c.config);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  return cfg;
}

void echo_config(std::ostream& out, const ModelConfig& cfg, const char* prefix = "") {
  out << prefix << "config: " << to_json(cfg).dump() << '\n';
}

std::string res_str(std::size_t h, std::size_t w) { return std::to_string(h) + "x" + std::to_string(w); }

std::pair<std::size_t, std::size_t> parse_resolution(const std::string& text) {
  auto num = [&](std::string_view s) {
    std::size_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || p != s.data() + s.size()) {
      throw ConfigError("bad resolution '" + text + "' (expected N or HxW)");
    }
    return v;
  };
  const auto x = text.find('x');
  if (x == std::string::npos) {
    const auto v = num(text);
    return {v, v};
  }
  return {num(std::string_view(text).substr(0, x)), num(std::string_view(text).substr(x + 1))};
}

// ---------------------------------------------------------------------------

int cmd_describe(const CommonArgs& common, std::ostream& out) {
  const auto cfg = resolve(common);
  echo_config(out, cfg);
  const auto model = Model<float>::build(cfg, 0);
  const auto extents = model.stage_extents(cfg.input_height, cfg.input_width);
  const auto report = model.costs(cfg.input_height, cfg.input_width);
  out << "model: " << cfg.name << ", input " << res_str(cfg.input_height, cfg.input_width) << ", "
      << std::fixed << std::setprecision(3) << report.total_params() / 1e6 << " M params\n";
  out << std::left << std::setw(7) << "stage" << std::setw(10) << "output" << std::setw(16) << "embed"
      << std::setw(10) << "channels" << std::setw(8) << "blocks" << std::setw(8) << "expand"
      << "conv\n";
  for (std::size_t s = 0; s < 4; ++s) {
    const auto& st = cfg.stages[s];
    out << std::left << std::setw(7) << ("S" + std::to_string(s + 1)) << std::setw(10)
        << res_str(extents[s].h, extents[s].w) << std::setw(16) << embed_variant_name(st.embed_variant)
        << std::setw(10) << st.channels << std::setw(8) << st.num_blocks << std::setw(8)
        << st.expand_ratio << conv_type_name(st.conv_type) << '\n';
  }
  out << "kernel variant: " << kernel_variant_name(cfg.kernel_variant) << ", head: "
      << norm_name(cfg.mixer_norm) << " -> gap -> linear(" << cfg.stages[3].channels << " -> "
      << cfg.num_classes << ")\n";
  return kExitOk;
}

struct CostsArgs {
  std::string resolution;
  std::string format = "table";
  std::string out_path;
  bool flops_2x = false;
};

int cmd_costs(const CommonArgs& common, const CostsArgs& a, std::ostream& out) {
  const auto cfg = resolve(common);
  auto [h, w] = a.resolution.empty() ? std::pair{cfg.input_height, cfg.input_width}
                                     : parse_resolution(a.resolution);
  if (a.format != "table" && a.format != "csv") {
    throw ConfigError("--format must be 'table' or 'csv', got '" + a.format + "'");
  }
  const auto model = Model<float>::build(cfg, 0);
  auto report = model.costs(h, w);
  report.double_flops = a.flops_2x;
  const std::string body = a.format == "csv" ? report.to_csv() : report.to_table();
  echo_config(out, cfg, a.format == "csv" && a.out_path.empty() ? "# " : "");
  if (a.out_path.empty()) {
    out << body;
  } else {
    std::ofstream f(a.out_path, std::ios::trunc);
    if (!f || !(f << body)) throw DataError("cannot write '" + a.out_path + "'");
    out << "wrote " << a.out_path << '\n';
  }
  if (a.format == "csv" && !a.out_path.empty()) {
    out << std::fixed << std::setprecision(4) << "params: " << report.total_params() / 1e6
        << " M, FLOPs: " << report.flops() / 1e9 << " G at " << res_str(h, w) << '\n';
  }
  return kExitOk;
}

struct GradcheckArgs {
  double tol = 1e-4;
  double eps = 1e-5;
  std::uint64_t seed = 0;
};

int cmd_gradcheck(const CommonArgs& common, const GradcheckArgs& a, std::ostream& out) {
  const auto cfg = resolve(common);
  echo_config(out, cfg);
  GradcheckOptions opts;
  opts.tol = a.tol;
  opts.eps = a.eps;
  opts.seed = a.seed;
  const auto results = run_gradcheck_suite(cfg, opts);
  out << "gradcheck (f64, eps " << a.eps << ", tol " << a.tol << ", seed " << a.seed << ")\n";
  out << std::left << std::setw(34) << "component" << std::setw(9) << "checked" << std::setw(14)
      << "max_rel_err" << std::setw(28) << "worst" << "status\n";
  bool ok = true;
  double worst = 0.0;
  for (const auto& r : results) {
    ok = ok && r.report.passed;
    worst = std::max(worst, r.report.max_rel_error);
    out << std::left << std::setw(34) << r.name << std::setw(9) << r.report.checked << std::setw(14)
        << std::scientific << std::setprecision(3) << r.report.max_rel_error << std::setw(28)
        << r.report.worst_location << (r.report.passed ? "ok" : "FAIL") << '\n';
    for (const auto& m : r.report.mismatches) {
      out << "    " << m.input << "[" << m.index << "] analytic " << m.analytic << " numeric "
          << m.numeric << " rel " << m.rel_error << '\n';
    }
    if (r.report.failed > r.report.mismatches.size()) {
      out << "    ... " << r.report.failed - r.report.mismatches.size() << " more\n";
    }
  }
  out << std::defaultfloat << "worst relative error: " << std::scientific << std::setprecision(3)
      << worst << (ok ? "  PASS" : "  FAIL") << '\n';
  return ok ? kExitOk : kExitFailure;
}

struct TrainArgs {
  std::string data;
  std::string eval_data;
  std::size_t epochs = 5;
  std::size_t batch_size = 64;
  double lr = 2.5e-4;
  double min_lr = 0.0;
  std::size_t warmup_epochs = 2;
  double weight_decay = 0.03;
  std::string augment = "flip_crop";
  std::uint64_t seed = 0;
  std::string out_path;
  std::string metrics_path;
  std::string resume;
};

int cmd_train(const CommonArgs& common, const TrainArgs& a, std::ostream& out) {
  const auto cfg = resolve(common);
  echo_config(out, cfg);
  if (a.epochs == 0) throw ConfigError("--epochs must be >= 1");
  TrainOptions topts;
  topts.batch_size = a.batch_size;
  topts.augment = parse_augment(a.augment);
  topts.seed = a.seed;
  out << "train: epochs " << a.epochs << ", batch " << a.batch_size << ", lr " << a.lr << ", min_lr "
      << a.min_lr << ", warmup " << a.warmup_epochs << ", wd " << a.weight_decay << ", augment "
      << a.augment << ", seed " << a.seed << '\n';

  Dataset train = load_dataset(a.data);
  train.split = "train";
  Dataset eval_set = a.eval_data.empty() ? train : load_dataset(a.eval_data);
  eval_set.split = "eval";

  auto model = Model<float>::build(cfg, a.seed);
  std::optional<MetricsWriter> metrics;
  if (!a.metrics_path.empty()) metrics.emplace(a.metrics_path);
  auto emit = [&](const MetricsRow& row) {
    out << "epoch " << row.epoch << " " << std::left << std::setw(5) << row.split << " loss "
        << std::setprecision(6) << row.loss << " top1 " << row.top1 << " lr " << row.lr << '\n';
    if (metrics) metrics->write(row);
  };
  if (!a.resume.empty()) {
    checkpoint_load_into(model, a.resume);
    const auto ev = evaluate(model, eval_set, a.batch_size);
    emit({0, "eval", ev.loss, ev.top1, 0.0});
  }

  AdamWOptions oopts;
  oopts.lr = a.lr;
  oopts.weight_decay = a.weight_decay;
  AdamW<float> opt(model.parameters(), oopts);
  const LRSchedule sched{a.lr, a.min_lr, a.warmup_epochs, a.epochs};

  double best_top1 = -1.0, best_loss = 0.0;
  for (std::size_t e = 1; e <= a.epochs; ++e) {
    const auto tm = train_epoch(model, train, opt, sched, topts, e);
    emit({e, "train", tm.loss, tm.top1, tm.lr});
    const auto ev = evaluate(model, eval_set, a.batch_size);
    emit({e, "eval", ev.loss, ev.top1, tm.lr});
    const bool better = ev.top1 > best_top1 || (ev.top1 == best_top1 && ev.loss < best_loss);
    if (better) {
      best_top1 = ev.top1;
      best_loss = ev.loss;
      if (!a.out_path.empty()) checkpoint_save(model, a.out_path);
    }
  }
  if (!a.out_path.empty()) {
    out << "best eval top1 " << best_top1 << " loss " << best_loss << ", checkpoint " << a.out_path << '\n';
  }
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::size_t batch_size = 64;
};

int cmd_eval(const CommonArgs& common, const EvalArgs& a, std::ostream& out) {
  const auto cfg = resolve(common);
  echo_config(out, cfg);
  auto model = checkpoint_load<float>(a.checkpoint, cfg);
  auto ds = load_dataset(a.data);
  const auto ev = evaluate(model, ds, a.batch_size);
  out << std::setprecision(9) << "eval: loss " << ev.loss << " top1 " << ev.top1 << " samples "
      << ev.samples << '\n';
  return kExitOk;
}

struct SynthArgs {
  std::string out_path;
  std::size_t count = 512;
  std::size_t size = 32;
  std::uint64_t seed = 1;
  std::string format = "packed";
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto ds = make_quadrants(a.count, a.size, a.seed);
  if (a.format == "packed") save_packed(ds, a.out_path);
  else if (a.format == "dir") save_directory(ds, a.out_path);
  else throw ConfigError("--format must be 'packed' or 'dir', got '" + a.format + "'");
  out << "wrote " << ds.size() << " images of " << a.size << "x" << a.size << " to " << a.out_path << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"spartan: build, cost, verify, train and evaluate SpaRTAN models", "spartan"};
  app.require_subcommand(1);

  CommonArgs describe_c, costs_c, grad_c, train_c, eval_c;
  auto* describe = app.add_subcommand("describe", "per-stage structure of a model");
  add_common(describe, describe_c, "spartan-xt");

  CostsArgs costs_a;
  auto* costs = app.add_subcommand("costs", "parameter, MAC and memory-access report");
  add_common(costs, costs_c, "spartan-xt");
  costs->add_option("-r,--resolution", costs_a.resolution, "N or HxW (default: config input_resolution)");
  costs->add_option("-f,--format", costs_a.format, "table or csv")->capture_default_str();
  costs->add_option("-o,--out", costs_a.out_path, "write the report to a file");
  costs->add_flag("--flops-2x", costs_a.flops_2x, "report FLOPs as 2*MACs");

  GradcheckArgs grad_a;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every layer type");
  add_common(grad, grad_c, "spartan-tiny");
  grad->add_option("--tol", grad_a.tol, "relative error tolerance")->capture_default_str();
  grad->add_option("--eps", grad_a.eps, "finite-difference step")->capture_default_str();
  grad->add_option("--seed", grad_a.seed, "input / projection seed")->capture_default_str();

  TrainArgs train_a;
  auto* train = app.add_subcommand("train", "train on a dataset");
  add_common(train, train_c, "spartan-tiny");
  train->add_option("-d,--data", train_a.data, "dataset directory or packed archive")->required();
  train->add_option("--eval-data", train_a.eval_data, "held-out set (default: the training set)");
  train->add_option("-e,--epochs", train_a.epochs)->capture_default_str();
  train->add_option("-b,--batch-size", train_a.batch_size)->capture_default_str();
  train->add_option("--lr", train_a.lr, "base learning rate")->capture_default_str();
  train->add_option("--min-lr", train_a.min_lr)->capture_default_str();
  train->add_option("--warmup-epochs", train_a.warmup_epochs)->capture_default_str();
  train->add_option("--weight-decay", train_a.weight_decay)->capture_default_str();
  train->add_option("--augment", train_a.augment, "none or flip_crop")->capture_default_str();
  train->add_option("--seed", train_a.seed, "init / shuffle seed")->capture_default_str();
  train->add_option("-o,--out", train_a.out_path, "checkpoint path (best eval epoch)");
  train->add_option("-m,--metrics", train_a.metrics_path, "metrics CSV (appended)");
  train->add_option("--resume", train_a.resume, "start from this checkpoint");

  EvalArgs eval_a;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, eval_c, "spartan-tiny");
  eval->add_option("-k,--checkpoint", eval_a.checkpoint)->required();
  eval->add_option("-d,--data", eval_a.data, "dataset directory or packed archive")->required();
  eval->add_option("-b,--batch-size", eval_a.batch_size)->capture_default_str();

  SynthArgs synth_a;
  auto* synth = app.add_subcommand("synth", "write the synthetic two-class dataset");
  synth->add_option("-o,--out", synth_a.out_path)->required();
  synth->add_option("-n,--count", synth_a.count)->capture_default_str();
  synth->add_option("--size", synth_a.size)->capture_default_str();
  synth->add_option("--seed", synth_a.seed)->capture_default_str();
  synth->add_option("-f,--format", synth_a.format, "packed or dir")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (describe->parsed()) return cmd_describe(describe_c, out);
    if (costs->parsed()) return cmd_costs(costs_c, costs_a, out);
    if (grad->parsed()) return cmd_gradcheck(grad_c, grad_a, out);
    if (train->parsed()) return cmd_train(train_c, train_a, out);
    if (eval->parsed()) return cmd_eval(eval_c, eval_a, out);
    if (synth->parsed()) return cmd_synth(synth_a, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const EmptyInputError& e) {
    err << "empty input: " << e.what() << '\n';
    return kExitEmptyInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace spartan
