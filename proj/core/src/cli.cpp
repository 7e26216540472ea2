#include "adamct/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "adamct/ablation.hpp"
#include "adamct/checkpoint.hpp"
#include "adamct/config.hpp"
#include "adamct/gradcheck.hpp"
#include "adamct/trainer.hpp"

namespace adamct::cli {

namespace {

namespace fs = std::filesystem;

struct CommonFlags {
  std::string config_path;
  std::string checkpoint_path;
  std::string out_dir;
  std::optional<std::int64_t> seed;
  bool deterministic = false;
};

RunConfig load_with_flags(const CommonFlags& flags) {
  RunConfig config = load_run_config(flags.config_path);
  if (flags.seed.has_value()) {
    config.train.seed = static_cast<std::uint64_t>(*flags.seed);
  }
  if (!flags.out_dir.empty()) {
    config.out_dir = flags.out_dir;
  }
  if (flags.deterministic) {
    config.deterministic = true;
  }
  return config;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << content;
}

fs::path prepare_out_dir(const RunConfig& config) {
  const fs::path dir(config.out_dir);
  fs::create_directories(dir);
  write_file(dir / "config.resolved.cfg", serialize_run_config(config));
  return dir;
}

struct PreparedData {
  Dataset dataset;
  Splits splits;
};

PreparedData prepare_data(RunConfig& config) {
  PreparedData p;
  p.dataset = build_dataset(config);
  config.model.num_items = static_cast<std::int64_t>(p.dataset.num_items());
  p.splits = split_leave_one_out(p.dataset, config.data.sliding_window);
  return p;
}

std::span<const SplitExample> pick_split(const Splits& splits,
                                         const std::string& name) {
  if (name == "train") return splits.train;
  if (name == "valid") return splits.valid;
  return splits.test;
}

int cmd_train(const CommonFlags& flags) {
  RunConfig config = load_with_flags(flags);
  PreparedData data = prepare_data(config);
  const fs::path out = prepare_out_dir(config);

  RngState init_rng = RngState(config.train.seed).child(3);
  AdaMCTModel<float> model = init_model<float>(config.model, init_rng);

  AlphaLog alpha_log;
  const TrainHistory history =
      fit(model, data.splits, data.dataset, config.train, config.eval, &alpha_log);

  save_checkpoint(model, (out / "checkpoint.bin").string());
  write_file(out / "history.csv", history.to_csv());
  write_file(out / "history.json", history.to_json());
  write_file(out / "alpha_log.csv", alpha_log.to_csv());
  write_file(out / "param_count.json", count_parameters(model).to_json());

  EvalConfig test_cfg = config.eval;
  test_cfg.split = "test";
  const MetricsReport report =
      evaluate_split(model, data.splits.test, data.dataset, test_cfg);
  write_file(out / "metrics_test.json", report.to_json());
  write_file(out / "metrics_test.csv", report.to_csv());

  std::cout << "trained " << history.epochs.size() << " epochs, best epoch "
            << history.best_epoch << " (val ndcg@10 "
            << history.best_val_ndcg10 << ")\n";
  std::cout << report.to_json() << "\n";
  return kExitOk;
}

int cmd_evaluate(const CommonFlags& flags) {
  RunConfig config = load_with_flags(flags);
  if (flags.checkpoint_path.empty()) {
    throw ConfigError("evaluate: --checkpoint is required");
  }
  AdaMCTModel<float> model = load_checkpoint<float>(flags.checkpoint_path);

  // The checkpoint and the config must describe the same architecture.
  std::vector<std::string> mismatches;
  const ModelConfig& a = model.config;
  const ModelConfig& b = config.model;
  const auto check = [&](const std::string& field, auto lhs, auto rhs) {
    if (lhs != rhs) {
      std::ostringstream os;
      os << field << " (checkpoint " << lhs << ", config " << rhs << ")";
      mismatches.push_back(os.str());
    }
  };
  check("d_model", a.d_model, b.d_model);
  check("layers", a.num_layers, b.num_layers);
  check("heads", a.num_heads, b.num_heads);
  check("kernel", a.kernel_size, b.kernel_size);
  check("reduction", a.reduction, b.reduction);
  check("conv_activation", to_string(a.conv_activation), to_string(b.conv_activation));
  check("max_len", a.max_len, b.max_len);
  check("seatt_local", to_string(a.seatt_local), to_string(b.seatt_local));
  check("seatt_global", to_string(a.seatt_global), to_string(b.seatt_global));
  check("mixture_mode", to_string(a.mixture_mode), to_string(b.mixture_mode));
  check("conv_padding", to_string(a.conv_padding), to_string(b.conv_padding));
  check("seatt_enabled", a.seatt_enabled, b.seatt_enabled);

  PreparedData data = prepare_data(config);
  check("num_items", a.num_items, config.model.num_items);
  if (!mismatches.empty()) {
    std::string joined = "checkpoint/config architecture mismatch:";
    for (const std::string& m : mismatches) joined += "\n  - " + m;
    throw CheckpointError(CheckpointError::Kind::kSizeMismatch, joined);
  }

  const fs::path out = prepare_out_dir(config);
  const MetricsReport report = evaluate_split(
      model, pick_split(data.splits, config.eval.split), data.dataset, config.eval);
  write_file(out / ("metrics_" + config.eval.split + ".json"), report.to_json());
  write_file(out / ("metrics_" + config.eval.split + ".csv"), report.to_csv());
  std::cout << report.to_json() << "\n";
  return kExitOk;
}

int cmd_gradcheck(const CommonFlags& flags) {
  RunConfig config = load_with_flags(flags);
  PreparedData data = prepare_data(config);
  const fs::path out = prepare_out_dir(config);

  ModelGradCheckOptions opts = config.gradcheck;
  const ModelGradCheckReport report = gradcheck_model(config.model, opts);
  write_file(out / "gradcheck.json", report.to_json());

  std::cout << "tensor                                          group           max_rel_err\n";
  for (const ModelGradCheckRow& row : report.rows) {
    std::printf("%-47s %-15s %.3e\n", row.tensor.c_str(), row.group.c_str(),
                row.max_rel_err);
  }
  std::printf("worst: %.3e in %s (threshold %.1e) -> %s\n", report.worst,
              report.worst_tensor.c_str(), report.threshold,
              report.passed() ? "pass" : "FAIL");
  return report.passed() ? kExitOk : kExitFailure;
}

int cmd_ablate(const CommonFlags& flags, const std::string& grid_name,
               const std::vector<std::uint64_t>& seeds) {
  RunConfig config = load_with_flags(flags);
  const fs::path out = prepare_out_dir(config);

  const GridKind kind = grid_kind_from_string(grid_name);
  std::vector<std::uint64_t> run_seeds = seeds;
  if (run_seeds.empty()) {
    run_seeds.push_back(config.train.seed);
  }
  const AblationSpec spec = make_grid(kind, run_seeds);
  const AblationReport report = run_ablation(config, spec);

  write_file(out / ("ablation_" + report.grid + ".json"), report.to_json());
  write_file(out / ("ablation_" + report.grid + ".csv"), report.to_csv());
  std::cout << report.to_csv();
  return report.all_ok ? kExitOk : kExitFailure;
}

int cmd_stats(const CommonFlags& flags) {
  RunConfig config = load_with_flags(flags);
  PreparedData data = prepare_data(config);
  const fs::path out = prepare_out_dir(config);
  write_file(out / "stats.json", data.dataset.stats.to_json());
  std::cout << data.dataset.stats.to_json() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"AdaMCT sequential recommender"};
  app.require_subcommand(1);

  CommonFlags flags;
  std::string grid_name = "mixture";
  std::vector<std::uint64_t> seeds;

  const auto add_common = [&](CLI::App* cmd, bool needs_checkpoint = false) {
    cmd->add_option("--config", flags.config_path, "Run configuration file")
        ->required();
    if (needs_checkpoint) {
      cmd->add_option("--checkpoint", flags.checkpoint_path, "Checkpoint file");
    }
    cmd->add_option("--seed", flags.seed, "Override train.seed");
    cmd->add_option("--out", flags.out_dir, "Override output.dir");
    cmd->add_flag("--deterministic", flags.deterministic,
                  "Force deterministic execution");
  };

  CLI::App* train = app.add_subcommand("train", "Train and evaluate a model");
  add_common(train);
  CLI::App* evaluate =
      app.add_subcommand("evaluate", "Evaluate a checkpoint on a split");
  add_common(evaluate, /*needs_checkpoint=*/true);
  CLI::App* gradcheck = app.add_subcommand(
      "gradcheck", "Check analytic gradients against finite differences");
  add_common(gradcheck);
  CLI::App* ablate = app.add_subcommand("ablate", "Run an ablation grid");
  add_common(ablate);
  ablate->add_option("--grid", grid_name, "mixture | seatt | components");
  ablate->add_option("--seeds", seeds, "Seeds for every grid cell");
  CLI::App* stats = app.add_subcommand("stats", "Dataset statistics report");
  add_common(stats);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help and friends
      return app.exit(e);
    }
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(flags);
    if (evaluate->parsed()) return cmd_evaluate(flags);
    if (gradcheck->parsed()) return cmd_gradcheck(flags);
    if (ablate->parsed()) return cmd_ablate(flags, grid_name, seeds);
    if (stats->parsed()) return cmd_stats(flags);
    std::cerr << "error: no command\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  args.reserve(argc > 0 ? argc - 1 : 0);
  for (int i = 1; i < argc; ++i) {
    args.emplace_back(argv[i]);
  }
  return run(args);
}

}  // namespace adamct::cli
