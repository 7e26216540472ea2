#include "adamct/ablation.hpp"

#include <sstream>

#include <nlohmann/json.hpp>

#include "adamct/checkpoint.hpp"

namespace adamct {

GridKind grid_kind_from_string(const std::string& s) {
  if (s == "mixture") return GridKind::kMixture;
  if (s == "seatt") return GridKind::kSeatt;
  if (s == "components") return GridKind::kComponents;
  throw ConfigError("unknown ablation grid '" + s +
                    "' (mixture|seatt|components)");
}

std::string to_string(GridKind kind) {
  switch (kind) {
    case GridKind::kMixture: return "mixture";
    case GridKind::kSeatt: return "seatt";
    case GridKind::kComponents: return "components";
  }
  return "?";
}

AblationSpec make_grid(GridKind kind, std::vector<std::uint64_t> seeds) {
  AblationSpec spec;
  spec.grid = kind;
  spec.seeds = std::move(seeds);
  if (spec.seeds.empty()) {
    throw ConfigError("ablation: at least one seed is required");
  }

  switch (kind) {
    case GridKind::kMixture: {
      spec.cells.push_back({"adaptive", {{"model.mixture_mode", "adaptive"}}});
      for (const char* a : {"1.0", "0.8", "0.5", "0.2", "0.0"}) {
        spec.cells.push_back({std::string("fixed_local_x") + a,
                              {{"model.mixture_mode", "fixed"},
                               {"model.alpha0", a}}});
      }
      break;
    }
    case GridKind::kSeatt: {
      const std::pair<const char*, const char*> combos[] = {
          {"softmax", "softmax"},
          {"sigmoid", "softmax"},
          {"softmax", "sigmoid"},
          {"sigmoid", "sigmoid"},
      };
      for (const auto& [local, global] : combos) {
        spec.cells.push_back({std::string("local_") + local + "_global_" + global,
                              {{"model.seatt_local", local},
                               {"model.seatt_global", global}}});
      }
      break;
    }
    case GridKind::kComponents: {
      spec.cells.push_back({"full", {}});
      spec.cells.push_back({"no_global_branch",
                            {{"model.mixture_mode", "fixed"},
                             {"model.alpha0", "1.0"}}});
      spec.cells.push_back({"no_local_branch",
                            {{"model.mixture_mode", "fixed"},
                             {"model.alpha0", "0.0"}}});
      spec.cells.push_back({"no_adaptive_mixture",
                            {{"model.mixture_mode", "fixed"},
                             {"model.alpha0", "0.5"}}});
      spec.cells.push_back({"no_seatt", {{"model.seatt_enabled", "false"}}});
      break;
    }
  }
  return spec;
}

namespace {

AblationRun run_cell(const RunConfig& base, const AblationCell& cell,
                     std::uint64_t seed) {
  AblationRun run;
  run.seed = seed;
  try {
    RunConfig cfg = base;
    for (const auto& [key, value] : cell.overrides) {
      apply_override(cfg, key, value);
    }
    cfg.train.seed = seed;

    const Dataset dataset = build_dataset(cfg);
    cfg.model.num_items = static_cast<std::int64_t>(dataset.num_items());
    const Splits splits = split_leave_one_out(dataset, cfg.data.sliding_window);

    RngState init_rng = RngState(cfg.train.seed).child(3);
    AdaMCTModel<float> model = init_model<float>(cfg.model, init_rng);
    fit(model, splits, dataset, cfg.train, cfg.eval);

    EvalConfig test_cfg = cfg.eval;
    test_cfg.split = "test";
    const MetricsReport report =
        evaluate_split(model, splits.test, dataset, test_cfg);
    run.ndcg10 = report.ndcg.count(10) ? report.ndcg.at(10) : 0.0;
    run.recall10 = report.recall.count(10) ? report.recall.at(10) : 0.0;
    run.ok = true;
  } catch (const std::exception& e) {
    run.ok = false;
    run.error = e.what();
  }
  return run;
}

}  // namespace

AblationReport run_ablation(const RunConfig& base, const AblationSpec& spec) {
  AblationReport report;
  report.grid = to_string(spec.grid);
  report.all_ok = true;
  for (const AblationCell& cell : spec.cells) {
    AblationCellResult result;
    result.cell = cell;
    result.ok = true;
    double sum_ndcg = 0.0, sum_recall = 0.0;
    Index ok_count = 0;
    for (std::uint64_t seed : spec.seeds) {
      AblationRun run = run_cell(base, cell, seed);
      if (run.ok) {
        sum_ndcg += run.ndcg10;
        sum_recall += run.recall10;
        ++ok_count;
      } else {
        result.ok = false;
        report.all_ok = false;
      }
      result.runs.push_back(std::move(run));
    }
    if (ok_count > 0) {
      result.mean_ndcg10 = sum_ndcg / static_cast<double>(ok_count);
      result.mean_recall10 = sum_recall / static_cast<double>(ok_count);
    }
    report.cells.push_back(std::move(result));
  }
  return report;
}

std::string AblationReport::to_json() const {
  nlohmann::json j;
  j["grid"] = grid;
  j["all_ok"] = all_ok;
  nlohmann::json cells_json = nlohmann::json::array();
  for (const AblationCellResult& c : cells) {
    nlohmann::json cj;
    cj["name"] = c.cell.name;
    nlohmann::json overrides = nlohmann::json::object();
    for (const auto& [k, v] : c.cell.overrides) overrides[k] = v;
    cj["overrides"] = overrides;
    cj["ok"] = c.ok;
    cj["mean_ndcg10"] = c.mean_ndcg10;
    cj["mean_recall10"] = c.mean_recall10;
    nlohmann::json runs = nlohmann::json::array();
    for (const AblationRun& r : c.runs) {
      nlohmann::json rj;
      rj["seed"] = r.seed;
      rj["ok"] = r.ok;
      if (r.ok) {
        rj["ndcg10"] = r.ndcg10;
        rj["recall10"] = r.recall10;
      } else {
        rj["error"] = r.error;
      }
      runs.push_back(rj);
    }
    cj["runs"] = runs;
    cells_json.push_back(cj);
  }
  j["cells"] = cells_json;
  return j.dump(2);
}

std::string AblationReport::to_csv() const {
  std::ostringstream os;
  os << "cell,setting,seed,ndcg10,recall10,status\n";
  for (const AblationCellResult& c : cells) {
    std::string setting;
    for (const auto& [k, v] : c.cell.overrides) {
      if (!setting.empty()) setting += ";";
      setting += k + "=" + v;
    }
    for (const AblationRun& r : c.runs) {
      os << c.cell.name << "," << setting << "," << r.seed << "," << r.ndcg10
         << "," << r.recall10 << "," << (r.ok ? "ok" : "failed") << "\n";
    }
    os << c.cell.name << "," << setting << ",mean," << c.mean_ndcg10 << ","
       << c.mean_recall10 << "," << (c.ok ? "ok" : "failed") << "\n";
  }
  return os.str();
}

}  // namespace adamct
