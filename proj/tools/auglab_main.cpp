// SPDX-License-Identifier: Apache-2.0
//
// auglab CLI: config-driven experiments around pruning, augmentation
// magnitude policies and teacher-filtered knowledge distillation.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "auglab/config.hpp"
#include "auglab/errors.hpp"
#include "auglab/results.hpp"
#include "auglab/rng.hpp"
#include "auglab/scheme.hpp"
#include "auglab/train.hpp"

namespace {

using namespace auglab;

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  std::istringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<int> parse_ints(const std::string& csv) {
  std::vector<int> out;
  std::istringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoi(tok));
  }
  return out;
}

std::vector<uint64_t> parse_seeds(const std::string& csv) {
  std::vector<uint64_t> out;
  std::istringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stoull(tok));
  }
  return out;
}

void write_findings(const std::string& out_dir, const std::vector<std::string>& findings) {
  if (findings.empty()) return;
  std::ofstream os(out_dir + "/findings.txt", std::ios::trunc);
  for (const std::string& f : findings) os << f << "\n";
}

// Per-seed stage seeds so multi-seed sweeps differ end to end while the
// controlled comparison still shares stage-2 settings within a seed.
SchemeSpec proto_for_seed(const ExperimentConfig& cfg, const SchemeConfig& sc, uint64_t seed) {
  SchemeSpec proto;
  proto.model = cfg.model(sc.model);
  if (cfg.models.count(sc.teacher) != 0) proto.teacher_model = cfg.model(sc.teacher);
  proto.build_seed = seed;
  proto.prune_ratio = sc.prune_ratio;
  proto.extra_blocks = sc.extra_blocks;
  proto.strong_m = sc.strong_m;
  proto.weak_m = sc.weak_m;
  proto.stages = {cfg.stage1, cfg.stage2};
  for (TrainSpec& stage : proto.stages) {
    stage.seed = Rng::mix(stage.seed, seed);
    stage.head_seed = Rng::mix(stage.head_seed, seed);
  }
  if (cfg.selection) proto.selection = *cfg.selection;
  return proto;
}

int cmd_grid(const ExperimentConfig& cfg, const std::string& out_dir) {
  if (!cfg.grid) throw ConfigError("grid: config has no 'grid' section");
  const GridConfig& g = *cfg.grid;
  SchemeSpec spec;
  spec.kind = SchemeKind::MagnitudeGrid;
  spec.model = cfg.model(g.model);
  spec.build_seed = cfg.stage1.seed;
  spec.ratios = g.ratios;
  spec.magnitudes = g.magnitudes;
  spec.stages = {cfg.stage1, cfg.stage2};

  const SplitDataset data = build_dataset(cfg.dataset);
  SchemeResult result = run_scheme(spec, data, out_dir);
  emit_results(result.records, out_dir);
  write_resolved_config(cfg, out_dir);
  write_findings(out_dir, result.findings);
  for (const std::string& f : result.findings) std::cout << f << "\n";
  std::cout << "grid: wrote " << result.records.size() << " runs to " << out_dir << "\n";
  return 0;
}

int cmd_prune(const ExperimentConfig& cfg, const std::string& out_dir,
              const std::string& schedule_arg, const std::vector<double>& ratios) {
  if (ratios.empty()) throw ConfigError("prune: --ratios is required");

  auto magnitude_of = [&](double r) -> int {
    if (schedule_arg == "decay") {
      if (!cfg.schedule) throw ConfigError("prune: --schedule decay needs a 'schedule' section");
      return decay_lookup(*cfg.schedule, r);
    }
    if (schedule_arg.rfind("fixed:", 0) == 0) {
      return std::stoi(schedule_arg.substr(6));
    }
    throw ConfigError("prune: --schedule must be 'decay' or 'fixed:M'");
  };

  const std::string model_name = cfg.models.count("model") ? "model" : cfg.models.begin()->first;
  Model model = Model::build(cfg.model(model_name), cfg.stage1.seed);
  std::vector<TrainSpec> per_stage;
  per_stage.reserve(ratios.size());
  for (double r : ratios) {
    TrainSpec stage = cfg.stage1;
    stage.aug.mode = AugMode::Fixed;
    stage.aug.magnitude = magnitude_of(r);
    per_stage.push_back(stage);
  }

  const SplitDataset data = build_dataset(cfg.dataset);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  auto stages = iterative_prune(model, ratios, per_stage, data, out_dir);

  RunRecord record;
  record.run_id = "prune_" + schedule_arg + "_seed" + std::to_string(cfg.stage1.seed);
  record.scheme = "iterative_prune";
  record.seed = cfg.stage1.seed;
  for (auto& s : stages) {
    for (const EpochRow& row : s.record.rows) record.rows.push_back(row);
  }
  emit_results({record}, out_dir);
  write_resolved_config(cfg, out_dir);
  for (size_t i = 0; i < stages.size(); ++i) {
    std::printf("stage %zu: ratio %.4f, magnitude %d, val_accuracy %.4f\n", i,
                pruning_ratio(stages[i].state), per_stage[i].aug.magnitude,
                stages[i].record.rows.back().val_accuracy);
  }
  return 0;
}

int cmd_scheme(const ExperimentConfig& cfg, const std::string& out_dir, const std::string& kind,
               const std::vector<uint64_t>& seeds) {
  if (!cfg.scheme) throw ConfigError("scheme: config has no 'scheme' section");
  SchemeConfig sc = *cfg.scheme;
  if (!kind.empty()) sc.kind = kind;
  const std::vector<uint64_t>& run_seeds = seeds.empty() ? sc.seeds : seeds;

  const bool family = sc.kind == "prune" || sc.kind == "extra" || sc.kind == "kd";
  const SplitDataset data = build_dataset(cfg.dataset);

  std::vector<RunRecord> all_records;
  std::vector<std::string> findings;
  std::map<std::string, std::vector<double>> finals;  // kind -> per-seed accuracy

  for (uint64_t seed : run_seeds) {
    SchemeSpec proto = proto_for_seed(cfg, sc, seed);
    std::vector<SchemeSpec> specs;
    if (family) {
      specs = build_comparison(sc.kind, proto);
    } else {
      proto.kind = scheme_kind_from_name(sc.kind);
      apply_scheme_stages(proto);
      specs = {proto};
    }
    for (const SchemeSpec& spec : specs) {
      SchemeResult result = run_scheme(spec, data, out_dir);
      for (RunRecord& r : result.records) all_records.push_back(std::move(r));
      for (std::string& f : result.findings) findings.push_back(std::move(f));
      finals[scheme_kind_name(spec.kind)].push_back(result.final_accuracy);
      std::printf("%s seed %llu: final val_accuracy %.4f\n", scheme_kind_name(spec.kind),
                  (unsigned long long)seed, result.final_accuracy);
    }
  }

  for (const auto& [name, accs] : finals) {
    double mean = 0.0;
    for (double a : accs) mean += a;
    mean /= double(accs.size());
    char line[160];
    std::snprintf(line, sizeof(line), "%s: mean final accuracy %.4f over %zu seeds", name.c_str(),
                  mean, accs.size());
    findings.push_back(line);
    std::cout << line << "\n";
  }

  emit_results(all_records, out_dir);
  write_resolved_config(cfg, out_dir);
  write_findings(out_dir, findings);
  return 0;
}

int cmd_distill(const ExperimentConfig& cfg, const std::string& out_dir,
                const SelectionConfig& sel, const std::vector<uint64_t>& seeds) {
  if (!cfg.scheme) throw ConfigError("distill: config has no 'scheme' section");
  SchemeConfig sc = *cfg.scheme;
  sc.kind = "kd_filtered";
  const std::vector<uint64_t>& run_seeds = seeds.empty() ? sc.seeds : seeds;

  const SplitDataset data = build_dataset(cfg.dataset);
  std::vector<RunRecord> all_records;
  std::vector<std::string> findings;
  for (uint64_t seed : run_seeds) {
    SchemeSpec spec = proto_for_seed(cfg, sc, seed);
    spec.kind = SchemeKind::KdFiltered;
    spec.selection = sel;
    apply_scheme_stages(spec);
    SchemeResult result = run_scheme(spec, data, out_dir);
    for (RunRecord& r : result.records) all_records.push_back(std::move(r));
    std::printf("kd_filtered seed %llu: final val_accuracy %.4f (n=%d alpha=%g beta=%g tau=%g)\n",
                (unsigned long long)seed, result.final_accuracy, sel.n, sel.alpha, sel.beta,
                sel.tau);
    char line[160];
    std::snprintf(line, sizeof(line), "kd_filtered seed %llu: final accuracy %.4f",
                  (unsigned long long)seed, result.final_accuracy);
    findings.push_back(line);
  }
  emit_results(all_records, out_dir);
  write_resolved_config(cfg, out_dir);
  write_findings(out_dir, findings);
  return 0;
}

int cmd_report(const std::string& runs_dir, const std::string& out_dir) {
  const auto records = parse_results_csv(runs_dir + "/results.csv");
  emit_results(records, out_dir);
  std::cout << "report: " << records.size() << " runs summarized into " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"auglab: a desk-scale pruning / augmentation / distillation laboratory"};
  app.require_subcommand(1);

  std::string config_path, out_override;
  app.add_option("--config", config_path, "experiment config (JSON)");
  app.add_option("--out", out_override, "output directory (overrides config out_dir)");

  auto* grid = app.add_subcommand("grid", "magnitude profiles across pruning ratios");
  std::string grid_model, grid_ratios, grid_magnitudes;
  std::optional<uint64_t> grid_seed;
  grid->add_option("--model", grid_model, "model name from the config");
  grid->add_option("--ratios", grid_ratios, "pruning ratios, comma separated");
  grid->add_option("--magnitudes", grid_magnitudes, "candidate magnitudes, comma separated");
  grid->add_option("--seed", grid_seed, "base seed for all grid cells");

  auto* prune = app.add_subcommand("prune", "iterative pruning with a magnitude schedule");
  std::string prune_schedule = "decay", prune_ratios;
  prune->add_option("--schedule", prune_schedule, "'decay' or 'fixed:M'");
  prune->add_option("--ratios", prune_ratios, "ascending pruning ratios, comma separated");

  auto* scheme = app.add_subcommand("scheme", "run one scheme or an A/B/inherit comparison");
  std::string scheme_kind, scheme_seeds;
  std::optional<int> strong_m, weak_m;
  scheme->add_option("--kind", scheme_kind,
                     "scheme kind, or a family: prune | extra | kd");
  scheme->add_option("--strong-m", strong_m, "strong augmentation magnitude");
  scheme->add_option("--weak-m", weak_m, "weak augmentation magnitude");
  scheme->add_option("--seeds", scheme_seeds, "comma separated seeds");

  auto* distill = app.add_subcommand("distill", "teacher-filtered knowledge distillation");
  std::optional<int> sel_n;
  std::optional<double> sel_alpha, sel_beta, sel_tau;
  std::string distill_seeds;
  distill->add_option("--n", sel_n, "candidates per sample");
  distill->add_option("--alpha", sel_alpha, "weight on teacher cross-entropy");
  distill->add_option("--beta", sel_beta, "weight on teacher-student divergence");
  distill->add_option("--tau", sel_tau, "selection temperature");
  distill->add_option("--seeds", distill_seeds, "comma separated seeds");

  auto* report = app.add_subcommand("report", "re-aggregate results.csv into summary/plotdata");
  std::string report_runs;
  report->add_option("--runs", report_runs, "directory containing results.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) {
      if (report_runs.empty()) throw ConfigError("report: --runs is required");
      return cmd_report(report_runs, out_override.empty() ? report_runs : out_override);
    }

    if (config_path.empty()) throw ConfigError("--config is required");
    ExperimentConfig cfg = load_config(config_path);
    const std::string out_dir = out_override.empty() ? cfg.out_dir : out_override;

    if (grid->parsed()) {
      if (!grid_model.empty() && cfg.grid) cfg.grid->model = grid_model;
      if (!grid_ratios.empty() && cfg.grid) cfg.grid->ratios = parse_doubles(grid_ratios);
      if (!grid_magnitudes.empty() && cfg.grid) cfg.grid->magnitudes = parse_ints(grid_magnitudes);
      if (grid_seed) {
        cfg.stage1.seed = *grid_seed;
        cfg.stage2.seed = *grid_seed;
      }
      return cmd_grid(cfg, out_dir);
    }
    if (prune->parsed()) {
      return cmd_prune(cfg, out_dir, prune_schedule, parse_doubles(prune_ratios));
    }
    if (scheme->parsed()) {
      if (cfg.scheme) {
        if (strong_m) cfg.scheme->strong_m = *strong_m;
        if (weak_m) cfg.scheme->weak_m = *weak_m;
      }
      return cmd_scheme(cfg, out_dir, scheme_kind, parse_seeds(scheme_seeds));
    }
    if (distill->parsed()) {
      SelectionConfig sel = cfg.selection.value_or(SelectionConfig{});
      if (sel_n) sel.n = *sel_n;
      if (sel_alpha) sel.alpha = *sel_alpha;
      if (sel_beta) sel.beta = *sel_beta;
      if (sel_tau) sel.tau = *sel_tau;
      sel.validate();
      return cmd_distill(cfg, out_dir, sel, parse_seeds(distill_seeds));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
