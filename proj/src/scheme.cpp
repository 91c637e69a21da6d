// SPDX-License-Identifier: Apache-2.0
#include "auglab/scheme.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>

#include "auglab/errors.hpp"
#include "auglab/rng.hpp"
#include "auglab/train.hpp"

namespace auglab {

namespace {

constexpr uint64_t kStage2BuildTag = 0x73326d6fULL;
constexpr uint64_t kTeacherBuildTag = 0x74636872ULL;
constexpr uint64_t kExtraBlocksTag = 0x78747261ULL;

std::string hex64(uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "0x%016" PRIx64, v);
  return buf;
}

void save_final(const std::string& out_dir, const std::string& run_id, const Model& model,
                const PruneState* state) {
  if (out_dir.empty()) return;
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
  model.save(out_dir + "/" + run_id + "_final.adck");
  if (state != nullptr && !state->empty()) {
    save_masks(out_dir + "/" + run_id + "_masks.adck", *state);
  }
}

RunRecord merge_stages(const std::string& run_id, const std::string& scheme, uint64_t seed,
                       std::vector<RunRecord> stage_records) {
  RunRecord merged;
  merged.run_id = run_id;
  merged.scheme = scheme;
  merged.seed = seed;
  for (RunRecord& r : stage_records) {
    for (EpochRow& row : r.rows) merged.rows.push_back(row);
  }
  return merged;
}

// The two-stage schemes keyed by which model size and augmentation strength
// meet in stage 1.
SchemeResult run_prune_scheme(const SchemeSpec& spec, const SplitDataset& data,
                              const std::string& out_dir) {
  SchemeResult result;
  RunRecord rec1, rec2;
  Model final_model;
  PruneState state;

  if (spec.kind == SchemeKind::PruneBaselineA) {
    // the small (pruned) model handles stage 1 itself
    Model model = Model::build(spec.model, spec.build_seed);
    state = l1_prune(model, spec.prune_ratio);
    TrainOptions options;
    options.mask = &state;
    options.stage_index = 0;
    rec1 = train_model(model, data, spec.stages[0], options);
    options.stage_index = 1;
    rec2 = train_model(model, data, spec.stages[1], options);
    final_model = std::move(model);
  } else {
    // pre-pruning model learns stage 1, the pruned model inherits its weights
    Model full = Model::build(spec.model, spec.build_seed);
    TrainOptions options;
    options.stage_index = 0;
    rec1 = train_model(full, data, spec.stages[0], options);

    Model pruned = Model::build(spec.model, Rng::mix(spec.build_seed, kStage2BuildTag));
    const TransferReport report = transfer_weights(full, pruned);
    if (!report.skipped.empty()) {
      throw TransferError("prune handoff skipped parameters unexpectedly", report.skipped);
    }
    state = l1_prune(pruned, spec.prune_ratio);

    const uint64_t expected = masked_checksum(full, state);
    const uint64_t actual = masked_checksum(pruned, state);
    if (expected != actual) {
      throw Error("prune handoff corrupted: surviving weights differ from the stage-1 model");
    }
    result.findings.push_back("prune handoff checksum verified: " + hex64(actual));

    TrainOptions ft;
    ft.mask = &state;
    ft.stage_index = 1;
    rec2 = train_model(pruned, data, spec.stages[1], ft);
    final_model = std::move(pruned);
  }

  result.records.push_back(merge_stages(spec.run_id(), scheme_kind_name(spec.kind),
                                        spec.build_seed, {rec1, rec2}));
  result.final_accuracy = rec2.rows.back().val_accuracy;
  save_final(out_dir, spec.run_id(), final_model, &state);
  return result;
}

SchemeResult run_extra_scheme(const SchemeSpec& spec, const SplitDataset& data,
                              const std::string& out_dir) {
  SchemeResult result;
  RunRecord rec1, rec2;
  Model final_model;

  if (spec.kind == SchemeKind::ExtraBaselineA) {
    Model model = Model::build(spec.model, spec.build_seed);
    TrainOptions options;
    options.stage_index = 0;
    rec1 = train_model(model, data, spec.stages[0], options);
    options.stage_index = 1;
    rec2 = train_model(model, data, spec.stages[1], options);
    final_model = std::move(model);
  } else {
    Model base = Model::build(spec.model, spec.build_seed);
    Model big = attach_extra(base, spec.extra_blocks, Rng::mix(spec.build_seed, kExtraBlocksTag));
    TrainOptions options;
    options.stage_index = 0;
    rec1 = train_model(big, data, spec.stages[0], options);

    Model small = detach_extra(big, spec.model, spec.stages[1].head_seed);
    uint64_t expected = 0xcbf29ce484222325ULL, actual = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < spec.model.blocks.size(); ++i) {
      const std::string name = "block" + std::to_string(i) + ".weight";
      const auto& src = big.param(name).data();
      const auto& dst = small.param(name).data();
      expected = fnv1a64(src.data(), src.size() * sizeof(double), expected);
      actual = fnv1a64(dst.data(), dst.size() * sizeof(double), actual);
    }
    if (expected != actual) {
      throw Error("extra handoff corrupted: shared parameters differ after detach");
    }
    result.findings.push_back("extra handoff checksum verified: " + hex64(actual));

    TrainOptions ft;
    ft.stage_index = 1;
    rec2 = train_model(small, data, spec.stages[1], ft);
    final_model = std::move(small);
  }

  result.records.push_back(merge_stages(spec.run_id(), scheme_kind_name(spec.kind),
                                        spec.build_seed, {rec1, rec2}));
  result.final_accuracy = rec2.rows.back().val_accuracy;
  save_final(out_dir, spec.run_id(), final_model, nullptr);
  return result;
}

SchemeResult run_kd_scheme(const SchemeSpec& spec, const SplitDataset& data,
                           const std::string& out_dir) {
  SchemeResult result;
  Model teacher = Model::build(spec.teacher_model, Rng::mix(spec.build_seed, kTeacherBuildTag));
  TrainOptions t_options;
  t_options.stage_index = 0;
  RunRecord rec1 = train_model(teacher, data, spec.stages[0], t_options);

  Model student = Model::build(spec.model, spec.build_seed);
  TrainOptions s_options;
  s_options.teacher = &teacher;
  s_options.stage_index = 1;
  if (spec.kind == SchemeKind::KdFiltered) {
    s_options.selection = &spec.selection;
    if (!out_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(out_dir, ec);
      if (!ec) s_options.trace_path = out_dir + "/" + spec.run_id() + "_selection_trace.csv";
    }
  }
  RunRecord rec2 = train_model(student, data, spec.stages[1], s_options);

  result.records.push_back(merge_stages(spec.run_id(), scheme_kind_name(spec.kind),
                                        spec.build_seed, {rec1, rec2}));
  result.final_accuracy = rec2.rows.back().val_accuracy;
  save_final(out_dir, spec.run_id(), student, nullptr);
  return result;
}

SchemeResult run_grid_scheme(const SchemeSpec& spec, const SplitDataset& data,
                             const std::string& out_dir) {
  SchemeResult result;
  for (double ratio : spec.ratios) {
    MagnitudeProfile profile = grid_search_magnitude(spec.model, data, spec.magnitudes,
                                                     spec.stages[0], ratio, &result.records);
    if (!out_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(out_dir + "/plotdata", ec);
      if (ec) throw IoError("cannot create plotdata dir: " + ec.message());
      char name[96];
      std::snprintf(name, sizeof(name), "%s/plotdata/profile_p%g.csv", out_dir.c_str(), ratio);
      save_profile_csv(name, profile);
    }
    char note[128];
    std::snprintf(note, sizeof(note), "ratio %g: optimal magnitude %d, maximal magnitude %d",
                  ratio, optimal_magnitude(profile), maximal_magnitude(profile));
    result.findings.push_back(note);
  }
  return result;
}

SchemeResult run_decay_scheme(const SchemeSpec& spec, const SplitDataset& data,
                              const std::string& out_dir) {
  SchemeResult result;
  const TrainSpec& stage_template = spec.stages[0];

  auto run_schedule = [&](const std::string& run_id, auto magnitude_of) {
    Model model = Model::build(spec.model, spec.build_seed);
    std::vector<TrainSpec> per_stage;
    per_stage.reserve(spec.ratios.size());
    for (double r : spec.ratios) {
      TrainSpec stage = stage_template;
      stage.aug.mode = AugMode::Fixed;
      stage.aug.magnitude = magnitude_of(r);
      per_stage.push_back(stage);
    }
    const std::string stage_dir = out_dir.empty() ? "" : out_dir + "/" + run_id;
    if (!stage_dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(stage_dir, ec);
      if (ec) throw IoError("cannot create " + stage_dir + ": " + ec.message());
    }
    auto stages = iterative_prune(model, spec.ratios, per_stage, data, stage_dir);
    std::vector<RunRecord> recs;
    for (auto& s : stages) recs.push_back(std::move(s.record));
    result.records.push_back(
        merge_stages(run_id, "decay_vs_consistent", spec.build_seed, std::move(recs)));
    const auto& rows = result.records.back().rows;
    return rows.empty() ? 0.0 : rows.back().val_accuracy;
  };

  result.final_accuracy = run_schedule(
      "decay_seed" + std::to_string(spec.build_seed),
      [&](double r) { return decay_lookup(spec.schedule, r); });

  std::vector<int> consistent = spec.magnitudes;
  if (consistent.empty()) {
    for (const auto& pivot : spec.schedule.pivots) consistent.push_back(pivot.magnitude);
  }
  std::sort(consistent.begin(), consistent.end());
  consistent.erase(std::unique(consistent.begin(), consistent.end()), consistent.end());
  for (int m : consistent) {
    run_schedule("consistent_m" + std::to_string(m) + "_seed" + std::to_string(spec.build_seed),
                 [m](double) { return m; });
  }
  return result;
}

}  // namespace

const char* scheme_kind_name(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::PruneInherit: return "prune_inherit";
    case SchemeKind::PruneBaselineA: return "prune_baseline_a";
    case SchemeKind::PruneBaselineB: return "prune_baseline_b";
    case SchemeKind::ExtraInherit: return "extra_inherit";
    case SchemeKind::ExtraBaselineA: return "extra_baseline_a";
    case SchemeKind::ExtraBaselineB: return "extra_baseline_b";
    case SchemeKind::KdFiltered: return "kd_filtered";
    case SchemeKind::KdBaselineA: return "kd_baseline_a";
    case SchemeKind::KdBaselineB: return "kd_baseline_b";
    case SchemeKind::MagnitudeGrid: return "magnitude_grid";
    case SchemeKind::DecayVsConsistent: return "decay_vs_consistent";
  }
  throw ContractError("unknown scheme kind");
}

SchemeKind scheme_kind_from_name(const std::string& name) {
  for (int k = 0; k <= int(SchemeKind::DecayVsConsistent); ++k) {
    if (name == scheme_kind_name(SchemeKind(k))) return SchemeKind(k);
  }
  throw ConfigError("unknown scheme kind: " + name);
}

std::string SchemeSpec::run_id() const {
  return std::string(scheme_kind_name(kind)) + "_seed" + std::to_string(build_seed);
}

void SchemeSpec::validate() const {
  model.validate();
  if (stages.size() != 2) {
    throw ConfigError("scheme " + std::string(scheme_kind_name(kind)) +
                      ": expected exactly two stages, got " + std::to_string(stages.size()));
  }
  for (const TrainSpec& s : stages) s.validate();
  if (strong_m < 0 || strong_m > kMaxMagnitude || weak_m < 0 || weak_m > kMaxMagnitude) {
    throw ConfigError("scheme: magnitudes out of range");
  }

  SchemeSpec expected = *this;
  apply_scheme_stages(expected);
  if (expected.stages != stages) {
    throw ConfigError("scheme " + std::string(scheme_kind_name(kind)) +
                      ": stage augmentation/loss layout does not match the scheme definition");
  }

  switch (kind) {
    case SchemeKind::PruneInherit:
    case SchemeKind::PruneBaselineA:
    case SchemeKind::PruneBaselineB:
      if (!(prune_ratio > 0.0 && prune_ratio < 1.0)) {
        throw ConfigError("scheme: prune_ratio must be in (0,1)");
      }
      break;
    case SchemeKind::ExtraInherit:
    case SchemeKind::ExtraBaselineB:
      if (extra_blocks < 1) throw ConfigError("scheme: extra_blocks must be >= 1");
      break;
    case SchemeKind::KdFiltered:
      selection.validate();
      [[fallthrough]];
    case SchemeKind::KdBaselineA:
    case SchemeKind::KdBaselineB:
      teacher_model.validate();
      if (teacher_model.num_classes != model.num_classes) {
        throw ConfigError("scheme: teacher and student class counts differ");
      }
      break;
    case SchemeKind::MagnitudeGrid:
      if (ratios.empty() || magnitudes.empty()) {
        throw ConfigError("scheme: magnitude_grid needs ratios and magnitudes");
      }
      break;
    case SchemeKind::DecayVsConsistent:
      if (ratios.empty()) throw ConfigError("scheme: decay_vs_consistent needs ratios");
      schedule.validate();
      break;
    default:
      break;
  }
}

void apply_scheme_stages(SchemeSpec& spec) {
  if (spec.stages.size() != 2) return;  // validate reports the count error
  TrainSpec& s1 = spec.stages[0];
  TrainSpec& s2 = spec.stages[1];
  auto fixed = [](int m) { return AugSpec{AugMode::Fixed, m}; };
  switch (spec.kind) {
    case SchemeKind::PruneInherit:
    case SchemeKind::PruneBaselineA:
    case SchemeKind::ExtraInherit:
    case SchemeKind::ExtraBaselineA:
      s1.aug = fixed(spec.strong_m);
      s2.aug = fixed(spec.weak_m);
      s1.loss = s2.loss = LossKind::CrossEntropy;
      break;
    case SchemeKind::PruneBaselineB:
    case SchemeKind::ExtraBaselineB:
      s1.aug = fixed(spec.weak_m);
      s2.aug = fixed(spec.weak_m);
      s1.loss = s2.loss = LossKind::CrossEntropy;
      break;
    case SchemeKind::KdFiltered:
      s1.loss = LossKind::CrossEntropy;
      s2.loss = LossKind::Distill;
      s2.aug = AugSpec{AugMode::Selection, 0};
      break;
    case SchemeKind::KdBaselineA:
      s1.loss = LossKind::CrossEntropy;
      s2.loss = LossKind::Distill;
      s2.aug = AugSpec{AugMode::Random, 0};
      break;
    case SchemeKind::KdBaselineB:
      s1.loss = LossKind::CrossEntropy;
      s2.loss = LossKind::Distill;
      s2.aug = fixed(spec.weak_m);
      break;
    case SchemeKind::MagnitudeGrid:
    case SchemeKind::DecayVsConsistent:
      break;  // stage 0 is a template; augmentation is decided per cell/stage
  }
}

uint64_t masked_checksum(const Model& model, const PruneState& state) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const ParamEntry& p : model.params()) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    const std::vector<double>& w = p.tensor.data();
    const std::vector<uint8_t>* mask = state.find(p.name);
    if (mask == nullptr) {
      h = fnv1a64(w.data(), w.size() * sizeof(double), h);
      continue;
    }
    for (size_t i = 0; i < w.size(); ++i) {
      const double v = (*mask)[i] == 0 ? 0.0 : w[i];
      h = fnv1a64(&v, sizeof(double), h);
    }
  }
  return h;
}

SchemeResult run_scheme(const SchemeSpec& spec, const SplitDataset& data,
                        const std::string& out_dir) {
  spec.validate();
  switch (spec.kind) {
    case SchemeKind::PruneInherit:
    case SchemeKind::PruneBaselineA:
    case SchemeKind::PruneBaselineB:
      return run_prune_scheme(spec, data, out_dir);
    case SchemeKind::ExtraInherit:
    case SchemeKind::ExtraBaselineA:
    case SchemeKind::ExtraBaselineB:
      return run_extra_scheme(spec, data, out_dir);
    case SchemeKind::KdFiltered:
    case SchemeKind::KdBaselineA:
    case SchemeKind::KdBaselineB:
      return run_kd_scheme(spec, data, out_dir);
    case SchemeKind::MagnitudeGrid:
      return run_grid_scheme(spec, data, out_dir);
    case SchemeKind::DecayVsConsistent:
      return run_decay_scheme(spec, data, out_dir);
  }
  throw ContractError("unknown scheme kind");
}

std::vector<SchemeSpec> build_comparison(const std::string& family, const SchemeSpec& proto) {
  std::vector<SchemeKind> kinds;
  if (family == "prune") {
    kinds = {SchemeKind::PruneBaselineA, SchemeKind::PruneBaselineB, SchemeKind::PruneInherit};
  } else if (family == "extra") {
    kinds = {SchemeKind::ExtraBaselineA, SchemeKind::ExtraBaselineB, SchemeKind::ExtraInherit};
  } else if (family == "kd") {
    kinds = {SchemeKind::KdBaselineA, SchemeKind::KdBaselineB, SchemeKind::KdFiltered};
  } else {
    throw ConfigError("unknown comparison family: " + family);
  }
  std::vector<SchemeSpec> specs;
  for (SchemeKind kind : kinds) {
    SchemeSpec s = proto;
    s.kind = kind;
    apply_scheme_stages(s);
    specs.push_back(std::move(s));
  }
  verify_controlled_comparison(specs);
  return specs;
}

void verify_controlled_comparison(const std::vector<SchemeSpec>& specs) {
  if (specs.size() < 2) throw ConfigError("comparison needs at least two schemes");
  const bool kd_family = specs[0].kind == SchemeKind::KdFiltered ||
                         specs[0].kind == SchemeKind::KdBaselineA ||
                         specs[0].kind == SchemeKind::KdBaselineB;
  for (const SchemeSpec& s : specs) {
    if (s.stages.size() != 2 || specs[0].stages.size() != 2) {
      throw ConfigError("comparison schemes must have exactly two stages");
    }
    TrainSpec lhs = specs[0].stages[1];
    TrainSpec rhs = s.stages[1];
    if (kd_family) {
      // the distill-stage augmentation is the treatment under study
      lhs.aug = AugSpec{};
      rhs.aug = AugSpec{};
    }
    if (!(lhs == rhs) || s.build_seed != specs[0].build_seed ||
        !(s.model == specs[0].model)) {
      throw ConfigError("refusing to run an uncontrolled comparison: stage-2 configurations "
                        "differ between " + std::string(scheme_kind_name(specs[0].kind)) +
                        " and " + scheme_kind_name(s.kind));
    }
  }
}

}  // namespace auglab
