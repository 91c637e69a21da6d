// SPDX-License-Identifier: Apache-2.0
#include "auglab/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "auglab/errors.hpp"
#include "auglab/rng.hpp"

namespace auglab {

namespace {

using nlohmann::json;

const json& need(const json& node, const char* key, const std::string& where) {
  auto it = node.find(key);
  if (it == node.end()) throw ConfigError(where + ": missing required key '" + key + "'");
  return *it;
}

template <typename T>
T get_or(const json& node, const char* key, T fallback) {
  auto it = node.find(key);
  if (it == node.end()) return fallback;
  return it->get<T>();
}

ModelSpec parse_model(const json& node, const std::string& where) {
  ModelSpec spec;
  const json& in = need(node, "in", where);
  if (!in.is_array() || in.size() != 3) {
    throw ConfigError(where + ": 'in' must be [channels, height, width]");
  }
  spec.in_channels = in[0].get<int>();
  spec.in_height = in[1].get<int>();
  spec.in_width = in[2].get<int>();
  spec.num_classes = need(node, "classes", where).get<int>();
  for (const json& b : need(node, "blocks", where)) {
    BlockSpec block;
    block.channels = need(b, "channels", where + ".blocks").get<int>();
    block.stride = get_or(b, "stride", 1);
    block.pool = get_or(b, "pool", false);
    spec.blocks.push_back(block);
  }
  spec.extra_blocks = get_or(node, "extra_blocks", 0);
  spec.validate();
  return spec;
}

TrainSpec parse_train(const json& node, const std::string& where) {
  TrainSpec spec;
  spec.epochs = need(node, "epochs", where).get<int>();
  spec.batch_size = need(node, "batch_size", where).get<int>();
  spec.lr = need(node, "lr", where).get<double>();
  spec.momentum = need(node, "momentum", where).get<double>();
  spec.seed = need(node, "seed", where).get<uint64_t>();
  spec.head_seed = get_or<uint64_t>(node, "head_seed", Rng::mix(spec.seed, 0x68656164ULL));
  if (node.contains("aug")) {
    const json& aug = node["aug"];
    spec.aug.mode = aug_mode_from_name(need(aug, "mode", where + ".aug").get<std::string>());
    spec.aug.magnitude = get_or(aug, "magnitude", 0);
  }
  if (node.contains("loss")) {
    spec.loss = loss_kind_from_name(node["loss"].get<std::string>());
  }
  if (node.contains("kd")) {
    spec.kd.tau = get_or(node["kd"], "tau", spec.kd.tau);
    spec.kd.alpha = get_or(node["kd"], "alpha", spec.kd.alpha);
  }
  spec.validate();
  return spec;
}

json dump_train(const TrainSpec& spec) {
  return json{{"epochs", spec.epochs},
              {"batch_size", spec.batch_size},
              {"lr", spec.lr},
              {"momentum", spec.momentum},
              {"seed", spec.seed},
              {"head_seed", spec.head_seed},
              {"aug", {{"mode", aug_mode_name(spec.aug.mode)}, {"magnitude", spec.aug.magnitude}}},
              {"loss", loss_kind_name(spec.loss)},
              {"kd", {{"tau", spec.kd.tau}, {"alpha", spec.kd.alpha}}}};
}

json dump_model(const ModelSpec& spec) {
  json blocks = json::array();
  for (const BlockSpec& b : spec.blocks) {
    blocks.push_back({{"channels", b.channels}, {"stride", b.stride}, {"pool", b.pool}});
  }
  return json{{"in", {spec.in_channels, spec.in_height, spec.in_width}},
              {"classes", spec.num_classes},
              {"blocks", blocks},
              {"extra_blocks", spec.extra_blocks}};
}

}  // namespace

const ModelSpec& ExperimentConfig::model(const std::string& name) const {
  auto it = models.find(name);
  if (it == models.end()) throw ConfigError("config has no model named '" + name + "'");
  return it->second;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path);
  json root;
  try {
    root = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }

  ExperimentConfig cfg;
  try {
    cfg.out_dir = get_or<std::string>(root, "out_dir", cfg.out_dir);

    const json& ds = need(root, "dataset", "config");
    cfg.dataset.format =
        data_format_from_name(need(ds, "format", "dataset").get<std::string>());
    cfg.dataset.val_fraction = need(ds, "val_fraction", "dataset").get<double>();
    cfg.dataset.split_seed = need(ds, "split_seed", "dataset").get<uint64_t>();
    if (cfg.dataset.format == DataFormat::Synthetic) {
      SyntheticSpec& s = cfg.dataset.synthetic;
      s.samples = need(ds, "samples", "dataset").get<int>();
      s.classes = need(ds, "classes", "dataset").get<int>();
      s.channels = get_or(ds, "channels", s.channels);
      s.height = get_or(ds, "height", s.height);
      s.width = get_or(ds, "width", s.width);
      s.seed = need(ds, "seed", "dataset").get<uint64_t>();
      s.noise = get_or(ds, "noise", s.noise);
      s.jitter = get_or(ds, "jitter", s.jitter);
      s.rotation_jitter = get_or(ds, "rotation_jitter", s.rotation_jitter);
      s.brightness_jitter = get_or(ds, "brightness_jitter", s.brightness_jitter);
    } else {
      cfg.dataset.path = need(ds, "path", "dataset").get<std::string>();
      cfg.dataset.labels = get_or<std::string>(ds, "labels", "");
    }

    const json& models = need(root, "models", "config");
    for (auto it = models.begin(); it != models.end(); ++it) {
      cfg.models.emplace(it.key(), parse_model(it.value(), "models." + it.key()));
    }
    if (cfg.models.empty()) throw ConfigError("config: 'models' is empty");

    cfg.stage1 = parse_train(need(root, "train", "config"), "train");
    if (root.contains("stage2")) {
      // stage 2 starts from stage 1 and overrides explicitly
      json merged = dump_train(cfg.stage1);
      merged.update(root["stage2"]);
      cfg.stage2 = parse_train(merged, "stage2");
    } else {
      cfg.stage2 = cfg.stage1;
    }

    if (root.contains("grid")) {
      GridConfig g;
      const json& gj = root["grid"];
      g.model = get_or<std::string>(gj, "model", g.model);
      g.ratios = need(gj, "ratios", "grid").get<std::vector<double>>();
      g.magnitudes = need(gj, "magnitudes", "grid").get<std::vector<int>>();
      cfg.grid = std::move(g);
    }
    if (root.contains("scheme")) {
      SchemeConfig s;
      const json& sj = root["scheme"];
      s.kind = need(sj, "kind", "scheme").get<std::string>();
      s.model = get_or<std::string>(sj, "model", s.model);
      s.teacher = get_or<std::string>(sj, "teacher", s.teacher);
      s.strong_m = get_or(sj, "strong_m", s.strong_m);
      s.weak_m = get_or(sj, "weak_m", s.weak_m);
      s.prune_ratio = get_or(sj, "prune_ratio", s.prune_ratio);
      s.extra_blocks = get_or(sj, "extra_blocks", s.extra_blocks);
      s.seeds = need(sj, "seeds", "scheme").get<std::vector<uint64_t>>();
      if (s.seeds.empty()) throw ConfigError("scheme: 'seeds' is empty");
      cfg.scheme = std::move(s);
    }
    if (root.contains("selection")) {
      SelectionConfig sel;
      const json& xj = root["selection"];
      sel.n = get_or(xj, "n", sel.n);
      sel.alpha = get_or(xj, "alpha", sel.alpha);
      sel.beta = get_or(xj, "beta", sel.beta);
      sel.tau = get_or(xj, "tau", sel.tau);
      sel.validate();
      cfg.selection = sel;
    }
    if (root.contains("schedule")) {
      DecaySchedule sched;
      const json& hj = root["schedule"];
      const std::string mode = get_or<std::string>(hj, "mode", "step");
      if (mode == "step") {
        sched.mode = DecaySchedule::Mode::Step;
      } else if (mode == "linear") {
        sched.mode = DecaySchedule::Mode::Linear;
      } else {
        throw ConfigError("schedule: mode must be 'step' or 'linear'");
      }
      for (const json& p : need(hj, "pivots", "schedule")) {
        if (!p.is_array() || p.size() != 2) {
          throw ConfigError("schedule: each pivot must be [ratio, magnitude]");
        }
        sched.pivots.push_back({p[0].get<double>(), p[1].get<int>()});
      }
      sched.validate();
      cfg.schedule = std::move(sched);
    }
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return cfg;
}

SplitDataset build_dataset(const DatasetConfig& cfg) {
  if (cfg.format == DataFormat::Synthetic) {
    return split_dataset(make_synthetic(cfg.synthetic), cfg.val_fraction, cfg.split_seed);
  }
  std::string path = cfg.path;
  const char* root = std::getenv(kDataRootEnv);
  if (root != nullptr && !path.empty() && !std::filesystem::path(path).is_absolute()) {
    path = std::string(root) + "/" + path;
  }
  Dataset all;
  if (cfg.format == DataFormat::Cifar10Bin) {
    all = load_cifar10_bin(path);
  } else if (!cfg.labels.empty()) {
    std::string labels = cfg.labels;
    if (root != nullptr && !std::filesystem::path(labels).is_absolute()) {
      labels = std::string(root) + "/" + labels;
    }
    all = load_idx(path, labels);
  } else {
    all = load_dataset(path, DataFormat::Idx);
  }
  return split_dataset(all, cfg.val_fraction, cfg.split_seed);
}

void write_resolved_config(const ExperimentConfig& cfg, const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());

  json root;
  root["out_dir"] = out_dir;
  json ds;
  ds["format"] = cfg.dataset.format == DataFormat::Synthetic  ? "synthetic"
                 : cfg.dataset.format == DataFormat::Cifar10Bin ? "cifar10-bin"
                                                                : "idx";
  ds["val_fraction"] = cfg.dataset.val_fraction;
  ds["split_seed"] = cfg.dataset.split_seed;
  if (cfg.dataset.format == DataFormat::Synthetic) {
    const SyntheticSpec& s = cfg.dataset.synthetic;
    ds["samples"] = s.samples;
    ds["classes"] = s.classes;
    ds["channels"] = s.channels;
    ds["height"] = s.height;
    ds["width"] = s.width;
    ds["seed"] = s.seed;
    ds["noise"] = s.noise;
    ds["jitter"] = s.jitter;
    ds["rotation_jitter"] = s.rotation_jitter;
    ds["brightness_jitter"] = s.brightness_jitter;
  } else {
    ds["path"] = cfg.dataset.path;
    if (!cfg.dataset.labels.empty()) ds["labels"] = cfg.dataset.labels;
  }
  root["dataset"] = ds;

  json models;
  for (const auto& [name, spec] : cfg.models) models[name] = dump_model(spec);
  root["models"] = models;
  root["train"] = dump_train(cfg.stage1);
  root["stage2"] = dump_train(cfg.stage2);

  if (cfg.grid) {
    root["grid"] = {{"model", cfg.grid->model},
                    {"ratios", cfg.grid->ratios},
                    {"magnitudes", cfg.grid->magnitudes}};
  }
  if (cfg.scheme) {
    root["scheme"] = {{"kind", cfg.scheme->kind},       {"model", cfg.scheme->model},
                      {"teacher", cfg.scheme->teacher}, {"strong_m", cfg.scheme->strong_m},
                      {"weak_m", cfg.scheme->weak_m},   {"prune_ratio", cfg.scheme->prune_ratio},
                      {"extra_blocks", cfg.scheme->extra_blocks}, {"seeds", cfg.scheme->seeds}};
  }
  if (cfg.selection) {
    root["selection"] = {{"n", cfg.selection->n},
                         {"alpha", cfg.selection->alpha},
                         {"beta", cfg.selection->beta},
                         {"tau", cfg.selection->tau}};
  }
  if (cfg.schedule) {
    json pivots = json::array();
    for (const auto& p : cfg.schedule->pivots) pivots.push_back({p.ratio, p.magnitude});
    root["schedule"] = {
        {"mode", cfg.schedule->mode == DecaySchedule::Mode::Step ? "step" : "linear"},
        {"pivots", pivots}};
  }

  std::ofstream os(out_dir + "/config_resolved.json", std::ios::trunc);
  if (!os) throw IoError("cannot write resolved config");
  os << root.dump(2) << "\n";
}

}  // namespace auglab
