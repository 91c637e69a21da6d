// SPDX-License-Identifier: Apache-2.0
#include "auglab/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "auglab/checkpoint.hpp"
#include "auglab/errors.hpp"
#include "auglab/rng.hpp"

namespace auglab {

namespace {

constexpr int kKernel = 3;

struct ShapeTrace {
  int channels, height, width;
};

ShapeTrace trace_shapes(const ModelSpec& spec) {
  ShapeTrace t{spec.in_channels, spec.in_height, spec.in_width};
  for (size_t i = 0; i < spec.blocks.size(); ++i) {
    const BlockSpec& b = spec.blocks[i];
    if (b.channels <= 0) throw ConfigError("block " + std::to_string(i) + ": channels must be positive");
    if (b.stride < 1) throw ConfigError("block " + std::to_string(i) + ": stride must be >= 1");
    // conv 3x3, pad 1; the output extent must divide exactly
    const int ph = t.height + 2 - kKernel, pw = t.width + 2 - kKernel;
    if (ph < 0 || pw < 0 || ph % b.stride != 0 || pw % b.stride != 0) {
      throw ConfigError("block " + std::to_string(i) + ": conv output extent not integral for " +
                        std::to_string(t.height) + "x" + std::to_string(t.width) + " stride " +
                        std::to_string(b.stride));
    }
    t.height = ph / b.stride + 1;
    t.width = pw / b.stride + 1;
    t.channels = b.channels;
    if (b.pool) {
      t.height /= 2;
      t.width /= 2;
      if (t.height < 1 || t.width < 1) {
        throw ConfigError("block " + std::to_string(i) + ": pooled extent vanished");
      }
    }
  }
  return t;
}

}  // namespace

void ModelSpec::validate() const {
  if (in_channels != 1 && in_channels != 3) throw ConfigError("input channels must be 1 or 3");
  if (in_height <= 0 || in_width <= 0) throw ConfigError("input extents must be positive");
  if (num_classes <= 0) throw ConfigError("num_classes must be positive");
  if (extra_blocks < 0) throw ConfigError("extra_blocks must be non-negative");
  if (extra_blocks > int(blocks.size())) {
    throw ConfigError("extra_blocks exceeds the number of blocks");
  }
  trace_shapes(*this);
  base().head_inputs();  // the detached spec must also be valid
}

int ModelSpec::head_inputs() const {
  const ShapeTrace t = trace_shapes(*this);
  if (blocks.empty()) return t.channels * t.height * t.width;  // flattened input
  return t.channels;                                           // global average pool
}

ModelSpec ModelSpec::base() const {
  ModelSpec b = *this;
  b.blocks.resize(blocks.size() - size_t(extra_blocks));
  b.extra_blocks = 0;
  return b;
}

Model Model::build(const ModelSpec& spec, uint64_t seed) {
  spec.validate();
  Model m;
  m.spec_ = spec;
  Rng rng(seed);
  int cin = spec.in_channels;
  for (size_t i = 0; i < spec.blocks.size(); ++i) {
    const int cout = spec.blocks[i].channels;
    const int64_t fan_in = int64_t(cin) * kKernel * kKernel;
    m.params_.push_back({"block" + std::to_string(i) + ".weight",
                         Tensor::kaiming_uniform({cout, cin, kKernel, kKernel}, fan_in, rng)});
    cin = cout;
  }
  const int head_in = spec.head_inputs();
  m.params_.push_back(
      {"head.weight", Tensor::kaiming_uniform({head_in, spec.num_classes}, head_in, rng)});
  const double bound = 1.0 / std::sqrt(double(head_in));
  m.params_.push_back({"head.bias", Tensor::uniform({spec.num_classes}, -bound, bound, rng)});
  return m;
}

Tensor Model::forward(const Tensor& input) const {
  if (params_.empty()) throw ContractError("forward on an unbuilt model");
  if (input.rank() != 4 || input.dim(1) != spec_.in_channels || input.dim(2) != spec_.in_height ||
      input.dim(3) != spec_.in_width) {
    throw DimensionError("forward: input " + shape_str(input.shape()) + " does not match spec");
  }
  Tensor x = input;
  for (size_t i = 0; i < spec_.blocks.size(); ++i) {
    x = conv2d(x, params_[i].tensor, spec_.blocks[i].stride, 1);
    x = relu(x);
    if (spec_.blocks[i].pool) x = maxpool2x2(x);
  }
  Tensor features = spec_.blocks.empty() ? flatten(x) : global_avg_pool(x);
  const size_t head = params_.size() - 2;
  return dense(features, params_[head].tensor, params_[head + 1].tensor);
}

Tensor Model::param(const std::string& name) const {
  for (const ParamEntry& p : params_) {
    if (p.name == name) return p.tensor;
  }
  throw ContractError("no parameter named " + name);
}

bool Model::has_param(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const ParamEntry& p) { return p.name == name; });
}

std::vector<Tensor> Model::trainable() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const ParamEntry& p : params_) out.push_back(p.tensor);
  return out;
}

int64_t Model::num_params() const {
  int64_t n = 0;
  for (const ParamEntry& p : params_) n += p.tensor.numel();
  return n;
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t Model::checksum() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (const ParamEntry& p : params_) {
    h = fnv1a64(p.name.data(), p.name.size(), h);
    h = fnv1a64(p.tensor.data().data(), p.tensor.data().size() * sizeof(double), h);
  }
  return h;
}

Model Model::clone() const {
  Model m;
  m.spec_ = spec_;
  m.params_.reserve(params_.size());
  for (const ParamEntry& p : params_) m.params_.push_back({p.name, p.tensor.clone()});
  return m;
}

void Model::save(const std::string& path) const {
  NamedTensors named;
  named.reserve(params_.size());
  for (const ParamEntry& p : params_) named.emplace_back(p.name, p.tensor);
  save_checkpoint(path, named);
}

void Model::load(const std::string& path) {
  NamedTensors named = load_checkpoint(path);
  std::vector<std::string> missing;
  for (ParamEntry& p : params_) {
    auto it = std::find_if(named.begin(), named.end(),
                           [&](const auto& nt) { return nt.first == p.name; });
    if (it == named.end() || it->second.shape() != p.tensor.shape()) {
      missing.push_back(p.name);
      continue;
    }
    p.tensor.mutable_data() = it->second.data();
  }
  if (!missing.empty()) {
    std::string msg = "checkpoint " + path + " is missing parameters:";
    for (const auto& n : missing) msg += " " + n;
    throw TransferError(msg, missing);
  }
}

Model attach_extra(const Model& base, int n_blocks, uint64_t seed) {
  if (n_blocks <= 0) throw ContractError("attach_extra: n_blocks must be positive");
  if (base.spec().blocks.empty()) {
    throw ContractError("attach_extra: base model has no conv blocks to extend");
  }
  ModelSpec enlarged = base.spec();
  const int width = enlarged.blocks.back().channels;
  for (int i = 0; i < n_blocks; ++i) enlarged.blocks.push_back({width, 1, false});
  enlarged.extra_blocks = base.spec().extra_blocks + n_blocks;
  enlarged.validate();

  Model m = Model::build(enlarged, seed);
  // base block weights carry over verbatim; the extra blocks and the fresh
  // head keep their seed-derived init
  for (size_t i = 0; i < base.spec().blocks.size(); ++i) {
    const std::string name = "block" + std::to_string(i) + ".weight";
    m.params()[i].tensor.mutable_data() = base.param(name).data();
  }
  return m;
}

Model detach_extra(const Model& enlarged, const ModelSpec& base_spec, uint64_t head_seed) {
  const ModelSpec& espec = enlarged.spec();
  if (espec.extra_blocks == 0) {
    throw TransferError("detach_extra: model has no detachable blocks", {});
  }
  if (espec.base() != base_spec) {
    throw TransferError("detach_extra: enlarged model was not attached over this base spec", {});
  }
  Model m = Model::build(base_spec, head_seed);  // head keeps this init
  std::vector<std::string> missing;
  for (size_t i = 0; i < base_spec.blocks.size(); ++i) {
    const std::string name = "block" + std::to_string(i) + ".weight";
    if (!enlarged.has_param(name) ||
        enlarged.param(name).shape() != m.params()[i].tensor.shape()) {
      missing.push_back(name);
      continue;
    }
    m.params()[i].tensor.mutable_data() = enlarged.param(name).data();
  }
  if (!missing.empty()) {
    throw TransferError("detach_extra: shared parameters missing or misshaped", missing);
  }
  return m;
}

TransferReport transfer_weights(const Model& src, Model& dst) {
  TransferReport report;
  for (ParamEntry& p : dst.params()) {
    if (src.has_param(p.name) && src.param(p.name).shape() == p.tensor.shape()) {
      p.tensor.mutable_data() = src.param(p.name).data();
      report.copied.push_back(p.name);
    } else {
      report.skipped.push_back(p.name);
    }
  }
  for (const ParamEntry& p : src.params()) {
    if (!dst.has_param(p.name)) report.skipped.push_back(p.name);
  }
  return report;
}

}  // namespace auglab
