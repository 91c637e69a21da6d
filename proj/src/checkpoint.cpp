// SPDX-License-Identifier: Apache-2.0
#include "auglab/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "auglab/errors.hpp"

namespace auglab {

namespace {

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (unsigned char)((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& os, double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(os, bits);
}

class Reader {
 public:
  Reader(std::istream& is, const std::string& path) : is_(is), path_(path) {}

  bool at_eof() {
    is_.peek();
    return is_.eof();
  }

  void bytes(void* dst, size_t n, const char* what) {
    is_.read(reinterpret_cast<char*>(dst), std::streamsize(n));
    if (size_t(is_.gcount()) != n) {
      throw FormatError(path_ + ": truncated " + what + " at byte offset " +
                        std::to_string(offset_));
    }
    offset_ += n;
  }

  uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(b, 4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
    return v;
  }

  uint64_t u64(const char* what) {
    unsigned char b[8];
    bytes(b, 8, what);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
    return v;
  }

  double f64(const char* what) {
    uint64_t bits = u64(what);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }

  size_t offset() const { return offset_; }

 private:
  std::istream& is_;
  std::string path_;
  size_t offset_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const NamedTensors& tensors) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write("ADCK", 4);
  put_u32(os, kCheckpointVersion);
  for (const auto& [name, tensor] : tensors) {
    put_u32(os, uint32_t(name.size()));
    os.write(name.data(), std::streamsize(name.size()));
    put_u32(os, uint32_t(tensor.rank()));
    for (int64_t d : tensor.shape()) put_u64(os, uint64_t(d));
    for (double v : tensor.data()) put_f64(os, v);
  }
  if (!os) throw IoError("write failed for " + path);
}

NamedTensors load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path + " for reading");
  Reader r(is, path);

  char magic[4];
  r.bytes(magic, 4, "magic");
  if (std::memcmp(magic, "ADCK", 4) != 0) {
    throw FormatError(path + ": bad magic at byte offset 0");
  }
  const uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError(path + ": unsupported version " + std::to_string(version));
  }

  NamedTensors out;
  while (!r.at_eof()) {
    const uint32_t name_len = r.u32("name length");
    std::string name(name_len, '\0');
    if (name_len > 0) r.bytes(name.data(), name_len, "name");
    const uint32_t rank = r.u32("rank");
    Shape shape(rank);
    for (uint32_t i = 0; i < rank; ++i) shape[i] = int64_t(r.u64("extent"));
    const int64_t n = shape_numel(shape);
    std::vector<double> payload(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) payload[size_t(i)] = r.f64("payload");
    out.emplace_back(std::move(name), Tensor::from_data(std::move(shape), std::move(payload)));
  }
  return out;
}

}  // namespace auglab
