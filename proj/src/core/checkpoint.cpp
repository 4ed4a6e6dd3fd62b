// Copyright 2026 The ToOT Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "error.hpp"
#include "nn.hpp"

namespace toot {

namespace {

constexpr char kMagic[8] = {'T', 'O', 'O', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

class Writer {
 public:
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename T>
  void put(T v) {
    raw(&v, sizeof(T));
  }
  void doubles(const std::vector<double>& v) {
    put<std::uint64_t>(v.size());
    raw(v.data(), v.size() * sizeof(double));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  void raw(void* p, std::size_t n) {
    require(pos_ + n <= in_.size(), ErrorKind::kParse, "checkpoint truncated");
    std::memcpy(p, in_.data() + pos_, n);
    pos_ += n;
  }
  template <typename T>
  T get() {
    T v{};
    raw(&v, sizeof(T));
    return v;
  }
  std::vector<double> doubles(std::size_t expected) {
    const auto n = get<std::uint64_t>();
    require(n == expected, ErrorKind::kParse, "checkpoint tensor size does not match its arch");
    std::vector<double> v(n);
    raw(v.data(), n * sizeof(double));
    return v;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const ModelState& model) {
  Writer w;
  w.raw(kMagic, sizeof(kMagic));
  w.put<std::uint32_t>(kFormatVersion);
  w.put<std::int32_t>(model.arch.input_side);
  w.put<std::int32_t>(model.arch.grid_side);
  w.put<std::int32_t>(model.arch.base_width);
  w.put<std::int32_t>(model.arch.channels);
  w.put<std::int32_t>(model.arch.classes);
  w.put<double>(model.arch.leaky_slope);
  w.put<std::uint64_t>(model.version);
  w.doubles(model.params);
  w.doubles(model.accum_grad_sq);
  w.doubles(model.accum_delta_sq);
  return w.take();
}

ModelState deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[8];
  r.raw(magic, sizeof(magic));
  require(std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, ErrorKind::kParse,
          "not a checkpoint (bad magic)");
  const auto fmt = r.get<std::uint32_t>();
  require(fmt == kFormatVersion, ErrorKind::kParse,
          "unsupported checkpoint format version " + std::to_string(fmt));
  ModelState m;
  m.arch.input_side = r.get<std::int32_t>();
  m.arch.grid_side = r.get<std::int32_t>();
  m.arch.base_width = r.get<std::int32_t>();
  m.arch.channels = r.get<std::int32_t>();
  m.arch.classes = r.get<std::int32_t>();
  m.arch.leaky_slope = r.get<double>();
  try {
    m.arch.validate();
  } catch (const Error& e) {
    fail(ErrorKind::kParse, std::string("checkpoint arch invalid: ") + e.what());
  }
  m.version = r.get<std::uint64_t>();
  const std::size_t n = NetworkLayout::build(m.arch).param_count;
  m.params = r.doubles(n);
  m.accum_grad_sq = r.doubles(n);
  m.accum_delta_sq = r.doubles(n);
  require(r.done(), ErrorKind::kParse, "trailing bytes after checkpoint");
  return m;
}

void save_checkpoint(const ModelState& model, const std::filesystem::path& path) {
  const auto bytes = serialize_checkpoint(model);
  std::ofstream out(path, std::ios::binary);
  require(bool(out), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  require(bool(out), ErrorKind::kIo, "write failed: " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(bool(in), ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace toot
