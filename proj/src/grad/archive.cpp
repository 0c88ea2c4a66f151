// src/grad/archive.cpp

// Copyright 2026  The spkd Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "spkd/errors.hpp"
#include "spkd/grad.hpp"

namespace spkd::grad {

namespace {

constexpr char kMagic[8] = {'S', 'P', 'K', 'D', 'C', 'K', 'P', 'T'};
enum Kind : int { kTensor = 0, kInt = 1, kReal = 2, kText = 3 };

class Writer {
 public:
  void U8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void U32(std::uint32_t v) { Bytes(v, 4); }
  void U64(std::uint64_t v) { Bytes(v, 8); }
  void Raw(const std::string& s) { out_ += s; }
  std::string& str() { return out_; }

 private:
  void Bytes(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& in, std::size_t end) : in_(in), end_(end) {}
  std::uint8_t U8() { return static_cast<std::uint8_t>(Bytes(1)); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Bytes(4)); }
  std::uint64_t U64() { return Bytes(8); }
  std::string Raw(std::uint64_t n) {
    Need(n);
    std::string s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool AtEnd() const { return pos_ == end_; }

 private:
  void Need(std::uint64_t n) const {
    if (n > end_ - pos_) throw FormatError("checkpoint truncated");
  }
  std::uint64_t Bytes(int n) {
    Need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += n;
    return v;
  }
  const std::string& in_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint64_t Fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Archive::Archive(int value_bytes) : value_bytes_(value_bytes) {
  if (value_bytes != 4 && value_bytes != 8) {
    throw ConfigError("checkpoint value width must be 4 or 8 bytes");
  }
}

void Archive::PutTensor(const std::string& name, const Tensor& t) {
  if (!entries_.count(name)) order_.push_back(name);
  Entry& e = entries_[name];
  e = Entry{};
  e.kind = kTensor;
  e.tensor = t;
  if (value_bytes_ == 4) {
    for (Eigen::Index i = 0; i < e.tensor.size(); ++i) {
      e.tensor.data()[i] = static_cast<float>(e.tensor.data()[i]);
    }
  }
}

void Archive::PutInt(const std::string& name, std::int64_t v) {
  if (!entries_.count(name)) order_.push_back(name);
  Entry& e = entries_[name];
  e = Entry{};
  e.kind = kInt;
  e.integer = v;
}

void Archive::PutReal(const std::string& name, double v) {
  if (!entries_.count(name)) order_.push_back(name);
  Entry& e = entries_[name];
  e = Entry{};
  e.kind = kReal;
  e.real = v;
}

void Archive::PutText(const std::string& name, const std::string& v) {
  if (!entries_.count(name)) order_.push_back(name);
  Entry& e = entries_[name];
  e = Entry{};
  e.kind = kText;
  e.text = v;
}

void Archive::PutParams(const std::string& prefix, const ParamSet& params) {
  PutInt(prefix + "#count", static_cast<std::int64_t>(params.size()));
  for (const Param& p : params.params()) PutTensor(prefix + p.name, p.value);
}

void Archive::PutAdam(const std::string& prefix, const AdamState& state) {
  for (const AdamState::Slot& s : state.slots) {
    PutTensor(prefix + s.name + "#m", s.m);
    PutTensor(prefix + s.name + "#v", s.v);
    PutInt(prefix + s.name + "#steps", s.steps);
  }
}

bool Archive::Has(const std::string& name) const { return entries_.count(name) > 0; }

const Archive::Entry& Archive::Find(const std::string& name, int kind) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw FormatError("checkpoint has no entry '" + name + "'");
  if (it->second.kind != kind) throw FormatError("entry '" + name + "' has the wrong kind");
  return it->second;
}

const Tensor& Archive::GetTensor(const std::string& name) const {
  return Find(name, kTensor).tensor;
}
std::int64_t Archive::GetInt(const std::string& name) const {
  return Find(name, kInt).integer;
}
double Archive::GetReal(const std::string& name) const { return Find(name, kReal).real; }
const std::string& Archive::GetText(const std::string& name) const {
  return Find(name, kText).text;
}

void Archive::GetParams(const std::string& prefix, ParamSet& params) const {
  if (GetInt(prefix + "#count") != static_cast<std::int64_t>(params.size())) {
    throw FormatError("parameter count mismatch under '" + prefix + "'");
  }
  for (Param& p : params.params()) {
    const Tensor& t = GetTensor(prefix + p.name);
    if (t.rows() != p.value.rows() || t.cols() != p.value.cols()) {
      throw FormatError("shape mismatch for '" + prefix + p.name + "'");
    }
    p.value = t;
  }
}

void Archive::GetAdam(const std::string& prefix, const ParamSet& params,
                      AdamState& state) const {
  state = InitAdam(params);
  for (AdamState::Slot& s : state.slots) {
    const Tensor& m = GetTensor(prefix + s.name + "#m");
    const Tensor& v = GetTensor(prefix + s.name + "#v");
    if (m.rows() != s.m.rows() || m.cols() != s.m.cols() ||
        v.rows() != s.v.rows() || v.cols() != s.v.cols()) {
      throw FormatError("optimizer slot shape mismatch for '" + s.name + "'");
    }
    s.m = m;
    s.v = v;
    s.steps = GetInt(prefix + s.name + "#steps");
  }
}

std::string Archive::Serialize() const {
  Writer w;
  w.Raw(std::string(kMagic, 8));
  w.U32(kVersion);
  w.U32(static_cast<std::uint32_t>(value_bytes_));
  w.U32(static_cast<std::uint32_t>(order_.size()));
  for (const std::string& name : order_) {
    const Entry& e = entries_.at(name);
    w.U32(static_cast<std::uint32_t>(name.size()));
    w.Raw(name);
    w.U8(static_cast<std::uint8_t>(e.kind));
    switch (e.kind) {
      case kTensor:
        w.U64(static_cast<std::uint64_t>(e.tensor.rows()));
        w.U64(static_cast<std::uint64_t>(e.tensor.cols()));
        for (Eigen::Index i = 0; i < e.tensor.size(); ++i) {
          const double v = e.tensor.data()[i];
          if (value_bytes_ == 4) {
            w.U32(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
          } else {
            w.U64(std::bit_cast<std::uint64_t>(v));
          }
        }
        break;
      case kInt:
        w.U64(static_cast<std::uint64_t>(e.integer));
        break;
      case kReal:
        w.U64(std::bit_cast<std::uint64_t>(e.real));
        break;
      case kText:
        w.U64(e.text.size());
        w.Raw(e.text);
        break;
    }
  }
  w.U64(Fnv1a(w.str().data(), w.str().size()));
  return std::move(w.str());
}

Archive Archive::Deserialize(const std::string& bytes) {
  if (bytes.size() < 8 + 12 + 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("not a checkpoint (bad magic or too short)");
  }
  const std::size_t body = bytes.size() - 8;
  Reader tail(bytes, bytes.size());
  tail.Raw(body);
  if (tail.U64() != Fnv1a(bytes.data(), body)) {
    throw FormatError("checkpoint checksum mismatch (corrupt or truncated)");
  }
  Reader r(bytes, body);
  r.Raw(8);
  const std::uint32_t version = r.U32();
  if (version != kVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t width = r.U32();
  if (width != 4 && width != 8) throw FormatError("bad value width");
  Archive a(static_cast<int>(width));
  const std::uint32_t count = r.U32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.Raw(r.U32());
    switch (r.U8()) {
      case kTensor: {
        const std::uint64_t rows = r.U64(), cols = r.U64();
        if (rows > (1u << 30) || cols > (1u << 30)) throw FormatError("absurd tensor shape");
        Tensor t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index k = 0; k < t.size(); ++k) {
          t.data()[k] = width == 4 ? static_cast<double>(std::bit_cast<float>(r.U32()))
                                   : std::bit_cast<double>(r.U64());
        }
        a.PutTensor(name, t);
        break;
      }
      case kInt:
        a.PutInt(name, static_cast<std::int64_t>(r.U64()));
        break;
      case kReal:
        a.PutReal(name, std::bit_cast<double>(r.U64()));
        break;
      case kText:
        a.PutText(name, r.Raw(r.U64()));
        break;
      default:
        throw FormatError("unknown entry kind for '" + name + "'");
    }
  }
  if (!r.AtEnd()) throw FormatError("trailing bytes in checkpoint");
  return a;
}

void Archive::Save(const std::string& path) const {
  const std::string bytes = Serialize();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path);
}

Archive Archive::Load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  const std::string bytes((std::istreambuf_iterator<char>(is)),
                          std::istreambuf_iterator<char>());
  return Deserialize(bytes);
}

}  // namespace spkd::grad
