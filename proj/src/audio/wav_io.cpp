// src/audio/wav_io.cpp

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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "spkd/audio.hpp"
#include "spkd/errors.hpp"

namespace spkd::audio {

namespace {

void PutU32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutU16(std::vector<char>& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}
std::uint32_t GetU32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t GetU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::int16_t ToPcm16(double s) {
  const double c = std::clamp(s, -1.0, 1.0);
  return static_cast<std::int16_t>(std::lround(c * 32767.0));
}

}  // namespace

void QuantizeToPcm16(Corpus& corpus) {
  for (Utterance& u : corpus.records) {
    for (double& s : u.wave.samples) s = ToPcm16(s) / 32767.0;
  }
}

void WriteWav(const std::filesystem::path& file, const Waveform& w) {
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  std::vector<char> bytes;
  bytes.reserve(44 + 2 * n);
  bytes.insert(bytes.end(), {'R', 'I', 'F', 'F'});
  PutU32(bytes, 36 + 2 * n);
  bytes.insert(bytes.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  PutU32(bytes, 16);
  PutU16(bytes, 1);  // PCM
  PutU16(bytes, 1);  // mono
  PutU32(bytes, static_cast<std::uint32_t>(w.sample_rate));
  PutU32(bytes, static_cast<std::uint32_t>(w.sample_rate) * 2);
  PutU16(bytes, 2);
  PutU16(bytes, 16);
  bytes.insert(bytes.end(), {'d', 'a', 't', 'a'});
  PutU32(bytes, 2 * n);
  for (double s : w.samples) PutU16(bytes, static_cast<std::uint16_t>(ToPcm16(s)));

  std::ofstream os(file, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + file.string() + " for writing");
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + file.string());
}

Waveform ReadWav(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoError("cannot open " + file.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  auto fail = [&](const char* why) {
    return FormatError(file.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  Waveform w;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = GetU32(chunk + 4);
    if (pos + 8 + size > bytes.size()) throw fail("truncated chunk");
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) throw fail("short fmt chunk");
      if (GetU16(chunk + 8) != 1 || GetU16(chunk + 10) != 1 ||
          GetU16(chunk + 22) != 16) {
        throw fail("only mono PCM16 is supported");
      }
      w.sample_rate = static_cast<int>(GetU32(chunk + 12));
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw fail("data before fmt");
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        const auto v = static_cast<std::int16_t>(GetU16(chunk + 8 + 2 * i));
        w.samples[i] = v / 32767.0;
      }
      return w;
    }
    pos += 8 + size + (size & 1);
  }
  throw fail("no data chunk");
}

}  // namespace spkd::audio
