// Copyright 2026 The sketchscene Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sketchscene/image_io.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include "sketchscene/common.hpp"

namespace sks {

namespace {

std::string header(const char* magic, int w, int h) {
  return std::string(magic) + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
}

// Parses "P5/P6 <w> <h> <maxval>" followed by a single whitespace byte.
std::size_t parse_header(std::string_view bytes, std::string_view magic, int& w, int& h) {
  if (bytes.substr(0, 2) != magic) throw Error("image: expected " + std::string(magic) + " header");
  std::size_t pos = 2;
  int fields[3] = {0, 0, 0};
  for (int f = 0; f < 3; ++f) {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos])))
      throw Error("image: malformed header");
    int v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) v = v * 10 + (bytes[pos++] - '0');
    fields[f] = v;
  }
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) throw Error("image: malformed header");
  ++pos;
  w = fields[0];
  h = fields[1];
  if (fields[2] != 255) throw Error("image: only maxval 255 is supported");
  if (w <= 0 || h <= 0) throw Error("image: empty image");
  return pos;
}

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

std::string encode_pgm(const GrayImage& img) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height) throw Error("encode_pgm: size mismatch");
  std::string out = header("P5", img.width, img.height);
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

std::string encode_ppm(const RgbImage& img) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * 3) throw Error("encode_ppm: size mismatch");
  std::string out = header("P6", img.width, img.height);
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

GrayImage decode_pgm(std::string_view bytes) {
  GrayImage img;
  const std::size_t pos = parse_header(bytes, "P5", img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  if (bytes.size() - pos < n) throw Error("decode_pgm: truncated pixel data");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

RgbImage decode_ppm(std::string_view bytes) {
  RgbImage img;
  const std::size_t pos = parse_header(bytes, "P6", img.width, img.height);
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * 3;
  if (bytes.size() - pos < n) throw Error("decode_ppm: truncated pixel data");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("missing file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

GrayImage to_gray(const std::vector<float>& raster, int width, int height) {
  if (raster.size() != static_cast<std::size_t>(width) * height) throw Error("to_gray: size mismatch");
  GrayImage img{width, height, {}};
  img.pixels.reserve(raster.size());
  for (float v : raster)
    img.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
  return img;
}

std::vector<float> from_gray(const GrayImage& img) {
  std::vector<float> out;
  out.reserve(img.pixels.size());
  for (auto p : img.pixels) out.push_back(static_cast<float>(p) / 255.0f);
  return out;
}

std::string base64_encode(std::string_view bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8) |
                       static_cast<unsigned char>(bytes[i + 2]);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const unsigned v = static_cast<unsigned char>(bytes[i]) << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const unsigned v = (static_cast<unsigned char>(bytes[i]) << 16) | (static_cast<unsigned char>(bytes[i + 1]) << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (int i = 0; i < 64; ++i) lookup[static_cast<unsigned char>(kAlphabet[i])] = i;
  std::string out;
  unsigned buffer = 0;
  int bits = 0;
  std::size_t pad = 0;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) continue;
    if (ch == '=') {
      ++pad;
      continue;
    }
    if (pad) throw Error("base64: data after padding");
    const int v = lookup[static_cast<unsigned char>(ch)];
    if (v < 0) throw Error("base64: invalid character");
    buffer = (buffer << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out += static_cast<char>((buffer >> bits) & 0xff);
    }
  }
  if (pad > 2) throw Error("base64: too much padding");
  return out;
}

}  // namespace sks
