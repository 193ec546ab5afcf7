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

// Binary PGM (P5) / PPM (P6) encoding and base64 for embedding them in JSON.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace sks {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB
};

std::string encode_pgm(const GrayImage& img);
std::string encode_ppm(const RgbImage& img);
GrayImage decode_pgm(std::string_view bytes);
RgbImage decode_ppm(std::string_view bytes);

void write_file(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

// Float raster in [0,1] <-> 8-bit gray.
GrayImage to_gray(const std::vector<float>& raster, int width, int height);
std::vector<float> from_gray(const GrayImage& img);

std::string base64_encode(std::string_view bytes);
std::string base64_decode(std::string_view text);

}  // namespace sks
