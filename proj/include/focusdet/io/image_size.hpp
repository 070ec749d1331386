// Copyright 2026 The focusdet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Image dimensions from PNG and JPEG headers. No pixel data is decoded.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "focusdet/error.hpp"
#include "focusdet/focal.hpp"
#include "focusdet/io/files.hpp"

namespace focusdet::io {

namespace detail {

inline std::uint32_t be16(std::string_view s, std::size_t at) {
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 1]));
}

inline std::uint32_t be32(std::string_view s, std::size_t at) { return (be16(s, at) << 16) | be16(s, at + 2); }

}  // namespace detail

/// Parses the header bytes of a PNG or baseline/progressive JPEG.
inline std::optional<ImageSize> image_size_from_bytes(std::string_view bytes) {
  constexpr std::string_view kPng("\x89PNG\r\n\x1a\n", 8);
  if (bytes.size() >= 24 && bytes.substr(0, 8) == kPng && bytes.substr(12, 4) == "IHDR") {
    return ImageSize{static_cast<int>(detail::be32(bytes, 16)), static_cast<int>(detail::be32(bytes, 20))};
  }
  if (bytes.size() >= 4 && static_cast<unsigned char>(bytes[0]) == 0xFF &&
      static_cast<unsigned char>(bytes[1]) == 0xD8) {
    std::size_t pos = 2;
    while (pos + 4 <= bytes.size()) {
      if (static_cast<unsigned char>(bytes[pos]) != 0xFF) return std::nullopt;
      const auto marker = static_cast<unsigned char>(bytes[pos + 1]);
      if (marker == 0xFF) {  // fill byte
        ++pos;
        continue;
      }
      if (marker == 0xD8 || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
        pos += 2;
        continue;
      }
      const std::uint32_t length = detail::be16(bytes, pos + 2);
      const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
      if (sof) {
        if (pos + 9 > bytes.size()) return std::nullopt;
        return ImageSize{static_cast<int>(detail::be16(bytes, pos + 7)), static_cast<int>(detail::be16(bytes, pos + 5))};
      }
      pos += 2 + length;
    }
  }
  return std::nullopt;
}

inline ImageSize read_image_size(const std::filesystem::path& path) {
  const auto size = image_size_from_bytes(read_file(path));
  if (!size || size->width <= 0 || size->height <= 0) {
    throw DataError("cannot read image dimensions from " + path.string());
  }
  return *size;
}

}  // namespace focusdet::io
