// Copyright 2026 The MEST Lab Authors.
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

#include "mest/io.hpp"

#include <fstream>
#include <iterator>
#include <system_error>

namespace mest {

void ByteWriter::put_uint(std::uint64_t v, unsigned bits) {
  switch (bits) {
    case 8: put(static_cast<std::uint8_t>(v)); break;
    case 16: put(static_cast<std::uint16_t>(v)); break;
    case 32: put(static_cast<std::uint32_t>(v)); break;
    case 64: put(v); break;
    default: fail(ErrorKind::encoding, "unsupported integer width " + std::to_string(bits));
  }
}

std::uint64_t ByteReader::get_uint(unsigned bits) {
  switch (bits) {
    case 8: return get<std::uint8_t>();
    case 16: return get<std::uint16_t>();
    case 32: return get<std::uint32_t>();
    case 64: return get<std::uint64_t>();
    default: fail(ErrorKind::format, "unsupported integer width " + std::to_string(bits));
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io,
          "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io,
          "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, const void* data,
                       std::size_t size) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::io,
            "cannot write '" + tmp.string() + "'");
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    out.flush();
    require(static_cast<bool>(out), ErrorKind::io,
            "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorKind::io,
          "cannot rename '" + tmp.string() + "': " + ec.message());
}

std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t seed) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace mest
