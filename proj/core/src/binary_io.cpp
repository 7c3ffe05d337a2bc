// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#include "binary_io.hpp"

#include <fstream>
#include <iterator>

namespace rff::detail {

void ByteWriter::put_short_string(const std::string& s) {
  if (s.size() > 255) throw ParameterError("name longer than 255 bytes: " + s.substr(0, 32) + "...");
  put(static_cast<std::uint8_t>(s.size()));
  put_raw(s.data(), s.size());
}

std::string ByteReader::get_short_string(const char* what) {
  const auto n = get<std::uint8_t>(what);
  std::string s(n, '\0');
  get_raw(s.data(), n, what);
  return s;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace rff::detail
