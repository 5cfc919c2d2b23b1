// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#include "deflow/harness/checkpoint.hpp"

#include <unistd.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "deflow/error.hpp"

namespace deflow {

namespace {

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char*& p, size_t& left, const std::string& origin) {
  if (left < 4) throw ValidationError(origin + ": checkpoint truncated");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
  p += 4;
  left -= 4;
  return v;
}

}  // namespace

void write_checkpoint_blob(const std::filesystem::path& path, const std::string& config_json,
                           const std::vector<std::tuple<std::string, Eigen::Index, Eigen::Index,
                                                        std::vector<float>>>& arrays) {
  std::string buf;
  buf.append("SFCK", 4);
  put_u32(buf, kCheckpointVersion);
  put_u32(buf, static_cast<uint32_t>(config_json.size()));
  buf.append(config_json);
  put_u32(buf, static_cast<uint32_t>(arrays.size()));
  for (const auto& [name, rows, cols, values] : arrays) {
    put_u32(buf, static_cast<uint32_t>(name.size()));
    buf.append(name);
    put_u32(buf, static_cast<uint32_t>(rows));
    put_u32(buf, static_cast<uint32_t>(cols));
    for (float v : values) put_u32(buf, std::bit_cast<uint32_t>(v));
  }

  const std::filesystem::path tmp = path.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw IoError(tmp.string() + ": cannot open for writing");
  const bool wrote = std::fwrite(buf.data(), 1, buf.size(), f) == buf.size();
  const bool flushed = std::fflush(f) == 0 && fsync(fileno(f)) == 0;
  if (std::fclose(f) != 0 || !wrote || !flushed) throw IoError(tmp.string() + ": write failed");
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError(path.string() + ": rename failed: " + ec.message());
}

CheckpointBlob read_checkpoint_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open checkpoint");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string origin = path.string();

  const unsigned char* p = reinterpret_cast<const unsigned char*>(data.data());
  size_t left = data.size();
  if (left < 4 || std::memcmp(p, "SFCK", 4) != 0) throw ValidationError(origin + ": bad checkpoint magic");
  p += 4;
  left -= 4;
  const uint32_t version = get_u32(p, left, origin);
  if (version != kCheckpointVersion)
    throw ValidationError(origin + ": unsupported checkpoint version " + std::to_string(version));

  CheckpointBlob blob;
  const uint32_t cfg_len = get_u32(p, left, origin);
  if (left < cfg_len) throw ValidationError(origin + ": checkpoint truncated");
  blob.config_json.assign(reinterpret_cast<const char*>(p), cfg_len);
  p += cfg_len;
  left -= cfg_len;

  const uint32_t n = get_u32(p, left, origin);
  for (uint32_t i = 0; i < n; ++i) {
    const uint32_t name_len = get_u32(p, left, origin);
    if (left < name_len) throw ValidationError(origin + ": checkpoint truncated");
    std::string name(reinterpret_cast<const char*>(p), name_len);
    p += name_len;
    left -= name_len;
    const uint32_t rows = get_u32(p, left, origin);
    const uint32_t cols = get_u32(p, left, origin);
    const size_t count = static_cast<size_t>(rows) * cols;
    if (left < count * 4) throw ValidationError(origin + ": checkpoint truncated");
    std::vector<float> values(count);
    for (size_t k = 0; k < count; ++k) {
      uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= static_cast<uint32_t>(p[b]) << (8 * b);
      values[k] = std::bit_cast<float>(u);
      p += 4;
      left -= 4;
    }
    blob.arrays.emplace_back(std::move(name), rows, cols, std::move(values));
  }
  if (left != 0) throw ValidationError(origin + ": trailing bytes after checkpoint payload");
  return blob;
}

}  // namespace deflow
