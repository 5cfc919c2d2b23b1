// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#include "deflow/dataio.hpp"

#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "deflow/error.hpp"

namespace deflow {

namespace {

void put_u32(std::string& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& buf, float v) { put_u32(buf, std::bit_cast<uint32_t>(v)); }

void put_f64(std::string& buf, double v) {
  const uint64_t u = std::bit_cast<uint64_t>(v);
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
}

struct Cursor {
  const unsigned char* p;
  size_t left;
  const std::string path;

  void need(size_t n) const {
    if (left < n) throw ValidationError(path + ": size mismatch (truncated)");
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(p[i]) << (8 * i);
    p += 4;
    left -= 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(p[i]) << (8 * i);
    p += 8;
    left -= 8;
    return std::bit_cast<double>(v);
  }
  unsigned char byte() {
    need(1);
    const unsigned char v = *p;
    ++p;
    --left;
    return v;
  }
};

}  // namespace

void write_frame_pair(const FramePair& pair, const std::filesystem::path& path) {
  pair.validate();
  FramePair clean;
  const FramePair* src = &pair;
  if (pair.cloud_t.ground_mask || pair.cloud_t1.ground_mask) {
    clean.cloud_t = pair.cloud_t.without_ground();
    clean.cloud_t1 = pair.cloud_t1.without_ground();
    clean.ego = pair.ego;
    src = &clean;
  }

  const auto& ct = src->cloud_t;
  const auto& ct1 = src->cloud_t1;
  uint32_t flags = 0;
  if (ct.gt_flow) flags |= kFlagGtFlow;
  if (ct.foreground_mask) flags |= kFlagFgMask;

  std::string buf;
  buf.reserve(148 + static_cast<size_t>(ct.size() + ct1.size()) * 12);
  buf.append("SFPR", 4);
  put_u32(buf, kFramePairVersion);
  put_u32(buf, flags);
  put_u32(buf, static_cast<uint32_t>(ct.size()));
  put_u32(buf, static_cast<uint32_t>(ct1.size()));
  const Eigen::Matrix4d m = src->ego.matrix();
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) put_f64(buf, m(r, c));
  for (Eigen::Index i = 0; i < ct.size(); ++i)
    for (int c = 0; c < 3; ++c) put_f32(buf, ct.positions(i, c));
  for (Eigen::Index i = 0; i < ct1.size(); ++i)
    for (int c = 0; c < 3; ++c) put_f32(buf, ct1.positions(i, c));
  if (ct.gt_flow)
    for (Eigen::Index i = 0; i < ct.size(); ++i)
      for (int c = 0; c < 3; ++c) put_f32(buf, (*ct.gt_flow)(i, c));
  if (ct.foreground_mask)
    for (Eigen::Index i = 0; i < ct.size(); ++i)
      buf.push_back((*ct.foreground_mask)(i) ? '\x01' : '\x00');

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw IoError(path.string() + ": cannot open for writing");
  const bool wrote = std::fwrite(buf.data(), 1, buf.size(), f) == buf.size();
  const bool flushed = std::fflush(f) == 0 && fsync(fileno(f)) == 0;
  if (std::fclose(f) != 0 || !wrote || !flushed)
    throw IoError(path.string() + ": write failed");
}

FramePair read_frame_pair(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open");
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) throw IoError(path.string() + ": read failed");

  Cursor cur{reinterpret_cast<const unsigned char*>(data.data()), data.size(), path.string()};
  cur.need(4);
  if (std::memcmp(cur.p, "SFPR", 4) != 0) throw ValidationError(cur.path + ": bad magic");
  cur.p += 4;
  cur.left -= 4;
  const uint32_t version = cur.u32();
  if (version != kFramePairVersion)
    throw ValidationError(cur.path + ": unsupported version " + std::to_string(version));
  const uint32_t flags = cur.u32();
  if (flags & ~(kFlagGtFlow | kFlagFgMask))
    throw ValidationError(cur.path + ": unknown flag bits");
  const uint32_t n_t = cur.u32();
  const uint32_t n_t1 = cur.u32();

  const size_t expect = 20 + 128 + (static_cast<size_t>(n_t) + n_t1) * 12 +
                        ((flags & kFlagGtFlow) ? static_cast<size_t>(n_t) * 12 : 0) +
                        ((flags & kFlagFgMask) ? static_cast<size_t>(n_t) : 0);
  if (data.size() != expect)
    throw ValidationError(cur.path + ": size mismatch (have " + std::to_string(data.size()) +
                          " bytes, layout needs " + std::to_string(expect) + ")");

  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = cur.f64();
  if (!(m.row(3).array() == Eigen::RowVector4d(0, 0, 0, 1).array()).all())
    throw ValidationError(cur.path + ": ego matrix has a non-affine bottom row");

  FramePair pair;
  try {
    pair.ego = RigidTransform::from_matrix(m);
  } catch (const ValidationError& e) {
    throw ValidationError(cur.path + ": " + e.what());
  }

  pair.cloud_t.positions.resize(n_t, 3);
  for (uint32_t i = 0; i < n_t; ++i)
    for (int c = 0; c < 3; ++c) pair.cloud_t.positions(i, c) = cur.f32();
  pair.cloud_t1.positions.resize(n_t1, 3);
  for (uint32_t i = 0; i < n_t1; ++i)
    for (int c = 0; c < 3; ++c) pair.cloud_t1.positions(i, c) = cur.f32();
  if (flags & kFlagGtFlow) {
    pair.cloud_t.gt_flow.emplace(n_t, 3);
    for (uint32_t i = 0; i < n_t; ++i)
      for (int c = 0; c < 3; ++c) (*pair.cloud_t.gt_flow)(i, c) = cur.f32();
  }
  if (flags & kFlagFgMask) {
    pair.cloud_t.foreground_mask.emplace(n_t);
    for (uint32_t i = 0; i < n_t; ++i) {
      const unsigned char b = cur.byte();
      if (b > 1) throw ValidationError(cur.path + ": fg_mask byte not 0/1");
      (*pair.cloud_t.foreground_mask)(i) = b == 1;
    }
  }
  pair.validate();
  return pair;
}

std::vector<std::filesystem::path> list_dataset(const std::filesystem::path& dir,
                                                const std::string& split) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError(dir.string() + ": not a directory");

  std::vector<fs::path> out;
  if (!split.empty()) {
    const fs::path manifest = dir / "manifest.json";
    std::ifstream in(manifest);
    if (!in) throw IoError(manifest.string() + ": manifest required for split '" + split + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(manifest.string() + ": " + e.what());
    }
    if (!j.contains(split)) throw ValidationError(manifest.string() + ": no split '" + split + "'");
    for (const auto& name : j.at(split)) {
      if (!name.is_string()) throw ValidationError(manifest.string() + ": split entries must be filenames");
      const fs::path p = dir / name.get<std::string>();
      if (!fs::is_regular_file(p)) throw IoError(p.string() + ": listed in manifest but missing");
      out.push_back(p);
    }
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".sfpr") out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
  return out;
}

}  // namespace deflow
