// Copyright 2026 The cotpcc Authors
// SPDX-License-Identifier: Apache-2.0
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

#include "cotpcc/cloud.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <tuple>

#include "cotpcc/errors.hpp"
#include "cotpcc/random.hpp"

namespace cotpcc {

void PointCloud::validate() const {
  if (points.rows() == 0) throw InvalidArgument("point cloud is empty");
  if (!points.allFinite()) throw InvalidArgument("point cloud has non-finite coordinates");
}

Points Block::denormalize() const {
  Points out = cloud.points / scale;
  out.rowwise() += center.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// File I/O

namespace {

PointCloud load_xyz(std::istream& in, const std::string& id) {
  std::vector<double> coords;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    double v[3];
    for (double& x : v) {
      std::string token;
      if (!(fields >> token)) {
        throw ParseError("xyz: line " + std::to_string(line_no) + ": expected 3 coordinates");
      }
      char* end = nullptr;
      x = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0') {
        throw ParseError("xyz: line " + std::to_string(line_no) + ": malformed number '" + token + "'");
      }
      if (!std::isfinite(x)) {
        throw ParseError("xyz: line " + std::to_string(line_no) + ": non-finite coordinate");
      }
    }
    coords.insert(coords.end(), v, v + 3);
  }
  if (coords.empty()) throw ParseError("xyz: no points in " + id);
  Points pts = Eigen::Map<Points>(coords.data(), static_cast<Index>(coords.size() / 3), 3);
  return PointCloud(std::move(pts), id);
}

enum class PlyType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

PlyType parse_ply_type(const std::string& name) {
  static const std::map<std::string, PlyType> kTypes{
      {"char", PlyType::kInt8},     {"int8", PlyType::kInt8},       {"uchar", PlyType::kUInt8},
      {"uint8", PlyType::kUInt8},   {"short", PlyType::kInt16},     {"int16", PlyType::kInt16},
      {"ushort", PlyType::kUInt16}, {"uint16", PlyType::kUInt16},   {"int", PlyType::kInt32},
      {"int32", PlyType::kInt32},   {"uint", PlyType::kUInt32},     {"uint32", PlyType::kUInt32},
      {"float", PlyType::kFloat32}, {"float32", PlyType::kFloat32}, {"double", PlyType::kFloat64},
      {"float64", PlyType::kFloat64}};
  auto it = kTypes.find(name);
  if (it == kTypes.end()) throw ParseError("ply: unknown property type '" + name + "'");
  return it->second;
}

std::size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUInt8:
      return 1;
    case PlyType::kInt16:
    case PlyType::kUInt16:
      return 2;
    case PlyType::kInt32:
    case PlyType::kUInt32:
    case PlyType::kFloat32:
      return 4;
    case PlyType::kFloat64:
      return 8;
  }
  return 0;
}

template <typename T>
T read_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    auto* b = reinterpret_cast<unsigned char*>(&v);
    std::reverse(b, b + sizeof(T));
  }
  return v;
}

double decode_ply_value(PlyType t, const unsigned char* p) {
  switch (t) {
    case PlyType::kInt8:
      return read_le<std::int8_t>(p);
    case PlyType::kUInt8:
      return read_le<std::uint8_t>(p);
    case PlyType::kInt16:
      return read_le<std::int16_t>(p);
    case PlyType::kUInt16:
      return read_le<std::uint16_t>(p);
    case PlyType::kInt32:
      return read_le<std::int32_t>(p);
    case PlyType::kUInt32:
      return read_le<std::uint32_t>(p);
    case PlyType::kFloat32:
      return read_le<float>(p);
    case PlyType::kFloat64:
      return read_le<double>(p);
  }
  return 0.0;
}

PointCloud load_ply(std::istream& in, const std::string& id) {
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw ParseError("ply: missing magic");
  bool binary = false;
  bool seen_format = false;
  Index vertex_count = -1;
  bool in_vertex = false;
  bool vertex_done = false;
  std::vector<std::pair<std::string, PlyType>> props;
  while (true) {
    if (!std::getline(in, line)) throw ParseError("ply: header not terminated");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::string keyword;
    ss >> keyword;
    if (keyword == "end_header") break;
    if (keyword == "comment" || keyword == "obj_info" || keyword.empty()) continue;
    if (keyword == "format") {
      std::string fmt, version;
      ss >> fmt >> version;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw ParseError("ply: unsupported format '" + fmt + "'");
      }
      seen_format = true;
    } else if (keyword == "element") {
      std::string name;
      long long count = -1;
      ss >> name >> count;
      if (in_vertex) vertex_done = true;
      in_vertex = (name == "vertex");
      if (in_vertex) {
        if (vertex_count >= 0) throw ParseError("ply: duplicate vertex element");
        if (count < 0) throw ParseError("ply: malformed vertex count");
        vertex_count = static_cast<Index>(count);
      } else if (vertex_count < 0) {
        throw ParseError("ply: elements before 'vertex' are not supported");
      }
    } else if (keyword == "property") {
      if (!in_vertex || vertex_done) continue;
      std::string type;
      ss >> type;
      if (type == "list") throw ParseError("ply: list properties on vertices are not supported");
      std::string name;
      ss >> name;
      props.emplace_back(name, parse_ply_type(type));
    } else {
      throw ParseError("ply: unexpected header line '" + line + "'");
    }
  }
  if (!seen_format) throw ParseError("ply: missing format line");
  if (vertex_count < 0) throw ParseError("ply: missing vertex element");
  int ix = -1, iy = -1, iz = -1;
  for (std::size_t i = 0; i < props.size(); ++i) {
    if (props[i].first == "x") ix = static_cast<int>(i);
    if (props[i].first == "y") iy = static_cast<int>(i);
    if (props[i].first == "z") iz = static_cast<int>(i);
  }
  if (ix < 0 || iy < 0 || iz < 0) throw ParseError("ply: vertex element lacks x/y/z properties");

  Points pts(vertex_count, 3);
  if (binary) {
    std::size_t stride = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : props) {
      offsets.push_back(stride);
      stride += ply_type_size(p.second);
    }
    std::vector<unsigned char> row(stride);
    for (Index i = 0; i < vertex_count; ++i) {
      in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(stride));
      if (in.gcount() != static_cast<std::streamsize>(stride)) {
        throw ParseError("ply: truncated payload at vertex " + std::to_string(i) + " (byte offset " +
                         std::to_string(static_cast<std::size_t>(i) * stride) + ")");
      }
      const int axes[3] = {ix, iy, iz};
      for (int a = 0; a < 3; ++a) {
        const auto& prop = props[static_cast<std::size_t>(axes[a])];
        const double v = decode_ply_value(prop.second, row.data() + offsets[static_cast<std::size_t>(axes[a])]);
        if (!std::isfinite(v)) {
          throw ParseError("ply: non-finite coordinate at vertex " + std::to_string(i));
        }
        pts(i, a) = v;
      }
    }
  } else {
    for (Index i = 0; i < vertex_count; ++i) {
      do {
        if (!std::getline(in, line)) {
          throw ParseError("ply: truncated payload at vertex " + std::to_string(i));
        }
      } while (line.find_first_not_of(" \t\r") == std::string::npos);
      std::istringstream ss(line);
      std::vector<double> values;
      std::string token;
      while (ss >> token) {
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end == token.c_str() || *end != '\0') {
          throw ParseError("ply: malformed value '" + token + "' at vertex " + std::to_string(i));
        }
        values.push_back(v);
      }
      if (values.size() < props.size()) {
        throw ParseError("ply: vertex " + std::to_string(i) + " has too few values");
      }
      const int axes[3] = {ix, iy, iz};
      for (int a = 0; a < 3; ++a) {
        const double v = values[static_cast<std::size_t>(axes[a])];
        if (!std::isfinite(v)) throw ParseError("ply: non-finite coordinate at vertex " + std::to_string(i));
        pts(i, a) = v;
      }
    }
  }
  if (vertex_count == 0) throw ParseError("ply: no vertices in " + id);
  return PointCloud(std::move(pts), id);
}

bool has_ply_magic(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[3] = {};
  in.read(magic, 3);
  return in.gcount() == 3 && std::memcmp(magic, "ply", 3) == 0;
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  const std::string id = path.filename().string();
  if (has_ply_magic(path)) return load_ply(in, id);
  return load_xyz(in, id);
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  const Points& p = cloud.points;
  if (format == CloudFormat::kXyz) {
    out.precision(17);
    for (Index i = 0; i < p.rows(); ++i) out << p(i, 0) << ' ' << p(i, 1) << ' ' << p(i, 2) << '\n';
  } else {
    const bool binary = format == CloudFormat::kPlyBinary;
    out << "ply\nformat " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n";
    out << "element vertex " << p.rows() << '\n';
    out << (binary ? "property float x\nproperty float y\nproperty float z\n"
                   : "property double x\nproperty double y\nproperty double z\n");
    out << "end_header\n";
    if (binary) {
      for (Index i = 0; i < p.rows(); ++i) {
        for (int a = 0; a < 3; ++a) {
          float v = static_cast<float>(p(i, a));
          if constexpr (std::endian::native == std::endian::big) {
            auto* b = reinterpret_cast<unsigned char*>(&v);
            std::reverse(b, b + sizeof(float));
          }
          out.write(reinterpret_cast<const char*>(&v), sizeof(float));
        }
      }
    } else {
      out.precision(17);
      for (Index i = 0; i < p.rows(); ++i) out << p(i, 0) << ' ' << p(i, 1) << ' ' << p(i, 2) << '\n';
    }
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  write_cloud(path, cloud, path.extension() == ".ply" ? CloudFormat::kPlyBinary : CloudFormat::kXyz);
}

// ---------------------------------------------------------------------------
// Scene normalization and blocks

Points scale_to_cube(const PointCloud& scene, double cube_edge) {
  scene.validate();
  const Vec3 lo = scene.points.colwise().minCoeff().transpose();
  const Vec3 hi = scene.points.colwise().maxCoeff().transpose();
  const double extent = (hi - lo).maxCoeff();
  if (!(extent > 0.0)) throw InvalidArgument("degenerate input: scene has zero extent on all axes");
  Points out = scene.points;
  out.rowwise() -= lo.transpose();
  out *= cube_edge / extent;
  return out;
}

std::vector<Block> partition_blocks(const PointCloud& scene, double cube_edge, double block_edge) {
  if (!(block_edge > 0.0) || !(cube_edge > block_edge)) {
    throw InvalidArgument("partition_blocks: requires cube_edge > block_edge > 0");
  }
  const Points scaled = scale_to_cube(scene, cube_edge);
  const auto per_axis = static_cast<Index>(std::ceil(cube_edge / block_edge));
  std::map<std::tuple<Index, Index, Index>, std::vector<Index>> cells;
  for (Index i = 0; i < scaled.rows(); ++i) {
    Index c[3];
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp<Index>(static_cast<Index>(std::floor(scaled(i, a) / block_edge)), 0, per_axis - 1);
    }
    cells[{c[0], c[1], c[2]}].push_back(i);
  }
  std::vector<Block> blocks;
  blocks.reserve(cells.size());
  for (const auto& [key, members] : cells) {
    Block b;
    b.origin = Vec3(static_cast<double>(std::get<0>(key)), static_cast<double>(std::get<1>(key)),
                    static_cast<double>(std::get<2>(key))) *
               block_edge;
    b.edge_length = block_edge;
    b.center = b.origin + Vec3::Constant(block_edge / 2.0);
    b.scale = 2.0 / block_edge;
    Points pts(static_cast<Index>(members.size()), 3);
    for (std::size_t j = 0; j < members.size(); ++j) {
      pts.row(static_cast<Index>(j)) = (scaled.row(members[j]) - b.center.transpose()) * b.scale;
    }
    b.cloud = PointCloud(std::move(pts), scene.source_id);
    blocks.push_back(std::move(b));
  }
  return blocks;
}

PointCloud normalize_to_unit_cube(const PointCloud& cloud) {
  cloud.validate();
  const Vec3 lo = cloud.points.colwise().minCoeff().transpose();
  const Vec3 hi = cloud.points.colwise().maxCoeff().transpose();
  const Vec3 center = (lo + hi) / 2.0;
  const double half = (hi - lo).maxCoeff() / 2.0;
  Points out = cloud.points.rowwise() - center.transpose();
  if (half > 0.0) out /= half;
  return PointCloud(std::move(out), cloud.source_id);
}

// ---------------------------------------------------------------------------
// Synthetic data

std::string to_string(ShapeFamily family) {
  switch (family) {
    case ShapeFamily::kSphere:
      return "sphere";
    case ShapeFamily::kBox:
      return "box";
    case ShapeFamily::kTorus:
      return "torus";
    case ShapeFamily::kRidgedPlane:
      return "ridged_plane";
  }
  return "unknown";
}

ShapeFamily shape_family_from_string(const std::string& name) {
  if (name == "sphere") return ShapeFamily::kSphere;
  if (name == "box") return ShapeFamily::kBox;
  if (name == "torus") return ShapeFamily::kTorus;
  if (name == "ridged_plane" || name == "plane") return ShapeFamily::kRidgedPlane;
  throw InvalidArgument("unknown shape family '" + name + "'");
}

void DatasetSpec::validate() const {
  if (points_per_block < 8) throw InvalidArgument("dataset: points_per_block must be >= 8");
  if (!(nonuniformity >= 0.0 && nonuniformity <= 1.0)) throw InvalidArgument("dataset: nonuniformity in [0,1]");
  if (source == Source::kSynthetic) {
    if (families.empty() || clouds_per_family < 1) throw InvalidArgument("dataset: empty synthetic spec");
  } else {
    if (files.empty()) throw InvalidArgument("dataset: no input files");
    if (!(block_edge > 0.0) || !(cube_edge > block_edge)) {
      throw InvalidArgument("dataset: requires cube_edge > block_edge > 0");
    }
  }
}

namespace {

Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

}  // namespace

Points sample_surface(ShapeFamily family, Index count, std::uint64_t seed) {
  Rng rng(seed);
  Points pts(count, 3);
  switch (family) {
    case ShapeFamily::kSphere:
      for (Index i = 0; i < count; ++i) {
        Vec3 v(rng.normal(), rng.normal(), rng.normal());
        while (v.norm() < 1e-12) v = Vec3(rng.normal(), rng.normal(), rng.normal());
        pts.row(i) = v.normalized().transpose();
      }
      break;
    case ShapeFamily::kBox: {
      const Vec3 half(rng.uniform(0.4, 1.0), rng.uniform(0.4, 1.0), rng.uniform(0.4, 1.0));
      const double areas[3] = {half[1] * half[2], half[0] * half[2], half[0] * half[1]};
      const double total = areas[0] + areas[1] + areas[2];
      for (Index i = 0; i < count; ++i) {
        const double pick = rng.uniform() * total;
        const int axis = pick < areas[0] ? 0 : (pick < areas[0] + areas[1] ? 1 : 2);
        Vec3 p(rng.uniform(-half[0], half[0]), rng.uniform(-half[1], half[1]), rng.uniform(-half[2], half[2]));
        p[axis] = rng.uniform() < 0.5 ? -half[axis] : half[axis];
        pts.row(i) = p.transpose();
      }
      break;
    }
    case ShapeFamily::kTorus: {
      const double major = 1.0;
      const double minor = rng.uniform(0.25, 0.45);
      for (Index i = 0; i < count; ++i) {
        double u = 0.0, v = 0.0;
        // Area element is proportional to (major + minor cos v).
        do {
          u = rng.uniform(0.0, 2.0 * M_PI);
          v = rng.uniform(0.0, 2.0 * M_PI);
        } while (rng.uniform() * (major + minor) > major + minor * std::cos(v));
        pts.row(i) << (major + minor * std::cos(v)) * std::cos(u), (major + minor * std::cos(v)) * std::sin(u),
            minor * std::sin(v);
      }
      break;
    }
    case ShapeFamily::kRidgedPlane: {
      const double freq = rng.uniform(3.0, 6.0);
      const double amp = rng.uniform(0.08, 0.2);
      for (Index i = 0; i < count; ++i) {
        const double x = rng.uniform(-1.0, 1.0), y = rng.uniform(-1.0, 1.0);
        pts.row(i) << x, y, amp * std::sin(freq * x) * std::cos(0.5 * freq * y);
      }
      break;
    }
  }
  const Eigen::Matrix3d rot = random_rotation(rng);
  return pts * rot.transpose();
}

std::vector<PointCloud> synth_dataset(const DatasetSpec& spec) {
  spec.validate();
  if (spec.source != DatasetSpec::Source::kSynthetic) throw InvalidArgument("synth_dataset: not a synthetic spec");
  constexpr Index kPoolFactor = 8;
  std::vector<PointCloud> out;
  out.reserve(spec.families.size() * static_cast<std::size_t>(spec.clouds_per_family));
  for (std::size_t f = 0; f < spec.families.size(); ++f) {
    for (Index c = 0; c < spec.clouds_per_family; ++c) {
      const std::uint64_t cloud_seed = derive_seed(spec.seed, f, c);
      const Points pool = sample_surface(spec.families[f], spec.points_per_block * kPoolFactor, cloud_seed);
      PointCloud sampled = nonuniform_sample(PointCloud(pool), spec.points_per_block, spec.nonuniformity,
                                             derive_seed(cloud_seed, 1));
      PointCloud normalized = normalize_to_unit_cube(sampled);
      normalized.source_id = to_string(spec.families[f]) + "_" + std::to_string(c);
      out.push_back(std::move(normalized));
    }
  }
  return out;
}

std::vector<PointCloud> blocks_from_files(const DatasetSpec& spec) {
  spec.validate();
  std::vector<PointCloud> out;
  for (std::size_t f = 0; f < spec.files.size(); ++f) {
    const PointCloud scene = load_cloud(spec.files[f]);
    const auto blocks = partition_blocks(scene, spec.cube_edge, spec.block_edge);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      if (blocks[b].cloud.size() < spec.points_per_block) continue;
      PointCloud sampled = nonuniform_sample(blocks[b].cloud, spec.points_per_block, spec.nonuniformity,
                                             derive_seed(spec.seed, f, b));
      sampled.source_id = spec.files[f].stem().string() + "_block" + std::to_string(b);
      out.push_back(std::move(sampled));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<Index> nonuniform_sample_indices(const PointCloud& cloud, Index n, double strength,
                                             std::uint64_t seed) {
  const Index total = cloud.size();
  if (n > total) throw InvalidArgument("nonuniform_sample: n exceeds cloud size");
  if (n < 0) throw InvalidArgument("nonuniform_sample: negative n");
  if (!(strength >= 0.0 && strength <= 1.0)) throw InvalidArgument("nonuniform_sample: strength in [0,1]");
  Rng rng(seed);
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  const Eigen::VectorXd t = cloud.points * axis;
  const double lo = t.size() > 0 ? t.minCoeff() : 0.0;
  const double hi = t.size() > 0 ? t.maxCoeff() : 0.0;

  // Efraimidis-Spirakis weighted sampling without replacement: keep the n
  // largest keys log(u) / weight.
  std::vector<std::pair<double, Index>> keys(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) {
    const double w = hi > lo ? (t[i] - lo) / (hi - lo) : 1.0;
    const double weight = 1.0 - strength + strength * w;
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    const double key = weight > 0.0 ? std::log(u) / weight : -std::numeric_limits<double>::infinity();
    keys[static_cast<std::size_t>(i)] = {key, i};
  }
  std::partial_sort(keys.begin(), keys.begin() + n, keys.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = keys[static_cast<std::size_t>(i)].second;
  std::sort(idx.begin(), idx.end());
  return idx;
}

PointCloud nonuniform_sample(const PointCloud& cloud, Index n, double strength, std::uint64_t seed) {
  const auto idx = nonuniform_sample_indices(cloud, n, strength, seed);
  Points out(n, 3);
  for (Index i = 0; i < n; ++i) out.row(i) = cloud.points.row(idx[static_cast<std::size_t>(i)]);
  return PointCloud(std::move(out), cloud.source_id);
}

std::vector<Index> fps(const Points& points, Index m, Index start_index) {
  const Index n = points.rows();
  if (m < 1 || m > n) throw InvalidArgument("fps: requires 1 <= m <= N");
  if (start_index < 0 || start_index >= n) throw InvalidArgument("fps: start_index out of range");
  std::vector<Index> selected;
  selected.reserve(static_cast<std::size_t>(m));
  std::vector<double> min_dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  Index current = start_index;
  for (Index step = 0; step < m; ++step) {
    selected.push_back(current);
    taken[static_cast<std::size_t>(current)] = 1;
    if (step + 1 == m) break;
    Index best = -1;
    double best_dist = -1.0;
    for (Index i = 0; i < n; ++i) {
      if (taken[static_cast<std::size_t>(i)]) continue;
      const double d = (points.row(i) - points.row(current)).squaredNorm();
      double& md = min_dist[static_cast<std::size_t>(i)];
      if (d < md) md = d;
      if (md > best_dist) {
        best_dist = md;
        best = i;
      }
    }
    current = best;
  }
  return selected;
}

}  // namespace cotpcc
