#pragma once

// ASCII PLY (x y z [nx ny nz]) and CSV (x,y,z) point cloud files.
// A PLY header line "comment viewpoint x y z" carries the camera origin.

#include "edgegrasp/pointcloud.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace edgegrasp::io {

inline void write_ply(std::ostream& os, const PointCloud& cloud) {
  os << "ply\nformat ascii 1.0\n";
  if (cloud.viewpoint)
    os << std::setprecision(17) << "comment viewpoint " << cloud.viewpoint->x() << ' ' << cloud.viewpoint->y() << ' '
       << cloud.viewpoint->z() << '\n';
  os << "element vertex " << cloud.size() << "\n";
  os << "property double x\nproperty double y\nproperty double z\n";
  if (cloud.has_normals()) os << "property double nx\nproperty double ny\nproperty double nz\n";
  os << "end_header\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    os << p.x() << ' ' << p.y() << ' ' << p.z();
    if (cloud.has_normals()) {
      const auto& n = cloud.normals[i];
      os << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
    }
    os << '\n';
  }
}

inline PointCloud read_ply(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("ply", 0) != 0) throw data_error("not a PLY file");
  PointCloud cloud;
  std::size_t count = 0;
  std::vector<std::string> props;
  bool ascii = false;
  bool in_vertex = false;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    if (tok == "format") {
      std::string fmt;
      ls >> fmt;
      ascii = (fmt == "ascii");
    } else if (tok == "comment") {
      std::string key;
      ls >> key;
      if (key == "viewpoint") {
        Vec3 v;
        if (!(ls >> v.x() >> v.y() >> v.z())) throw data_error("malformed viewpoint comment");
        cloud.viewpoint = v;
      }
    } else if (tok == "element") {
      std::string name;
      ls >> name;
      in_vertex = (name == "vertex");
      if (in_vertex) ls >> count;
    } else if (tok == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      props.push_back(name);
    } else if (tok == "end_header") {
      break;
    }
  }
  if (!ascii) throw data_error("only ASCII PLY is supported");
  auto find = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < props.size(); ++i)
      if (props[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  const int inx = find("nx"), iny = find("ny"), inz = find("nz");
  if (ix < 0 || iy < 0 || iz < 0) throw data_error("PLY lacks x/y/z properties");
  const bool with_normals = inx >= 0 && iny >= 0 && inz >= 0;
  std::vector<double> vals(props.size());
  for (std::size_t i = 0; i < count; ++i) {
    for (auto& v : vals)
      if (!(is >> v)) throw data_error("truncated PLY vertex data");
    cloud.points.emplace_back(vals[static_cast<std::size_t>(ix)], vals[static_cast<std::size_t>(iy)],
                              vals[static_cast<std::size_t>(iz)]);
    if (with_normals)
      cloud.normals.emplace_back(vals[static_cast<std::size_t>(inx)], vals[static_cast<std::size_t>(iny)],
                                 vals[static_cast<std::size_t>(inz)]);
  }
  // Renormalize to absorb text round-off.
  for (auto& n : cloud.normals) {
    const double len = n.norm();
    if (len < 1e-12) throw data_error("zero-length normal in PLY");
    n /= len;
  }
  return cloud;
}

/// One "x,y,z" per line; blank lines and '#' comments are skipped.
inline PointCloud read_csv(std::istream& is) {
  PointCloud cloud;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    for (auto& c : line)
      if (c == ',') c = ' ';
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x() >> p.y() >> p.z())) {
      if (lineno == 1) continue;  // header row
      throw data_error("malformed CSV line " + std::to_string(lineno));
    }
    cloud.points.push_back(p);
  }
  return cloud;
}

inline PointCloud load_cloud(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open " + path.string());
  const auto ext = path.extension().string();
  PointCloud cloud = (ext == ".csv") ? read_csv(in) : read_ply(in);
  cloud.validate();
  return cloud;
}

inline void save_ply(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write " + path.string());
  write_ply(out, cloud);
}

}  // namespace edgegrasp::io
