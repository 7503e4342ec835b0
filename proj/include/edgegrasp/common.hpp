#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgegrasp {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Index = std::int64_t;

/// Single random engine type used across the library so that seeded runs are
/// reproducible end to end.
using Rng = std::mt19937_64;

/// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind { usage = 2, data = 3, numeric = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error data_error(const std::string& what) { return Error(ErrorKind::data, what); }
inline Error usage_error(const std::string& what) { return Error(ErrorKind::usage, what); }
inline Error numeric_error(const std::string& what) { return Error(ErrorKind::numeric, what); }

/// Rigid transform x -> rotation * x + translation.
struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
  Vec3 rotate(const Vec3& v) const { return rotation * v; }
  RigidTransform inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
  }
  RigidTransform operator*(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation = rotation * rhs.rotation;
    out.translation = rotation * rhs.translation + translation;
    return out;
  }
};

/// Uniform random rotation from a normalized quaternion of four standard normals.
inline Mat3 random_rotation(Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::Quaterniond q;
  double norm = 0.0;
  do {
    q.w() = normal(rng);
    q.x() = normal(rng);
    q.y() = normal(rng);
    q.z() = normal(rng);
    norm = q.norm();
  } while (norm < 1e-12);
  q.coeffs() /= norm;
  return q.toRotationMatrix();
}

inline RigidTransform random_rigid_transform(Rng& rng, double translation_scale = 1.0) {
  std::uniform_real_distribution<double> uni(-translation_scale, translation_scale);
  RigidTransform g;
  g.rotation = random_rotation(rng);
  g.translation = Vec3(uni(rng), uni(rng), uni(rng));
  return g;
}

/// Per-stream engine derived from a master seed and a stream index, so work
/// items can be processed in any order and still draw identical numbers.
inline Rng derive_rng(std::uint64_t master_seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed & 0xffffffffu),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(stream & 0xffffffffu),
                    static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace edgegrasp
