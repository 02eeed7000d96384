#pragma once

// Binary little-endian PLY reader/writer for trained 3D Gaussian splat clouds.

#include "fds/common.hpp"

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace fds {

struct SplatRecord3D {
  Vec3 position = Vec3::Zero();
  Vec3 scale_log = Vec3::Zero();
  /// rot_0..rot_3 as stored (w, x, y, z). Never zero after parsing.
  Vec4 rotation = Vec4(1, 0, 0, 0);
  double opacity_logit = 0.0;
  Vec3 dc_color = Vec3::Zero();

  [[nodiscard]] Vec4 normalized_rotation() const { return rotation.normalized(); }

  bool operator==(const SplatRecord3D&) const = default;
};

/// Ellipsoid volume (4/3) pi * prod(exp(scale_log)).
[[nodiscard]] double volume_of(const SplatRecord3D& r);

/// Parses the vertex element of a binary little-endian PLY. Extra vertex
/// properties and other elements are skipped. Throws ParseError (naming the
/// offending property where there is one) for ASCII or big-endian files, bad
/// headers, missing required properties, truncated payloads and zero
/// quaternions.
[[nodiscard]] std::vector<SplatRecord3D> parse_ply(std::span<const std::byte> bytes);

enum class PlyScalar { Float32, Float64 };

/// Writes x,y,z, f_dc_0..2, opacity, scale_0..2, rot_0..3 in that order.
[[nodiscard]] std::vector<std::byte> serialize_ply(std::span<const SplatRecord3D> records,
                                                   PlyScalar scalar = PlyScalar::Float32);

[[nodiscard]] std::vector<SplatRecord3D> read_ply(const std::filesystem::path& path);
void write_ply(std::span<const SplatRecord3D> records, const std::filesystem::path& path,
               PlyScalar scalar = PlyScalar::Float32);

}  // namespace fds
