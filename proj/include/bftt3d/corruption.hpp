#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "bftt3d/geometry.hpp"

namespace bftt3d {

enum class CorruptionKind {
  uniform,
  gaussian,
  background,
  impulse,
  upsampling,
  rbf,
  rbf_inv,
  den_dec,
  den_inc,
  shear,
  rot,
  cut,
  distort,
  occlusion,
  lidar,
};

inline constexpr std::array<CorruptionKind, 15> kAllCorruptions = {
    CorruptionKind::uniform,   CorruptionKind::gaussian, CorruptionKind::background,
    CorruptionKind::impulse,   CorruptionKind::upsampling, CorruptionKind::rbf,
    CorruptionKind::rbf_inv,   CorruptionKind::den_dec,  CorruptionKind::den_inc,
    CorruptionKind::shear,     CorruptionKind::rot,      CorruptionKind::cut,
    CorruptionKind::distort,   CorruptionKind::occlusion, CorruptionKind::lidar,
};

// Names as used on the command line and in reports ("rbf-inv", "den-dec", ...).
std::string_view to_string(CorruptionKind kind) noexcept;
CorruptionKind parse_corruption_kind(std::string_view name);

struct CorruptionSpec {
  CorruptionKind kind = CorruptionKind::uniform;
  int severity = 5;              // 1..5
  std::uint64_t seed = 0;        // global seed
  std::uint64_t sample_index = 0;  // stream ordinal, usually the dataset index
};

// Single scalar controlling a kind's intensity; 0 is the identity for every
// kind. Units per kind:
//   uniform     noise half-width            {0.01, 0.02, 0.03, 0.04, 0.05}
//   gaussian    noise sigma                 {0.01, 0.015, 0.02, 0.025, 0.03}
//   background  added points                {10, 20, 30, 40, 50}
//   impulse     fraction displaced by ±0.1  {0.01 .. 0.05}
//   upsampling  fraction of N added         {0.1 .. 0.5}
//   rbf         warp amplitude              {0.04, 0.08, 0.12, 0.16, 0.2}
//   rbf-inv     warp amplitude              {0.04, 0.08, 0.12, 0.16, 0.2}
//   den-dec     fraction of N removed       {0.1 .. 0.5}
//   den-inc     fraction of N added         {0.1 .. 0.5}
//   shear       max off-diagonal shear      {0.1 .. 0.5}
//   rot         angle in degrees            {5, 15, 30, 60, 90}
//   cut         removed slabs               {1 .. 5}
//   distort     lattice displacement        {0.05, 0.1, 0.15, 0.2, 0.25}
//   occlusion   plane depth, keep n.x <= 1-m {0.2, 0.4, 0.6, 0.8, 1.0}
//   lidar       ring gap / back-face depth  {0.1 .. 0.5}
double severity_magnitude(CorruptionKind kind, int severity);

// Applies `kind` at an explicit magnitude. Randomness comes from a counter
// stream keyed by (seed, kind, sample_index). Kept points retain their input
// order; added points are appended.
PointCloud corrupt_with_magnitude(const PointCloud& cloud, CorruptionKind kind, double magnitude,
                                  std::uint64_t seed, std::uint64_t sample_index);

// Schedule lookup plus corrupt_with_magnitude. Throws ArgumentError for a
// severity outside [1, 5].
PointCloud corrupt(const PointCloud& cloud, const CorruptionSpec& spec);

// Minimum fraction of the input that point-removing kinds retain.
inline constexpr double kMinRetainedFraction = 0.25;

}  // namespace bftt3d
