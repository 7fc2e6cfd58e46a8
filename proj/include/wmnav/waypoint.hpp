#pragma once

// Geometric waypoint predictor: a 120-angle x 12-distance navigability
// heatmap derived from a depth scan, and suppression down to a few
// candidate waypoints.

#include <array>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmnav/env.hpp"

namespace wmnav {

inline constexpr int kAngleBins = kRayCount;
inline constexpr int kDistanceBins = 12;
inline constexpr double kDistanceBinStep = 0.25;
inline constexpr double kMaxWaypointDistance = kDistanceBins * kDistanceBinStep;
inline constexpr double kWaypointClearance = 0.2;
inline constexpr int kSuppressionBins = 5;  // ±15°
inline constexpr int kDefaultWaypointCount = 5;

inline constexpr double bin_distance(int dist_bin) { return kDistanceBinStep * (dist_bin + 1); }
inline constexpr double bin_angle_deg(int angle_bin) { return kRayAngleDeg * angle_bin; }

struct WaypointHeatmap {
  std::array<std::array<double, kDistanceBins>, kAngleBins> scores{};

  double operator()(int angle_bin, int dist_bin) const { return scores[angle_bin][dist_bin]; }
  bool navigable(int angle_bin, int dist_bin) const { return scores[angle_bin][dist_bin] > 0.5; }
};

struct Waypoint {
  Vec2 position;
  int angle_bin = 0;
  int dist_bin = 0;
  double score = 0.0;
};

/// A bin is navigable when its ray is clear for the bin distance plus a
/// clearance margin. Works the same on real and synthesized scans.
inline WaypointHeatmap predict_heatmap(const Observation& obs) {
  WaypointHeatmap hm;
  for (int i = 0; i < kAngleBins; ++i)
    for (int j = 0; j < kDistanceBins; ++j)
      hm.scores[i][j] = obs.ranges[i] >= bin_distance(j) + kWaypointClearance ? 1.0 : 0.0;
  return hm;
}

/// Whether the point `rel` (relative to the scan origin) falls in a navigable
/// heatmap bin of `obs`. Used for mutual-detection connectivity.
inline bool detects(const Observation& obs, Vec2 rel) {
  const double d = rel.norm();
  if (d < kDistanceBinStep / 2.0 || d > kMaxWaypointDistance + kDistanceBinStep / 2.0) return false;
  const int angle_bin = static_cast<int>(std::lround(bearing_deg(rel) / kRayAngleDeg)) % kAngleBins;
  const int dist_bin = std::clamp(static_cast<int>(std::lround(d / kDistanceBinStep)) - 1, 0, kDistanceBins - 1);
  return obs.ranges[angle_bin] >= bin_distance(dist_bin) + kWaypointClearance;
}

namespace detail {
inline int circular_bin_gap(int a, int b) {
  const int d = std::abs(a - b) % kAngleBins;
  return std::min(d, kAngleBins - d);
}
}  // namespace detail

/// Greedy farthest-first suppression. Each round takes the navigable cell with
/// the largest distance bin among unsuppressed angles; equal distances prefer
/// the angle farthest from the waypoints already taken, then the lower angle
/// bin. The chosen angle and its ±5 neighbouring bins are then suppressed.
inline std::vector<Waypoint> select_waypoints(const WaypointHeatmap& hm, Vec2 origin,
                                              int k = kDefaultWaypointCount) {
  if (k < 1) throw ContractError("select_waypoints: k must be >= 1");
  std::array<bool, kAngleBins> open{};
  open.fill(true);
  std::array<int, kAngleBins> farthest{};
  for (int i = 0; i < kAngleBins; ++i) {
    farthest[i] = -1;
    for (int j = kDistanceBins - 1; j >= 0; --j)
      if (hm.navigable(i, j)) {
        farthest[i] = j;
        break;
      }
  }

  std::vector<Waypoint> out;
  while (static_cast<int>(out.size()) < k) {
    int best = -1;
    int best_sep = -1;
    for (int i = 0; i < kAngleBins; ++i) {
      if (!open[i] || farthest[i] < 0) continue;
      int sep = kAngleBins;
      for (const Waypoint& w : out) sep = std::min(sep, detail::circular_bin_gap(i, w.angle_bin));
      if (best < 0 || farthest[i] > farthest[best] || (farthest[i] == farthest[best] && sep > best_sep)) {
        best = i;
        best_sep = sep;
      }
    }
    if (best < 0) break;
    const int j = farthest[best];
    out.push_back({origin + direction(bin_angle_deg(best)) * bin_distance(j), best, j, hm(best, j)});
    for (int d = -kSuppressionBins; d <= kSuppressionBins; ++d) open[(best + d + kAngleBins) % kAngleBins] = false;
  }
  return out;
}

inline nlohmann::json heatmap_to_json(const WaypointHeatmap& hm) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : hm.scores) rows.push_back(row);
  return {{"angles", kAngleBins}, {"distances", kDistanceBins}, {"scores", rows}};
}

}  // namespace wmnav
