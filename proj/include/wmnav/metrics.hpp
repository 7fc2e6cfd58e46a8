#pragma once

// Navigation metrics for one episode: NE, TL, SR, OR, SPL.

#include <algorithm>

#include "wmnav/agent.hpp"

namespace wmnav {

struct Metrics {
  double ne = 0.0;   // final geodesic distance to the goal (m)
  double tl = 0.0;   // executed path length (m)
  int sr = 0;        // stopped within the success radius
  int oracle = 0;    // passed within the success radius at some point
  double spl = 0.0;  // SR · geodesic_ref / max(TL, geodesic_ref)
};

inline double spl_value(int sr, double geodesic_ref, double tl) {
  return sr ? geodesic_ref / std::max(tl, geodesic_ref) : 0.0;
}

inline double path_length(const std::vector<Pose>& poses) {
  double tl = 0.0;
  for (std::size_t i = 1; i < poses.size(); ++i) tl += distance(poses[i - 1].position, poses[i].position);
  return tl;
}

inline Metrics compute_metrics(const EpisodeResult& result, const EpisodeSpec& spec, const FloorPlan& plan,
                               double success_radius = 3.0, const DistanceField* goal_field = nullptr) {
  std::unique_ptr<DistanceField> owned;
  if (!goal_field) {
    owned = std::make_unique<DistanceField>(plan, spec.goal);
    goal_field = owned.get();
  }
  const auto& poses = result.trajectory.poses;
  if (poses.empty()) throw ContractError("compute_metrics: empty trajectory");
  Metrics m;
  m.ne = goal_field->at_or(poses.back().position, kUnreachableDistance);
  m.tl = path_length(poses);
  m.sr = result.stopped() && m.ne <= success_radius ? 1 : 0;
  double closest = m.ne;
  for (const Pose& p : poses) closest = std::min(closest, goal_field->at_or(p.position, kUnreachableDistance));
  m.oracle = closest <= success_radius ? 1 : 0;
  m.spl = spl_value(m.sr, spec.geodesic_ref, m.tl);
  return m;
}

}  // namespace wmnav
