#pragma once

// Versioned JSON documents for floor plans and their episodes.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wmnav/env.hpp"

namespace wmnav {

using json = nlohmann::json;

inline constexpr int kEnvFormatVersion = 1;

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline json pose_to_json(const Pose& p) { return {{"x", p.position.x}, {"y", p.position.y}, {"heading", p.heading}}; }

inline Pose pose_from_json(const json& j) {
  Pose p{{j.at("x").get<double>(), j.at("y").get<double>()}, j.at("heading").get<int>()};
  if (p.heading < 0 || p.heading >= 360 || p.heading % 3 != 0) throw FormatError("heading must be a multiple of 3 in [0,360)");
  return p;
}

inline json episode_to_json(const EpisodeSpec& e) {
  return {{"episode_id", e.episode_id},
          {"plan_seed", e.plan_seed},
          {"start", pose_to_json(e.start)},
          {"goal", {e.goal.x, e.goal.y}},
          {"geodesic_ref", e.geodesic_ref}};
}

inline EpisodeSpec episode_from_json(const json& j) {
  EpisodeSpec e;
  e.episode_id = j.at("episode_id").get<std::string>();
  e.plan_seed = j.at("plan_seed").get<std::uint64_t>();
  e.start = pose_from_json(j.at("start"));
  e.goal = {j.at("goal").at(0).get<double>(), j.at("goal").at(1).get<double>()};
  e.geodesic_ref = j.at("geodesic_ref").get<double>();
  return e;
}

/// Environment document: plan occupancy as a row-major '0'/'1' string plus
/// any episodes sampled on it.
inline json env_to_json(const FloorPlan& plan, const std::vector<EpisodeSpec>& episodes = {}) {
  std::string bits(plan.occupancy().size(), '0');
  for (std::size_t i = 0; i < bits.size(); ++i)
    if (plan.occupancy()[i]) bits[i] = '1';
  json rooms = json::array();
  for (const Room& r : plan.rooms()) rooms.push_back({r.x0, r.y0, r.x1, r.y1});
  json eps = json::array();
  for (const EpisodeSpec& e : episodes) eps.push_back(episode_to_json(e));
  return {{"version", kEnvFormatVersion},
          {"cell_size", plan.cell_size()},
          {"width", plan.width()},
          {"height", plan.height()},
          {"seed", plan.seed()},
          {"rooms", rooms},
          {"occupancy", bits},
          {"episodes", eps}};
}

struct EnvDocument {
  FloorPlan plan;
  std::vector<EpisodeSpec> episodes;
};

inline EnvDocument env_from_json(const json& j) {
  if (j.value("version", 0) != kEnvFormatVersion) throw FormatError("unsupported environment document version");
  const int w = j.at("width").get<int>();
  const int h = j.at("height").get<int>();
  const std::string bits = j.at("occupancy").get<std::string>();
  if (bits.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
    throw FormatError("occupancy length does not match width*height");
  EnvDocument doc{FloorPlan(w, h, j.at("cell_size").get<double>(), j.value("seed", std::uint64_t{0})), {}};
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != '0' && bits[i] != '1') throw FormatError("occupancy must contain only '0' and '1'");
    doc.plan.set_occupied(doc.plan.cell_at(i), bits[i] == '1');
  }
  std::vector<Room> rooms;
  for (const json& r : j.value("rooms", json::array()))
    rooms.push_back({r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>(), r.at(3).get<double>()});
  doc.plan.set_rooms(std::move(rooms));
  for (const json& e : j.value("episodes", json::array())) doc.episodes.push_back(episode_from_json(e));
  return doc;
}

}  // namespace wmnav
