#pragma once

// Continuous 2D world backed by an occupancy grid: procedural generation,
// low-level motion with sliding, panoramic depth scans and grid geodesics.

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "wmnav/core.hpp"

namespace wmnav {

inline constexpr double kDefaultCellSize = 0.1;
inline constexpr double kForwardStep = 0.25;
inline constexpr int kTurnStepDeg = 15;
inline constexpr int kRayCount = 120;
inline constexpr double kRayAngleDeg = 3.0;
inline constexpr double kMaxRange = 5.0;

struct Room {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;  // meters, half-open
  Vec2 center() const { return {(x0 + x1) / 2.0, (y0 + y1) / 2.0}; }
  bool operator==(const Room&) const = default;
};

struct Cell {
  int x = 0;
  int y = 0;
  bool operator==(const Cell&) const = default;
};

/// Immutable after construction; cells outside the grid count as occupied.
class FloorPlan {
 public:
  FloorPlan() = default;
  FloorPlan(int width, int height, double cell_size = kDefaultCellSize, std::uint64_t seed = 0)
      : width_(width),
        height_(height),
        cell_size_(cell_size),
        seed_(seed),
        occupied_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 1) {
    if (width <= 2 || height <= 2) throw ContractError("floor plan must be at least 3x3 cells");
    if (!(cell_size > 0.0)) throw ContractError("cell size must be positive");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size() const { return cell_size_; }
  double width_m() const { return width_ * cell_size_; }
  double height_m() const { return height_ * cell_size_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Room>& rooms() const { return rooms_; }
  const std::vector<std::uint8_t>& occupancy() const { return occupied_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(c.y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(c.x);
  }
  Cell cell_at(std::size_t idx) const {
    return {static_cast<int>(idx % static_cast<std::size_t>(width_)),
            static_cast<int>(idx / static_cast<std::size_t>(width_))};
  }

  bool occupied(Cell c) const { return !in_bounds(c) || occupied_[index(c)] != 0; }
  bool occupied(int x, int y) const { return occupied(Cell{x, y}); }

  Cell cell_of(Vec2 p) const {
    return {static_cast<int>(std::floor(p.x / cell_size_)), static_cast<int>(std::floor(p.y / cell_size_))};
  }
  Vec2 cell_center(Cell c) const { return {(c.x + 0.5) * cell_size_, (c.y + 0.5) * cell_size_}; }
  bool is_free(Vec2 p) const { return std::isfinite(p.x) && std::isfinite(p.y) && !occupied(cell_of(p)); }

  // Mutators are for construction (generator, tests, deserialization).
  void set_occupied(Cell c, bool occ) {
    if (!in_bounds(c)) return;
    if (c.x == 0 || c.y == 0 || c.x == width_ - 1 || c.y == height_ - 1) occ = true;
    occupied_[index(c)] = occ ? 1 : 0;
  }
  void carve_rect(double x0, double y0, double x1, double y1) {
    const Cell a = cell_of({x0, y0});
    const Cell b = cell_of({x1 - 1e-9, y1 - 1e-9});
    for (int y = std::max(a.y, 1); y <= std::min(b.y, height_ - 2); ++y)
      for (int x = std::max(a.x, 1); x <= std::min(b.x, width_ - 2); ++x) set_occupied({x, y}, false);
  }
  void fill_rect(double x0, double y0, double x1, double y1) {
    const Cell a = cell_of({x0, y0});
    const Cell b = cell_of({x1 - 1e-9, y1 - 1e-9});
    for (int y = std::max(a.y, 0); y <= std::min(b.y, height_ - 1); ++y)
      for (int x = std::max(a.x, 0); x <= std::min(b.x, width_ - 1); ++x) set_occupied({x, y}, true);
  }
  void set_rooms(std::vector<Room> rooms) { rooms_ = std::move(rooms); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  bool operator==(const FloorPlan&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  double cell_size_ = kDefaultCellSize;
  std::uint64_t seed_ = 0;
  std::vector<std::uint8_t> occupied_;
  std::vector<Room> rooms_;
};

struct FloorPlanParams {
  double width_m = 20.0;
  double height_m = 20.0;
  int room_count = 5;
  double corridor_width_m = 1.0;
  double cell_size = kDefaultCellSize;
};

/// Rooms joined by L-shaped corridors into a tree plus one loop. Deterministic
/// for fixed (seed, params).
inline FloorPlan generate_floorplan(std::uint64_t seed, const FloorPlanParams& params) {
  if (params.width_m < 5.0 || params.height_m < 5.0)
    throw ContractError("floor plan dimensions must be at least 5 m");
  if (params.room_count < 1) throw ContractError("room_count must be >= 1");
  if (!(params.corridor_width_m > 0.0)) throw ContractError("corridor width must be positive");

  const double cs = params.cell_size;
  FloorPlan plan(static_cast<int>(std::lround(params.width_m / cs)),
                 static_cast<int>(std::lround(params.height_m / cs)), cs, seed);
  Rng rng(mix64(seed ^ 0xf1007f1a4ULL));
  auto uniform = [&rng](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  // Snap to the grid so room edges are stable under serialization.
  auto snap = [cs](double v) { return std::round(v / cs) * cs; };

  const double margin = 2.0 * cs;
  const double inner_w = plan.width_m() - 2.0 * margin;
  const double inner_h = plan.height_m() - 2.0 * margin;
  const double max_w = std::min(6.0, inner_w);
  const double max_h = std::min(6.0, inner_h);
  const double min_w = std::min(3.0, max_w);
  const double min_h = std::min(3.0, max_h);
  constexpr double kGap = 1.0;

  std::vector<Room> rooms;
  for (int attempt = 0; attempt < 400 && static_cast<int>(rooms.size()) < params.room_count; ++attempt) {
    const double w = snap(uniform(min_w, max_w));
    const double h = snap(uniform(min_h, max_h));
    const double x0 = snap(uniform(margin, std::max(margin, plan.width_m() - margin - w)));
    const double y0 = snap(uniform(margin, std::max(margin, plan.height_m() - margin - h)));
    Room r{x0, y0, x0 + w, y0 + h};
    const bool overlaps = std::any_of(rooms.begin(), rooms.end(), [&](const Room& o) {
      return r.x0 < o.x1 + kGap && o.x0 < r.x1 + kGap && r.y0 < o.y1 + kGap && o.y0 < r.y1 + kGap;
    });
    if (!overlaps || rooms.empty()) rooms.push_back(r);
  }
  for (const Room& r : rooms) plan.carve_rect(r.x0, r.y0, r.x1, r.y1);

  const double half = params.corridor_width_m / 2.0;
  auto corridor = [&](Vec2 a, Vec2 b, bool horizontal_first) {
    const Vec2 knee = horizontal_first ? Vec2{b.x, a.y} : Vec2{a.x, b.y};
    auto leg = [&](Vec2 p, Vec2 q) {
      plan.carve_rect(std::min(p.x, q.x) - half, std::min(p.y, q.y) - half, std::max(p.x, q.x) + half,
                      std::max(p.y, q.y) + half);
    };
    leg(a, knee);
    leg(knee, b);
  };
  // Each room links to its nearest predecessor; then one extra loop edge.
  for (std::size_t i = 1; i < rooms.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < i; ++j)
      if (distance(rooms[j].center(), rooms[i].center()) < distance(rooms[best].center(), rooms[i].center()))
        best = j;
    corridor(rooms[best].center(), rooms[i].center(), (rng() & 1U) != 0);
  }
  if (rooms.size() >= 3) {
    const std::size_t a = rng() % rooms.size();
    std::size_t b = rng() % rooms.size();
    if (a == b) b = (b + 1) % rooms.size();
    corridor(rooms[a].center(), rooms[b].center(), (rng() & 1U) != 0);
  }

  // Free-standing furniture blocks; kept only if every room center stays reachable.
  for (const Room& r : rooms) {
    if (r.x1 - r.x0 < 3.5 || r.y1 - r.y0 < 3.5) continue;
    const double bw = snap(uniform(0.4, 0.9));
    const double bh = snap(uniform(0.4, 0.9));
    const double bx = snap(uniform(r.x0 + 0.8, r.x1 - 0.8 - bw));
    const double by = snap(uniform(r.y0 + 0.8, r.y1 - 0.8 - bh));
    const Vec2 c = r.center();
    if (c.x >= bx - 0.5 && c.x <= bx + bw + 0.5 && c.y >= by - 0.5 && c.y <= by + bh + 0.5) continue;
    plan.fill_rect(bx, by, bx + bw, by + bh);
  }
  plan.set_rooms(std::move(rooms));
  return plan;
}

// ---------------------------------------------------------------------------
// Connectivity

/// Labels 4-connected free components; occupied cells get -1. With corner
/// cutting disallowed this matches 8-connected reachability.
inline std::vector<int> label_components(const FloorPlan& plan, int* count = nullptr) {
  std::vector<int> label(plan.occupancy().size(), -1);
  int next = 0;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < label.size(); ++i) {
    if (label[i] >= 0 || plan.occupancy()[i]) continue;
    label[i] = next;
    stack.push_back(i);
    while (!stack.empty()) {
      const Cell c = plan.cell_at(stack.back());
      stack.pop_back();
      constexpr std::array<Cell, 4> kN{{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}};
      for (Cell d : kN) {
        const Cell n{c.x + d.x, c.y + d.y};
        if (plan.occupied(n)) continue;
        const std::size_t ni = plan.index(n);
        if (label[ni] >= 0) continue;
        label[ni] = next;
        stack.push_back(ni);
      }
    }
    ++next;
  }
  if (count) *count = next;
  return label;
}

// ---------------------------------------------------------------------------
// Poses and motion

enum class LowLevelAction { TurnLeft15, TurnRight15, Forward025, Stop };

struct Pose {
  Vec2 position;
  int heading = 0;  // degrees in [0, 360), always a multiple of 3
  bool operator==(const Pose&) const = default;
};

// ---------------------------------------------------------------------------
// Ray casting

/// Distance along a ray until the first occupied cell, capped at max_range.
/// Exact grid traversal (Amanatides-Woo); returns 0 when starting in an obstacle.
inline double cast_ray(const FloorPlan& plan, Vec2 origin, Vec2 dir, double max_range) {
  const double cs = plan.cell_size();
  Cell c = plan.cell_of(origin);
  if (plan.occupied(c)) return 0.0;
  const double gx = origin.x / cs;
  const double gy = origin.y / cs;
  const int step_x = dir.x > 0 ? 1 : (dir.x < 0 ? -1 : 0);
  const int step_y = dir.y > 0 ? 1 : (dir.y < 0 ? -1 : 0);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const double delta_x = step_x ? cs / std::abs(dir.x) : kInf;
  const double delta_y = step_y ? cs / std::abs(dir.y) : kInf;
  double next_x = step_x > 0 ? (c.x + 1 - gx) * cs / dir.x : (step_x < 0 ? (gx - c.x) * cs / -dir.x : kInf);
  double next_y = step_y > 0 ? (c.y + 1 - gy) * cs / dir.y : (step_y < 0 ? (gy - c.y) * cs / -dir.y : kInf);
  while (true) {
    double t;
    if (next_x < next_y) {
      t = next_x;
      next_x += delta_x;
      c.x += step_x;
    } else {
      t = next_y;
      next_y += delta_y;
      c.y += step_y;
    }
    if (t >= max_range) return max_range;
    if (plan.occupied(c)) return t;
  }
}

inline bool segment_free(const FloorPlan& plan, Vec2 a, Vec2 b) {
  const double len = distance(a, b);
  if (!plan.is_free(a) || !plan.is_free(b)) return false;
  if (len == 0.0) return true;
  return cast_ray(plan, a, (b - a) * (1.0 / len), len) >= len;
}

/// Applies one low-level action. Forward motion slides along the free axis
/// when blocked and is a no-op when fully blocked.
inline Pose step(const FloorPlan& plan, const Pose& pose, LowLevelAction action) {
  Pose out = pose;
  switch (action) {
    case LowLevelAction::TurnLeft15:
      out.heading = (pose.heading + kTurnStepDeg) % 360;
      return out;
    case LowLevelAction::TurnRight15:
      out.heading = (pose.heading + 360 - kTurnStepDeg) % 360;
      return out;
    case LowLevelAction::Stop:
      return out;
    case LowLevelAction::Forward025:
      break;
  }
  const Vec2 d = direction(pose.heading) * kForwardStep;
  const Vec2 p = pose.position;
  if (segment_free(plan, p, p + d)) {
    out.position = p + d;
    return out;
  }
  std::array<Vec2, 2> slides{Vec2{d.x, 0.0}, Vec2{0.0, d.y}};
  if (std::abs(d.y) > std::abs(d.x)) std::swap(slides[0], slides[1]);
  for (Vec2 s : slides) {
    if (s.norm() < 1e-9) continue;
    if (segment_free(plan, p, p + s)) {
      out.position = p + s;
      return out;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Observations

/// 120-ray panoramic depth scan; ray i points at absolute world angle 3°·i.
struct Observation {
  std::array<double, kRayCount> ranges{};
  bool operator==(const Observation&) const = default;
};

/// Scan at `p`; all rays are zero when `p` is inside an obstacle.
inline Observation scan_at(const FloorPlan& plan, Vec2 p) {
  Observation obs;
  if (!plan.is_free(p)) return obs;
  for (int i = 0; i < kRayCount; ++i) obs.ranges[i] = cast_ray(plan, p, direction(kRayAngleDeg * i), kMaxRange);
  return obs;
}

/// Ground-truth scan at a pose. Heading plays no role: rays are indexed by
/// absolute angle.
inline Observation observe(const FloorPlan& plan, const Pose& pose) {
  if (!plan.is_free(pose.position)) throw ContractError("observe: pose is inside an obstacle");
  return scan_at(plan, pose.position);
}

// ---------------------------------------------------------------------------
// Geodesic distance

/// Single-source 8-connected shortest paths on the free grid. Diagonal moves
/// may not cut corners. Path cost is tracked as integer (orthogonal, diagonal)
/// move counts so lengths are exact and symmetric.
class DistanceField {
 public:
  DistanceField() = default;
  DistanceField(const FloorPlan& plan, Vec2 source) : plan_(&plan), cs_(plan.cell_size()) {
    const std::size_t n = plan.occupancy().size();
    ortho_.assign(n, -1);
    diag_.assign(n, -1);
    const Cell s = plan.cell_of(source);
    if (plan.occupied(s)) return;
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    const std::size_t si = plan.index(s);
    ortho_[si] = 0;
    diag_[si] = 0;
    open.push({0.0, si});
    std::vector<std::uint8_t> done(n, 0);
    while (!open.empty()) {
      const auto [cost, i] = open.top();
      open.pop();
      if (done[i]) continue;
      done[i] = 1;
      const Cell c = plan.cell_at(i);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const Cell nb{c.x + dx, c.y + dy};
          if (plan.occupied(nb)) continue;
          const bool diagonal = dx != 0 && dy != 0;
          if (diagonal && (plan.occupied(c.x + dx, c.y) || plan.occupied(c.x, c.y + dy))) continue;
          const std::size_t ni = plan.index(nb);
          if (done[ni]) continue;
          const int no = ortho_[i] + (diagonal ? 0 : 1);
          const int nd = diag_[i] + (diagonal ? 1 : 0);
          const double nc = units(no, nd);
          if (ortho_[ni] < 0 || nc < units(ortho_[ni], diag_[ni])) {
            ortho_[ni] = no;
            diag_[ni] = nd;
            open.push({nc, ni});
          }
        }
      }
    }
  }

  /// Meters from the source to the cell containing `p`, or nullopt.
  std::optional<double> at(Vec2 p) const {
    if (!plan_) return std::nullopt;
    const Cell c = plan_->cell_of(p);
    if (!plan_->in_bounds(c)) return std::nullopt;
    const std::size_t i = plan_->index(c);
    if (ortho_[i] < 0) return std::nullopt;
    return units(ortho_[i], diag_[i]) * cs_;
  }

  /// Like at(), with unreachable mapped to `sentinel`.
  double at_or(Vec2 p, double sentinel) const { return at(p).value_or(sentinel); }

 private:
  static double units(int ortho, int diag) { return ortho + diag * std::numbers::sqrt2; }

  const FloorPlan* plan_ = nullptr;
  double cs_ = kDefaultCellSize;
  std::vector<int> ortho_;
  std::vector<int> diag_;
};

inline std::optional<double> geodesic_distance(const FloorPlan& plan, Vec2 a, Vec2 b) {
  if (plan.cell_of(a) == plan.cell_of(b) && plan.is_free(a)) return 0.0;
  return DistanceField(plan, a).at(b);
}

// ---------------------------------------------------------------------------
// Episodes

inline constexpr double kMinEpisodeGeodesic = 3.0;
inline constexpr double kMaxEpisodeGeodesic = 30.0;

struct EpisodeSpec {
  std::uint64_t plan_seed = 0;
  Pose start;
  Vec2 goal;
  double geodesic_ref = 0.0;
  std::string episode_id;
  bool operator==(const EpisodeSpec&) const = default;
};

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
// Free cells at least `clearance` cells away from any obstacle.
inline bool has_clearance(const FloorPlan& plan, Cell c, int clearance) {
  for (int dy = -clearance; dy <= clearance; ++dy)
    for (int dx = -clearance; dx <= clearance; ++dx)
      if (plan.occupied(c.x + dx, c.y + dy)) return false;
  return true;
}
}  // namespace detail

/// Rejection-samples a start/goal pair in the largest free component with
/// geodesic length in [3, 30] m.
inline EpisodeSpec sample_episode(const FloorPlan& plan, std::uint64_t seed) {
  int count = 0;
  const std::vector<int> label = label_components(plan, &count);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(count), 0);
  for (int l : label)
    if (l >= 0) ++sizes[static_cast<std::size_t>(l)];
  if (count == 0) throw SamplingError("plan has no free cells");
  const int biggest = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  if (sizes[static_cast<std::size_t>(biggest)] < 100) throw SamplingError("no free component with >= 100 cells");

  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < label.size(); ++i)
    if (label[i] == biggest && detail::has_clearance(plan, plan.cell_at(i), 2)) candidates.push_back(i);
  if (candidates.empty()) throw SamplingError("no cell with clearance in the largest component");

  Rng rng(mix64(seed ^ mix64(plan.seed() + 0x5eed)));
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
  std::uniform_int_distribution<int> heading(0, 360 / kTurnStepDeg - 1);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const Vec2 start = plan.cell_center(plan.cell_at(candidates[pick(rng)]));
    const Vec2 goal = plan.cell_center(plan.cell_at(candidates[pick(rng)]));
    const int h = heading(rng) * kTurnStepDeg;
    const auto geo = geodesic_distance(plan, start, goal);
    if (!geo || *geo < kMinEpisodeGeodesic || *geo > kMaxEpisodeGeodesic) continue;
    EpisodeSpec spec;
    spec.plan_seed = plan.seed();
    spec.start = Pose{start, h};
    spec.goal = goal;
    spec.geodesic_ref = *geo;
    spec.episode_id = "env" + std::to_string(plan.seed()) + "-ep" + std::to_string(seed);
    return spec;
  }
  throw SamplingError("episode sampling failed after 1000 attempts");
}

}  // namespace wmnav
