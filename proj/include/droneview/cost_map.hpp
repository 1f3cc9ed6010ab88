#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "droneview/objectives.hpp"
#include "droneview/scene.hpp"

namespace droneview {

class CostMapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Axis-aligned lattice. Cells sit at min + resolution * (i, j, k) up to max;
/// a degenerate axis (min == max) gives a single layer.
struct GridSpec {
  Vec3 min{Vec3::Zero()};
  Vec3 max{Vec3::Zero()};
  double resolution{0.05};

  std::array<int, 3> dims() const;
  void validate() const;
};

struct CostMap {
  GridSpec spec;
  std::array<int, 3> dims{};
  std::vector<double> values;  // x fastest, then y, then z

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  Vec3 point(int i, int j, int k) const { return spec.min + spec.resolution * Vec3(i, j, k); }
  /// Nearest cell to p, or nothing when p lies more than half a cell outside.
  std::optional<std::size_t> cell_of(const Vec3& p) const;
};

/// Yaw that points the camera's horizontal heading at the end effector; this
/// minimises c3 for any pitch in (-pi/2, pi/2). Directly above the target gives 0.
double yaw_facing(const Vec3& position, const Vec3& target);

/// Global term set without the novelty term, at the c3-minimising yaw.
double view_cost(const CostModel& model, const Vec3& position);

CostMap export_cost_map(const SceneSnapshot& scene, const ObjectiveParams& params, const GridSpec& grid);

/// Floor applied before taking log10 of a cost.
inline constexpr double kCostMapLogFloor = 1e-9;

/// One JSON header line, then CSV with columns x,y,z,cost,log10.
void write_cost_map(const CostMap& map, std::ostream& out);
CostMap read_cost_map(std::istream& in);

struct Basins {
  double threshold{0.0};
  int count{0};
  std::vector<int> labels;  // per cell; -1 above threshold
};

/// Connected components (face, edge and corner neighbours) of the cells whose
/// cost is at or below the given quantile of all cells.
Basins find_basins(const CostMap& map, double quantile = 0.05);

/// Basin label of the cell nearest p, or -1.
int basin_at(const CostMap& map, const Basins& basins, const Vec3& p);

}  // namespace droneview
