#include "droneview/cost_map.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"

namespace droneview {
namespace {

constexpr const char* kFormat = "droneview-costmap";
constexpr int kVersion = 1;
constexpr const char* kColumns = "x,y,z,cost,log10";

void append_number(std::string& out, double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, r.ptr);
}

double parse_number(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
    throw CostMapError("line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

Vec3 vec3(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) throw CostMapError("header: expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::array<int, 3> GridSpec::dims() const {
  std::array<int, 3> d{};
  for (int a = 0; a < 3; ++a) d[a] = static_cast<int>(std::floor((max[a] - min[a]) / resolution + 1e-9)) + 1;
  return d;
}

void GridSpec::validate() const {
  if (!(resolution > 0.0) || !std::isfinite(resolution)) throw std::invalid_argument("resolution: must be > 0");
  if (!min.allFinite() || !max.allFinite()) throw std::invalid_argument("bounds: must be finite");
  if ((max.array() < min.array()).any()) throw std::invalid_argument("bounds: max must be >= min");
}

std::optional<std::size_t> CostMap::cell_of(const Vec3& p) const {
  std::array<int, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const double f = (p[a] - spec.min[a]) / spec.resolution;
    const long r = std::lround(f);
    if (r < 0 || r >= dims[a] || std::abs(f - static_cast<double>(r)) > 0.5 + 1e-9) return std::nullopt;
    c[a] = static_cast<int>(r);
  }
  return index(c[0], c[1], c[2]);
}

double yaw_facing(const Vec3& position, const Vec3& target) {
  const Vec3 d = target - position;
  if (std::hypot(d.x(), d.y()) < 1e-12) return 0.0;
  return std::atan2(d.y(), d.x());
}

double view_cost(const CostModel& model, const Vec3& position) {
  const DroneState s = DroneState::from(position, yaw_facing(position, model.scene().ee.position));
  // The reference only feeds c9, which is dropped below.
  const CostBreakdown b = model.evaluate(s, s, TermSet::Global);
  return b.total - model.params().weights[8] * b.c[8];
}

CostMap export_cost_map(const SceneSnapshot& scene, const ObjectiveParams& params, const GridSpec& grid) {
  grid.validate();
  const CostModel model(scene, params);
  CostMap map;
  map.spec = grid;
  map.dims = grid.dims();
  map.values.resize(static_cast<std::size_t>(map.dims[0]) * map.dims[1] * map.dims[2]);
  for (int k = 0; k < map.dims[2]; ++k)
    for (int j = 0; j < map.dims[1]; ++j)
      for (int i = 0; i < map.dims[0]; ++i) map.values[map.index(i, j, k)] = view_cost(model, map.point(i, j, k));
  return map;
}

void write_cost_map(const CostMap& map, std::ostream& out) {
  const nlohmann::json header{{"format", kFormat},
                              {"version", kVersion},
                              {"min", {map.spec.min.x(), map.spec.min.y(), map.spec.min.z()}},
                              {"max", {map.spec.max.x(), map.spec.max.y(), map.spec.max.z()}},
                              {"resolution", map.spec.resolution},
                              {"dims", map.dims},
                              {"yaw_policy", "face_target"},
                              {"terms", "global_without_novelty"},
                              {"log_floor", kCostMapLogFloor},
                              {"columns", kColumns}};
  out << header.dump() << '\n' << kColumns << '\n';
  std::string line;
  for (int k = 0; k < map.dims[2]; ++k)
    for (int j = 0; j < map.dims[1]; ++j)
      for (int i = 0; i < map.dims[0]; ++i) {
        const Vec3 p = map.point(i, j, k);
        const double v = map.values[map.index(i, j, k)];
        line.clear();
        for (double x : {p.x(), p.y(), p.z(), v}) {
          append_number(line, x);
          line.push_back(',');
        }
        append_number(line, std::log10(std::max(v, kCostMapLogFloor)));
        out << line << '\n';
      }
}

CostMap read_cost_map(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw CostMapError("missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw CostMapError(std::string("header: ") + e.what());
  }
  if (header.value("format", "") != kFormat) throw CostMapError("header: unknown format");
  if (header.value("version", 0) != kVersion) throw CostMapError("header: unsupported version");
  CostMap map;
  try {
    map.spec.min = vec3(header.at("min"));
    map.spec.max = vec3(header.at("max"));
    map.spec.resolution = header.at("resolution").get<double>();
    map.dims = header.at("dims").get<std::array<int, 3>>();
  } catch (const nlohmann::json::exception& e) {
    throw CostMapError(std::string("header: ") + e.what());
  }
  try {
    map.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw CostMapError(std::string("header: ") + e.what());
  }
  if (map.dims != map.spec.dims()) throw CostMapError("header: dims disagree with bounds and resolution");
  if (!std::getline(in, line) || line != kColumns) throw CostMapError("line 2: expected column names");

  const std::size_t n = static_cast<std::size_t>(map.dims[0]) * map.dims[1] * map.dims[2];
  map.values.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    const std::size_t lineno = c + 3;
    if (!std::getline(in, line)) throw CostMapError("line " + std::to_string(lineno) + ": missing row");
    std::array<double, 5> f{};
    std::string_view rest(line);
    for (std::size_t col = 0; col < f.size(); ++col) {
      const auto comma = rest.find(',');
      if ((comma == std::string_view::npos) != (col + 1 == f.size())) {
        throw CostMapError("line " + std::to_string(lineno) + ": expected 5 columns");
      }
      f[col] = parse_number(rest.substr(0, comma), lineno);
      if (comma != std::string_view::npos) rest.remove_prefix(comma + 1);
    }
    const int i = static_cast<int>(c % map.dims[0]);
    const int j = static_cast<int>((c / map.dims[0]) % map.dims[1]);
    const int k = static_cast<int>(c / (static_cast<std::size_t>(map.dims[0]) * map.dims[1]));
    if ((Vec3(f[0], f[1], f[2]) - map.point(i, j, k)).norm() > 1e-9 * (1.0 + map.point(i, j, k).norm())) {
      throw CostMapError("line " + std::to_string(lineno) + ": cell position out of order");
    }
    map.values[c] = f[3];
  }
  if (std::getline(in, line) && !line.empty()) throw CostMapError("trailing data after last row");
  return map;
}

Basins find_basins(const CostMap& map, double quantile) {
  if (map.values.empty()) throw std::invalid_argument("empty cost map");
  if (!(quantile >= 0.0 && quantile <= 1.0)) throw std::invalid_argument("quantile: must be in [0, 1]");
  std::vector<double> sorted = map.values;
  const auto nth = sorted.begin() + static_cast<std::ptrdiff_t>(std::floor(quantile * (sorted.size() - 1)));
  std::nth_element(sorted.begin(), nth, sorted.end());

  Basins b;
  b.threshold = *nth;
  b.labels.assign(map.values.size(), -1);
  const auto& d = map.dims;
  std::vector<std::array<int, 3>> stack;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const std::size_t seed = map.index(i, j, k);
        if (map.values[seed] > b.threshold || b.labels[seed] >= 0) continue;
        b.labels[seed] = b.count;
        stack.push_back({i, j, k});
        while (!stack.empty()) {
          const auto c = stack.back();
          stack.pop_back();
          for (int dz = -1; dz <= 1; ++dz)
            for (int dy = -1; dy <= 1; ++dy)
              for (int dx = -1; dx <= 1; ++dx) {
                const int x = c[0] + dx, y = c[1] + dy, z = c[2] + dz;
                if (x < 0 || y < 0 || z < 0 || x >= d[0] || y >= d[1] || z >= d[2]) continue;
                const std::size_t n = map.index(x, y, z);
                if (map.values[n] <= b.threshold && b.labels[n] < 0) {
                  b.labels[n] = b.count;
                  stack.push_back({x, y, z});
                }
              }
        }
        ++b.count;
      }
  return b;
}

int basin_at(const CostMap& map, const Basins& basins, const Vec3& p) {
  const auto c = map.cell_of(p);
  return c ? basins.labels[*c] : -1;
}

}  // namespace droneview
