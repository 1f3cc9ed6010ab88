#include "droneview/global_planner.hpp"

#include <algorithm>
#include <numbers>

namespace droneview {

const CandidateViewpoint* CandidateStore::find(std::uint64_t cluster_id) const {
  for (const auto& c : candidates) {
    if (c.cluster_id == cluster_id) return &c;
  }
  return nullptr;
}

DroneState sample_seed(const Workspace& workspace, std::mt19937_64& rng) {
  if (!workspace.valid()) throw std::invalid_argument("workspace must be non-empty");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec3 p;
  for (int i = 0; i < 3; ++i) p[i] = workspace.min[i] + unit(rng) * (workspace.max[i] - workspace.min[i]);
  // Map [0, 1) onto (-pi, pi].
  const double yaw = std::numbers::pi - 2.0 * std::numbers::pi * unit(rng);
  return {p.x(), p.y(), p.z(), yaw};
}

CandidateViewpoint refine_candidate(const DroneState& seed, const SceneSnapshot& scene,
                                    const DroneState& current_drone, const ObjectiveParams& params, double now,
                                    const SolverOptions& options) {
  const CostModel model(scene, params);
  SearchBox box;
  box.dpos = (scene.workspace.max - scene.workspace.min).cwiseMax(1e-9);
  box.dyaw = std::numbers::pi;
  const DroneState start = DroneState::from(scene.workspace.clamp(seed.position()), seed.yaw);
  const auto f = [&](const DroneState& s) { return model.total(s, current_drone, TermSet::Global); };
  const auto r = solver_minimize(f, start, box, options, &scene.workspace);
  CandidateViewpoint c;
  c.state = r.x;
  c.cost = r.f;
  c.created_at = now;
  return c;
}

CandidateStore expire_store(CandidateStore store, double now) {
  auto& v = store.candidates;
  v.erase(std::remove_if(v.begin(), v.end(),
                         [&](const CandidateViewpoint& c) { return now - c.created_at > store.config.ttl; }),
          v.end());
  return store;
}

CandidateStore update_store(CandidateStore store, CandidateViewpoint candidate, double now) {
  store = expire_store(std::move(store), now);
  auto& v = store.candidates;
  const Vec3 p = candidate.state.position();
  std::vector<std::size_t> near;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if ((v[i].state.position() - p).norm() < store.config.min_separation) near.push_back(i);
  }
  if (near.empty()) {
    candidate.cluster_id = store.next_cluster_id++;
    v.push_back(candidate);
  } else {
    double cheapest = v[near.front()].cost;
    std::uint64_t oldest_id = v[near.front()].cluster_id;
    for (auto i : near) {
      cheapest = std::min(cheapest, v[i].cost);
      oldest_id = std::min(oldest_id, v[i].cluster_id);
    }
    if (!(candidate.cost < cheapest)) return store;
    candidate.cluster_id = oldest_id;
    for (auto it = near.rbegin(); it != near.rend(); ++it) v.erase(v.begin() + static_cast<std::ptrdiff_t>(*it));
    v.push_back(candidate);
  }
  std::stable_sort(v.begin(), v.end(), [](const CandidateViewpoint& a, const CandidateViewpoint& b) {
    return a.cost < b.cost || (a.cost == b.cost && a.cluster_id < b.cluster_id);
  });
  if (v.size() > store.config.capacity) v.resize(store.config.capacity);
  return store;
}

std::pair<std::size_t, CandidateViewpoint> toggle(const CandidateStore& store,
                                                  std::optional<std::size_t> current_index) {
  if (store.empty()) throw EmptyStoreError();
  std::size_t next = 0;
  if (current_index && *current_index < store.size()) next = (*current_index + 1) % store.size();
  return {next, store.candidates[next]};
}

CandidateStore global_iteration(const CandidateStore& store, const SceneSnapshot& scene,
                                const DroneState& current_drone, const ObjectiveParams& params, double now,
                                std::mt19937_64& rng, const SolverOptions& options) {
  const DroneState seed = sample_seed(scene.workspace, rng);
  return update_store(store, refine_candidate(seed, scene, current_drone, params, now, options), now);
}

}  // namespace droneview
