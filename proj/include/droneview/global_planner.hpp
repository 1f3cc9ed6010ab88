#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

#include "droneview/local_planner.hpp"

namespace droneview {

struct CandidateViewpoint {
  DroneState state;
  double cost{0.0};  // global term set
  double created_at{0.0};
  std::uint64_t cluster_id{0};
};

struct StoreConfig {
  std::size_t capacity{3};
  double min_separation{0.5};  // m
  double ttl{10.0};            // s
};

/// Best alternate viewpoints, sorted by ascending cost. Invariants after every
/// update: size <= capacity, pairwise separation >= min_separation, no entry
/// older than ttl.
struct CandidateStore {
  StoreConfig config;
  std::vector<CandidateViewpoint> candidates;
  std::uint64_t next_cluster_id{1};

  bool empty() const { return candidates.empty(); }
  std::size_t size() const { return candidates.size(); }
  const CandidateViewpoint* find(std::uint64_t cluster_id) const;
};

class EmptyStoreError : public std::logic_error {
 public:
  EmptyStoreError() : std::logic_error("candidate store is empty") {}
};

struct GlobalPlannerConfig {
  StoreConfig store;
  SolverOptions solver{200};
};

/// Uniform position in the workspace, uniform yaw in (-pi, pi].
DroneState sample_seed(const Workspace& workspace, std::mt19937_64& rng);

/// Minimises the global term set from `seed` over the whole workspace; c9 is
/// measured against `current_drone`.
CandidateViewpoint refine_candidate(const DroneState& seed, const SceneSnapshot& scene,
                                    const DroneState& current_drone, const ObjectiveParams& params,
                                    double now = 0.0, const SolverOptions& options = SolverOptions{200});

/// Expires, merges and evicts as described on CandidateStore. A new candidate
/// within min_separation of existing ones replaces them only if it is cheaper
/// than all of them; the survivor keeps the oldest matching cluster id.
CandidateStore update_store(CandidateStore store, CandidateViewpoint candidate, double now);

/// Drops expired entries only.
CandidateStore expire_store(CandidateStore store, double now);

/// Next index in ascending-cost order; no or out-of-range current selection
/// gives 0. Throws EmptyStoreError.
std::pair<std::size_t, CandidateViewpoint> toggle(const CandidateStore& store,
                                                  std::optional<std::size_t> current_index);

/// Draws a seed, refines it, and folds it into the store.
CandidateStore global_iteration(const CandidateStore& store, const SceneSnapshot& scene,
                                const DroneState& current_drone, const ObjectiveParams& params, double now,
                                std::mt19937_64& rng, const SolverOptions& options = SolverOptions{200});

}  // namespace droneview
