#include "droneview/local_planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace droneview {
namespace {

using Vec4 = Eigen::Vector4d;

// Optimisation variables are (x, y, z, yaw offset from x0) mapped affinely
// onto [-1, 1]^4; fixed dimensions have zero scale.
struct Frame {
  Vec4 center;
  Vec4 scale;
  double yaw0;

  DroneState state(const Vec4& z) const {
    const Vec4 y = center + scale.cwiseProduct(z);
    return {y[0], y[1], y[2], wrap_angle(yaw0 + y[3])};
  }
};

Vec4 project(Vec4 z) { return z.cwiseMax(-1.0).cwiseMin(1.0); }

}  // namespace

SolverResult solver_minimize(const CostFn& f, const DroneState& x0, const SearchBox& box,
                             const SolverOptions& options, const Workspace* workspace) {
  if (!box.valid()) throw std::invalid_argument("search box half-widths must be > 0");

  Vec4 lo(x0.x - box.dpos.x(), x0.y - box.dpos.y(), x0.z - box.dpos.z(), -box.dyaw);
  Vec4 hi(x0.x + box.dpos.x(), x0.y + box.dpos.y(), x0.z + box.dpos.z(), box.dyaw);
  const Vec4 origin(x0.x, x0.y, x0.z, 0.0);
  if (workspace) {
    lo.head<3>() = lo.head<3>().cwiseMax(workspace->min);
    hi.head<3>() = hi.head<3>().cwiseMin(workspace->max);
  }
  for (int i = 0; i < 4; ++i) {
    if (lo[i] > hi[i]) lo[i] = hi[i] = origin[i];  // start outside the workspace: pin that axis
  }
  Frame frame{0.5 * (lo + hi), 0.5 * (hi - lo), x0.yaw};

  Vec4 h_norm;
  const Vec4 h_real(options.pos_step, options.pos_step, options.pos_step, options.yaw_step);
  for (int i = 0; i < 4; ++i) h_norm[i] = frame.scale[i] > 0.0 ? h_real[i] / frame.scale[i] : 0.0;

  SolverResult out;
  auto eval = [&](const Vec4& z) {
    ++out.evaluations;
    return f(frame.state(z));
  };

  Vec4 z = Vec4::Zero();
  for (int i = 0; i < 4; ++i) z[i] = frame.scale[i] > 0.0 ? (origin[i] - frame.center[i]) / frame.scale[i] : 0.0;
  const Vec4 z0 = z;
  double fz = f(x0);
  ++out.evaluations;
  out.x = x0;
  out.f = fz;

  for (int it = 0; it < options.max_iterations; ++it) {
    out.iterations = it + 1;
    Vec4 g = Vec4::Zero();
    Vec4 curv = Vec4::Zero();
    Vec4 best_sample = z;
    double best_sample_f = fz;
    for (int i = 0; i < 4; ++i) {
      if (h_norm[i] == 0.0) continue;
      Vec4 zp = z, zm = z;
      zp[i] += h_norm[i];
      zm[i] -= h_norm[i];
      const double fp = eval(zp);
      const double fm = eval(zm);
      g[i] = (fp - fm) / (2.0 * h_norm[i]);
      curv[i] = (fp - 2.0 * fz + fm) / (h_norm[i] * h_norm[i]);
      if (zp[i] <= 1.0 && fp < best_sample_f) {
        best_sample_f = fp;
        best_sample = zp;
      }
      if (zm[i] >= -1.0 && fm < best_sample_f) {
        best_sample_f = fm;
        best_sample = zm;
      }
    }
    // Components pushing out of an active bound do not count.
    Vec4 free_g = g;
    for (int i = 0; i < 4; ++i) {
      if ((z[i] >= 1.0 && g[i] < 0.0) || (z[i] <= -1.0 && g[i] > 0.0) || h_norm[i] == 0.0) free_g[i] = 0.0;
    }
    if (free_g.lpNorm<Eigen::Infinity>() == 0.0) {
      if (best_sample_f < fz) {
        z = best_sample;
        fz = best_sample_f;
        continue;
      }
      break;
    }

    // Diagonal Newton direction; axes without positive curvature step to the box edge.
    Vec4 newton_dir = Vec4::Zero();
    for (int i = 0; i < 4; ++i) {
      if (free_g[i] == 0.0) continue;
      newton_dir[i] = curv[i] > 0.0 ? -free_g[i] / curv[i] : (free_g[i] > 0.0 ? -2.0 : 2.0);
    }
    const Vec4 gradient = -2.0 * free_g / free_g.lpNorm<Eigen::Infinity>();

    bool accepted = false;
    Vec4 next = z;
    double f_next = fz;
    const Vec4& newton = newton_dir;
    for (const Vec4* dir : {&newton, &gradient}) {
      for (double alpha = 1.0; alpha > 1e-6; alpha *= 0.5) {
        const Vec4 trial = project(z + alpha * *dir);
        if ((trial - z).lpNorm<Eigen::Infinity>() < options.min_step) break;
        const double ft = eval(trial);
        if (ft < fz) {
          next = trial;
          f_next = ft;
          accepted = true;
          break;
        }
      }
      if (accepted) break;
    }
    if (!accepted || best_sample_f < f_next) {
      if (best_sample_f >= fz) break;
      next = best_sample;
      f_next = best_sample_f;
    }
    const double moved = (next - z).lpNorm<Eigen::Infinity>();
    z = next;
    fz = f_next;
    if (moved < options.min_step) break;
  }

  out.x = z == z0 ? x0 : frame.state(z);
  out.f = fz;
  return out;
}

PlanResult plan_step(const DroneState& prev_cmd, const CostModel& model, const SearchBox& box,
                     const SolverOptions& options) {
  const auto f = [&](const DroneState& s) { return model.total(s, prev_cmd, TermSet::Local); };
  const auto r = solver_minimize(f, prev_cmd, box, options, &model.scene().workspace);
  PlanResult out;
  out.cmd = r.x;
  out.breakdown = model.evaluate(r.x, prev_cmd, TermSet::Local);
  return out;
}

PlanResult plan_step(const DroneState& prev_cmd, const SceneSnapshot& scene, const ObjectiveParams& params,
                     const SearchBox& box, const SolverOptions& options) {
  const CostModel model(scene, params);
  return plan_step(prev_cmd, model, box, options);
}

}  // namespace droneview
