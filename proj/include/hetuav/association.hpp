#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <tuple>
#include <vector>

#include "hetuav/channel.hpp"

namespace hetuav {

/// Coverage and scheduling state for one slot.
/// schedule[k][i]=1 implies cover_gt[k][i]=1; row sums of schedule respect
/// per-UAV capacity; column sums are at most one.
struct AssociationState {
  Eigen::MatrixXi cover_gt;   // N_K x N_I
  Eigen::MatrixXi cover_eve;  // N_K x N_E
  Eigen::MatrixXi schedule;   // N_K x N_I

  std::vector<int> served_gts(int k) const {
    std::vector<int> out;
    for (int i = 0; i < schedule.cols(); ++i)
      if (schedule(k, i) == 1) out.push_back(i);
    return out;
  }
};

/// Binary coverage: node x is covered by UAV k iff the 3D distance is within
/// that UAV's coverage range (boundary inclusive).
inline Eigen::MatrixXi coverage_matrix(const std::vector<Eigen::Vector3d>& uav_pos,
                                       const std::vector<Eigen::Vector2d>& node_pos,
                                       const std::vector<double>& c_r) {
  const int n_k = static_cast<int>(uav_pos.size());
  const int n_x = static_cast<int>(node_pos.size());
  Eigen::MatrixXi cover = Eigen::MatrixXi::Zero(n_k, n_x);
  for (int k = 0; k < n_k; ++k) {
    const double range = c_r.size() == 1 ? c_r[0] : c_r.at(static_cast<std::size_t>(k));
    for (int x = 0; x < n_x; ++x) {
      const Eigen::Vector3d ground(node_pos[static_cast<std::size_t>(x)].x(),
                                   node_pos[static_cast<std::size_t>(x)].y(), 0.0);
      if ((uav_pos[static_cast<std::size_t>(k)] - ground).norm() <= range) cover(k, x) = 1;
    }
  }
  return cover;
}

/// Greedy capacity-constrained assignment: covered (k,i) pairs in descending
/// order of channel power ||h||^2; ties break toward the lower (k,i) pair.
/// Each GT lands on at most one UAV; each UAV serves at most its capacity.
inline Eigen::MatrixXi schedule_gts(const Eigen::MatrixXd& gain2, const Eigen::MatrixXi& cover_gt,
                                    const std::vector<int>& n_s) {
  const int n_k = static_cast<int>(cover_gt.rows());
  const int n_i = static_cast<int>(cover_gt.cols());
  struct Cand {
    double g;
    int k, i;
  };
  std::vector<Cand> cands;
  for (int k = 0; k < n_k; ++k)
    for (int i = 0; i < n_i; ++i)
      if (cover_gt(k, i) == 1) cands.push_back({gain2(k, i), k, i});
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.g != b.g) return a.g > b.g;
    return std::tie(a.k, a.i) < std::tie(b.k, b.i);
  });

  Eigen::MatrixXi schedule = Eigen::MatrixXi::Zero(n_k, n_i);
  std::vector<int> residual(static_cast<std::size_t>(n_k));
  for (int k = 0; k < n_k; ++k)
    residual[static_cast<std::size_t>(k)] = n_s.size() == 1 ? n_s[0] : n_s.at(static_cast<std::size_t>(k));
  std::vector<bool> taken(static_cast<std::size_t>(n_i), false);
  for (const auto& c : cands) {
    if (taken[static_cast<std::size_t>(c.i)] || residual[static_cast<std::size_t>(c.k)] == 0)
      continue;
    schedule(c.k, c.i) = 1;
    taken[static_cast<std::size_t>(c.i)] = true;
    --residual[static_cast<std::size_t>(c.k)];
  }
  return schedule;
}

/// Per-UAV sets of eavesdropper indices inside that UAV's coverage.
inline std::vector<std::vector<int>> eavesdropper_sets(const Eigen::MatrixXi& cover_eve) {
  std::vector<std::vector<int>> sets(static_cast<std::size_t>(cover_eve.rows()));
  for (int k = 0; k < cover_eve.rows(); ++k)
    for (int e = 0; e < cover_eve.cols(); ++e)
      if (cover_eve(k, e) == 1) sets[static_cast<std::size_t>(k)].push_back(e);
  return sets;
}

}  // namespace hetuav
