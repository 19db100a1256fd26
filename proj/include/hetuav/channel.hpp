#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "hetuav/rng.hpp"
#include "hetuav/world.hpp"

namespace hetuav {

inline constexpr double k_speed_of_light = 299792458.0;  // m/s

enum class NodeKind : std::uint64_t { gt = 1, eve = 2 };

/// Air-to-ground channel of one UAV->node link at one slot.
struct LinkChannel {
  Eigen::VectorXcd h;  // length M, dimensionless amplitude gain
  int from_uav = 0;
  NodeKind kind = NodeKind::gt;
  int to_node = 0;
  int time_slot = 0;
};

/// Logistic LoS probability in the elevation angle (degrees).
/// Ground nodes cannot be closer than the altitude.
inline double los_probability(double d, double h, double a, double b) {
  if (!(d >= h) || !(h > 0.0))
    throw std::invalid_argument("los_probability: requires d >= H > 0");
  const double theta_deg = std::asin(h / d) * 180.0 / M_PI;
  return 1.0 / (1.0 + a * std::exp(-b * (theta_deg - a)));
}

/// Free-space component of the path loss (dB).
inline double free_space_loss_db(double d, double f_c) {
  return 20.0 * std::log10(4.0 * M_PI * f_c * d / k_speed_of_light);
}

/// Expected path loss (dB): LoS/NLoS excess losses weighted by the
/// LoS probability, plus free-space loss.
inline double path_loss_db(double d, double h, double a, double b, double eta_los,
                           double eta_nlos, double f_c) {
  const double p_los = los_probability(d, h, a, b);
  return p_los * eta_los + (1.0 - p_los) * eta_nlos + free_space_loss_db(d, f_c);
}

/// Unit-variance circularly-symmetric complex Gaussian vector
/// (Rayleigh amplitude small-scale fading).
inline Eigen::VectorXcd draw_small_scale(RngStream& rng, int m) {
  Eigen::VectorXcd v(m);
  const double scale = std::sqrt(0.5);
  for (int i = 0; i < m; ++i)
    v(i) = std::complex<double>(scale * rng.normal(), scale * rng.normal());
  return v;
}

/// Stream key for the (seed, slot, uav, node) link draw. Trajectory choices
/// elsewhere in an episode do not perturb this link's fading.
inline RngStream link_rng(std::uint64_t seed, int t, int uav, NodeKind kind, int node) {
  return RngStream(derive_key(seed, {0x6c696e6bULL,  // stream tag
                                     static_cast<std::uint64_t>(t),
                                     static_cast<std::uint64_t>(uav),
                                     static_cast<std::uint64_t>(kind),
                                     static_cast<std::uint64_t>(node)}));
}

inline LinkChannel link_channel(const Eigen::Vector3d& uav_pos, const Eigen::Vector2d& node_pos,
                                const ScenarioConfig& cfg, RngStream& rng, int uav, NodeKind kind,
                                int node, int t) {
  const double d = (uav_pos - Eigen::Vector3d(node_pos.x(), node_pos.y(), 0.0)).norm();
  const double loss_db = path_loss_db(d, cfg.h_uav, cfg.s_curve_a, cfg.s_curve_b, cfg.eta_los,
                                      cfg.eta_nlos, cfg.f_c);
  LinkChannel link;
  link.h = std::sqrt(std::pow(10.0, -loss_db / 10.0)) * draw_small_scale(rng, cfg.m_antennas);
  link.from_uav = uav;
  link.kind = kind;
  link.to_node = node;
  link.time_slot = t;
  return link;
}

/// All UAV->node channels of one slot: h_gt[k][i], h_eve[k][e].
struct SlotChannels {
  std::vector<std::vector<Eigen::VectorXcd>> h_gt;
  std::vector<std::vector<Eigen::VectorXcd>> h_eve;

  int n_uav() const { return static_cast<int>(h_gt.size()); }
  int n_gt() const { return h_gt.empty() ? 0 : static_cast<int>(h_gt[0].size()); }
  int n_eve() const { return h_eve.empty() ? 0 : static_cast<int>(h_eve[0].size()); }
};

inline SlotChannels draw_slot_channels(const ScenarioConfig& cfg,
                                       const std::vector<Eigen::Vector3d>& uav_pos,
                                       const std::vector<Eigen::Vector2d>& gt_pos,
                                       const std::vector<Eigen::Vector2d>& eve_pos,
                                       std::uint64_t seed, int t) {
  SlotChannels ch;
  const int n_k = static_cast<int>(uav_pos.size());
  ch.h_gt.resize(static_cast<std::size_t>(n_k));
  ch.h_eve.resize(static_cast<std::size_t>(n_k));
  for (int k = 0; k < n_k; ++k) {
    for (int i = 0; i < static_cast<int>(gt_pos.size()); ++i) {
      auto rng = link_rng(seed, t, k, NodeKind::gt, i);
      ch.h_gt[static_cast<std::size_t>(k)].push_back(
          link_channel(uav_pos[static_cast<std::size_t>(k)], gt_pos[static_cast<std::size_t>(i)],
                       cfg, rng, k, NodeKind::gt, i, t)
              .h);
    }
    for (int e = 0; e < static_cast<int>(eve_pos.size()); ++e) {
      auto rng = link_rng(seed, t, k, NodeKind::eve, e);
      ch.h_eve[static_cast<std::size_t>(k)].push_back(
          link_channel(uav_pos[static_cast<std::size_t>(k)], eve_pos[static_cast<std::size_t>(e)],
                       cfg, rng, k, NodeKind::eve, e, t)
              .h);
    }
  }
  return ch;
}

/// AWGN power in watts from a PSD in dBm/Hz over bandwidth B.
inline double noise_power(double psd_dbm_hz, double bandwidth_hz) {
  const double dbm = psd_dbm_hz + 10.0 * std::log10(bandwidth_hz);
  return std::pow(10.0, (dbm - 30.0) / 10.0);
}

inline double ScenarioConfig::noise_power_w() const {
  return noise_power(noise_psd, bandwidth_b);
}

}  // namespace hetuav
