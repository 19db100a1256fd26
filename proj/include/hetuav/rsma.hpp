#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "hetuav/association.hpp"
#include "hetuav/channel.hpp"

namespace hetuav {

/// Rate-splitting precoders for one slot: one common precoder per UAV plus
/// one private precoder per served GT. Per-UAV transmit power is
/// ||p_c||^2 + sum_i ||p_p,i||^2 and must stay within the budget.
struct PrecoderSet {
  std::vector<Eigen::VectorXcd> common;                             // [k]
  std::vector<std::vector<std::pair<int, Eigen::VectorXcd>>> priv;  // [k] -> (gt id, p)

  static PrecoderSet zeros(int n_uav, int m) {
    PrecoderSet p;
    p.common.assign(static_cast<std::size_t>(n_uav), Eigen::VectorXcd::Zero(m));
    p.priv.resize(static_cast<std::size_t>(n_uav));
    return p;
  }

  const Eigen::VectorXcd* private_for(int k, int i) const {
    for (const auto& [gt, vec] : priv[static_cast<std::size_t>(k)])
      if (gt == i) return &vec;
    return nullptr;
  }

  double power(int k) const {
    double p = common[static_cast<std::size_t>(k)].squaredNorm();
    for (const auto& [gt, vec] : priv[static_cast<std::size_t>(k)]) p += vec.squaredNorm();
    return p;
  }
};

inline double beam_power(const Eigen::VectorXcd& h, const Eigen::VectorXcd& p) {
  return std::norm(h.dot(p));  // Eigen dot conjugates the left argument
}

/// |h^H P_k|^2 over every column of UAV k's precoding matrix.
inline double uav_power_seen(const Eigen::VectorXcd& h, const PrecoderSet& pre, int k) {
  double s = beam_power(h, pre.common[static_cast<std::size_t>(k)]);
  for (const auto& [gt, vec] : pre.priv[static_cast<std::size_t>(k)]) s += beam_power(h, vec);
  return s;
}

/// Interference at GT i from every other UAV whose coverage includes it.
inline double inter_system_gt(int k, int i, const SlotChannels& ch, const AssociationState& assoc,
                              const PrecoderSet& pre) {
  double s = 0.0;
  for (int k2 = 0; k2 < ch.n_uav(); ++k2) {
    if (k2 == k || assoc.cover_gt(k2, i) != 1) continue;
    s += uav_power_seen(ch.h_gt[static_cast<std::size_t>(k2)][static_cast<std::size_t>(i)], pre,
                        k2);
  }
  return s;
}

/// Interference at Eve e from every other UAV whose coverage includes it.
inline double inter_system_eve(int k, int e, const SlotChannels& ch, const AssociationState& assoc,
                               const PrecoderSet& pre) {
  double s = 0.0;
  for (int k2 = 0; k2 < ch.n_uav(); ++k2) {
    if (k2 == k || assoc.cover_eve(k2, e) != 1) continue;
    s += uav_power_seen(ch.h_eve[static_cast<std::size_t>(k2)][static_cast<std::size_t>(e)], pre,
                        k2);
  }
  return s;
}

/// SINR of served GT i decoding UAV k's common stream: private streams of the
/// serving UAV, other systems' emissions, and noise act as interference.
inline double sinr_common_gt(int k, int i, const SlotChannels& ch, const AssociationState& assoc,
                             const PrecoderSet& pre, double noise_w) {
  if (assoc.schedule(k, i) != 1) return 0.0;
  const auto& h = ch.h_gt[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  double denom = inter_system_gt(k, i, ch, assoc, pre) + noise_w;
  for (const auto& [gt, vec] : pre.priv[static_cast<std::size_t>(k)])
    denom += beam_power(h, vec);
  return beam_power(h, pre.common[static_cast<std::size_t>(k)]) / denom;
}

/// SINR of served GT i decoding its private stream after the common stream
/// has been removed by SIC.
inline double sinr_private_gt(int k, int i, const SlotChannels& ch, const AssociationState& assoc,
                              const PrecoderSet& pre, double noise_w) {
  if (assoc.schedule(k, i) != 1) return 0.0;
  const auto& h = ch.h_gt[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  const Eigen::VectorXcd* own = pre.private_for(k, i);
  if (own == nullptr) return 0.0;
  double denom = inter_system_gt(k, i, ch, assoc, pre) + noise_w;
  for (const auto& [gt, vec] : pre.priv[static_cast<std::size_t>(k)])
    if (gt != i) denom += beam_power(h, vec);
  return beam_power(h, *own) / denom;
}

/// SINR of Eve e decoding UAV k's common stream (zero when e is outside k's
/// coverage).
inline double sinr_common_eve(int k, int e, const SlotChannels& ch, const AssociationState& assoc,
                              const PrecoderSet& pre, double noise_w) {
  if (assoc.cover_eve(k, e) != 1) return 0.0;
  const auto& h = ch.h_eve[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)];
  double denom = inter_system_eve(k, e, ch, assoc, pre) + noise_w;
  for (const auto& [gt, vec] : pre.priv[static_cast<std::size_t>(k)])
    denom += beam_power(h, vec);
  return beam_power(h, pre.common[static_cast<std::size_t>(k)]) / denom;
}

/// SINR of Eve e decoding GT i's private stream. Unlike the GT, the Eve
/// cannot strip the common stream, so it stays in the denominator.
inline double sinr_private_eve(int k, int e, int i, const SlotChannels& ch,
                               const AssociationState& assoc, const PrecoderSet& pre,
                               double noise_w) {
  if (assoc.cover_eve(k, e) != 1) return 0.0;
  const auto& h = ch.h_eve[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)];
  const Eigen::VectorXcd* own = pre.private_for(k, i);
  if (own == nullptr) return 0.0;
  double denom = inter_system_eve(k, e, ch, assoc, pre) + noise_w +
                 beam_power(h, pre.common[static_cast<std::size_t>(k)]);
  for (const auto& [gt, vec] : pre.priv[static_cast<std::size_t>(k)])
    if (gt != i) denom += beam_power(h, vec);
  return beam_power(h, *own) / denom;
}

inline double rate_of(double sinr) { return std::log2(1.0 + sinr); }

/// Per-slot achievable rates and secrecy summaries.
/// f1 is the worst case over triples (k, served i, Eve covered by k); when no
/// such triple exists it degenerates to the worst served-GT rate, and to zero
/// with nothing served. r_secrecy uses the strongest Eve across the whole
/// area. Negative secrecy values are reported as-is.
struct RatesReport {
  std::vector<int> serving_uav;  // [i], -1 when unserved
  Eigen::VectorXd r_common;      // [i]
  Eigen::VectorXd r_private;     // [i]
  Eigen::VectorXd r_total;       // [i]
  Eigen::MatrixXd r_eve_common;   // [e][i]
  Eigen::MatrixXd r_eve_private;  // [e][i]
  Eigen::MatrixXd r_eve;          // [e][i]
  double f1 = 0.0;
  Eigen::VectorXd r_secrecy;  // [i]
};

inline RatesReport rates_report(const SlotChannels& ch, const AssociationState& assoc,
                                const PrecoderSet& pre, double noise_w) {
  const int n_k = ch.n_uav();
  const int n_i = ch.n_gt();
  const int n_e = ch.n_eve();
  RatesReport rep;
  rep.serving_uav.assign(static_cast<std::size_t>(n_i), -1);
  rep.r_common = Eigen::VectorXd::Zero(n_i);
  rep.r_private = Eigen::VectorXd::Zero(n_i);
  rep.r_total = Eigen::VectorXd::Zero(n_i);
  rep.r_eve_common = Eigen::MatrixXd::Zero(n_e, n_i);
  rep.r_eve_private = Eigen::MatrixXd::Zero(n_e, n_i);
  rep.r_eve = Eigen::MatrixXd::Zero(n_e, n_i);
  rep.r_secrecy = Eigen::VectorXd::Zero(n_i);

  const auto eve_sets = eavesdropper_sets(assoc.cover_eve);
  double worst = std::numeric_limits<double>::infinity();
  bool any_triple = false;
  double worst_rate = std::numeric_limits<double>::infinity();
  bool any_served = false;

  for (int k = 0; k < n_k; ++k) {
    for (int i = 0; i < n_i; ++i) {
      if (assoc.schedule(k, i) != 1) continue;
      any_served = true;
      rep.serving_uav[static_cast<std::size_t>(i)] = k;
      rep.r_common(i) = rate_of(sinr_common_gt(k, i, ch, assoc, pre, noise_w));
      rep.r_private(i) = rate_of(sinr_private_gt(k, i, ch, assoc, pre, noise_w));
      rep.r_total(i) = rep.r_common(i) + rep.r_private(i);
      worst_rate = std::min(worst_rate, rep.r_total(i));

      double strongest_eve = 0.0;
      for (int e = 0; e < n_e; ++e) {
        rep.r_eve_common(e, i) = rate_of(sinr_common_eve(k, e, ch, assoc, pre, noise_w));
        rep.r_eve_private(e, i) = rate_of(sinr_private_eve(k, e, i, ch, assoc, pre, noise_w));
        rep.r_eve(e, i) = rep.r_eve_common(e, i) + rep.r_eve_private(e, i);
        strongest_eve = std::max(strongest_eve, rep.r_eve(e, i));
      }
      rep.r_secrecy(i) = rep.r_total(i) - strongest_eve;
      for (int e : eve_sets[static_cast<std::size_t>(k)]) {
        any_triple = true;
        worst = std::min(worst, rep.r_total(i) - rep.r_eve(e, i));
      }
    }
  }

  if (any_triple) rep.f1 = worst;
  else if (any_served) rep.f1 = worst_rate;
  else rep.f1 = 0.0;
  return rep;
}

}  // namespace hetuav
