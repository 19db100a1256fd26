#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

// Brute-force secrecy benchmark for a single-UAV, single-GT, single-Eve link.
// Rates depend on a beam direction v only through the two received powers
// |h_g^H v|^2 and |h_e^H v|^2, so the direction grid runs over the polar
// angle against the GT channel and the relative phase toward the Eve
// component: v(theta, psi) gives |h_g^H v|^2 = ||h_g||^2 cos^2(theta) and
// |h_e^H v|^2 = |a|^2 c + |b|^2 (1-c) + 2|a||b| sqrt(c(1-c)) cos(psi) with
// c = cos^2(theta) and h_e = a h_g/||h_g|| + b (orthogonal part). The power
// split between common and private streams and both stream directions are
// scanned at the given step; candidates where the common stream would not be
// decodable at the GT at least as fast as at the Eve are skipped.
inline double grid_oracle_f1(const Eigen::VectorXcd& h_gt, const Eigen::VectorXcd& h_eve,
                             double p_max, double sigma2, double step = 0.05) {
  const double g2 = h_gt.squaredNorm();
  const Eigen::VectorXcd u = h_gt.normalized();
  const std::complex<double> proj = (u.adjoint() * h_eve)(0, 0);
  const double alpha2 = std::norm(proj);
  const double beta2 = h_eve.squaredNorm() - alpha2;

  // attainable (GT power, Eve power) pairs for a unit-power beam
  std::vector<std::pair<double, double>> beams;
  const double half_pi = std::asin(1.0);
  for (double theta = 0.0; theta < half_pi + step; theta += step) {
    const double c = std::cos(std::min(theta, half_pi));
    const double cc = c * c;
    const double cross = 2.0 * std::sqrt(alpha2 * beta2 * cc * (1.0 - cc));
    const double base = alpha2 * cc + beta2 * (1.0 - cc);
    const double pi = 2.0 * half_pi;
    for (double psi = 0.0; psi < pi + step; psi += step) {
      const double e = base + cross * std::cos(std::min(psi, pi));
      beams.emplace_back(g2 * cc, std::max(e, 0.0));
    }
  }

  double best = -std::numeric_limits<double>::infinity();
  for (double s = 0.0; s <= 1.0 + 1e-12; s += step) {
    const double pc = std::min(s, 1.0) * p_max;
    const double pp = p_max - pc;
    for (const auto& [cg, ce] : beams) {
      const double qc_g = pc * cg;
      const double qc_e = pc * ce;
      for (const auto& [pg, pe] : beams) {
        const double qp_g = pp * pg;
        const double qp_e = pp * pe;
        const double gc_g = qc_g / (qp_g + sigma2);
        const double gc_e = qc_e / (qp_e + sigma2);
        if (gc_g < gc_e) continue;  // common stream must decode at the GT first
        const double num = (1.0 + gc_g) * (1.0 + qp_g / sigma2);
        const double den = (1.0 + gc_e) * (1.0 + qp_e / (qc_e + sigma2));
        if (num / den > best) best = num / den;
      }
    }
  }
  return std::log2(best);
}
