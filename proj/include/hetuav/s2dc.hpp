#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hetuav/rsma.hpp"

namespace hetuav {

inline constexpr double k_inv_ln2 = 1.4426950408889634;  // 1/ln 2

// ---------------------------------------------------------------------------
// Lifted (outer-product) precoder variables and rank-one recovery.
// ---------------------------------------------------------------------------

/// Outer-product relaxation of a PrecoderSet: one Hermitian PSD matrix per
/// precoder, rank-one at exact lifts.
struct LiftedVars {
  std::vector<Eigen::MatrixXcd> common;                             // [k]
  std::vector<std::vector<std::pair<int, Eigen::MatrixXcd>>> priv;  // [k] -> (gt, X)

  const Eigen::MatrixXcd* private_for(int k, int i) const {
    for (const auto& [gt, mat] : priv[static_cast<std::size_t>(k)])
      if (gt == i) return &mat;
    return nullptr;
  }
};

inline LiftedVars lift(const PrecoderSet& pre) {
  LiftedVars v;
  v.common.reserve(pre.common.size());
  for (const auto& p : pre.common) v.common.push_back(p * p.adjoint());
  v.priv.resize(pre.priv.size());
  for (std::size_t k = 0; k < pre.priv.size(); ++k)
    for (const auto& [gt, p] : pre.priv[k]) v.priv[k].emplace_back(gt, p * p.adjoint());
  return v;
}

struct EigPair {
  double lambda = 0.0;
  Eigen::VectorXcd v;
};

/// Principal eigenpair with a deterministic phase: the largest-magnitude
/// component of the eigenvector is rotated to the positive real axis.
inline EigPair principal_eigenpair(const Eigen::MatrixXcd& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(x);
  EigPair out;
  const int last = static_cast<int>(x.rows()) - 1;
  out.lambda = eig.eigenvalues()(last);
  out.v = eig.eigenvectors().col(last);
  int arg = 0;
  double best = -1.0;
  for (int m = 0; m < out.v.size(); ++m)
    if (std::abs(out.v(m)) > best) {
      best = std::abs(out.v(m));
      arg = m;
    }
  if (best > 0.0) out.v *= std::conj(out.v(arg)) / std::abs(out.v(arg));
  return out;
}

/// tr(X) - lambda_max(X): zero iff X has rank <= 1.
inline double rank_one_gap(const Eigen::MatrixXcd& x) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(x);
  return x.real().trace() - eig.eigenvalues()(static_cast<int>(x.rows()) - 1);
}

/// Supporting hyperplane of lambda_max at x_prev, evaluated at x:
/// lambda_max(x_prev) + v^H (x - x_prev) v. Never exceeds lambda_max(x).
inline double linearized_lambda(const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& x_prev) {
  const auto ep = principal_eigenpair(x_prev);
  return ep.lambda + (ep.v.adjoint() * (x - x_prev) * ep.v)(0, 0).real();
}

struct ExtractedPrecoders {
  PrecoderSet pre;
  bool within_tol = true;
  double max_rel_gap = 0.0;
};

/// Standard SDR recovery p = sqrt(lambda_max) * v. The exact-penalty term
/// drives the gap to zero, so the recovery is near-exact; a large residual
/// gap is reported, not raised.
inline ExtractedPrecoders extract_rank_one(const LiftedVars& vars, double rel_tol = 1e-4) {
  ExtractedPrecoders out;
  const int n_uav = static_cast<int>(vars.common.size());
  const int m = n_uav > 0 ? static_cast<int>(vars.common[0].rows()) : 0;
  out.pre = PrecoderSet::zeros(n_uav, m);
  auto recover = [&](const Eigen::MatrixXcd& x) {
    const auto ep = principal_eigenpair(x);
    const double tr = x.real().trace();
    if (tr > 0.0) out.max_rel_gap = std::max(out.max_rel_gap, (tr - ep.lambda) / tr);
    return ep.lambda > 0.0 ? Eigen::VectorXcd(std::sqrt(ep.lambda) * ep.v)
                           : Eigen::VectorXcd(Eigen::VectorXcd::Zero(x.rows()));
  };
  for (int k = 0; k < n_uav; ++k) {
    out.pre.common[static_cast<std::size_t>(k)] = recover(vars.common[static_cast<std::size_t>(k)]);
    for (const auto& [gt, mat] : vars.priv[static_cast<std::size_t>(k)])
      out.pre.priv[static_cast<std::size_t>(k)].emplace_back(gt, recover(mat));
  }
  out.within_tol = out.max_rel_gap <= rel_tol;
  return out;
}

// ---------------------------------------------------------------------------
// Real parameterization of Hermitian blocks and affine functionals.
// ---------------------------------------------------------------------------

/// Real affine functional a.x + c over the packed block vector.
struct AffineFn {
  Eigen::VectorXd a;
  double c = 0.0;
  double eval(const Eigen::VectorXd& x) const { return a.dot(x) + c; }
};

/// Packs Hermitian M x M blocks as real vectors: M diagonal entries, then
/// (re, im) per off-diagonal pair (r < c), row-major.
struct VarLayout {
  int m = 0;
  int n_blocks = 0;

  int per_block() const { return m * m; }
  int dim() const { return n_blocks * per_block(); }
  int offset(int b) const { return b * per_block(); }

  Eigen::MatrixXcd unpack_block(const Eigen::VectorXd& x, int b) const {
    Eigen::MatrixXcd out(m, m);
    int idx = offset(b);
    for (int d = 0; d < m; ++d) out(d, d) = x(idx++);
    for (int r = 0; r < m; ++r)
      for (int c = r + 1; c < m; ++c) {
        const double re = x(idx++);
        const double im = x(idx++);
        out(r, c) = std::complex<double>(re, im);
        out(c, r) = std::complex<double>(re, -im);
      }
    return out;
  }

  void pack_block(const Eigen::MatrixXcd& mat, int b, Eigen::VectorXd& x) const {
    int idx = offset(b);
    for (int d = 0; d < m; ++d) x(idx++) = mat(d, d).real();
    for (int r = 0; r < m; ++r)
      for (int c = r + 1; c < m; ++c) {
        x(idx++) = mat(r, c).real();
        x(idx++) = mat(r, c).imag();
      }
  }

  /// Row of the real-linear functional X_b -> h^H X_b h.
  AffineFn quad_row(const Eigen::VectorXcd& h, int b) const {
    AffineFn fn;
    fn.a = Eigen::VectorXd::Zero(dim());
    int idx = offset(b);
    for (int d = 0; d < m; ++d) fn.a(idx++) = std::norm(h(d));
    for (int r = 0; r < m; ++r)
      for (int c = r + 1; c < m; ++c) {
        const std::complex<double> z = std::conj(h(r)) * h(c);
        fn.a(idx++) = 2.0 * z.real();
        fn.a(idx++) = -2.0 * z.imag();
      }
    return fn;
  }

  AffineFn trace_row(int b) const {
    AffineFn fn;
    fn.a = Eigen::VectorXd::Zero(dim());
    for (int d = 0; d < m; ++d) fn.a(offset(b) + d) = 1.0;
    return fn;
  }

  /// Hermitian basis matrix for parameter p of a block (diag, then re/im).
  Eigen::MatrixXcd basis(int p) const {
    Eigen::MatrixXcd d = Eigen::MatrixXcd::Zero(m, m);
    if (p < m) {
      d(p, p) = 1.0;
      return d;
    }
    int idx = m;
    for (int r = 0; r < m; ++r)
      for (int c = r + 1; c < m; ++c) {
        if (idx == p) {  // real part
          d(r, c) = 1.0;
          d(c, r) = 1.0;
          return d;
        }
        ++idx;
        if (idx == p) {  // imaginary part
          d(r, c) = std::complex<double>(0.0, 1.0);
          d(c, r) = std::complex<double>(0.0, -1.0);
          return d;
        }
        ++idx;
      }
    throw std::out_of_range("basis index");
  }
};

// ---------------------------------------------------------------------------
// Convex subproblem: maximize a concave objective made of an affine part plus
// weighted logs of affine functionals, subject to "surface" constraints of
// the same shape, per-block PSD cones, and an optional epigraph variable for
// min-over-terms objectives. Solved with a log-barrier interior-point method
// (dense Newton steps; blocks are small so eigen/Cholesky work is cheap).
// ---------------------------------------------------------------------------

struct CsLog {
  AffineFn arg;
  double w = 1.0;  // contributes w * log2(arg)
};

/// Constraint surface: sum of logs + affine + t_coeff * t > 0 (interior).
struct CsSurface {
  std::vector<CsLog> logs;
  AffineFn aff;
  double t_coeff = 0.0;
};

struct SubSolution {
  Eigen::VectorXd x;  // packed blocks
  double t = 0.0;
  double objective = 0.0;  // value of the concave objective at x
  bool converged = false;
  int newton_steps = 0;
};

struct ConvexSubproblem {
  VarLayout layout;
  bool has_t = false;
  AffineFn obj_aff;             // affine objective part over blocks
  double obj_t = 0.0;           // objective coefficient of t
  std::vector<CsLog> obj_logs;  // concave log part of the objective
  std::vector<CsSurface> surfaces;

  int n_vars() const { return layout.dim() + (has_t ? 1 : 0); }

  double objective_value(const Eigen::VectorXd& xb, double t) const {
    double f = obj_aff.eval(xb) + obj_t * t;
    for (const auto& lg : obj_logs) f += lg.w * std::log2(lg.arg.eval(xb));
    return f;
  }

  double surface_value(const CsSurface& s, const Eigen::VectorXd& xb, double t) const {
    double u = s.aff.eval(xb) + s.t_coeff * t;
    for (const auto& lg : s.logs) {
      const double arg = lg.arg.eval(xb);
      if (!(arg > 0.0)) return -std::numeric_limits<double>::infinity();
      u += lg.w * std::log2(arg);
    }
    return u;
  }

  /// Barrier value at (xb, t); +inf outside the domain.
  double barrier_phi(double tau, const Eigen::VectorXd& xb, double t) const {
    constexpr double inf = std::numeric_limits<double>::infinity();
    double phi = -tau * (obj_aff.eval(xb) + obj_t * t);
    for (const auto& lg : obj_logs) {
      const double arg = lg.arg.eval(xb);
      if (!(arg > 0.0)) return inf;
      phi -= tau * lg.w * std::log2(arg);
    }
    for (const auto& s : surfaces) {
      const double u = surface_value(s, xb, t);
      if (!(u > 0.0)) return inf;
      phi -= std::log(u);
    }
    for (int b = 0; b < layout.n_blocks; ++b) {
      const Eigen::MatrixXcd x = layout.unpack_block(xb, b);
      Eigen::LLT<Eigen::MatrixXcd> llt(x);
      if (llt.info() != Eigen::Success) return inf;
      double logdet = 0.0;
      for (int d = 0; d < layout.m; ++d) {
        const double l = llt.matrixL()(d, d).real();
        if (!(l > 0.0)) return inf;
        logdet += 2.0 * std::log(l);
      }
      phi -= logdet;
    }
    return phi;
  }

  /// One centering stage: damped Newton on the barrier at fixed tau.
  /// Returns the Newton step count; (xb, t) are updated in place.
  int center(double tau, Eigen::VectorXd& xb, double& t, int max_newton = 60) const {
    const int nb = layout.dim();
    const int n = n_vars();
    const int ti = nb;  // index of t when present
    int steps = 0;
    for (; steps < max_newton; ++steps) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);

      g.head(nb) -= tau * obj_aff.a;
      if (has_t) g(ti) -= tau * obj_t;
      for (const auto& lg : obj_logs) {
        const double arg = lg.arg.eval(xb);
        const double coef = tau * lg.w * k_inv_ln2;
        g.head(nb) -= (coef / arg) * lg.arg.a;
        h.topLeftCorner(nb, nb) += (coef / (arg * arg)) * (lg.arg.a * lg.arg.a.transpose());
      }

      for (const auto& s : surfaces) {
        const double u = surface_value(s, xb, t);
        Eigen::VectorXd du = Eigen::VectorXd::Zero(n);
        du.head(nb) = s.aff.a;
        if (has_t) du(ti) = s.t_coeff;
        for (const auto& lg : s.logs) {
          const double arg = lg.arg.eval(xb);
          const double coef = lg.w * k_inv_ln2 / arg;
          du.head(nb) += coef * lg.arg.a;
          // concavity of the log part of u
          h.topLeftCorner(nb, nb) +=
              (lg.w * k_inv_ln2 / (arg * arg * u)) * (lg.arg.a * lg.arg.a.transpose());
        }
        g -= du / u;
        h += (du * du.transpose()) / (u * u);
      }

      for (int b = 0; b < layout.n_blocks; ++b) {
        const Eigen::MatrixXcd x = layout.unpack_block(xb, b);
        const Eigen::MatrixXcd xinv = x.inverse();
        const int pb = layout.per_block();
        const int off = layout.offset(b);
        std::vector<Eigen::MatrixXcd> xinv_d(static_cast<std::size_t>(pb));
        for (int p = 0; p < pb; ++p) {
          const Eigen::MatrixXcd d = layout.basis(p);
          xinv_d[static_cast<std::size_t>(p)] = xinv * d;
          g(off + p) -= xinv_d[static_cast<std::size_t>(p)].trace().real();
        }
        for (int p = 0; p < pb; ++p)
          for (int q = p; q < pb; ++q) {
            const double v = (xinv_d[static_cast<std::size_t>(p)] *
                              xinv_d[static_cast<std::size_t>(q)])
                                 .trace()
                                 .real();
            h(off + p, off + q) += v;
            if (q != p) h(off + q, off + p) += v;
          }
      }

      h.diagonal().array() += 1e-12 * std::max(1.0, h.diagonal().maxCoeff());
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      Eigen::VectorXd step = ldlt.solve(-g);
      const double decrement = -g.dot(step);
      if (!(decrement > 0.0)) break;
      if (0.5 * decrement < 1e-10 * (1.0 + tau)) break;

      const double phi0 = barrier_phi(tau, xb, t);
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 70; ++ls) {
        Eigen::VectorXd xb_try = xb + alpha * step.head(nb);
        const double t_try = has_t ? t + alpha * step(ti) : t;
        const double phi_try = barrier_phi(tau, xb_try, t_try);
        if (phi_try <= phi0 - 1e-4 * alpha * decrement) {
          xb.swap(xb_try);
          t = t_try;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
    }
    return steps;
  }

  /// Barrier path: geometric tau schedule until the self-concordance gap
  /// bound falls below tol. The start must be strictly feasible.
  SubSolution solve(const Eigen::VectorXd& xb0, double t0, double tol) const {
    SubSolution sol;
    sol.x = xb0;
    sol.t = t0;
    if (!std::isfinite(barrier_phi(1.0, sol.x, sol.t)))
      throw std::invalid_argument("subproblem start is not strictly feasible");
    const double theta =
        static_cast<double>(surfaces.size()) + static_cast<double>(layout.n_blocks * layout.m);
    double tau = 1.0;
    for (int outer = 0; outer < 48; ++outer) {
      sol.newton_steps += center(tau, sol.x, sol.t);
      if (theta / tau <= tol) {
        sol.converged = true;
        break;
      }
      tau *= 10.0;
    }
    sol.objective = objective_value(sol.x, sol.t);
    return sol;
  }
};

/// Named wrapper for the spec'd operation shape.
inline SubSolution solve_subproblem(const ConvexSubproblem& sub, const Eigen::VectorXd& xb0,
                                    double t0, double tol) {
  return sub.solve(xb0, t0, tol);
}

// ---------------------------------------------------------------------------
// Secrecy-precoding instance: block bookkeeping, exact objective terms, and
// the d.c. surrogate builder.
// ---------------------------------------------------------------------------

/// One objective term (k, served GT i, Eve e); e = -1 marks a term for a UAV
/// with no covered Eve, which degenerates to the GT rate alone.
struct DcTermDef {
  int k = 0, i = 0, e = -1;
  std::vector<AffineFn> n_logs;   // kept-concave log arguments
  std::vector<AffineFn> d13;      // log arguments of the linearized group (common)
  std::vector<AffineFn> d14;      // log arguments of the linearized group (private)
};

struct DcInstance {
  VarLayout layout;
  std::vector<int> block_uav;             // owning UAV per block
  std::vector<int> block_gt;              // served GT per block, -1 for common
  std::vector<std::vector<int>> uav_blocks;  // blocks per UAV
  std::vector<DcTermDef> terms;
  double p_max = 0.0;
  double sigma2 = 1.0;  // channels are rescaled so noise power is one

  int common_block(int k) const {
    for (std::size_t b = 0; b < block_uav.size(); ++b)
      if (block_uav[b] == k && block_gt[b] == -1) return static_cast<int>(b);
    return -1;
  }
  int private_block(int k, int i) const {
    for (std::size_t b = 0; b < block_uav.size(); ++b)
      if (block_uav[b] == k && block_gt[b] == i) return static_cast<int>(b);
    return -1;
  }

  LiftedVars unpack(const Eigen::VectorXd& x) const {
    LiftedVars v;
    const int n_uav = static_cast<int>(uav_blocks.size());
    v.common.resize(static_cast<std::size_t>(n_uav));
    v.priv.resize(static_cast<std::size_t>(n_uav));
    for (int b = 0; b < layout.n_blocks; ++b) {
      const auto mat = layout.unpack_block(x, b);
      if (block_gt[static_cast<std::size_t>(b)] < 0)
        v.common[static_cast<std::size_t>(block_uav[static_cast<std::size_t>(b)])] = mat;
      else
        v.priv[static_cast<std::size_t>(block_uav[static_cast<std::size_t>(b)])].emplace_back(
            block_gt[static_cast<std::size_t>(b)], mat);
    }
    return v;
  }

  Eigen::VectorXd pack(const LiftedVars& v) const {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(layout.dim());
    for (int b = 0; b < layout.n_blocks; ++b) {
      const int k = block_uav[static_cast<std::size_t>(b)];
      const int gt = block_gt[static_cast<std::size_t>(b)];
      const Eigen::MatrixXcd* mat =
          gt < 0 ? &v.common[static_cast<std::size_t>(k)] : v.private_for(k, gt);
      layout.pack_block(*mat, b, x);
    }
    return x;
  }

  /// Exact concave-minus-concave term value: sum log2(N) - sum log2(D).
  double term_value(const DcTermDef& term, const Eigen::VectorXd& x) const {
    double v = 0.0;
    for (const auto& fn : term.n_logs) v += std::log2(fn.eval(x));
    for (const auto& fn : term.d13) v -= std::log2(fn.eval(x));
    for (const auto& fn : term.d14) v -= std::log2(fn.eval(x));
    return v;
  }

  double penalty_value(const Eigen::VectorXd& x) const {
    double p = 0.0;
    for (int b = 0; b < layout.n_blocks; ++b) {
      const auto mat = layout.unpack_block(x, b);
      p -= rank_one_gap(mat);  // lambda_max - tr
    }
    return p;
  }

  /// True penalized objective: min over terms plus mu times the (negative)
  /// aggregate rank-one gap.
  double penalized_objective(const Eigen::VectorXd& x, double mu) const {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto& term : terms) worst = std::min(worst, term_value(term, x));
    if (terms.empty()) worst = 0.0;
    return worst + mu * penalty_value(x);
  }

  double aggregate_gap(const Eigen::VectorXd& x) const {
    double gap = 0.0, tr = 0.0;
    for (int b = 0; b < layout.n_blocks; ++b) {
      const auto mat = layout.unpack_block(x, b);
      gap += rank_one_gap(mat);
      tr += mat.real().trace();
    }
    return tr > 0.0 ? gap / tr : 0.0;
  }
};

namespace detail {

/// Quadratic-form row of h against every precoder block of UAV k.
inline AffineFn uav_emission_row(const DcInstance& inst, const Eigen::VectorXcd& h, int k) {
  AffineFn fn;
  fn.a = Eigen::VectorXd::Zero(inst.layout.dim());
  for (int b : inst.uav_blocks[static_cast<std::size_t>(k)])
    fn.a += inst.layout.quad_row(h, b).a;
  return fn;
}

inline void add_rows(AffineFn& dst, const AffineFn& src, double w = 1.0) {
  dst.a += w * src.a;
  dst.c += w * src.c;
}

}  // namespace detail

/// Builds the lifted secrecy instance for one slot. Channels are rescaled by
/// the noise amplitude so every affine functional has unit noise floor; the
/// rescaling leaves every SINR unchanged.
inline DcInstance build_dc_instance(const SlotChannels& ch, const AssociationState& assoc,
                                    const ScenarioConfig& cfg) {
  DcInstance inst;
  const int n_uav = ch.n_uav();
  const double sigma = std::sqrt(cfg.noise_power_w());
  inst.p_max = cfg.p_max;
  inst.layout.m = cfg.m_antennas;
  inst.uav_blocks.resize(static_cast<std::size_t>(n_uav));

  std::vector<std::vector<int>> served(static_cast<std::size_t>(n_uav));
  for (int k = 0; k < n_uav; ++k) {
    served[static_cast<std::size_t>(k)] = assoc.served_gts(k);
    inst.block_uav.push_back(k);
    inst.block_gt.push_back(-1);
    inst.uav_blocks[static_cast<std::size_t>(k)].push_back(
        static_cast<int>(inst.block_uav.size()) - 1);
    for (int i : served[static_cast<std::size_t>(k)]) {
      inst.block_uav.push_back(k);
      inst.block_gt.push_back(i);
      inst.uav_blocks[static_cast<std::size_t>(k)].push_back(
          static_cast<int>(inst.block_uav.size()) - 1);
    }
  }
  inst.layout.n_blocks = static_cast<int>(inst.block_uav.size());

  auto scaled_gt = [&](int k, int i) {
    return Eigen::VectorXcd(ch.h_gt[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] /
                            sigma);
  };
  auto scaled_eve = [&](int k, int e) {
    return Eigen::VectorXcd(ch.h_eve[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)] /
                            sigma);
  };

  const auto eve_sets = eavesdropper_sets(assoc.cover_eve);
  for (int k = 0; k < n_uav; ++k) {
    for (int i : served[static_cast<std::size_t>(k)]) {
      // interference floor at GT i from other covering UAVs, plus unit noise
      AffineFn iin_gt;
      iin_gt.a = Eigen::VectorXd::Zero(inst.layout.dim());
      iin_gt.c = 1.0;
      for (int k2 = 0; k2 < n_uav; ++k2)
        if (k2 != k && assoc.cover_gt(k2, i) == 1)
          detail::add_rows(iin_gt, detail::uav_emission_row(inst, scaled_gt(k2, i), k2));

      const Eigen::VectorXcd hi = scaled_gt(k, i);
      AffineFn phi_c_gt = iin_gt;  // serving UAV private streams + floor
      for (int j : served[static_cast<std::size_t>(k)])
        detail::add_rows(phi_c_gt, inst.layout.quad_row(hi, inst.private_block(k, j)));
      AffineFn phi_p_gt = phi_c_gt;
      detail::add_rows(phi_p_gt, inst.layout.quad_row(hi, inst.private_block(k, i)), -1.0);
      AffineFn n1 = phi_c_gt;  // + common power
      detail::add_rows(n1, inst.layout.quad_row(hi, inst.common_block(k)));

      const auto& eves = eve_sets[static_cast<std::size_t>(k)];
      if (eves.empty()) {
        DcTermDef term;
        term.k = k;
        term.i = i;
        term.e = -1;
        term.n_logs = {n1, phi_c_gt};  // rate numerator groups
        term.d13 = {phi_c_gt};
        term.d14 = {phi_p_gt};
        inst.terms.push_back(std::move(term));
        continue;
      }
      for (int e : eves) {
        AffineFn iin_eve;
        iin_eve.a = Eigen::VectorXd::Zero(inst.layout.dim());
        iin_eve.c = 1.0;
        for (int k2 = 0; k2 < n_uav; ++k2)
          if (k2 != k && assoc.cover_eve(k2, e) == 1)
            detail::add_rows(iin_eve, detail::uav_emission_row(inst, scaled_eve(k2, e), k2));

        const Eigen::VectorXcd he = scaled_eve(k, e);
        AffineFn phi_c_eve = iin_eve;
        for (int j : served[static_cast<std::size_t>(k)])
          detail::add_rows(phi_c_eve, inst.layout.quad_row(he, inst.private_block(k, j)));
        AffineFn phi_p_eve = phi_c_eve;
        detail::add_rows(phi_p_eve, inst.layout.quad_row(he, inst.private_block(k, i)), -1.0);
        detail::add_rows(phi_p_eve, inst.layout.quad_row(he, inst.common_block(k)));

        AffineFn d2 = phi_c_eve;  // Eve common arg + common power
        detail::add_rows(d2, inst.layout.quad_row(he, inst.common_block(k)));
        AffineFn d4 = phi_p_eve;  // Eve private arg + own private power
        detail::add_rows(d4, inst.layout.quad_row(he, inst.private_block(k, i)));

        DcTermDef term;
        term.k = k;
        term.i = i;
        term.e = e;
        term.n_logs = {n1, phi_c_eve, phi_c_gt, phi_p_eve};
        term.d13 = {phi_c_gt, d2};
        term.d14 = {phi_p_gt, d4};
        inst.terms.push_back(std::move(term));
      }
    }
  }
  return inst;
}

/// First-order Taylor expansion of log2(fn) at x0, as an affine functional.
inline AffineFn taylor_log2(const AffineFn& fn, const Eigen::VectorXd& x0) {
  const double v0 = fn.eval(x0);
  AffineFn out;
  out.a = (k_inv_ln2 / v0) * fn.a;
  out.c = std::log2(v0) - out.a.dot(x0);
  return out;
}

/// Convex surrogate of the penalized d.c. objective at the incumbent:
/// the linearized groups become affine majorants, the eigenvalue penalty
/// becomes its supporting hyperplane, and the min-over-terms moves into an
/// epigraph variable. The surrogate touches the true objective at the
/// incumbent and minorizes it elsewhere.
inline ConvexSubproblem dc_surrogate(const DcInstance& inst, const Eigen::VectorXd& x0,
                                     double mu, double secrecy_shift = 1e-6) {
  ConvexSubproblem sub;
  sub.layout = inst.layout;
  sub.has_t = true;
  sub.obj_t = 1.0;
  sub.obj_aff.a = Eigen::VectorXd::Zero(inst.layout.dim());
  sub.obj_aff.c = 0.0;

  for (int b = 0; b < inst.layout.n_blocks; ++b) {
    const auto ep = principal_eigenpair(inst.layout.unpack_block(x0, b));
    // lambda^(kappa) collapses to the quadratic form along the incumbent's
    // principal eigenvector; the constant cancels exactly
    sub.obj_aff.a += mu * (inst.layout.quad_row(ep.v, b).a - inst.layout.trace_row(b).a);
  }

  for (const auto& term : inst.terms) {
    AffineFn lin13;
    lin13.a = Eigen::VectorXd::Zero(inst.layout.dim());
    for (const auto& fn : term.d13) detail::add_rows(lin13, taylor_log2(fn, x0));
    AffineFn lin14;
    lin14.a = Eigen::VectorXd::Zero(inst.layout.dim());
    for (const auto& fn : term.d14) detail::add_rows(lin14, taylor_log2(fn, x0));

    CsSurface g;  // t <= kept logs - linearized groups
    for (const auto& fn : term.n_logs) g.logs.push_back({fn, 1.0});
    g.aff.a = -(lin13.a + lin14.a);
    g.aff.c = -(lin13.c + lin14.c);
    g.t_coeff = -1.0;
    sub.surfaces.push_back(std::move(g));

    if (term.e >= 0) {
      // common stream stays decodable at the GT faster than at the Eve
      CsSurface s;
      s.logs.push_back({term.n_logs[0], 1.0});
      s.logs.push_back({term.n_logs[1], 1.0});
      s.aff.a = -lin13.a;
      s.aff.c = -lin13.c + secrecy_shift;
      sub.surfaces.push_back(std::move(s));
    }
  }

  for (std::size_t k = 0; k < inst.uav_blocks.size(); ++k) {
    CsSurface pw;  // P_max - sum of traces > 0
    pw.aff.a = Eigen::VectorXd::Zero(inst.layout.dim());
    pw.aff.c = inst.p_max;
    for (int b : inst.uav_blocks[k]) pw.aff.a -= inst.layout.trace_row(b).a;
    sub.surfaces.push_back(std::move(pw));
  }
  return sub;
}

// ---------------------------------------------------------------------------
// phi and F-term views over LiftedVars (exact, not linearized).
// ---------------------------------------------------------------------------

struct PhiFamilies {
  Eigen::MatrixXd phi_c_gt;   // [k][i], zero when unserved
  Eigen::MatrixXd phi_p_gt;   // [k][i]
  Eigen::MatrixXd phi_c_eve;  // [k][e]
  std::vector<Eigen::MatrixXd> phi_p_eve;  // [k] -> [e][i]
};

inline double lifted_qf(const Eigen::VectorXcd& h, const Eigen::MatrixXcd& x) {
  return (h.adjoint() * x * h)(0, 0).real();
}

inline PhiFamilies phi_terms(const LiftedVars& vars, const SlotChannels& ch,
                             const AssociationState& assoc, double noise_w) {
  const int n_k = ch.n_uav();
  const int n_i = ch.n_gt();
  const int n_e = ch.n_eve();
  PhiFamilies out;
  out.phi_c_gt = Eigen::MatrixXd::Zero(n_k, n_i);
  out.phi_p_gt = Eigen::MatrixXd::Zero(n_k, n_i);
  out.phi_c_eve = Eigen::MatrixXd::Zero(n_k, n_e);
  out.phi_p_eve.assign(static_cast<std::size_t>(n_k), Eigen::MatrixXd::Zero(n_e, n_i));

  auto uav_seen = [&](const Eigen::VectorXcd& h, int k) {
    double s = lifted_qf(h, vars.common[static_cast<std::size_t>(k)]);
    for (const auto& [gt, mat] : vars.priv[static_cast<std::size_t>(k)]) s += lifted_qf(h, mat);
    return s;
  };

  for (int k = 0; k < n_k; ++k) {
    const auto srv = assoc.served_gts(k);
    for (int i : srv) {
      const auto& h = ch.h_gt[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      double iin = noise_w;
      for (int k2 = 0; k2 < n_k; ++k2)
        if (k2 != k && assoc.cover_gt(k2, i) == 1)
          iin += uav_seen(ch.h_gt[static_cast<std::size_t>(k2)][static_cast<std::size_t>(i)], k2);
      double priv_sum = 0.0;
      for (int j : srv) priv_sum += lifted_qf(h, *vars.private_for(k, j));
      out.phi_c_gt(k, i) = priv_sum + iin;
      out.phi_p_gt(k, i) = priv_sum - lifted_qf(h, *vars.private_for(k, i)) + iin;
    }
    for (int e = 0; e < n_e; ++e) {
      const auto& he = ch.h_eve[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)];
      double iin = noise_w;
      for (int k2 = 0; k2 < n_k; ++k2)
        if (k2 != k && assoc.cover_eve(k2, e) == 1)
          iin += uav_seen(ch.h_eve[static_cast<std::size_t>(k2)][static_cast<std::size_t>(e)], k2);
      double priv_sum = 0.0;
      for (int j : srv) priv_sum += lifted_qf(he, *vars.private_for(k, j));
      out.phi_c_eve(k, e) = priv_sum + iin;
      const double common = lifted_qf(he, vars.common[static_cast<std::size_t>(k)]);
      for (int i : srv)
        out.phi_p_eve[static_cast<std::size_t>(k)](e, i) =
            common + priv_sum - lifted_qf(he, *vars.private_for(k, i)) + iin;
    }
  }
  return out;
}

struct FTildeTerms {
  double f11 = 0.0, f12 = 0.0, f13 = 0.0, f14 = 0.0;
  double total() const { return f11 + f12 - f13 - f14; }
};

/// The four log groupings of the lifted secrecy difference for (k, i, e).
/// With the Eve indicator off (e outside coverage or negative), the Eve logs
/// vanish and the total reduces to the GT rate.
inline FTildeTerms f_tilde_terms(const LiftedVars& vars, const SlotChannels& ch,
                                 const AssociationState& assoc, double noise_w, int k, int i,
                                 int e) {
  const auto phi = phi_terms(vars, ch, assoc, noise_w);
  const bool eve_on = e >= 0 && assoc.cover_eve(k, e) == 1;
  const auto& hi = ch.h_gt[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
  FTildeTerms f;
  f.f11 = std::log2(phi.phi_c_gt(k, i) + lifted_qf(hi, vars.common[static_cast<std::size_t>(k)]));
  f.f12 = std::log2(phi.phi_p_gt(k, i) + lifted_qf(hi, *vars.private_for(k, i)));
  f.f13 = std::log2(phi.phi_c_gt(k, i));
  f.f14 = std::log2(phi.phi_p_gt(k, i));
  if (eve_on) {
    const auto& he = ch.h_eve[static_cast<std::size_t>(k)][static_cast<std::size_t>(e)];
    const double qc = lifted_qf(he, vars.common[static_cast<std::size_t>(k)]);
    const double qp = lifted_qf(he, *vars.private_for(k, i));
    f.f11 += std::log2(phi.phi_c_eve(k, e));
    f.f12 += std::log2(phi.phi_p_eve[static_cast<std::size_t>(k)](e, i));
    f.f13 += std::log2(phi.phi_c_eve(k, e) + qc);
    f.f14 += std::log2(phi.phi_p_eve[static_cast<std::size_t>(k)](e, i) + qp);
  }
  return f;
}

// ---------------------------------------------------------------------------
// d.c. driver.
// ---------------------------------------------------------------------------

struct DcIterate {
  LiftedVars vars;  // populated only when history retention is requested
  double objective_value = 0.0;
  double penalty_value = 0.0;
  double gap = 0.0;
  double mu = 0.0;
  int kappa = 0;
  bool mu_changed = false;
};

struct S2dcReport {
  PrecoderSet precoders;
  LiftedVars final_vars;
  bool converged = false;
  bool rank_tol_met = true;
  int iterations = 0;
  double f1 = 0.0;
  double final_gap = 0.0;
  std::vector<DcIterate> history;
};

struct S2dcOptions {
  bool keep_history_vars = false;
  double rank_gap_tol = 1e-4;  // aggregate, relative to total trace
};

namespace detail {

/// Feasible start: equal-power MRT toward each served GT, with a small
/// isotropic floor so every block is strictly positive definite (the barrier
/// needs an interior start; later iterates are interior by construction). If
/// the common stream is not decodable faster at some GT than at its Eves,
/// power shifts toward the common stream and then shrinks until the secrecy
/// surfaces clear.
inline Eigen::VectorXd feasible_start(const DcInstance& inst, const SlotChannels& ch,
                                      double secrecy_shift) {
  const int m = inst.layout.m;

  auto pack_beam = [&](const Eigen::VectorXcd& dir, double power, int b, Eigen::VectorXd& x) {
    const Eigen::MatrixXcd mat =
        power * (0.999 * (dir * dir.adjoint()) +
                 (0.001 / static_cast<double>(m)) * Eigen::MatrixXcd::Identity(m, m));
    inst.layout.pack_block(mat, b, x);
  };

  // strongest covered Eve channel per UAV, for the nulled common direction
  std::vector<const Eigen::VectorXcd*> worst_eve(inst.uav_blocks.size(), nullptr);
  for (const auto& term : inst.terms) {
    if (term.e < 0) continue;
    const auto& he = ch.h_eve[static_cast<std::size_t>(term.k)][static_cast<std::size_t>(term.e)];
    auto& slot = worst_eve[static_cast<std::size_t>(term.k)];
    if (slot == nullptr || he.squaredNorm() > slot->squaredNorm()) slot = &he;
  }

  auto candidate = [&](double common_frac, double power, bool null_eve) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(inst.layout.dim());
    for (std::size_t k = 0; k < inst.uav_blocks.size(); ++k) {
      std::vector<int> priv_blocks;
      for (int b : inst.uav_blocks[k])
        if (inst.block_gt[static_cast<std::size_t>(b)] >= 0) priv_blocks.push_back(b);
      const double p_c = power * common_frac;
      const double p_p = priv_blocks.empty() ? 0.0 : power * (1.0 - common_frac) /
                                                          static_cast<double>(priv_blocks.size());
      // common direction: strongest served GT's channel (MRT); fall back to
      // the first antenna with nothing served
      Eigen::VectorXcd dir = Eigen::VectorXcd::Zero(m);
      double best = -1.0;
      for (int b : priv_blocks) {
        const int i = inst.block_gt[static_cast<std::size_t>(b)];
        const auto& h = ch.h_gt[k][static_cast<std::size_t>(i)];
        if (h.squaredNorm() > best) {
          best = h.squaredNorm();
          dir = h.normalized();
        }
      }
      if (best < 0.0) dir(0) = 1.0;
      if (null_eve && worst_eve[k] != nullptr) {
        // project the common beam onto the strongest Eve's null space
        const Eigen::VectorXcd u = worst_eve[k]->normalized();
        const Eigen::VectorXcd proj = dir - u * (u.adjoint() * dir)(0, 0);
        if (proj.norm() > 1e-9) dir = proj.normalized();
      }
      pack_beam(dir, p_c, inst.common_block(static_cast<int>(k)), x);
      for (int b : priv_blocks) {
        const int i = inst.block_gt[static_cast<std::size_t>(b)];
        pack_beam(ch.h_gt[k][static_cast<std::size_t>(i)].normalized(),
                  std::max(p_p, 1e-9 * power), b, x);
      }
    }
    return x;
  };

  auto secrecy_ok = [&](const Eigen::VectorXd& x) {
    // exact F11 - F13 at the candidate (the linearization is exact there)
    for (const auto& term : inst.terms) {
      if (term.e < 0) continue;
      double s = 0.0;
      s += std::log2(term.n_logs[0].eval(x)) + std::log2(term.n_logs[1].eval(x));
      for (const auto& fn : term.d13) s -= std::log2(fn.eval(x));
      if (s <= -0.5 * secrecy_shift) return false;
    }
    return true;
  };

  // More common power never restores decodability when the common direction
  // favors the Eve (the SINR ratio is invariant to the common scale), so the
  // ladder moves toward a nulled common beam and then a private-heavy split.
  auto x = candidate(0.5, 0.9 * inst.p_max, false);
  if (secrecy_ok(x)) return x;
  for (double frac : {0.5, 0.2}) {
    x = candidate(frac, 0.9 * inst.p_max, true);
    if (secrecy_ok(x)) return x;
  }
  x = candidate(1e-8, 0.9 * inst.p_max, true);
  if (secrecy_ok(x)) return x;
  double power = 0.09 * inst.p_max;
  for (int shrink = 0; shrink < 14; ++shrink, power *= 0.1) {
    x = candidate(1e-8, power, true);
    if (secrecy_ok(x)) return x;
  }
  return x;  // vanishing power: secrecy surfaces are flat to within the shift
}

}  // namespace detail

/// Secrecy precoding for one slot: lifted SDR with an exact eigenvalue
/// penalty for rank-one, solved by successive concave minorants. The
/// penalized objective is non-decreasing between iterations that share a
/// penalty weight; the weight doubles (capped) when the rank-one gap stalls.
inline S2dcReport s2dc_solve(const SlotChannels& ch, const AssociationState& assoc,
                             const ScenarioConfig& cfg, const S2dcOptions& opt = {}) {
  constexpr double k_secrecy_shift = 1e-6;
  S2dcReport report;
  const DcInstance inst = build_dc_instance(ch, assoc, cfg);
  report.precoders = PrecoderSet::zeros(ch.n_uav(), cfg.m_antennas);

  if (inst.terms.empty()) {
    // nothing scheduled: zero precoders are optimal and exactly rank-one
    report.final_vars = inst.unpack(Eigen::VectorXd::Zero(inst.layout.dim()));
    report.converged = true;
    report.f1 = rates_report(ch, assoc, report.precoders, cfg.noise_power_w()).f1;
    return report;
  }

  Eigen::VectorXd x = detail::feasible_start(inst, ch, k_secrecy_shift);
  double mu = cfg.s2dc_mu0;
  double j_cur = inst.penalized_objective(x, mu);

  auto log_iterate = [&](int kappa, bool mu_changed) {
    DcIterate it;
    it.objective_value = j_cur;
    it.penalty_value = inst.penalty_value(x);
    it.gap = inst.aggregate_gap(x);
    it.mu = mu;
    it.kappa = kappa;
    it.mu_changed = mu_changed;
    if (opt.keep_history_vars) it.vars = inst.unpack(x);
    report.history.push_back(std::move(it));
  };
  log_iterate(0, false);

  double prev_gap = inst.aggregate_gap(x);
  int stall = 0;
  bool obj_converged = false;

  for (int kappa = 1; kappa <= cfg.s2dc_max_iters; ++kappa) {
    report.iterations = kappa;
    // the incumbent is strictly interior: the start is, and barrier iterates
    // stay interior for every re-linearized surface they satisfy exactly
    ConvexSubproblem sub = dc_surrogate(inst, x, mu, k_secrecy_shift);
    double g_min = std::numeric_limits<double>::infinity();
    for (const auto& s : sub.surfaces)
      if (s.t_coeff < 0.0) g_min = std::min(g_min, sub.surface_value(s, x, 0.0));
    const double t0 = g_min - 0.1 * (1.0 + std::abs(g_min));

    SubSolution sol;
    try {
      sol = sub.solve(x, t0, cfg.s2dc_subproblem_tol);
    } catch (const std::invalid_argument&) {
      break;  // could not restart strictly inside; keep the incumbent
    }

    const double j_new = inst.penalized_objective(sol.x, mu);
    bool mu_changed = false;
    if (j_new >= j_cur - 1e-8) {
      obj_converged = std::abs(j_new - j_cur) < cfg.s2dc_obj_tol;
      x = sol.x;
      j_cur = std::max(j_cur, j_new);
    } else {
      obj_converged = true;  // minorant cannot improve the incumbent further
    }

    const double gap = inst.aggregate_gap(x);
    const bool gap_ok = gap <= opt.rank_gap_tol;
    if (!gap_ok && gap > prev_gap * 0.99) ++stall;
    else stall = 0;
    prev_gap = gap;

    if ((obj_converged && !gap_ok) || stall >= 3) {
      if (mu < cfg.s2dc_mu_cap) {
        mu = std::min(mu * 2.0, cfg.s2dc_mu_cap);
        j_cur = inst.penalized_objective(x, mu);  // new baseline under new weight
        stall = 0;
        mu_changed = true;
        obj_converged = false;
      } else if (obj_converged) {
        log_iterate(kappa, false);
        break;
      }
    }
    log_iterate(kappa, mu_changed);
    if (obj_converged && gap_ok) {
      report.converged = true;
      break;
    }
  }

  report.final_gap = inst.aggregate_gap(x);
  report.rank_tol_met = report.final_gap <= opt.rank_gap_tol;
  report.final_vars = inst.unpack(x);
  auto extracted = extract_rank_one(report.final_vars);
  // rank-one recovery never exceeds the lifted power, but guard the budget
  for (std::size_t k = 0; k < extracted.pre.common.size(); ++k) {
    const double p = extracted.pre.power(static_cast<int>(k));
    if (p > cfg.p_max) {
      const double s = std::sqrt(cfg.p_max / p);
      extracted.pre.common[k] *= s;
      for (auto& [gt, vec] : extracted.pre.priv[k]) vec *= s;
    }
  }
  report.precoders = std::move(extracted.pre);
  report.f1 = rates_report(ch, assoc, report.precoders, cfg.noise_power_w()).f1;
  return report;
}

/// Per-iteration diagnostics as CSV (kappa, mu, objective, penalty, gap).
inline void dump_dc_diagnostics(const S2dcReport& report, const std::string& path) {
  std::ofstream out(path);
  out << "kappa,mu,objective,penalty,gap,mu_changed\n";
  for (const auto& it : report.history)
    out << it.kappa << ',' << it.mu << ',' << it.objective_value << ','
        << it.penalty_value << ',' << it.gap << ',' << (it.mu_changed ? 1 : 0) << '\n';
}

}  // namespace hetuav
