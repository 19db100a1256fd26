#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <vector>

#include "hetuav/rng.hpp"
#include "hetuav/rsma.hpp"

using namespace hetuav;
using Catch::Approx;
using cd = std::complex<double>;

namespace {

// Straight-line reimplementation of the SINR and rate pipeline used as an
// independent oracle: plain loops over raw arrays, no shared helpers.
struct Oracle {
  int n_k, n_i, n_e, m;
  std::vector<std::vector<std::vector<cd>>> hg;  // [k][i][m]
  std::vector<std::vector<std::vector<cd>>> he;  // [k][e][m]
  std::vector<std::vector<int>> cover_gt, cover_eve, sched;
  std::vector<std::vector<cd>> pc;               // [k][m]
  std::vector<std::vector<std::vector<cd>>> pp;  // [k][i][m], zero when unserved
  double sigma2;

  double pow2(const std::vector<cd>& h, const std::vector<cd>& p) const {
    cd acc(0.0, 0.0);
    for (int a = 0; a < m; ++a) acc += std::conj(h[a]) * p[a];
    return std::norm(acc);
  }

  double uav_seen(const std::vector<cd>& h, int k) const {
    double s = pow2(h, pc[k]);
    for (int j = 0; j < n_i; ++j)
      if (sched[k][j]) s += pow2(h, pp[k][j]);
    return s;
  }

  double iin_gt(int k, int i) const {
    double s = 0.0;
    for (int k2 = 0; k2 < n_k; ++k2)
      if (k2 != k && cover_gt[k2][i]) s += uav_seen(hg[k2][i], k2);
    return s;
  }

  double iin_eve(int k, int e) const {
    double s = 0.0;
    for (int k2 = 0; k2 < n_k; ++k2)
      if (k2 != k && cover_eve[k2][e]) s += uav_seen(he[k2][e], k2);
    return s;
  }

  double g_c(int k, int i) const {
    if (!sched[k][i]) return 0.0;
    double den = iin_gt(k, i) + sigma2;
    for (int j = 0; j < n_i; ++j)
      if (sched[k][j]) den += pow2(hg[k][i], pp[k][j]);
    return pow2(hg[k][i], pc[k]) / den;
  }

  double g_p(int k, int i) const {
    if (!sched[k][i]) return 0.0;
    double den = iin_gt(k, i) + sigma2;
    for (int j = 0; j < n_i; ++j)
      if (sched[k][j] && j != i) den += pow2(hg[k][i], pp[k][j]);
    return pow2(hg[k][i], pp[k][i]) / den;
  }

  double g_ce(int k, int e) const {
    if (!cover_eve[k][e]) return 0.0;
    double den = iin_eve(k, e) + sigma2;
    for (int j = 0; j < n_i; ++j)
      if (sched[k][j]) den += pow2(he[k][e], pp[k][j]);
    return pow2(he[k][e], pc[k]) / den;
  }

  double g_pe(int k, int e, int i) const {
    if (!cover_eve[k][e]) return 0.0;
    double den = iin_eve(k, e) + sigma2 + pow2(he[k][e], pc[k]);
    for (int j = 0; j < n_i; ++j)
      if (sched[k][j] && j != i) den += pow2(he[k][e], pp[k][j]);
    return pow2(he[k][e], pp[k][i]) / den;
  }
};

Oracle random_oracle(RngStream& rng, int n_k, int n_i, int n_e, int m) {
  Oracle o;
  o.n_k = n_k;
  o.n_i = n_i;
  o.n_e = n_e;
  o.m = m;
  o.sigma2 = 0.5 + rng.uniform01();
  auto cvec = [&](double scale) {
    std::vector<cd> v(static_cast<std::size_t>(m));
    for (auto& x : v) x = cd(scale * rng.normal(), scale * rng.normal());
    return v;
  };
  o.hg.assign(n_k, std::vector<std::vector<cd>>(n_i));
  o.he.assign(n_k, std::vector<std::vector<cd>>(n_e));
  o.cover_gt.assign(n_k, std::vector<int>(n_i, 0));
  o.cover_eve.assign(n_k, std::vector<int>(n_e, 0));
  o.sched.assign(n_k, std::vector<int>(n_i, 0));
  o.pc.resize(n_k);
  o.pp.assign(n_k, std::vector<std::vector<cd>>(n_i, std::vector<cd>(m, cd(0, 0))));
  std::vector<bool> taken(static_cast<std::size_t>(n_i), false);
  for (int k = 0; k < n_k; ++k) {
    for (int i = 0; i < n_i; ++i) o.cover_gt[k][i] = rng.uniform01() < 0.7 ? 1 : 0;
    for (int e = 0; e < n_e; ++e) o.cover_eve[k][e] = rng.uniform01() < 0.6 ? 1 : 0;
    for (int i = 0; i < n_i; ++i) o.hg[k][i] = cvec(1.0);
    for (int e = 0; e < n_e; ++e) o.he[k][e] = cvec(1.0);
    o.pc[k] = cvec(0.8);
    int cap = 2;
    for (int i = 0; i < n_i && cap > 0; ++i) {
      if (o.cover_gt[k][i] && !taken[static_cast<std::size_t>(i)] && rng.uniform01() < 0.8) {
        o.sched[k][i] = 1;
        taken[static_cast<std::size_t>(i)] = true;
        o.pp[k][i] = cvec(0.8);
        --cap;
      }
    }
  }
  return o;
}

// Pack the oracle instance into the library's containers.
struct Packed {
  SlotChannels ch;
  AssociationState assoc;
  PrecoderSet pre;
};

Packed pack(const Oracle& o) {
  Packed p;
  p.ch.h_gt.assign(o.n_k, std::vector<Eigen::VectorXcd>(o.n_i));
  p.ch.h_eve.assign(o.n_k, std::vector<Eigen::VectorXcd>(o.n_e));
  p.assoc.cover_gt.resize(o.n_k, o.n_i);
  p.assoc.cover_eve.resize(o.n_k, std::max(o.n_e, 0));
  p.assoc.schedule.resize(o.n_k, o.n_i);
  p.pre = PrecoderSet::zeros(o.n_k, o.m);
  for (int k = 0; k < o.n_k; ++k) {
    for (int i = 0; i < o.n_i; ++i) {
      p.ch.h_gt[k][i] = Eigen::Map<const Eigen::VectorXcd>(o.hg[k][i].data(), o.m);
      p.assoc.cover_gt(k, i) = o.cover_gt[k][i];
      p.assoc.schedule(k, i) = o.sched[k][i];
      if (o.sched[k][i])
        p.pre.priv[k].emplace_back(i, Eigen::Map<const Eigen::VectorXcd>(o.pp[k][i].data(), o.m));
    }
    for (int e = 0; e < o.n_e; ++e) {
      p.ch.h_eve[k][e] = Eigen::Map<const Eigen::VectorXcd>(o.he[k][e].data(), o.m);
      p.assoc.cover_eve(k, e) = o.cover_eve[k][e];
    }
    p.pre.common[k] = Eigen::Map<const Eigen::VectorXcd>(o.pc[k].data(), o.m);
  }
  return p;
}

}  // namespace

TEST_CASE("SINRs match an independent scalar recomputation") {
  RngStream rng(derive_key(5, {501}));
  for (int trial = 0; trial < 60; ++trial) {
    const int n_k = 1 + static_cast<int>(rng.uniform_index(2));
    const int n_i = 1 + static_cast<int>(rng.uniform_index(3));
    const int n_e = 1 + static_cast<int>(rng.uniform_index(2));
    const auto o = random_oracle(rng, n_k, n_i, n_e, 2);
    const auto p = pack(o);
    for (int k = 0; k < n_k; ++k) {
      for (int i = 0; i < n_i; ++i) {
        REQUIRE(sinr_common_gt(k, i, p.ch, p.assoc, p.pre, o.sigma2) ==
                Approx(o.g_c(k, i)).margin(1e-12));
        REQUIRE(sinr_private_gt(k, i, p.ch, p.assoc, p.pre, o.sigma2) ==
                Approx(o.g_p(k, i)).margin(1e-12));
        for (int e = 0; e < n_e; ++e) {
          REQUIRE(sinr_common_eve(k, e, p.ch, p.assoc, p.pre, o.sigma2) ==
                  Approx(o.g_ce(k, e)).margin(1e-12));
          if (o.sched[k][i])
            REQUIRE(sinr_private_eve(k, e, i, p.ch, p.assoc, p.pre, o.sigma2) ==
                    Approx(o.g_pe(k, e, i)).margin(1e-12));
        }
      }
    }
  }
}

TEST_CASE("rates report matches the oracle end to end") {
  RngStream rng(derive_key(6, {602}));
  for (int trial = 0; trial < 40; ++trial) {
    const auto o = random_oracle(rng, 2, 3, 2, 2);
    const auto p = pack(o);
    const auto rep = rates_report(p.ch, p.assoc, p.pre, o.sigma2);

    double worst = std::numeric_limits<double>::infinity();
    bool any_triple = false;
    double worst_rate = std::numeric_limits<double>::infinity();
    bool any_served = false;
    for (int k = 0; k < o.n_k; ++k)
      for (int i = 0; i < o.n_i; ++i) {
        if (!o.sched[k][i]) continue;
        any_served = true;
        const double ri = std::log2(1.0 + o.g_c(k, i)) + std::log2(1.0 + o.g_p(k, i));
        REQUIRE(rep.r_total(i) == Approx(ri).margin(1e-12));
        worst_rate = std::min(worst_rate, ri);
        for (int e = 0; e < o.n_e; ++e) {
          const double rei =
              std::log2(1.0 + o.g_ce(k, e)) + std::log2(1.0 + o.g_pe(k, e, i));
          REQUIRE(rep.r_eve(e, i) == Approx(rei).margin(1e-12));
          if (o.cover_eve[k][e]) {
            any_triple = true;
            worst = std::min(worst, ri - rei);
          }
        }
      }
    const double expected_f1 = any_triple ? worst : (any_served ? worst_rate : 0.0);
    REQUIRE(rep.f1 == Approx(expected_f1).margin(1e-12));

    // rate decompositions
    for (int i = 0; i < o.n_i; ++i) {
      REQUIRE(rep.r_total(i) == Approx(rep.r_common(i) + rep.r_private(i)).margin(1e-12));
      for (int e = 0; e < o.n_e; ++e)
        REQUIRE(rep.r_eve(e, i) ==
                Approx(rep.r_eve_common(e, i) + rep.r_eve_private(e, i)).margin(1e-12));
    }
  }
}

TEST_CASE("zero precoders yield zero rates and zero worst-case secrecy") {
  RngStream rng(derive_key(9, {903}));
  auto o = random_oracle(rng, 2, 3, 2, 2);
  for (auto& v : o.pc)
    for (auto& x : v) x = cd(0, 0);
  for (auto& rows : o.pp)
    for (auto& v : rows)
      for (auto& x : v) x = cd(0, 0);
  const auto p = pack(o);
  const auto rep = rates_report(p.ch, p.assoc, p.pre, o.sigma2);
  REQUIRE(rep.f1 == 0.0);
  REQUIRE(rep.r_total.maxCoeff() == 0.0);
  REQUIRE(rep.r_eve.maxCoeff() == 0.0);
}

TEST_CASE("isolated single-user link reduces to SNR") {
  SlotChannels ch;
  ch.h_gt = {{Eigen::VectorXcd(2)}};
  ch.h_gt[0][0] << cd(1.0, 0.5), cd(-0.3, 0.2);
  ch.h_eve = {{}};
  AssociationState assoc;
  assoc.cover_gt = Eigen::MatrixXi::Ones(1, 1);
  assoc.cover_eve = Eigen::MatrixXi::Zero(1, 0);
  assoc.schedule = Eigen::MatrixXi::Ones(1, 1);
  auto pre = PrecoderSet::zeros(1, 2);
  pre.common[0] << cd(0.6, 0.1), cd(0.2, -0.8);
  const double sigma2 = 1e-3;
  const double expected = std::norm(ch.h_gt[0][0].dot(pre.common[0])) / sigma2;
  REQUIRE(sinr_common_gt(0, 0, ch, assoc, pre, sigma2) == Approx(expected));
  // nothing private transmitted: private SINR is zero
  REQUIRE(sinr_private_gt(0, 0, ch, assoc, pre, sigma2) == 0.0);
}

TEST_CASE("removing the common stream before private decoding can only help") {
  RngStream rng(derive_key(12, {44}));
  for (int trial = 0; trial < 30; ++trial) {
    const auto o = random_oracle(rng, 2, 3, 1, 2);
    const auto p = pack(o);
    for (int k = 0; k < o.n_k; ++k)
      for (int i = 0; i < o.n_i; ++i) {
        if (!o.sched[k][i]) continue;
        const auto& h = p.ch.h_gt[k][i];
        const double with_sic = sinr_private_gt(k, i, p.ch, p.assoc, p.pre, o.sigma2);
        double den = o.iin_gt(k, i) + o.sigma2 + std::norm(h.dot(p.pre.common[k]));
        for (int j = 0; j < o.n_i; ++j)
          if (o.sched[k][j] && j != i) den += std::norm(h.dot(*p.pre.private_for(k, j)));
        const double without_sic = std::norm(h.dot(*p.pre.private_for(k, i))) / den;
        REQUIRE(with_sic >= without_sic);
      }
  }
}

TEST_CASE("stronger common stream suppresses the private leak") {
  RngStream rng(derive_key(13, {45}));
  auto o = random_oracle(rng, 1, 1, 1, 2);
  o.cover_gt[0][0] = o.sched[0][0] = 1;
  o.cover_eve[0][0] = 1;
  for (auto& x : o.pp[0][0]) x = cd(0.5, -0.2);
  auto p = pack(o);
  const double base = sinr_private_eve(0, 0, 0, p.ch, p.assoc, p.pre, o.sigma2);
  p.pre.common[0] *= 4.0;
  const double boosted = sinr_private_eve(0, 0, 0, p.ch, p.assoc, p.pre, o.sigma2);
  REQUIRE(boosted < base);
}

TEST_CASE("worst-case secrecy may be negative and is not clamped") {
  SlotChannels ch;
  ch.h_gt = {{Eigen::VectorXcd(2)}};
  ch.h_eve = {{Eigen::VectorXcd(2)}};
  ch.h_gt[0][0] << cd(0.01, 0.0), cd(0.0, 0.01);  // weak legitimate link
  ch.h_eve[0][0] << cd(2.0, 0.0), cd(0.0, 2.0);   // strong eavesdropper
  AssociationState assoc;
  assoc.cover_gt = Eigen::MatrixXi::Ones(1, 1);
  assoc.cover_eve = Eigen::MatrixXi::Ones(1, 1);
  assoc.schedule = Eigen::MatrixXi::Ones(1, 1);
  auto pre = PrecoderSet::zeros(1, 2);
  pre.common[0] << cd(1.0, 0.0), cd(0.0, 1.0);
  // common-only transmission, noise-limited: the Eve's rate advantage is the
  // channel-gain ratio and the secrecy difference goes negative
  const auto rep = rates_report(ch, assoc, pre, 1.0);
  REQUIRE(rep.f1 < 0.0);
  REQUIRE(rep.r_secrecy(0) == Approx(rep.f1));
}

TEST_CASE("per-GT secrecy uses the strongest eavesdropper anywhere") {
  RngStream rng(derive_key(21, {7}));
  const auto o = random_oracle(rng, 2, 3, 2, 2);
  const auto p = pack(o);
  const auto rep = rates_report(p.ch, p.assoc, p.pre, o.sigma2);
  for (int i = 0; i < o.n_i; ++i) {
    if (rep.serving_uav[static_cast<std::size_t>(i)] < 0) continue;
    double strongest = 0.0;
    for (int e = 0; e < o.n_e; ++e) strongest = std::max(strongest, rep.r_eve(e, i));
    REQUIRE(rep.r_secrecy(i) == Approx(rep.r_total(i) - strongest).margin(1e-12));
  }
}

TEST_CASE("without covered eavesdroppers the worst served rate is reported") {
  RngStream rng(derive_key(22, {8}));
  auto o = random_oracle(rng, 2, 3, 1, 2);
  for (auto& row : o.cover_eve)
    for (auto& x : row) x = 0;
  const auto p = pack(o);
  const auto rep = rates_report(p.ch, p.assoc, p.pre, o.sigma2);
  double expected = std::numeric_limits<double>::infinity();
  bool served = false;
  for (int i = 0; i < o.n_i; ++i)
    if (rep.serving_uav[static_cast<std::size_t>(i)] >= 0) {
      served = true;
      expected = std::min(expected, rep.r_total(i));
    }
  if (served) REQUIRE(rep.f1 == Approx(expected));
}
