#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>

#include "hetuav/channel.hpp"

using namespace hetuav;
using Catch::Approx;

TEST_CASE("LoS probability at the nadir approaches one") {
  // node directly below: elevation 90 degrees
  REQUIRE(los_probability(100.0, 100.0, 9.61, 0.15) == Approx(0.99994).margin(5e-6));
}

TEST_CASE("LoS probability near the horizon approaches the grazing limit") {
  // d >> H: elevation ~ 0 degrees, limit 1/(1 + 9.61 e^{1.4415})
  const double limit = 1.0 / (1.0 + 9.61 * std::exp(0.15 * 9.61));
  REQUIRE(limit == Approx(0.0240).margin(5e-4));
  REQUIRE(los_probability(1e7, 100.0, 9.61, 0.15) == Approx(limit).margin(1e-5));
}

TEST_CASE("LoS probability decreases with horizontal distance") {
  double prev = los_probability(100.0, 100.0, 9.61, 0.15);
  for (double d : {120.0, 200.0, 500.0, 2000.0}) {
    const double p = los_probability(d, 100.0, 9.61, 0.15);
    REQUIRE(p < prev);
    REQUIRE(p > 0.0);
    REQUIRE(p < 1.0);
    prev = p;
  }
}

TEST_CASE("LoS probability rejects distances below the altitude") {
  REQUIRE_THROWS_AS(los_probability(99.0, 100.0, 9.61, 0.15), std::invalid_argument);
}

TEST_CASE("free-space loss matches the textbook value at 100 m and 2.4 GHz") {
  REQUIRE(free_space_loss_db(100.0, 2.4e9) == Approx(80.05).margin(0.01));
}

TEST_CASE("equal excess losses make path loss independent of LoS probability") {
  const double eta = 7.5;
  const double pl = path_loss_db(250.0, 100.0, 9.61, 0.15, eta, eta, 2.4e9);
  REQUIRE(pl == Approx(eta + free_space_loss_db(250.0, 2.4e9)).epsilon(1e-12));
}

TEST_CASE("path loss composes LoS mixture with free-space loss") {
  const double p_los = los_probability(100.0, 100.0, 9.61, 0.15);
  const double expected = p_los * 1.0 + (1.0 - p_los) * 20.0 + free_space_loss_db(100.0, 2.4e9);
  REQUIRE(path_loss_db(100.0, 100.0, 9.61, 0.15, 1.0, 20.0, 2.4e9) ==
          Approx(expected).epsilon(1e-12));
}

TEST_CASE("small-scale fading has unit power and zero mean") {
  RngStream rng(derive_key(7, {1, 2, 3}));
  const int n = 100000;
  double power = 0.0;
  std::complex<double> mean(0.0, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto v = draw_small_scale(rng, 1);
    power += std::norm(v(0));
    mean += v(0);
  }
  power /= n;
  mean /= static_cast<double>(n);
  REQUIRE(power == Approx(1.0).margin(0.02));
  REQUIRE(std::abs(mean.real()) < 0.02);
  REQUIRE(std::abs(mean.imag()) < 0.02);
}

TEST_CASE("identical seeds reproduce the fading draw exactly") {
  RngStream a(derive_key(42, {9}));
  RngStream b(derive_key(42, {9}));
  const auto va = draw_small_scale(a, 4);
  const auto vb = draw_small_scale(b, 4);
  REQUIRE(va == vb);
}

TEST_CASE("link channel applies the amplitude form of the path loss") {
  ScenarioConfig cfg;
  const Eigen::Vector3d uav(0.0, 0.0, 100.0);
  const Eigen::Vector2d node(60.0, 80.0);
  const double d = std::sqrt(60.0 * 60.0 + 80.0 * 80.0 + 100.0 * 100.0);
  const double loss_db = path_loss_db(d, cfg.h_uav, cfg.s_curve_a, cfg.s_curve_b, cfg.eta_los,
                                      cfg.eta_nlos, cfg.f_c);

  auto rng = link_rng(cfg.rng_seed, 3, 1, NodeKind::gt, 5);
  const auto link = link_channel(uav, node, cfg, rng, 1, NodeKind::gt, 5, 3);

  auto rng2 = link_rng(cfg.rng_seed, 3, 1, NodeKind::gt, 5);
  const auto small = draw_small_scale(rng2, cfg.m_antennas);

  REQUIRE(link.h.squaredNorm() / small.squaredNorm() ==
          Approx(std::pow(10.0, -loss_db / 10.0)).epsilon(1e-12));
  REQUIRE(link.from_uav == 1);
  REQUIRE(link.to_node == 5);
  REQUIRE(link.time_slot == 3);
}

TEST_CASE("link draws are keyed by slot, uav, and node") {
  ScenarioConfig cfg;
  const Eigen::Vector3d uav(0.0, 0.0, 100.0);
  const Eigen::Vector2d node(10.0, 10.0);
  auto draw = [&](int t, int k, int id) {
    auto rng = link_rng(cfg.rng_seed, t, k, NodeKind::gt, id);
    return link_channel(uav, node, cfg, rng, k, NodeKind::gt, id, t).h;
  };
  REQUIRE(draw(0, 0, 0) == draw(0, 0, 0));
  REQUIRE(draw(0, 0, 0) != draw(1, 0, 0));
  REQUIRE(draw(0, 0, 0) != draw(0, 1, 0));
  REQUIRE(draw(0, 0, 0) != draw(0, 0, 1));
}

TEST_CASE("noise power follows dB arithmetic") {
  REQUIRE(noise_power(-170.0, 1e6) == Approx(1e-14).epsilon(1e-12));
  REQUIRE(noise_power(-170.0, 1.0) == Approx(1e-20).epsilon(1e-12));
  REQUIRE(noise_power(-170.0, 2e6) == Approx(2e-14).epsilon(1e-12));
}

TEST_CASE("slot channel container covers every link") {
  ScenarioConfig cfg;
  cfg.n_uav = 2;
  cfg.n_gt = 3;
  cfg.n_eve = 2;
  const std::vector<Eigen::Vector3d> uavs = {{50.0, 50.0, 100.0}, {150.0, 150.0, 100.0}};
  const std::vector<Eigen::Vector2d> gts = {{40.0, 40.0}, {60.0, 60.0}, {140.0, 150.0}};
  const std::vector<Eigen::Vector2d> eves = {{45.0, 55.0}, {155.0, 145.0}};
  const auto ch = draw_slot_channels(cfg, uavs, gts, eves, 11, 0);
  REQUIRE(ch.n_uav() == 2);
  REQUIRE(ch.n_gt() == 3);
  REQUIRE(ch.n_eve() == 2);
  for (int k = 0; k < 2; ++k) {
    for (int i = 0; i < 3; ++i) REQUIRE(ch.h_gt[k][i].size() == cfg.m_antennas);
    for (int e = 0; e < 2; ++e) REQUIRE(ch.h_eve[k][e].size() == cfg.m_antennas);
  }
  // same seed and slot reproduce bit-identically
  const auto ch2 = draw_slot_channels(cfg, uavs, gts, eves, 11, 0);
  REQUIRE(ch.h_gt[1][2] == ch2.h_gt[1][2]);
  REQUIRE(ch.h_eve[0][1] == ch2.h_eve[0][1]);
}
