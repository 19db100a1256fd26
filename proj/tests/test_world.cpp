#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hetuav/world.hpp"

using namespace hetuav;
using Catch::Approx;

namespace {

ScenarioConfig table_cfg() {
  ScenarioConfig cfg;
  cfg.validate();
  return cfg;
}

std::string write_temp_config(const std::string& body) {
  const std::string path = "/tmp/hetuav_test_cfg.txt";
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("kinematics step follows heading at constant speed") {
  const Eigen::Vector2d origin(0.0, 0.0);
  REQUIRE(step_kinematics(origin, 0.0, 1.234) == origin);

  const auto east = step_kinematics({10.0, 10.0}, 5.0, 0.0);
  REQUIRE(east.x() == Approx(15.0));
  REQUIRE(east.y() == Approx(10.0));

  const auto north = step_kinematics({10.0, 10.0}, 5.0, M_PI / 2.0);
  REQUIRE(north.x() == Approx(10.0).margin(1e-12));
  REQUIRE(north.y() == Approx(15.0));
}

TEST_CASE("boundary test is inclusive at the area edge") {
  REQUIRE_FALSE(boundary_violation({0.0, 0.0}, 400.0));
  REQUIRE_FALSE(boundary_violation({400.0, 400.0}, 400.0));
  REQUIRE(boundary_violation({401.0, 200.0}, 400.0));
  REQUIRE(boundary_violation({200.0, -0.001}, 400.0));
}

TEST_CASE("clamping projects onto the service area") {
  REQUIRE(clamp_to_area({-5.0, 200.0}, 400.0) == Eigen::Vector2d(0.0, 200.0));
  REQUIRE(clamp_to_area({450.0, 450.0}, 400.0) == Eigen::Vector2d(400.0, 400.0));
  REQUIRE(clamp_to_area({100.0, 100.0}, 400.0) == Eigen::Vector2d(100.0, 100.0));
}

TEST_CASE("collision pairs use strict distance threshold") {
  auto fleet = FleetState::at({{50.0, 50.0}, {50.0, 50.0}}, 100.0);
  auto pairs = collision_pairs(fleet, 10.0);
  REQUIRE(pairs.size() == 1);
  REQUIRE(pairs[0] == std::pair<int, int>(0, 1));

  // separation exactly d_c keeps the protection constraint satisfied
  fleet = FleetState::at({{50.0, 50.0}, {60.0, 50.0}}, 100.0);
  REQUIRE(collision_pairs(fleet, 10.0).empty());

  fleet = FleetState::at({{0.0, 0.0}, {5.0, 0.0}, {100.0, 0.0}}, 100.0);
  pairs = collision_pairs(fleet, 10.0);
  REQUIRE(pairs.size() == 1);
  REQUIRE(pairs[0] == std::pair<int, int>(0, 1));
}

TEST_CASE("collision detection is order independent") {
  auto fleet = FleetState::at({{0.0, 0.0}, {5.0, 0.0}, {7.0, 0.0}, {100.0, 0.0}}, 100.0);
  auto reversed = FleetState::at({{100.0, 0.0}, {7.0, 0.0}, {5.0, 0.0}, {0.0, 0.0}}, 100.0);
  const auto a = collision_pairs(fleet, 10.0);
  auto b = collision_pairs(reversed, 10.0);
  // map reversed indices back: j -> 3-j
  for (auto& pr : b) {
    int x = 3 - pr.first, y = 3 - pr.second;
    pr = {std::min(x, y), std::max(x, y)};
  }
  std::sort(b.begin(), b.end());
  REQUIRE(a == b);
}

TEST_CASE("hover power equals the sum of profile and induced terms") {
  const auto cfg = table_cfg();
  REQUIRE(propulsion_power(0.0, cfg) == Approx(cfg.p0 + cfg.p1).epsilon(1e-14));
}

TEST_CASE("power at the mean rotor induced velocity matches the closed form") {
  const auto cfg = table_cfg();
  const double v = cfg.v0;
  const double expected = 0.5 * cfg.d0 * cfg.rho_a * cfg.s_sol * cfg.a_disc * v * v * v +
                          cfg.p0 * (1.0 + 3.0 * v * v / (cfg.v_tip * cfg.v_tip)) +
                          cfg.p1 * std::sqrt(std::sqrt(1.25) - 0.5);
  REQUIRE(propulsion_power(v, cfg) == Approx(expected).epsilon(1e-12));
}

TEST_CASE("parasite drag dominates at high speed") {
  const auto cfg = table_cfg();
  REQUIRE(propulsion_power(25.0, cfg) > propulsion_power(20.0, cfg));
}

TEST_CASE("propulsion power is positive over the speed range") {
  const auto cfg = table_cfg();
  for (double v = 0.0; v <= cfg.v_max; v += 0.5) REQUIRE(propulsion_power(v, cfg) > 0.0);
}

TEST_CASE("slot energy is power times slot duration") {
  auto cfg = table_cfg();
  cfg.slot_dt = 1.0;
  REQUIRE(slot_energy(0.0, cfg) == Approx(cfg.p0 + cfg.p1));
  cfg.slot_dt = 2.0;
  REQUIRE(slot_energy(10.0, cfg) == Approx(2.0 * propulsion_power(10.0, cfg)));
}

TEST_CASE("fleet energy sums slot energies over UAVs and slots") {
  auto cfg = table_cfg();
  cfg.slot_dt = 1.0;
  REQUIRE(fleet_energy_objective({{0.0}}, cfg) == Approx(cfg.p0 + cfg.p1));
  REQUIRE(fleet_energy_objective({{0.0}, {0.0}}, cfg) == Approx(2.0 * (cfg.p0 + cfg.p1)));

  const std::vector<std::vector<double>> speeds = {{0.0, 5.0, 12.5}, {25.0, 4.0, 7.0}};
  double expected = 0.0;
  for (const auto& row : speeds)
    for (double v : row) expected += propulsion_power(v, cfg) * cfg.slot_dt;
  REQUIRE(fleet_energy_objective(speeds, cfg) == Approx(expected));
}

TEST_CASE("config loads key-value files with lists and comments") {
  const auto path = write_temp_config(
      "# scenario\n"
      "area_d = 400\n"
      "n_uav = 4\n"
      "n_gt = 32\n"
      "n_eve = 5\n"
      "coverage_range = 50, 75, 25, 50\n"
      "service_capacity = 5, 7, 3, 5\n"
      "uav_init = 175,175; 225,225; 175,225; 225,175\n"
      "n_slots = 40   # horizon\n");
  const auto cfg = ScenarioConfig::load(path);
  REQUIRE(cfg.area_d == 400.0);
  REQUIRE(cfg.n_uav == 4);
  REQUIRE(cfg.coverage_range == std::vector<double>{50.0, 75.0, 25.0, 50.0});
  REQUIRE(cfg.service_capacity == std::vector<int>{5, 7, 3, 5});
  REQUIRE(cfg.uav_init.size() == 4);
  REQUIRE(cfg.uav_init[1] == Eigen::Vector2d(225.0, 225.0));
  REQUIRE(cfg.n_slots == 40);
  std::remove(path.c_str());
}

TEST_CASE("config rejects unknown keys by name") {
  const auto path = write_temp_config("area_d = 400\nno_such_key = 3\n");
  REQUIRE_THROWS_WITH(ScenarioConfig::load(path), Catch::Matchers::ContainsSubstring("no_such_key"));
  std::remove(path.c_str());
}

TEST_CASE("config rejects invariant violations by key name") {
  const auto path = write_temp_config("v_min = 30\nv_max = 25\n");
  REQUIRE_THROWS_WITH(ScenarioConfig::load(path), Catch::Matchers::ContainsSubstring("v_max"));
  std::remove(path.c_str());

  const auto path2 = write_temp_config("service_capacity = 0\n");
  REQUIRE_THROWS_WITH(ScenarioConfig::load(path2),
                      Catch::Matchers::ContainsSubstring("service_capacity"));
  std::remove(path2.c_str());
}

TEST_CASE("config rejects malformed numbers with the offending key") {
  const auto path = write_temp_config("p_max = banana\n");
  REQUIRE_THROWS_WITH(ScenarioConfig::load(path), Catch::Matchers::ContainsSubstring("p_max"));
  std::remove(path.c_str());
}

TEST_CASE("energy reward weight defaults to the hover-energy normalizer") {
  auto cfg = table_cfg();
  cfg.n_uav = 4;
  cfg.w_ec = -1.0;
  REQUIRE(cfg.reward_energy_weight() ==
          Approx(1.0 / (4.0 * (cfg.p0 + cfg.p1) * cfg.slot_dt)));
  cfg.w_ec = 0.25;
  REQUIRE(cfg.reward_energy_weight() == 0.25);
}
