#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace hetuav {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// All physical, heterogeneity, and training constants for one scenario.
/// Loads from a `key = value` text file ('#' starts a comment, scalar lists
/// are comma-separated, coordinate lists use `x,y;x,y;...`). Unknown keys are
/// rejected by name.
struct ScenarioConfig {
  // geometry / fleet
  double area_d = 200.0;         // service area side D (m)
  double h_uav = 100.0;          // flight altitude (m)
  int n_uav = 2;
  int n_gt = 8;
  int n_eve = 2;
  // C_r per UAV (m): a 3D-distance threshold, so useful values exceed h_uav
  // (120 m at 100 m altitude reaches ~66 m of ground radius).
  std::vector<double> coverage_range = {120.0, 105.0};
  std::vector<int> service_capacity = {3, 2};          // N_s per UAV
  double v_max = 25.0;           // m/s
  double v_min = 4.0;            // m/s
  double slot_dt = 1.0;          // s
  int n_slots = 20;              // N_T
  double d_c = 10.0;             // protection distance (m)
  int velocity_levels = 5;       // |L|, includes the zero speed
  std::vector<Eigen::Vector2d> uav_init;  // empty -> centered ring layout
  int n_hotspots = 3;
  double hotspot_sigma = 25.0;   // GT cluster spread (m)

  // channel
  double f_c = 2.4e9;            // carrier (Hz)
  double p_max = 35.0;           // per-UAV transmit power budget (W)
  double noise_psd = -170.0;     // AWGN PSD (dBm/Hz)
  double bandwidth_b = 1e6;      // Hz
  double s_curve_a = 9.61;
  double s_curve_b = 0.15;
  double eta_los = 1.0;          // excess loss (dB)
  double eta_nlos = 20.0;        // excess loss (dB)
  int m_antennas = 2;

  // rotary-wing propulsion
  double d0 = 0.3;               // fuselage drag ratio
  double rho_a = 1.225;          // air density
  double s_sol = 0.05;           // rotor solidity
  double a_disc = 0.503;         // rotor disc area
  double v_tip = 120.0;          // blade tip speed (m/s)
  double p0 = 79.86;             // blade profile power (W)
  double p1 = 88.63;             // induced power (W)
  double v0 = 4.03;              // mean rotor induced velocity (m/s)

  // reward
  double w_sr = 1.0;
  double w_ec = -1.0;            // <0 -> auto: 1/(n_uav*(p0+p1)*slot_dt)
  double p_col = 5.0;

  // inner solver
  int s2dc_max_iters = 30;
  double s2dc_obj_tol = 1e-4;
  double s2dc_mu0 = 1.0;
  double s2dc_mu_cap = 1e3;
  double s2dc_subproblem_tol = 1e-5;

  // learner
  double gamma = 0.99;
  double lr = 5e-4;
  double tau = 0.005;
  double beta = 1.0;
  double alpha0 = 0.2;  // initial temperature (learned online, frozen offline)
  double target_entropy_frac = 0.6;  // target entropy = frac * log|A|
  std::size_t buffer_capacity = 100000;
  int batch_distill = 512;
  int batch_online = 1024;
  double grad_clip = 10.0;
  std::string arch = "mlp";
  std::vector<int> hidden = {256, 256, 128};
  int distill_updates = 500;
  int train_episodes = 5000;

  // expert
  int expert_retry_limit = 2;

  // sweep sampling ranges (per-seed heterogeneity)
  double coverage_sample_min = 80.0;
  double coverage_sample_max = 120.0;
  int capacity_sample_min = 10;
  int capacity_sample_max = 20;

  std::uint64_t rng_seed = 1;

  double noise_power_w() const;  // defined below with the channel helpers

  double reward_energy_weight() const {
    if (w_ec >= 0.0) return w_ec;
    return 1.0 / (static_cast<double>(n_uav) * (p0 + p1) * slot_dt);
  }

  double coverage_of(int k) const {
    return coverage_range.size() == 1 ? coverage_range[0]
                                      : coverage_range.at(static_cast<std::size_t>(k));
  }
  int capacity_of(int k) const {
    return service_capacity.size() == 1 ? service_capacity[0]
                                        : service_capacity.at(static_cast<std::size_t>(k));
  }

  std::vector<Eigen::Vector2d> initial_uav_positions() const {
    if (!uav_init.empty()) return uav_init;
    // default: small square pattern around the area center
    std::vector<Eigen::Vector2d> out;
    const double c = area_d / 2.0;
    const double off = area_d / 8.0;
    for (int k = 0; k < n_uav; ++k) {
      const double dx = (k % 2 == 0) ? -off : off;
      const double dy = (k % 4 < 2) ? -off : off;
      out.emplace_back(c + dx * (1 + k / 4), c + dy * (1 + k / 4));
    }
    return out;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (area_d <= 0) fail("config invariant violated: area_d must be > 0");
    if (h_uav <= 0) fail("config invariant violated: h_uav must be > 0");
    if (n_uav < 1) fail("config invariant violated: n_uav must be >= 1");
    if (n_gt < 1) fail("config invariant violated: n_gt must be >= 1");
    if (n_eve < 0) fail("config invariant violated: n_eve must be >= 0");
    if (v_min <= 0) fail("config invariant violated: v_min must be > 0");
    if (v_max <= v_min) fail("config invariant violated: v_max must be > v_min");
    if (slot_dt <= 0) fail("config invariant violated: slot_dt must be > 0");
    if (n_slots < 1) fail("config invariant violated: n_slots must be >= 1");
    if (velocity_levels < 3) fail("config invariant violated: velocity_levels must be >= 3");
    if (m_antennas < 1) fail("config invariant violated: m_antennas must be >= 1");
    if (bandwidth_b <= 0) fail("config invariant violated: bandwidth_b must be > 0");
    if (p_max <= 0) fail("config invariant violated: p_max must be > 0");
    if (coverage_range.empty() ||
        (coverage_range.size() != 1 &&
         coverage_range.size() != static_cast<std::size_t>(n_uav)))
      fail("config invariant violated: coverage_range needs 1 or n_uav entries");
    for (double c : coverage_range)
      if (c <= 0) fail("config invariant violated: coverage_range entries must be > 0");
    if (service_capacity.empty() ||
        (service_capacity.size() != 1 &&
         service_capacity.size() != static_cast<std::size_t>(n_uav)))
      fail("config invariant violated: service_capacity needs 1 or n_uav entries");
    for (int s : service_capacity)
      if (s < 1) fail("config invariant violated: service_capacity entries must be >= 1");
    for (double r : {d0, rho_a, s_sol, a_disc, v_tip, p0, p1, v0})
      if (r <= 0) fail("config invariant violated: rotor parameters must be > 0");
    if (!uav_init.empty() && uav_init.size() != static_cast<std::size_t>(n_uav))
      fail("config invariant violated: uav_init needs n_uav coordinate pairs");
    if (arch != "mlp")
      fail("config key 'arch': only 'mlp' is available in this build, got '" + arch + "'");
  }

  static ScenarioConfig load(const std::string& path);
  void apply(const std::string& key, const std::string& value);
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!out.empty() && out.back().empty()) out.pop_back();
  return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as a number");
  }
}

inline long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': cannot parse '" + v + "' as an integer");
  }
}

}  // namespace detail

inline void ScenarioConfig::apply(const std::string& key, const std::string& value) {
  using detail::parse_double;
  using detail::parse_int;
  auto as_doubles = [&](const std::string& v) {
    std::vector<double> out;
    for (const auto& tok : detail::split(v, ',')) out.push_back(parse_double(key, tok));
    return out;
  };
  auto as_ints = [&](const std::string& v) {
    std::vector<int> out;
    for (const auto& tok : detail::split(v, ','))
      out.push_back(static_cast<int>(parse_int(key, tok)));
    return out;
  };

  if (key == "area_d") area_d = parse_double(key, value);
  else if (key == "h_uav") h_uav = parse_double(key, value);
  else if (key == "n_uav") n_uav = static_cast<int>(parse_int(key, value));
  else if (key == "n_gt") n_gt = static_cast<int>(parse_int(key, value));
  else if (key == "n_eve") n_eve = static_cast<int>(parse_int(key, value));
  else if (key == "coverage_range") coverage_range = as_doubles(value);
  else if (key == "service_capacity") service_capacity = as_ints(value);
  else if (key == "v_max") v_max = parse_double(key, value);
  else if (key == "v_min") v_min = parse_double(key, value);
  else if (key == "slot_dt") slot_dt = parse_double(key, value);
  else if (key == "n_slots") n_slots = static_cast<int>(parse_int(key, value));
  else if (key == "d_c") d_c = parse_double(key, value);
  else if (key == "velocity_levels") velocity_levels = static_cast<int>(parse_int(key, value));
  else if (key == "uav_init") {
    uav_init.clear();
    for (const auto& pair : detail::split(value, ';')) {
      const auto xy = detail::split(pair, ',');
      if (xy.size() != 2)
        throw ConfigError("config key 'uav_init': expected x,y;x,y;... got '" + value + "'");
      uav_init.emplace_back(parse_double(key, xy[0]), parse_double(key, xy[1]));
    }
  }
  else if (key == "n_hotspots") n_hotspots = static_cast<int>(parse_int(key, value));
  else if (key == "hotspot_sigma") hotspot_sigma = parse_double(key, value);
  else if (key == "f_c") f_c = parse_double(key, value);
  else if (key == "p_max") p_max = parse_double(key, value);
  else if (key == "noise_psd") noise_psd = parse_double(key, value);
  else if (key == "bandwidth_b") bandwidth_b = parse_double(key, value);
  else if (key == "s_curve_a") s_curve_a = parse_double(key, value);
  else if (key == "s_curve_b") s_curve_b = parse_double(key, value);
  else if (key == "eta_los") eta_los = parse_double(key, value);
  else if (key == "eta_nlos") eta_nlos = parse_double(key, value);
  else if (key == "m_antennas") m_antennas = static_cast<int>(parse_int(key, value));
  else if (key == "d0") d0 = parse_double(key, value);
  else if (key == "rho_a") rho_a = parse_double(key, value);
  else if (key == "s_sol") s_sol = parse_double(key, value);
  else if (key == "a_disc") a_disc = parse_double(key, value);
  else if (key == "v_tip") v_tip = parse_double(key, value);
  else if (key == "p0") p0 = parse_double(key, value);
  else if (key == "p1") p1 = parse_double(key, value);
  else if (key == "v0") v0 = parse_double(key, value);
  else if (key == "w_sr") w_sr = parse_double(key, value);
  else if (key == "w_ec") w_ec = parse_double(key, value);
  else if (key == "p_col") p_col = parse_double(key, value);
  else if (key == "s2dc_max_iters") s2dc_max_iters = static_cast<int>(parse_int(key, value));
  else if (key == "s2dc_obj_tol") s2dc_obj_tol = parse_double(key, value);
  else if (key == "s2dc_mu0") s2dc_mu0 = parse_double(key, value);
  else if (key == "s2dc_mu_cap") s2dc_mu_cap = parse_double(key, value);
  else if (key == "s2dc_subproblem_tol") s2dc_subproblem_tol = parse_double(key, value);
  else if (key == "gamma") gamma = parse_double(key, value);
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "tau") tau = parse_double(key, value);
  else if (key == "beta") beta = parse_double(key, value);
  else if (key == "alpha0") alpha0 = parse_double(key, value);
  else if (key == "target_entropy_frac") target_entropy_frac = parse_double(key, value);
  else if (key == "buffer_capacity")
    buffer_capacity = static_cast<std::size_t>(parse_int(key, value));
  else if (key == "batch_distill") batch_distill = static_cast<int>(parse_int(key, value));
  else if (key == "batch_online") batch_online = static_cast<int>(parse_int(key, value));
  else if (key == "grad_clip") grad_clip = parse_double(key, value);
  else if (key == "arch") arch = value;
  else if (key == "hidden") hidden = as_ints(value);
  else if (key == "distill_updates") distill_updates = static_cast<int>(parse_int(key, value));
  else if (key == "train_episodes") train_episodes = static_cast<int>(parse_int(key, value));
  else if (key == "expert_retry_limit")
    expert_retry_limit = static_cast<int>(parse_int(key, value));
  else if (key == "coverage_sample_min") coverage_sample_min = parse_double(key, value);
  else if (key == "coverage_sample_max") coverage_sample_max = parse_double(key, value);
  else if (key == "capacity_sample_min")
    capacity_sample_min = static_cast<int>(parse_int(key, value));
  else if (key == "capacity_sample_max")
    capacity_sample_max = static_cast<int>(parse_int(key, value));
  else if (key == "rng_seed") rng_seed = static_cast<std::uint64_t>(parse_int(key, value));
  else throw ConfigError("unknown config key '" + key + "'");
}

inline ScenarioConfig ScenarioConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  ScenarioConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config parse error at " + path + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    cfg.apply(detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
  }
  cfg.validate();
  return cfg;
}

/// Per-UAV positions at one time slot; altitude is pinned to h_uav.
struct FleetState {
  std::vector<Eigen::Vector3d> pos;
  int time_slot = 0;

  static FleetState at(const std::vector<Eigen::Vector2d>& xy, double h, int t = 0) {
    FleetState f;
    f.time_slot = t;
    f.pos.reserve(xy.size());
    for (const auto& p : xy) f.pos.emplace_back(p.x(), p.y(), h);
    return f;
  }
};

/// Position update for one slot: constant speed v along heading omega.
/// Does not clamp; boundary handling is a separate, observable step.
inline Eigen::Vector2d step_kinematics(const Eigen::Vector2d& pos, double v, double omega) {
  return {pos.x() + v * std::cos(omega), pos.y() + v * std::sin(omega)};
}

inline bool boundary_violation(const Eigen::Vector2d& pos, double area_d) {
  return pos.x() < 0.0 || pos.x() > area_d || pos.y() < 0.0 || pos.y() > area_d;
}

inline Eigen::Vector2d clamp_to_area(const Eigen::Vector2d& pos, double area_d) {
  return {std::clamp(pos.x(), 0.0, area_d), std::clamp(pos.y(), 0.0, area_d)};
}

/// All UAV index pairs (k < k') closer than the protection distance.
/// Distance at the protection threshold itself is allowed.
inline std::vector<std::pair<int, int>> collision_pairs(const FleetState& fleet, double d_c) {
  std::vector<std::pair<int, int>> out;
  const int n = static_cast<int>(fleet.pos.size());
  for (int k = 0; k < n; ++k)
    for (int j = k + 1; j < n; ++j)
      if ((fleet.pos[static_cast<std::size_t>(k)] - fleet.pos[static_cast<std::size_t>(j)])
              .norm() < d_c)
        out.emplace_back(k, j);
  return out;
}

/// Rotary-wing propulsion power at level flight speed v:
/// parasite drag + blade profile + induced components.
inline double propulsion_power(double v, const ScenarioConfig& cfg) {
  const double v2 = v * v;
  const double parasite = 0.5 * cfg.d0 * cfg.rho_a * cfg.s_sol * cfg.a_disc * v2 * v;
  const double profile = cfg.p0 * (1.0 + 3.0 * v2 / (cfg.v_tip * cfg.v_tip));
  const double v04 = cfg.v0 * cfg.v0 * cfg.v0 * cfg.v0;
  const double induced =
      cfg.p1 * std::sqrt(std::sqrt(1.0 + v2 * v2 / (4.0 * v04)) - v2 / (2.0 * cfg.v0 * cfg.v0));
  return parasite + profile + induced;
}

inline double slot_energy(double v, const ScenarioConfig& cfg) {
  return propulsion_power(v, cfg) * cfg.slot_dt;
}

/// Total propulsion energy over a (n_uav x n_slots) speed schedule.
inline double fleet_energy_objective(const std::vector<std::vector<double>>& per_slot_speeds,
                                     const ScenarioConfig& cfg) {
  double total = 0.0;
  for (const auto& uav_speeds : per_slot_speeds)
    for (double v : uav_speeds) total += slot_energy(v, cfg);
  return total;
}

}  // namespace hetuav
