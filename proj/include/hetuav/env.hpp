#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hetuav/association.hpp"
#include "hetuav/channel.hpp"
#include "hetuav/rng.hpp"
#include "hetuav/rsma.hpp"
#include "hetuav/s2dc.hpp"
#include "hetuav/world.hpp"

namespace hetuav {

/// Logarithmically spaced speed levels: {0} then v_min..v_max with a
/// geometric progression over `levels - 1` nonzero entries.
inline std::vector<double> velocity_ladder(double v_min, double v_max, int levels) {
  if (levels < 3) throw std::invalid_argument("velocity_ladder: levels must be >= 3");
  if (v_min <= 0.0 || v_max <= v_min)
    throw std::invalid_argument("velocity_ladder: need 0 < v_min < v_max");
  std::vector<double> speeds{0.0};
  const int top = levels - 2;
  for (int l = 0; l <= top; ++l)
    speeds.push_back(v_min * std::pow(v_max / v_min,
                                      static_cast<double>(l) / static_cast<double>(top)));
  return speeds;
}

struct DecodedAction {
  double v = 0.0;
  double omega = 0.0;
  int power_split = 0;  // index into the common-stream fraction ladder
};

/// Discrete joint index space: one "still" action plus four axis directions
/// times the nonzero speed levels. Redundant (still, speed>0) and
/// (direction, speed 0) combinations are excluded, so decoding is bijective.
/// With `power_splits > 1` (solver-free baselines) the index space is the
/// Cartesian product with a common-stream power fraction ladder.
struct ActionSpec {
  std::vector<double> speeds;  // strictly increasing, speeds[0] == 0
  int power_splits = 1;

  static constexpr std::array<double, 4> k_direction_angles = {
      0.0, 1.5707963267948966, 3.141592653589793, 4.71238898038469};  // right, up, left, down

  static ActionSpec from_config(const ScenarioConfig& cfg, int power_splits = 1) {
    ActionSpec spec;
    spec.speeds = velocity_ladder(cfg.v_min, cfg.v_max, cfg.velocity_levels);
    spec.power_splits = power_splits;
    return spec;
  }

  int levels() const { return static_cast<int>(speeds.size()); }
  int mobility_count() const { return 1 + 4 * (levels() - 1); }
  int size() const { return mobility_count() * power_splits; }

  /// Common-stream share of the power budget for a split index; the ladder
  /// spans [0, 1] inclusive so both pure-private and pure-common arms exist.
  double split_fraction(int split) const {
    if (split < 0 || split >= power_splits)
      throw std::out_of_range("ActionSpec: power split index out of range");
    if (power_splits == 1) return 0.0;  // unused in solver mode
    return static_cast<double>(split) / static_cast<double>(power_splits - 1);
  }

  int encode(int direction, int level, int split = 0) const {
    if (level == 0) return split * mobility_count();  // canonical still
    if (direction < 0 || direction >= 4 || level < 0 || level >= levels() ||
        split < 0 || split >= power_splits)
      throw std::out_of_range("ActionSpec: encode arguments out of range");
    return split * mobility_count() + 1 + direction * (levels() - 1) + (level - 1);
  }

  int still_index(int split = 0) const { return encode(0, 0, split); }

  DecodedAction decode(int index) const {
    if (index < 0 || index >= size())
      throw std::out_of_range("ActionSpec: action index " + std::to_string(index) +
                              " outside [0," + std::to_string(size()) + ")");
    DecodedAction act;
    act.power_split = index / mobility_count();
    const int mob = index % mobility_count();
    if (mob == 0) return act;  // still: zero speed, heading irrelevant
    const int direction = (mob - 1) / (levels() - 1);
    const int level = 1 + (mob - 1) % (levels() - 1);
    act.v = speeds[static_cast<std::size_t>(level)];
    act.omega = k_direction_angles[static_cast<std::size_t>(direction)];
    return act;
  }
};

/// Flat observation for agent k: relative positions (agent minus other) over
/// the other UAVs in ascending id, then all GTs, then all Eves, each divided
/// by the area side so clamped layouts stay inside [-1, 1].
inline Eigen::VectorXd observe(int k, const std::vector<Eigen::Vector2d>& uav_xy,
                               const std::vector<Eigen::Vector2d>& gt_pos,
                               const std::vector<Eigen::Vector2d>& eve_pos, double area_d) {
  const int n_k = static_cast<int>(uav_xy.size());
  const int n_i = static_cast<int>(gt_pos.size());
  const int n_e = static_cast<int>(eve_pos.size());
  Eigen::VectorXd obs(2 * (n_k - 1 + n_i + n_e));
  const Eigen::Vector2d& self = uav_xy[static_cast<std::size_t>(k)];
  int at = 0;
  auto put = [&](const Eigen::Vector2d& other) {
    obs[at++] = (self.x() - other.x()) / area_d;
    obs[at++] = (self.y() - other.y()) / area_d;
  };
  for (int l = 0; l < n_k; ++l)
    if (l != k) put(uav_xy[static_cast<std::size_t>(l)]);
  for (const auto& g : gt_pos) put(g);
  for (const auto& e : eve_pos) put(e);
  return obs;
}

/// r = (w_sr * r_sr + w_ec * r_ec) * eta_loc - eta_col * p_col, where r_sr and
/// r_ec are fleet-wide sums shared by every agent and the two gates are
/// per-agent indicators.
inline double reward_value(double r_sr, double r_ec, double w_sr, double w_ec,
                           bool boundary_violated, bool in_collision, double p_col) {
  const double eta_loc = boundary_violated ? 0.0 : 1.0;
  const double eta_col = in_collision ? 1.0 : 0.0;
  return (w_sr * r_sr + w_ec * r_ec) * eta_loc - eta_col * p_col;
}

struct Transition {
  int agent = 0;
  int episode = 0;
  int t = 0;
  Eigen::VectorXd obs;
  int action = 0;
  double reward = 0.0;
  Eigen::VectorXd next_obs;
  bool done = false;
  bool fallback = false;  // provider slot was substituted by the scripted policy
};

inline void to_json(nlohmann::json& j, const Transition& tr) {
  j = nlohmann::json{
      {"episode", tr.episode},
      {"t", tr.t},
      {"agent", tr.agent},
      {"obs", std::vector<double>(tr.obs.data(), tr.obs.data() + tr.obs.size())},
      {"action", tr.action},
      {"reward", tr.reward},
      {"next_obs",
       std::vector<double>(tr.next_obs.data(), tr.next_obs.data() + tr.next_obs.size())},
      {"done", tr.done},
      {"fallback", tr.fallback}};
}

inline void from_json(const nlohmann::json& j, Transition& tr) {
  tr.episode = j.at("episode").get<int>();
  tr.t = j.at("t").get<int>();
  tr.agent = j.at("agent").get<int>();
  const auto obs = j.at("obs").get<std::vector<double>>();
  const auto next = j.at("next_obs").get<std::vector<double>>();
  tr.obs = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  tr.next_obs =
      Eigen::Map<const Eigen::VectorXd>(next.data(), static_cast<Eigen::Index>(next.size()));
  tr.action = j.at("action").get<int>();
  tr.reward = j.at("reward").get<double>();
  tr.done = j.at("done").get<bool>();
  tr.fallback = j.value("fallback", false);
}

/// One JSON object per line; the shared format for expert datasets and
/// evaluation dumps.
inline void write_transitions(const std::string& path, const std::vector<Transition>& records,
                              bool append = false) {
  std::ofstream out(path, append ? std::ios::app : std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open transition file '" + path + "' for writing");
  for (const auto& tr : records) out << nlohmann::json(tr).dump() << '\n';
}

inline std::vector<Transition> read_transitions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open transition file '" + path + "'");
  std::vector<Transition> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(nlohmann::json::parse(line).get<Transition>());
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("transition file '" + path + "' line " + std::to_string(lineno) +
                               ": " + e.what());
    }
  }
  return records;
}

/// Fixed-direction precoding for the solver-free baselines: per UAV the
/// common beam points along the sum of served-GT channel directions and each
/// private beam is maximum-ratio toward its GT; `common_frac[k]` of the power
/// budget goes to the common stream, the rest splits evenly across privates.
inline PrecoderSet heuristic_precoders(const SlotChannels& ch, const AssociationState& assoc,
                                       const ScenarioConfig& cfg,
                                       const std::vector<double>& common_frac) {
  const int n_k = ch.n_uav();
  PrecoderSet pre = PrecoderSet::zeros(n_k, cfg.m_antennas);
  for (int k = 0; k < n_k; ++k) {
    const auto served = assoc.served_gts(k);
    if (served.empty()) continue;
    const double frac = std::clamp(common_frac[static_cast<std::size_t>(k)], 0.0, 1.0);
    Eigen::VectorXcd dir = Eigen::VectorXcd::Zero(cfg.m_antennas);
    for (int i : served)
      dir += ch.h_gt[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].normalized();
    const double p_common = frac * cfg.p_max;
    if (dir.norm() > 1e-12 && p_common > 0.0)
      pre.common[static_cast<std::size_t>(k)] = std::sqrt(p_common) * dir.normalized();
    const double p_priv = (1.0 - frac) * cfg.p_max / static_cast<double>(served.size());
    for (int i : served) {
      const auto& h = ch.h_gt[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)];
      pre.priv[static_cast<std::size_t>(k)].emplace_back(i,
                                                         std::sqrt(p_priv) * h.normalized());
    }
  }
  return pre;
}

/// Per-slot outcome shared by all agents, kept for metrics; the inner-solver
/// convergence flag is recorded here rather than raised.
struct SlotInfo {
  RatesReport rates;
  bool s2dc_converged = true;
  int s2dc_iterations = 0;
  double f1 = 0.0;
  double sum_secrecy = 0.0;   // fleet r_sr term
  double fleet_energy = 0.0;  // joules this slot
  int collision_count = 0;    // offending pairs
  int boundary_count = 0;     // agents whose pre-clamp position left the area
  std::vector<double> speeds;
};

/// Single-owner episodic MDP wrapper: decode actions, move and clamp the
/// fleet, rebuild association and channels, run the secrecy precoder, and
/// score the slot. With `use_inner_solver = false` the joint action gains a
/// power-split arm and precoding falls back to heuristic_precoders.
class SecEnv {
 public:
  static constexpr int k_baseline_power_splits = 5;

  explicit SecEnv(ScenarioConfig cfg, bool use_inner_solver = true)
      : cfg_(std::move(cfg)), use_solver_(use_inner_solver) {
    cfg_.validate();
    spec_ = ActionSpec::from_config(cfg_, use_solver_ ? 1 : k_baseline_power_splits);
  }

  const ScenarioConfig& config() const { return cfg_; }
  const ActionSpec& action_spec() const { return spec_; }
  bool uses_inner_solver() const { return use_solver_; }
  int observation_size() const { return 2 * (cfg_.n_uav - 1 + cfg_.n_gt + cfg_.n_eve); }
  int time_slot() const { return t_; }
  int episode() const { return episode_; }
  bool active() const { return active_; }

  const std::vector<Eigen::Vector2d>& uav_positions() const { return uav_xy_; }
  const std::vector<Eigen::Vector2d>& gt_positions() const { return gt_pos_; }
  const std::vector<Eigen::Vector2d>& eve_positions() const { return eve_pos_; }
  const std::vector<Eigen::VectorXd>& observations() const { return obs_; }

  std::vector<Eigen::VectorXd> reset(std::uint64_t seed) {
    episode_seed_ = seed;
    ++episode_;
    t_ = 0;
    RngStream rng(derive_key(seed, {k_reset_tag}));
    const double d = cfg_.area_d;
    const int n_hot = std::max(1, cfg_.n_hotspots);
    std::vector<Eigen::Vector2d> centers;
    centers.reserve(static_cast<std::size_t>(n_hot));
    for (int c = 0; c < n_hot; ++c) centers.emplace_back(rng.uniform(0.0, d), rng.uniform(0.0, d));
    gt_pos_.clear();
    gt_pos_.reserve(static_cast<std::size_t>(cfg_.n_gt));
    for (int i = 0; i < cfg_.n_gt; ++i) {
      const auto& c = centers[static_cast<std::size_t>(
          rng.uniform_index(static_cast<std::uint64_t>(n_hot)))];
      const Eigen::Vector2d raw(c.x() + cfg_.hotspot_sigma * rng.normal(),
                                c.y() + cfg_.hotspot_sigma * rng.normal());
      gt_pos_.push_back(clamp_to_area(raw, d));
    }
    eve_pos_.clear();
    eve_pos_.reserve(static_cast<std::size_t>(cfg_.n_eve));
    for (int e = 0; e < cfg_.n_eve; ++e)
      eve_pos_.emplace_back(rng.uniform(0.0, d), rng.uniform(0.0, d));
    uav_xy_ = cfg_.initial_uav_positions();
    refresh_observations();
    active_ = true;
    return obs_;
  }

  struct StepResult {
    std::vector<Transition> transitions;
    SlotInfo info;
  };

  StepResult step(const std::vector<int>& joint_action) {
    if (!active_) throw std::logic_error("env.step: reset the environment first");
    if (static_cast<int>(joint_action.size()) != cfg_.n_uav)
      throw std::invalid_argument("env.step: expected one action per UAV");
    const int n_k = cfg_.n_uav;
    const int t_now = t_;

    StepResult res;
    res.info.speeds.resize(static_cast<std::size_t>(n_k));
    std::vector<bool> violated(static_cast<std::size_t>(n_k), false);
    std::vector<double> fracs(static_cast<std::size_t>(n_k), 0.0);
    for (int k = 0; k < n_k; ++k) {
      const DecodedAction act = spec_.decode(joint_action[static_cast<std::size_t>(k)]);
      res.info.speeds[static_cast<std::size_t>(k)] = act.v;
      fracs[static_cast<std::size_t>(k)] = spec_.split_fraction(act.power_split);
      const Eigen::Vector2d raw =
          step_kinematics(uav_xy_[static_cast<std::size_t>(k)], act.v, act.omega);
      violated[static_cast<std::size_t>(k)] = boundary_violation(raw, cfg_.area_d);
      uav_xy_[static_cast<std::size_t>(k)] = clamp_to_area(raw, cfg_.area_d);
    }

    const FleetState fleet = FleetState::at(uav_xy_, cfg_.h_uav, t_now + 1);
    std::vector<double> ranges(static_cast<std::size_t>(n_k));
    std::vector<int> caps(static_cast<std::size_t>(n_k));
    for (int k = 0; k < n_k; ++k) {
      ranges[static_cast<std::size_t>(k)] = cfg_.coverage_of(k);
      caps[static_cast<std::size_t>(k)] = cfg_.capacity_of(k);
    }
    AssociationState assoc;
    assoc.cover_gt = coverage_matrix(fleet.pos, gt_pos_, ranges);
    assoc.cover_eve = coverage_matrix(fleet.pos, eve_pos_, ranges);

    // keyed per (seed, episode, slot): resetting with one run seed keeps the
    // layout but redraws the small-scale fading each episode
    const SlotChannels ch = draw_slot_channels(
        cfg_, fleet.pos, gt_pos_, eve_pos_,
        derive_key(episode_seed_, {k_fading_tag, static_cast<std::uint64_t>(episode_)}), t_now);
    Eigen::MatrixXd gain2(n_k, cfg_.n_gt);
    for (int k = 0; k < n_k; ++k)
      for (int i = 0; i < cfg_.n_gt; ++i)
        gain2(k, i) =
            ch.h_gt[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)].squaredNorm();
    assoc.schedule = schedule_gts(gain2, assoc.cover_gt, caps);

    PrecoderSet pre;
    if (use_solver_) {
      const S2dcReport report = s2dc_solve(ch, assoc, cfg_);
      pre = report.precoders;
      res.info.s2dc_converged = report.converged;
      res.info.s2dc_iterations = report.iterations;
    } else {
      pre = heuristic_precoders(ch, assoc, cfg_, fracs);
    }
    res.info.rates = rates_report(ch, assoc, pre, cfg_.noise_power_w());
    res.info.f1 = res.info.rates.f1;

    double r_sr = 0.0;
    for (int i = 0; i < cfg_.n_gt; ++i)
      if (res.info.rates.serving_uav[static_cast<std::size_t>(i)] >= 0)
        r_sr += res.info.rates.r_secrecy[i];
    res.info.sum_secrecy = r_sr;
    for (int k = 0; k < n_k; ++k)
      res.info.fleet_energy += slot_energy(res.info.speeds[static_cast<std::size_t>(k)], cfg_);
    const double r_ec = -res.info.fleet_energy;

    const auto pairs = collision_pairs(fleet, cfg_.d_c);
    res.info.collision_count = static_cast<int>(pairs.size());
    std::vector<bool> in_col(static_cast<std::size_t>(n_k), false);
    for (const auto& [a, b] : pairs) {
      in_col[static_cast<std::size_t>(a)] = true;
      in_col[static_cast<std::size_t>(b)] = true;
    }
    for (bool v : violated) res.info.boundary_count += v ? 1 : 0;

    ++t_;
    const bool done = t_ >= cfg_.n_slots;
    std::vector<Eigen::VectorXd> prev_obs = std::move(obs_);
    refresh_observations();
    if (done) active_ = false;

    const double w_ec = cfg_.reward_energy_weight();
    res.transitions.reserve(static_cast<std::size_t>(n_k));
    for (int k = 0; k < n_k; ++k) {
      Transition tr;
      tr.agent = k;
      tr.episode = episode_;
      tr.t = t_now;
      tr.obs = prev_obs[static_cast<std::size_t>(k)];
      tr.action = joint_action[static_cast<std::size_t>(k)];
      tr.reward = reward_value(r_sr, r_ec, cfg_.w_sr, w_ec, violated[static_cast<std::size_t>(k)],
                               in_col[static_cast<std::size_t>(k)], cfg_.p_col);
      tr.next_obs = obs_[static_cast<std::size_t>(k)];
      tr.done = done;
      res.transitions.push_back(std::move(tr));
    }
    return res;
  }

 private:
  static constexpr std::uint64_t k_reset_tag = 0x7265736574ULL;   // layout stream tag
  static constexpr std::uint64_t k_fading_tag = 0x66616465ULL;    // channel stream tag

  void refresh_observations() {
    obs_.clear();
    obs_.reserve(static_cast<std::size_t>(cfg_.n_uav));
    for (int k = 0; k < cfg_.n_uav; ++k)
      obs_.push_back(observe(k, uav_xy_, gt_pos_, eve_pos_, cfg_.area_d));
  }

  ScenarioConfig cfg_;
  bool use_solver_;
  ActionSpec spec_;
  std::vector<Eigen::Vector2d> uav_xy_, gt_pos_, eve_pos_;
  std::vector<Eigen::VectorXd> obs_;
  std::uint64_t episode_seed_ = 0;
  int episode_ = -1;
  int t_ = 0;
  bool active_ = false;
};

}  // namespace hetuav
