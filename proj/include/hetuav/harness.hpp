#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetuav/expert.hpp"
#include "hetuav/learner.hpp"

namespace hetuav {

// ---------------------------------------------------------------------------
// Methods under comparison.
// ---------------------------------------------------------------------------

enum class Method { llm_hemarl_s2dc, isac_s2dc, isac, masac_s2dc, masac };

inline const std::vector<std::pair<Method, std::string>>& method_table() {
  static const std::vector<std::pair<Method, std::string>> table = {
      {Method::llm_hemarl_s2dc, "llm-hemarl-s2dc"},
      {Method::isac_s2dc, "isac-s2dc"},
      {Method::isac, "isac"},
      {Method::masac_s2dc, "masac-s2dc"},
      {Method::masac, "masac"},
  };
  return table;
}

inline std::string method_name(Method m) {
  for (const auto& [method, name] : method_table())
    if (method == m) return name;
  throw std::invalid_argument("unknown method id");
}

inline Method parse_method(const std::string& name) {
  for (const auto& [method, table_name] : method_table())
    if (table_name == name) return method;
  std::string known;
  for (const auto& [method, table_name] : method_table()) {
    if (!known.empty()) known += ", ";
    known += table_name;
  }
  throw std::invalid_argument("unknown method '" + name + "' (known: " + known + ")");
}

/// The three switches that distinguish the five pipelines: offline
/// distillation from the expert dataset, one replay buffer shared by all
/// agents, and the inner secrecy-precoding solver (without it the action
/// space gains discrete power-split levels over maximum-ratio directions).
struct MethodTraits {
  bool distill = false;
  bool shared_buffer = false;
  bool inner_solver = true;
};

inline MethodTraits baseline_dispatch(Method m) {
  switch (m) {
    case Method::llm_hemarl_s2dc:
      return {true, false, true};
    case Method::isac_s2dc:
      return {false, false, true};
    case Method::isac:
      return {false, false, false};
    case Method::masac_s2dc:
      return {false, true, true};
    case Method::masac:
      return {false, true, false};
  }
  throw std::invalid_argument("unknown method id");
}

// ---------------------------------------------------------------------------
// Metrics rows and CSV persistence.
// ---------------------------------------------------------------------------

struct MetricsRow {
  std::string method;
  std::uint64_t seed = 0;
  int episode = 0;
  double mean_reward = 0.0;
  double cum_f1 = 0.0;
  double cum_energy = 0.0;  // J
  int collisions = 0;
  int boundary = 0;
  double s2dc_iter_mean = 0.0;
  double wall_s = 0.0;  // sidecar column, never written into metrics.csv
};

struct SweepRow {
  int n_uav = 0;
  MetricsRow row;
};

namespace detail {

inline std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

inline std::string metrics_cells(const MetricsRow& r) {
  std::ostringstream os;
  os << r.method << ',' << r.seed << ',' << r.episode << ',' << fmt_g(r.mean_reward) << ','
     << fmt_g(r.cum_f1) << ',' << fmt_g(r.cum_energy) << ',' << r.collisions << ','
     << r.boundary << ',' << fmt_g(r.s2dc_iter_mean);
  return os.str();
}

inline MetricsRow metrics_from_cells(const std::vector<std::string>& c, std::size_t off) {
  MetricsRow r;
  r.method = c.at(off);
  r.seed = std::stoull(c.at(off + 1));
  r.episode = std::stoi(c.at(off + 2));
  r.mean_reward = std::stod(c.at(off + 3));
  r.cum_f1 = std::stod(c.at(off + 4));
  r.cum_energy = std::stod(c.at(off + 5));
  r.collisions = std::stoi(c.at(off + 6));
  r.boundary = std::stoi(c.at(off + 7));
  r.s2dc_iter_mean = std::stod(c.at(off + 8));
  return r;
}

inline constexpr char k_metrics_header[] =
    "method,seed,episode,mean_reward,cum_f1,cum_energy_j,collisions,boundary,s2dc_iter_mean";

}  // namespace detail

/// Deterministic experiment metrics; wall-clock timings go to a separate
/// sidecar so reruns reproduce this file byte for byte.
inline void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "# hetuav metrics schema v1\n" << detail::k_metrics_header << "\n";
  for (const MetricsRow& r : rows) out << detail::metrics_cells(r) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline void write_timings_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "# hetuav timings schema v1 (wall clock, not reproducible)\n"
      << "method,seed,episode,wall_s\n";
  for (const MetricsRow& r : rows)
    out << r.method << ',' << r.seed << ',' << r.episode << ',' << detail::fmt_g(r.wall_s)
        << "\n";
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open metrics file '" + path + "'");
  std::vector<MetricsRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != detail::k_metrics_header)
        throw std::runtime_error("unexpected metrics header in '" + path + "': " + line);
      header_seen = true;
      continue;
    }
    rows.push_back(detail::metrics_from_cells(detail::split_csv_line(line), 0));
  }
  return rows;
}

inline void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << "# hetuav sweep metrics schema v1\n"
      << "n_uav," << detail::k_metrics_header << "\n";
  for (const SweepRow& r : rows) out << r.n_uav << ',' << detail::metrics_cells(r.row) << "\n";
}

inline std::vector<SweepRow> read_sweep_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sweep file '" + path + "'");
  std::vector<SweepRow> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto cells = detail::split_csv_line(line);
    SweepRow r;
    r.n_uav = std::stoi(cells.at(0));
    r.row = detail::metrics_from_cells(cells, 1);
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Experiment orchestration.
// ---------------------------------------------------------------------------

struct ExperimentSpec {
  ScenarioConfig config;
  std::vector<Method> methods = {Method::llm_hemarl_s2dc};
  std::vector<std::uint64_t> seeds = {30, 40, 50, 60};
  int episodes = 0;          // 0: config.train_episodes
  int distill_updates = 0;   // 0: config.distill_updates
  int collect_episodes = 100;
  int checkpoint_every = 0;  // 0: final checkpoint only
  std::string out_dir = ".";

  void validate() const {
    config.validate();
    if (methods.empty()) throw std::invalid_argument("experiment needs at least one method");
    if (seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
    if (collect_episodes < 1)
      throw std::invalid_argument("collect_episodes must be >= 1");
  }
};

inline MetricsRow metrics_row_from(const EpisodeStats& s, const std::string& method,
                                   std::uint64_t seed) {
  MetricsRow r;
  r.method = method;
  r.seed = seed;
  r.episode = s.episode;
  r.mean_reward = s.mean_reward;
  r.cum_f1 = s.cum_f1;
  r.cum_energy = s.cum_energy;
  r.collisions = s.collisions;
  r.boundary = s.boundary;
  r.s2dc_iter_mean = s.s2dc_iter_mean;
  r.wall_s = s.wall_s;
  return r;
}

inline constexpr std::uint64_t k_agent_tag = 0x6167656e74ULL;    // agent init/exploration
inline constexpr std::uint64_t k_collect_tag = 0x636f6c6cULL;    // dataset episodes

/// One (method, seed) cell: optional expert-dataset distillation, then online
/// adaptation; writes checkpoints under out_dir and returns per-episode rows.
/// Agents of every method start from the same seed-derived initialization so
/// matched-seed comparisons are paired.
inline std::vector<MetricsRow> run_method_seed(const ScenarioConfig& cfg, Method method,
                                               std::uint64_t seed, int episodes,
                                               int distill_updates, int collect_episodes,
                                               const std::string& out_dir,
                                               int checkpoint_every = 0,
                                               std::vector<AgentLearner>* trained = nullptr) {
  const MethodTraits traits = baseline_dispatch(method);
  const std::string name = method_name(method);
  SecEnv env(cfg, traits.inner_solver);
  const int n_actions = env.action_spec().size();
  const SacConfig sac = sac_config_from(cfg, n_actions);

  std::vector<AgentLearner> agents;
  agents.reserve(static_cast<std::size_t>(cfg.n_uav));
  for (int k = 0; k < cfg.n_uav; ++k)
    agents.emplace_back(env.observation_size(), n_actions, sac,
                        derive_key(seed, {k_agent_tag, static_cast<std::uint64_t>(k)}));

  if (traits.distill) {
    SecEnv collect_env(cfg, traits.inner_solver);
    auto provider = make_expert_provider(cfg);
    const std::string prefix = out_dir + "/dataset_" + name + "_seed" + std::to_string(seed);
    const DatasetStats stats = collect_dataset(*provider, collect_env, collect_episodes,
                                               derive_key(seed, {k_collect_tag}), prefix);
    std::vector<std::vector<Transition>> partitions;
    partitions.reserve(stats.files.size());
    for (const std::string& file : stats.files) partitions.push_back(read_transitions(file));
    distill(partitions, agents, distill_updates);
  }

  std::vector<ReplayBuffer> store;
  std::vector<ReplayBuffer*> buffers(static_cast<std::size_t>(cfg.n_uav));
  if (traits.shared_buffer) {
    store.emplace_back(cfg.buffer_capacity, -1);
    for (auto& b : buffers) b = &store[0];
  } else {
    store.reserve(static_cast<std::size_t>(cfg.n_uav));
    for (int k = 0; k < cfg.n_uav; ++k) store.emplace_back(cfg.buffer_capacity, k);
    for (int k = 0; k < cfg.n_uav; ++k) buffers[static_cast<std::size_t>(k)] = &store[static_cast<std::size_t>(k)];
  }

  const std::string ckpt_base = out_dir + "/checkpoint_" + name + "_seed" + std::to_string(seed);
  std::vector<MetricsRow> rows;
  int done_eps = 0;
  while (done_eps < episodes) {
    const int chunk = checkpoint_every > 0 ? std::min(checkpoint_every, episodes - done_eps)
                                           : episodes - done_eps;
    const auto trace = online_adapt(env, agents, buffers, chunk, seed);
    for (EpisodeStats s : trace) {
      s.episode += done_eps;
      rows.push_back(metrics_row_from(s, name, seed));
    }
    done_eps += chunk;
    if (checkpoint_every > 0 && done_eps < episodes)
      save_checkpoint(ckpt_base + "_ep" + std::to_string(done_eps) + ".bin", agents);
  }
  save_checkpoint(ckpt_base + ".bin", agents);
  if (trained != nullptr) *trained = std::move(agents);
  return rows;
}

/// Full comparison grid: every (method, seed) cell, deterministic metrics to
/// metrics.csv, wall clock to timings.csv, checkpoints and expert datasets
/// alongside. Returns all rows in execution order (methods outer, seeds
/// inner).
inline std::vector<MetricsRow> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  std::filesystem::create_directories(spec.out_dir);
  const int episodes = spec.episodes > 0 ? spec.episodes : spec.config.train_episodes;
  const int n_distill = spec.distill_updates > 0 ? spec.distill_updates
                                                 : spec.config.distill_updates;
  std::vector<MetricsRow> rows;
  for (Method method : spec.methods)
    for (std::uint64_t seed : spec.seeds) {
      const auto cell = run_method_seed(spec.config, method, seed, episodes, n_distill,
                                        spec.collect_episodes, spec.out_dir,
                                        spec.checkpoint_every);
      rows.insert(rows.end(), cell.begin(), cell.end());
    }
  write_metrics_csv(spec.out_dir + "/metrics.csv", rows);
  write_timings_csv(spec.out_dir + "/timings.csv", rows);
  return rows;
}

// ---------------------------------------------------------------------------
// Scripted rollouts (simulate verb, scaling sweep) and greedy evaluation.
// ---------------------------------------------------------------------------

namespace detail {

template <typename ActFn>
std::vector<EpisodeStats> rollout_episodes(SecEnv& env, int episodes, std::uint64_t seed,
                                           ActFn&& act) {
  std::vector<EpisodeStats> out;
  out.reserve(static_cast<std::size_t>(episodes));
  const int n_k = env.config().n_uav;
  for (int ep = 0; ep < episodes; ++ep) {
    const auto wall_start = std::chrono::steady_clock::now();
    std::vector<Eigen::VectorXd> obs = env.reset(seed);
    EpisodeStats stats;
    stats.episode = ep;
    double reward_sum = 0.0;
    long iter_sum = 0;
    std::vector<int> prev;
    for (int t = 0; t < env.config().n_slots; ++t) {
      const std::vector<int> joint = act(obs, prev);
      const auto res = env.step(joint);
      for (const Transition& tr : res.transitions) reward_sum += tr.reward;
      stats.cum_f1 += res.info.f1;
      stats.cum_energy += res.info.fleet_energy;
      stats.collisions += res.info.collision_count;
      stats.boundary += res.info.boundary_count;
      iter_sum += res.info.s2dc_iterations;
      for (int k = 0; k < n_k; ++k)
        obs[static_cast<std::size_t>(k)] = res.transitions[static_cast<std::size_t>(k)].next_obs;
      prev = joint;
    }
    stats.mean_reward = reward_sum / n_k;
    stats.s2dc_iter_mean = static_cast<double>(iter_sum) / env.config().n_slots;
    stats.wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
    out.push_back(stats);
  }
  return out;
}

}  // namespace detail

/// Deterministic rollout of the scripted expert policy (no learning).
inline std::vector<EpisodeStats> rollout_scripted(SecEnv& env, int episodes,
                                                  std::uint64_t seed) {
  return detail::rollout_episodes(
      env, episodes, seed, [&env](const std::vector<Eigen::VectorXd>&, const std::vector<int>& prev) {
        return scripted_heuristic_act(summarize(env, prev));
      });
}

/// Greedy-policy rollout of trained agents (no exploration, no updates).
inline std::vector<EpisodeStats> rollout_greedy(SecEnv& env, std::vector<AgentLearner>& agents,
                                                int episodes, std::uint64_t seed) {
  if (static_cast<int>(agents.size()) != env.config().n_uav)
    throw std::invalid_argument("rollout_greedy: need one agent per UAV");
  return detail::rollout_episodes(
      env, episodes, seed, [&agents](const std::vector<Eigen::VectorXd>& obs, const std::vector<int>&) {
        std::vector<int> joint(agents.size());
        for (std::size_t k = 0; k < agents.size(); ++k) joint[k] = agents[k].act_greedy(obs[k]);
        return joint;
      });
}

// ---------------------------------------------------------------------------
// Figure data.
// ---------------------------------------------------------------------------

/// Per-figure CSVs derived from metrics rows alone: seed-band reward curves
/// and final-window per-seed bars. Empty input yields header-only files.
inline void emit_plot_data(const std::vector<MetricsRow>& rows, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);

  // Reward curves with across-seed mean and population variance per episode.
  {
    std::map<std::string, std::map<int, std::vector<double>>> by_method;
    for (const MetricsRow& r : rows) by_method[r.method][r.episode].push_back(r.mean_reward);
    std::ofstream out(out_dir + "/reward_bands.csv", std::ios::trunc);
    out << "# hetuav figure data: reward vs episode, mean and variance across seeds\n"
        << "method,episode,reward_mean,reward_var,n_seeds\n";
    for (const auto& [method, curve] : by_method)
      for (const auto& [episode, vals] : curve) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        var /= static_cast<double>(vals.size());
        out << method << ',' << episode << ',' << detail::fmt_g(mean) << ','
            << detail::fmt_g(var) << ',' << vals.size() << "\n";
      }
  }

  // Final-window per-seed aggregates (bar-chart data).
  {
    std::map<std::string, std::map<std::uint64_t, std::vector<const MetricsRow*>>> cells;
    for (const MetricsRow& r : rows) cells[r.method][r.seed].push_back(&r);
    std::ofstream out(out_dir + "/final_bars.csv", std::ios::trunc);
    out << "# hetuav figure data: final-window means per method and seed\n"
        << "method,seed,window,reward_mean,f1_mean,energy_mean\n";
    for (auto& [method, seeds] : cells)
      for (auto& [seed, cell] : seeds) {
        std::sort(cell.begin(), cell.end(),
                  [](const MetricsRow* a, const MetricsRow* b) { return a->episode < b->episode; });
        const int window = std::min<int>(20, static_cast<int>(cell.size()));
        double reward = 0.0, f1 = 0.0, energy = 0.0;
        for (int i = static_cast<int>(cell.size()) - window; i < static_cast<int>(cell.size());
             ++i) {
          reward += cell[static_cast<std::size_t>(i)]->mean_reward;
          f1 += cell[static_cast<std::size_t>(i)]->cum_f1;
          energy += cell[static_cast<std::size_t>(i)]->cum_energy;
        }
        out << method << ',' << seed << ',' << window << ','
            << detail::fmt_g(window > 0 ? reward / window : 0.0) << ','
            << detail::fmt_g(window > 0 ? f1 / window : 0.0) << ','
            << detail::fmt_g(window > 0 ? energy / window : 0.0) << "\n";
      }
  }
}

/// Fleet-size scaling figure: cumulative energy per episode against N_K.
inline void emit_sweep_plot_data(const std::vector<SweepRow>& rows, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::map<int, std::vector<double>> by_n;
  for (const SweepRow& r : rows) by_n[r.n_uav].push_back(r.row.cum_energy);
  std::ofstream out(out_dir + "/energy_vs_nuav.csv", std::ios::trunc);
  out << "# hetuav figure data: per-episode cumulative propulsion energy vs fleet size\n"
      << "n_uav,energy_mean,energy_var,n_runs\n";
  for (const auto& [n, vals] : by_n) {
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(vals.size());
    out << n << ',' << detail::fmt_g(mean) << ',' << detail::fmt_g(var) << ',' << vals.size()
        << "\n";
  }
}

// ---------------------------------------------------------------------------
// Fleet-size scaling sweep.
// ---------------------------------------------------------------------------

inline constexpr std::uint64_t k_sweep_tag = 0x7377656570ULL;

/// One sweep point's scenario: fleet size n with per-seed heterogeneity.
/// Coverage is sampled as a ground-reach radius within the config's sample
/// range and converted to the 3D threshold via hypot with the flight
/// altitude; per-UAV service capacity is sampled uniformly in its range.
inline ScenarioConfig sweep_point_config(const ScenarioConfig& base, int n,
                                         std::uint64_t seed) {
  ScenarioConfig cfg = base;
  cfg.n_uav = n;
  cfg.uav_init.clear();
  RngStream rng(derive_key(seed, {k_sweep_tag, static_cast<std::uint64_t>(n)}));
  cfg.coverage_range.clear();
  cfg.service_capacity.clear();
  for (int k = 0; k < n; ++k) {
    const double ground_reach = rng.uniform(cfg.coverage_sample_min, cfg.coverage_sample_max);
    cfg.coverage_range.push_back(std::hypot(cfg.h_uav, ground_reach));
    cfg.service_capacity.push_back(
        cfg.capacity_sample_min +
        static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(
            cfg.capacity_sample_max - cfg.capacity_sample_min + 1))));
  }
  cfg.validate();
  return cfg;
}

/// Scaling study over fleet sizes: per (seed, N_K) point, episodes run the
/// scripted expert policy on the sampled scenario. The inner solver is off
/// by default so sweep cost stays bounded at large fleets.
inline std::vector<SweepRow> scaling_sweep(const ExperimentSpec& spec,
                                           const std::vector<int>& n_uav_list,
                                           bool use_inner_solver = false) {
  if (n_uav_list.empty()) throw std::invalid_argument("scaling_sweep: empty fleet-size list");
  if (spec.seeds.empty()) throw std::invalid_argument("scaling_sweep: empty seed list");
  const int episodes = spec.episodes > 0 ? spec.episodes : 1;
  std::vector<SweepRow> rows;
  for (int n : n_uav_list) {
    for (std::uint64_t seed : spec.seeds) {
      SecEnv env(sweep_point_config(spec.config, n, seed), use_inner_solver);
      const auto trace = rollout_scripted(env, episodes, seed);
      for (const EpisodeStats& s : trace)
        rows.push_back({n, metrics_row_from(s, "sweep-expert", seed)});
    }
  }
  return rows;
}

}  // namespace hetuav
