#include <CLI11.hpp>

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include "hetuav/harness.hpp"

namespace {

using namespace hetuav;

ScenarioConfig load_config(const std::string& path) {
  if (path.empty()) return ScenarioConfig{};
  return ScenarioConfig::load(path);
}

std::vector<MetricsRow> stats_to_rows(const std::vector<EpisodeStats>& trace,
                                      const std::string& method, std::uint64_t seed) {
  std::vector<MetricsRow> rows;
  rows.reserve(trace.size());
  for (const EpisodeStats& s : trace) rows.push_back(metrics_row_from(s, method, seed));
  return rows;
}

void print_trace_summary(const std::vector<MetricsRow>& rows) {
  for (const MetricsRow& r : rows)
    std::printf("%s seed=%llu ep=%d reward=%.4f f1=%.4f energy=%.1f collisions=%d\n",
                r.method.c_str(), static_cast<unsigned long long>(r.seed), r.episode,
                r.mean_reward, r.cum_f1, r.cum_energy, r.collisions);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hetuav: secrecy-aware heterogeneous UAV network experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out = "out";
  std::uint64_t seed = 30;
  int episodes = 0;
  app.add_option("--config", config_path, "scenario config file (key = value lines)")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "base random seed");
  app.add_option("--out", out, "output directory or file prefix");
  app.add_option("--episodes", episodes, "episode count override");

  // simulate: scripted-expert rollout, no learning.
  auto* simulate = app.add_subcommand("simulate", "roll out the scripted expert policy");
  bool sim_no_solver = false;
  simulate->add_flag("--no-inner-solver", sim_no_solver,
                     "use heuristic power-split precoding instead of the inner solver");

  // collect: build the expert dataset.
  auto* collect = app.add_subcommand("collect", "collect an expert dataset (JSONL per agent)");

  // distill: offline distillation from a dataset prefix into a checkpoint.
  auto* distill_cmd = app.add_subcommand("distill", "distill offline from a collected dataset");
  std::string data_prefix;
  int updates = 0;
  distill_cmd->add_option("--data", data_prefix, "dataset path prefix from `collect`")
      ->required();
  distill_cmd->add_option("--updates", updates, "gradient updates (0: config default)");

  // train: full pipeline for one method.
  auto* train = app.add_subcommand("train", "train one method end to end");
  std::string method_str = "llm-hemarl-s2dc";
  int checkpoint_every = 0;
  int collect_episodes = 100;
  train->add_option("--method", method_str, "one of the five comparison pipelines");
  train->add_option("--checkpoint-every", checkpoint_every, "checkpoint cadence in episodes");
  train->add_option("--collect-episodes", collect_episodes, "expert episodes for distillation");

  // evaluate: greedy rollout from a checkpoint.
  auto* evaluate = app.add_subcommand("evaluate", "greedy rollout from a checkpoint");
  std::string ckpt_path;
  std::string eval_method = "isac-s2dc";
  evaluate->add_option("--checkpoint", ckpt_path, "checkpoint file from `train`")->required();
  evaluate->add_option("--method", eval_method, "method the checkpoint was trained with");

  // sweep: fleet-size scaling study.
  auto* sweep = app.add_subcommand("sweep", "fleet-size scaling sweep (scripted expert)");
  std::vector<int> uavs = {2, 4, 6, 8, 10};
  std::vector<std::uint64_t> sweep_seeds;
  sweep->add_option("--uavs", uavs, "fleet sizes to sweep");
  sweep->add_option("--seeds", sweep_seeds, "seed list (default: the base seed)");

  // plot-data: figure CSVs from a metrics file.
  auto* plot = app.add_subcommand("plot-data", "derive per-figure CSVs from metrics.csv");
  std::string metrics_path;
  std::string sweep_path;
  plot->add_option("--metrics", metrics_path, "metrics.csv from `train`");
  plot->add_option("--sweep-metrics", sweep_path, "sweep_metrics.csv from `sweep`");

  // Shared flags may appear after the verb.
  for (CLI::App* sub : {simulate, collect, distill_cmd, train, evaluate, sweep, plot})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    const ScenarioConfig cfg = load_config(config_path);

    if (simulate->parsed()) {
      SecEnv env(cfg, !sim_no_solver);
      const int n_eps = episodes > 0 ? episodes : 1;
      const auto rows = stats_to_rows(rollout_scripted(env, n_eps, seed), "scripted-expert", seed);
      std::filesystem::create_directories(out);
      write_metrics_csv(out + "/metrics.csv", rows);
      write_timings_csv(out + "/timings.csv", rows);
      print_trace_summary(rows);
      std::printf("wrote %s/metrics.csv (%zu rows)\n", out.c_str(), rows.size());
    } else if (collect->parsed()) {
      SecEnv env(cfg, true);
      auto provider = make_expert_provider(cfg);
      const int n_eps = episodes > 0 ? episodes : 100;
      std::filesystem::create_directories(out);
      const DatasetStats stats =
          collect_dataset(*provider, env, n_eps, seed, out + "/dataset_seed" + std::to_string(seed));
      std::printf("episodes completed=%d aborted=%d fallback slots=%d records/agent=%zu\n",
                  stats.episodes_completed, stats.episodes_aborted, stats.fallback_slots,
                  stats.records_per_agent);
      for (const std::string& f : stats.files) std::printf("  %s\n", f.c_str());
    } else if (distill_cmd->parsed()) {
      SecEnv env(cfg, true);
      const int n_actions = env.action_spec().size();
      const SacConfig sac = sac_config_from(cfg, n_actions);
      std::vector<AgentLearner> agents;
      std::vector<std::vector<Transition>> partitions;
      for (int k = 0; k < cfg.n_uav; ++k) {
        agents.emplace_back(env.observation_size(), n_actions, sac,
                            derive_key(seed, {k_agent_tag, static_cast<std::uint64_t>(k)}));
        partitions.push_back(
            read_transitions(data_prefix + "_agent" + std::to_string(k) + ".jsonl"));
      }
      distill(partitions, agents, updates > 0 ? updates : cfg.distill_updates);
      std::filesystem::create_directories(out);
      const std::string ckpt = out + "/checkpoint_distilled_seed" + std::to_string(seed) + ".bin";
      save_checkpoint(ckpt, agents);
      std::printf("wrote %s\n", ckpt.c_str());
    } else if (train->parsed()) {
      ExperimentSpec spec;
      spec.config = cfg;
      spec.methods = {parse_method(method_str)};
      spec.seeds = {seed};
      spec.episodes = episodes;
      spec.collect_episodes = collect_episodes;
      spec.checkpoint_every = checkpoint_every;
      spec.out_dir = out;
      const auto rows = run_experiment(spec);
      std::printf("wrote %s/metrics.csv (%zu rows) and timings.csv\n", out.c_str(), rows.size());
    } else if (evaluate->parsed()) {
      const MethodTraits traits = baseline_dispatch(parse_method(eval_method));
      SecEnv env(cfg, traits.inner_solver);
      const int n_actions = env.action_spec().size();
      const SacConfig sac = sac_config_from(cfg, n_actions);
      std::vector<AgentLearner> agents;
      for (int k = 0; k < cfg.n_uav; ++k)
        agents.emplace_back(env.observation_size(), n_actions, sac,
                            derive_key(seed, {k_agent_tag, static_cast<std::uint64_t>(k)}));
      load_checkpoint(ckpt_path, agents);
      const int n_eps = episodes > 0 ? episodes : 1;
      const auto rows = stats_to_rows(rollout_greedy(env, agents, n_eps, seed),
                                      "greedy-" + eval_method, seed);
      std::filesystem::create_directories(out);
      write_metrics_csv(out + "/metrics.csv", rows);
      print_trace_summary(rows);
    } else if (sweep->parsed()) {
      ExperimentSpec spec;
      spec.config = cfg;
      spec.seeds = sweep_seeds.empty() ? std::vector<std::uint64_t>{seed} : sweep_seeds;
      spec.episodes = episodes;
      spec.out_dir = out;
      const auto rows = scaling_sweep(spec, uavs);
      std::filesystem::create_directories(out);
      write_sweep_csv(out + "/sweep_metrics.csv", rows);
      emit_sweep_plot_data(rows, out);
      std::printf("wrote %s/sweep_metrics.csv (%zu rows) and energy_vs_nuav.csv\n", out.c_str(),
                  rows.size());
    } else if (plot->parsed()) {
      std::filesystem::create_directories(out);
      if (!metrics_path.empty()) {
        emit_plot_data(read_metrics_csv(metrics_path), out);
        std::printf("wrote %s/reward_bands.csv and final_bars.csv\n", out.c_str());
      }
      if (!sweep_path.empty()) {
        emit_sweep_plot_data(read_sweep_csv(sweep_path), out);
        std::printf("wrote %s/energy_vs_nuav.csv\n", out.c_str());
      }
      if (metrics_path.empty() && sweep_path.empty()) {
        std::fprintf(stderr, "plot-data: pass --metrics and/or --sweep-metrics\n");
        return 1;
      }
    }
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return 1;
  }
  return 0;
}
