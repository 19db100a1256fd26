#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "hetuav/expert.hpp"

using namespace hetuav;

namespace {

ScenarioConfig expert_cfg() {
  ScenarioConfig cfg;
  cfg.area_d = 200.0;
  cfg.n_uav = 2;
  cfg.n_gt = 3;
  cfg.n_eve = 1;
  cfg.coverage_range = {130.0, 130.0};
  cfg.service_capacity = {2, 2};
  cfg.n_slots = 2;
  cfg.m_antennas = 2;
  cfg.s2dc_max_iters = 12;
  return cfg;
}

EnvSummary make_summary(std::vector<Eigen::Vector2d> uavs, std::vector<Eigen::Vector2d> gts,
                        std::vector<Eigen::Vector2d> eves, std::vector<int> caps,
                        double coverage = 120.0, double area = 200.0) {
  EnvSummary s;
  s.area_d = area;
  s.slot_dt = 1.0;
  s.d_c = 10.0;
  s.t = 0;
  s.n_slots = 20;
  s.uav_xy = std::move(uavs);
  s.gt_pos = std::move(gts);
  s.eve_pos = std::move(eves);
  s.coverage.assign(s.uav_xy.size(), coverage);
  s.capacity = std::move(caps);
  s.spec.speeds = velocity_ladder(4.0, 25.0, 5);
  return s;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// Scripted for a fixed number of calls, then throws forever; exercises the
// abort-and-exclude path of dataset collection.
class FlakyProvider final : public ExpertProvider {
 public:
  explicit FlakyProvider(int good_calls) : remaining_(good_calls) {}
  ProviderResult act(const EnvSummary& summary, const std::vector<HistoryEntry>&) override {
    if (remaining_-- <= 0) throw ExpertError("provider offline");
    return {scripted_heuristic_act(summary), false};
  }

 private:
  int remaining_;
};

}  // namespace

TEST_CASE("scripted expert hovers at its claimed centroid") {
  const auto s = make_summary({{100.0, 100.0}}, {{90.0, 100.0}, {110.0, 100.0}}, {}, {2});
  const auto actions = scripted_heuristic_act(s);
  REQUIRE(actions.size() == 1);
  CHECK(actions[0] == s.spec.still_index());
}

TEST_CASE("scripted expert sprints toward a distant target") {
  const auto s = make_summary({{0.0, 100.0}}, {{200.0, 100.0}}, {}, {1});
  const auto actions = scripted_heuristic_act(s);
  const DecodedAction act = s.spec.decode(actions[0]);
  CHECK(act.omega == 0.0);  // due east
  CHECK(act.v == Catch::Approx(25.0));
}

TEST_CASE("scripted expert picks the fastest speed level that does not overshoot") {
  auto near = make_summary({{100.0, 100.0}}, {{104.0, 100.0}}, {}, {1});
  CHECK(near.spec.decode(scripted_heuristic_act(near)[0]).v == Catch::Approx(4.0));

  // 5 m out: a 7.37 m step would fly past, so the expert takes the 4 m one
  auto mid = make_summary({{100.0, 100.0}}, {{105.0, 100.0}}, {}, {1});
  CHECK(mid.spec.decode(scripted_heuristic_act(mid)[0]).v == Catch::Approx(4.0));

  auto diag = make_summary({{100.0, 100.0}}, {{110.0, 110.0}}, {}, {1});
  const DecodedAction act = diag.spec.decode(scripted_heuristic_act(diag)[0]);
  CHECK(act.omega == 0.0);  // ties on the dot product resolve to the first axis
  CHECK(act.v == Catch::Approx(13.57).margin(0.01));  // 14.14 m to go, 25 overshoots
}

TEST_CASE("eavesdropper near the centroid displaces the target") {
  // without the Eve: 10 m north -> up at the level-2 speed
  auto clean = make_summary({{100.0, 100.0}}, {{100.0, 110.0}}, {}, {1});
  const DecodedAction base = clean.spec.decode(scripted_heuristic_act(clean)[0]);
  CHECK(base.omega == Catch::Approx(1.5707963267948966));
  CHECK(base.v == Catch::Approx(7.37).margin(0.01));

  // Eve just south of the centroid pushes the target far north: same axis, top speed
  auto shadowed =
      make_summary({{100.0, 100.0}}, {{100.0, 110.0}}, {{100.0, 105.0}}, {1});
  const DecodedAction pushed = shadowed.spec.decode(scripted_heuristic_act(shadowed)[0]);
  CHECK(pushed.omega == Catch::Approx(1.5707963267948966));
  CHECK(pushed.v == Catch::Approx(25.0));

  // Eve exactly on the centroid: repulsion falls back to the approach bearing
  auto collocated =
      make_summary({{100.0, 100.0}}, {{100.0, 130.0}}, {{100.0, 130.0}}, {1});
  const DecodedAction away = collocated.spec.decode(scripted_heuristic_act(collocated)[0]);
  CHECK(away.omega == Catch::Approx(1.5707963267948966));
  CHECK(away.v == Catch::Approx(25.0));

  // Eve outside 1.5x coverage of the centroid changes nothing
  auto far = make_summary({{100.0, 100.0}}, {{100.0, 110.0}}, {{100.0, 295.0}}, {1}, 120.0, 400.0);
  CHECK(far.spec.decode(scripted_heuristic_act(far)[0]).v == Catch::Approx(7.37).margin(0.01));
}

TEST_CASE("claims are greedy by UAV id and exclusive") {
  const auto s = make_summary({{100.0, 100.0}, {102.0, 100.0}},
                              {{108.0, 100.0}, {90.0, 100.0}}, {}, {1, 1});
  const auto actions = scripted_heuristic_act(s);
  const DecodedAction a0 = s.spec.decode(actions[0]);
  const DecodedAction a1 = s.spec.decode(actions[1]);
  CHECK(a0.omega == 0.0);                               // UAV 1 east to its claim
  CHECK(a1.omega == Catch::Approx(3.141592653589793));  // UAV 2 west to the leftover

  // pool exhaustion: the second UAV has nothing left to claim
  const auto thin = make_summary({{100.0, 100.0}, {102.0, 100.0}}, {{108.0, 100.0}}, {}, {1, 1});
  const auto acts2 = scripted_heuristic_act(thin);
  CHECK(acts2[1] == thin.spec.still_index());
}

TEST_CASE("prompt instantiation is deterministic and complete") {
  const auto s = make_summary({{75.0, 75.0}, {125.0, 75.0}},
                              {{50.0, 50.0}, {150.0, 150.0}, {100.0, 40.0}},
                              {{20.0, 180.0}}, {3, 2});
  const std::string p1 = build_prompt(s, {});
  const std::string p2 = build_prompt(s, {});
  CHECK(p1 == p2);
  CHECK(p1.find("{{") == std::string::npos);  // every placeholder substituted
  CHECK(p1.find("Recent trajectory") == std::string::npos);
  CHECK(p1.find("UAV 1: position (75.0, 75.0)") != std::string::npos);
  CHECK(p1.find("GT 3: (100.0, 40.0)") != std::string::npos);
  CHECK(p1.find("Eve 1: (20.0, 180.0)") != std::string::npos);
  CHECK(p1.find("level 4 = 25.0 m/s") != std::string::npos);
  // exactly one answer slot per UAV in the schema
  CHECK(p1.find("UAV 1: ...") != std::string::npos);
  CHECK(p1.find("UAV 2: ...") != std::string::npos);
  CHECK(p1.find("UAV 3: ...") == std::string::npos);

  std::vector<HistoryEntry> history;
  history.push_back({0, {s.spec.encode(0, 2), s.spec.still_index()}});
  const std::string with_hist = build_prompt(s, history);
  CHECK(with_hist.find("Recent trajectory") != std::string::npos);
  CHECK(with_hist.find("t=0: UAV 1: right, level 2; UAV 2: still") != std::string::npos);
}

TEST_CASE("the versioned template on disk matches the built-in default") {
  const std::string path = "prompts/expert_prompt_v1.txt";
  CHECK(load_prompt_template(path) == default_prompt_template());
  CHECK_THROWS_AS(load_prompt_template("prompts/no_such_template.txt"), std::runtime_error);
}

TEST_CASE("answer parsing accepts the schema and rejects ambiguity") {
  ActionSpec spec;
  spec.speeds = velocity_ladder(4.0, 25.0, 5);

  const auto acts = parse_llm_action(
      "Here is my plan.\nUAV 1: right, level 3\nUAV 2: still\nGood luck!", spec, 2);
  REQUIRE(acts.size() == 2);
  CHECK(acts[0] == spec.encode(0, 3));
  CHECK(acts[1] == spec.still_index());

  // case-insensitive tokens and flexible spacing
  const auto relaxed = parse_llm_action("uav 1 : UP, Level 1\nUAV 2: DOWN, level 4", spec, 2);
  CHECK(relaxed[0] == spec.encode(1, 1));
  CHECK(relaxed[1] == spec.encode(3, 4));

  CHECK_THROWS_AS(parse_llm_action("", spec, 2), ExpertParseError);
  CHECK_THROWS_AS(parse_llm_action("no actions here", spec, 2), ExpertParseError);
  CHECK_THROWS_AS(
      parse_llm_action("UAV 1: right, level 3\nUAV 1: still", spec, 2), ExpertParseError);
  CHECK_THROWS_AS(parse_llm_action("UAV 1: right, level 3", spec, 2), ExpertParseError);
  CHECK_THROWS_AS(
      parse_llm_action("UAV 1: right, level 9\nUAV 2: still", spec, 2), ExpertParseError);
  CHECK_THROWS_AS(
      parse_llm_action("UAV 1: right, level 0\nUAV 2: still", spec, 2), ExpertParseError);
  CHECK_THROWS_AS(parse_llm_action("UAV 1: right\nUAV 2: still", spec, 2), ExpertParseError);
  CHECK_THROWS_AS(
      parse_llm_action("UAV 1: still\nUAV 2: still\nUAV 3: still", spec, 2), ExpertParseError);
}

TEST_CASE("formatted joint actions parse back to themselves") {
  ActionSpec spec;
  spec.speeds = velocity_ladder(4.0, 25.0, 5);
  const std::vector<std::vector<int>> cases = {
      {spec.still_index(), spec.encode(2, 4)},
      {spec.encode(0, 1), spec.encode(1, 2)},
      {spec.encode(3, 3), spec.still_index()},
  };
  for (const auto& actions : cases) {
    const std::string text = format_joint_action(spec, actions);
    CHECK(parse_llm_action(text, spec, static_cast<int>(actions.size())) == actions);
  }
}

TEST_CASE("remote expert falls back to the scripted policy when unreachable") {
  const auto s = make_summary({{0.0, 100.0}}, {{200.0, 100.0}}, {}, {1});
  HttpExpert remote("http://127.0.0.1:9/v1/chat/completions", "", "test-model",
                    /*retry_limit=*/1, /*timeout_s=*/1);
  const ProviderResult res = remote.act(s, {});
  CHECK(res.fallback);
  CHECK(res.actions == scripted_heuristic_act(s));

  ScriptedExpert scripted;
  const ProviderResult direct = scripted.act(s, {});
  CHECK_FALSE(direct.fallback);
  CHECK(direct.actions == scripted_heuristic_act(s));
}

TEST_CASE("provider factory honors the endpoint environment variable") {
  ScenarioConfig cfg = expert_cfg();
  unsetenv("EXPERT_API_URL");
  auto scripted = make_expert_provider(cfg);
  CHECK(dynamic_cast<ScriptedExpert*>(scripted.get()) != nullptr);
  setenv("EXPERT_API_URL", "http://127.0.0.1:9/v1/chat/completions", 1);
  auto remote = make_expert_provider(cfg);
  CHECK(dynamic_cast<HttpExpert*>(remote.get()) != nullptr);
  unsetenv("EXPERT_API_URL");
}

TEST_CASE("dataset collection partitions per agent and reproduces byte-for-byte") {
  const ScenarioConfig cfg = expert_cfg();
  auto run = [&](const std::string& prefix) {
    SecEnv env(cfg, true);
    ScriptedExpert expert;
    return collect_dataset(expert, env, 2, 7000, prefix);
  };
  const DatasetStats a = run("/tmp/hetuav_dset_a");
  REQUIRE(a.files.size() == 2);
  CHECK(a.episodes_completed == 2);
  CHECK(a.episodes_aborted == 0);
  CHECK(a.fallback_slots == 0);
  CHECK(a.records_per_agent == 4);  // 2 episodes x 2 slots

  SecEnv probe(cfg, true);
  for (int k = 0; k < cfg.n_uav; ++k) {
    const auto records = read_transitions(a.files[static_cast<std::size_t>(k)]);
    REQUIRE(records.size() == 4);
    for (const auto& tr : records) {
      CHECK(tr.agent == k);
      CHECK(tr.obs.size() == probe.observation_size());
      CHECK(tr.next_obs.size() == probe.observation_size());
      CHECK(tr.action >= 0);
      CHECK(tr.action < probe.action_spec().size());
      CHECK(std::isfinite(tr.reward));
      CHECK_FALSE(tr.fallback);
    }
  }

  const DatasetStats b = run("/tmp/hetuav_dset_b");
  for (std::size_t k = 0; k < a.files.size(); ++k) CHECK(slurp(a.files[k]) == slurp(b.files[k]));
  for (const auto& f : a.files) std::remove(f.c_str());
  for (const auto& f : b.files) std::remove(f.c_str());
}

TEST_CASE("episodes abort and drop their records when the provider fails") {
  const ScenarioConfig cfg = expert_cfg();
  SecEnv env(cfg, true);
  FlakyProvider flaky(cfg.n_slots);  // survives exactly one episode
  const DatasetStats stats = collect_dataset(flaky, env, 3, 7000, "/tmp/hetuav_dset_flaky");
  CHECK(stats.episodes_completed == 1);
  CHECK(stats.episodes_aborted == 2);
  CHECK(stats.records_per_agent == static_cast<std::size_t>(cfg.n_slots));
  for (const auto& f : stats.files) std::remove(f.c_str());
}
