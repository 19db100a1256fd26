#pragma once

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <regex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hetuav/env.hpp"

namespace hetuav {

/// Everything an action provider may see about the current slot: absolute
/// geometry, heterogeneity, the action space, and the previous joint action.
struct EnvSummary {
  double area_d = 0.0;
  double slot_dt = 1.0;
  double d_c = 0.0;
  int t = 0;
  int n_slots = 0;
  std::vector<Eigen::Vector2d> uav_xy, gt_pos, eve_pos;
  std::vector<double> coverage;
  std::vector<int> capacity;
  ActionSpec spec;
  std::vector<int> prev_actions;  // empty on the first slot of an episode
};

inline EnvSummary summarize(const SecEnv& env, const std::vector<int>& prev_actions = {}) {
  const ScenarioConfig& cfg = env.config();
  EnvSummary s;
  s.area_d = cfg.area_d;
  s.slot_dt = cfg.slot_dt;
  s.d_c = cfg.d_c;
  s.t = env.time_slot();
  s.n_slots = cfg.n_slots;
  s.uav_xy = env.uav_positions();
  s.gt_pos = env.gt_positions();
  s.eve_pos = env.eve_positions();
  for (int k = 0; k < cfg.n_uav; ++k) {
    s.coverage.push_back(cfg.coverage_of(k));
    s.capacity.push_back(cfg.capacity_of(k));
  }
  s.spec = env.action_spec();
  s.prev_actions = prev_actions;
  return s;
}

inline const std::array<const char*, 4>& direction_names() {
  static const std::array<const char*, 4> names = {"right", "up", "left", "down"};
  return names;
}

/// Canonical per-UAV answer lines ("UAV 1: right, level 3" / "UAV 2: still"),
/// the same format the prompt schema requests and the parser accepts.
inline std::string format_joint_action(const ActionSpec& spec, const std::vector<int>& actions) {
  std::string out;
  for (std::size_t k = 0; k < actions.size(); ++k) {
    const DecodedAction act = spec.decode(actions[k]);
    out += "UAV " + std::to_string(k + 1) + ": ";
    if (act.v == 0.0) {
      out += "still";
    } else {
      int level = 0;
      for (int l = 1; l < spec.levels(); ++l)
        if (spec.speeds[static_cast<std::size_t>(l)] == act.v) level = l;
      int direction = 0;
      for (int d = 0; d < 4; ++d)
        if (ActionSpec::k_direction_angles[static_cast<std::size_t>(d)] == act.omega)
          direction = d;
      out += std::string(direction_names()[static_cast<std::size_t>(direction)]) + ", level " +
             std::to_string(level);
    }
    if (k + 1 < actions.size()) out += '\n';
  }
  return out;
}

/// Greedy waypoint heuristic: each UAV (in id order) claims its capacity of
/// nearest unclaimed GTs, aims at their centroid pushed away from nearby
/// eavesdroppers, then picks the axis direction with the largest component
/// along the bearing and the fastest speed level that does not overshoot the
/// target this slot (slowest nonzero level when every step would).
inline std::vector<int> scripted_heuristic_act(const EnvSummary& s) {
  const int n_k = static_cast<int>(s.uav_xy.size());
  std::vector<int> actions(static_cast<std::size_t>(n_k), s.spec.still_index());
  std::vector<bool> claimed(s.gt_pos.size(), false);

  for (int k = 0; k < n_k; ++k) {
    const Eigen::Vector2d& u = s.uav_xy[static_cast<std::size_t>(k)];
    // Nearest-unclaimed selection iterated to a fixed point: re-rank from the
    // aim point instead of the moving UAV, so the claimed set settles on a
    // cluster and stops depending on the UAV's exact position. Ranking from
    // the UAV alone lets claims flip as it moves, which locks pairs of UAVs
    // into claim-swap limit cycles that bounce between two waypoints forever.
    std::vector<int> set, prev;
    Eigen::Vector2d anchor = u;
    Eigen::Vector2d centroid = u;
    auto rank_from = [&](const Eigen::Vector2d& p, int cap) {
      struct Cand {
        double d;
        int i;
      };
      std::vector<Cand> cands;
      for (std::size_t i = 0; i < s.gt_pos.size(); ++i)
        if (!claimed[i]) cands.push_back({(s.gt_pos[i] - p).norm(), static_cast<int>(i)});
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
        if (a.d != b.d) return a.d < b.d;
        return a.i < b.i;
      });
      std::vector<int> out;
      for (int c = 0; c < std::min<int>(cap, static_cast<int>(cands.size())); ++c)
        out.push_back(cands[static_cast<std::size_t>(c)].i);
      return out;
    };
    auto centroid_of = [&](const std::vector<int>& ids) {
      Eigen::Vector2d c = Eigen::Vector2d::Zero();
      for (int i : ids) c += s.gt_pos[static_cast<std::size_t>(i)];
      return Eigen::Vector2d(c / static_cast<double>(ids.size()));
    };
    for (int pass = 0; pass < 8; ++pass) {
      std::vector<int> next = rank_from(anchor, s.capacity[static_cast<std::size_t>(k)]);
      if (next.empty()) break;  // pool exhausted: hover
      if (next == set) break;
      if (next == prev) {  // 2-cycle: canonical member, independent of entry phase
        if (set < next) next = set;
        set = std::move(next);
        break;
      }
      prev = std::move(set);
      set = std::move(next);
      anchor = centroid_of(set);
    }
    if (set.empty()) continue;  // pool exhausted: hover
    centroid = centroid_of(set);
    for (int i : set) claimed[static_cast<std::size_t>(i)] = true;

    Eigen::Vector2d target = centroid;
    const double repel_radius = 1.5 * s.coverage[static_cast<std::size_t>(k)];
    // Displacement per eavesdropper is capped at one top-speed step so targets
    // stay near the GT interior and the area clamp below almost never binds;
    // the emitted action then remains a function of relative geometry, which
    // is all downstream policies observe.
    const double max_push = s.spec.speeds.back() * s.slot_dt;
    for (const auto& eve : s.eve_pos) {
      const double dist = (centroid - eve).norm();
      if (dist >= repel_radius) continue;
      Eigen::Vector2d away;
      if (dist > 1e-9) {
        away = (centroid - eve) / dist;
      } else if ((centroid - u).norm() > 1e-9) {
        away = (centroid - u).normalized();  // collocated: push along the approach
      } else {
        away = Eigen::Vector2d(1.0, 0.0);
      }
      target += max_push * (1.0 - dist / repel_radius) * away;
    }
    target = clamp_to_area(target, s.area_d);

    const Eigen::Vector2d delta = target - u;
    const double remaining = delta.norm();
    // Arrival band: hover once no axis move can help. A step of length m along
    // an axis with component c changes the squared gap by m*(m - 2c), so every
    // available move (m >= v_min*dt) loses ground unless some |component|
    // exceeds v_min*dt/2; past that test each move strictly shrinks the gap,
    // which rules out orbit and ping-pong cycles around the target.
    const double axis_reach = std::max(std::abs(delta.x()), std::abs(delta.y()));
    if (axis_reach <= 0.5 * s.spec.speeds[1] * s.slot_dt) continue;

    int best_dir = 0;
    double best_dot = -1e300;
    for (int d = 0; d < 4; ++d) {
      const double ang = ActionSpec::k_direction_angles[static_cast<std::size_t>(d)];
      const double dot = std::cos(ang) * delta.x() + std::sin(ang) * delta.y();
      if (dot > best_dot) {
        best_dot = dot;
        best_dir = d;
      }
    }
    // Direction hysteresis: hold the previous leg while it still makes at
    // least half the best axis's progress. Greedy axis pursuit otherwise rides
    // the |dx|=|dy| boundary and flips direction almost every slot, which
    // scatters the demonstrated action across a knife-edge decision surface.
    if (static_cast<int>(s.prev_actions.size()) == n_k) {
      const int mob = s.prev_actions[static_cast<std::size_t>(k)] % s.spec.mobility_count();
      if (mob > 0) {
        const int prev_dir = (mob - 1) / (s.spec.levels() - 1);
        const double ang = ActionSpec::k_direction_angles[static_cast<std::size_t>(prev_dir)];
        const double dot = std::cos(ang) * delta.x() + std::sin(ang) * delta.y();
        if (dot > 0.0 && dot >= 0.5 * best_dot) best_dir = prev_dir;
      }
    }
    // Largest level whose step stays within the remaining distance: the UAV
    // never flies past the target, so the gap shrinks monotonically into the
    // arrival band. Rounding up instead makes 25 m hops at sub-25 m gaps and
    // the UAV ping-pongs across the target indefinitely.
    int level = 1;
    for (int l = s.spec.levels() - 1; l >= 1; --l) {
      if (s.spec.speeds[static_cast<std::size_t>(l)] * s.slot_dt <= remaining) {
        level = l;
        break;
      }
    }
    actions[static_cast<std::size_t>(k)] = s.spec.encode(best_dir, level);
  }
  return actions;
}

namespace detail {

inline std::string replace_all(std::string text, const std::string& from, const std::string& to) {
  std::size_t at = 0;
  while ((at = text.find(from, at)) != std::string::npos) {
    text.replace(at, from.size(), to);
    at += to.size();
  }
  return text;
}

inline std::string fmt1(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.1f", x);
  return buf;
}

}  // namespace detail

inline const std::string& default_prompt_template() {
  static const std::string tmpl = R"(You command {{N_UAV}} multi-antenna UAV base stations providing secure downlink service over a {{AREA_D}} m x {{AREA_D}} m area. This is time slot {{T}} of {{N_SLOTS}}.

Fleet configuration (heterogeneous coverage and capacity):
{{UAV_TABLE}}

Ground terminals (GTs) requesting service:
{{GT_TABLE}}

Known eavesdroppers:
{{EVE_TABLE}}

Mission objective: position the fleet so the secrecy rate (each served GT's rate minus the strongest eavesdropper rate on it) is maximized while propulsion energy stays low. Air-to-ground links are line-of-sight with high probability, and link quality improves as horizontal distance shrinks. Each UAV serves at most its capacity, only GTs within its coverage range, and its transmissions can be overheard by eavesdroppers inside that same range; prefer positions that cover many GTs while keeping eavesdroppers outside coverage or far away.

Operational rules:
- The service area is [0, {{AREA_D}}] meters on both axes; never fly outside it.
- Keep every pair of UAVs at least {{D_C}} m apart.
- Each slot a UAV either hovers or moves along one axis at one speed level.

{{TRAJECTORY_SECTION}}Action catalog:
{{ACTION_CATALOG}}

{{ANSWER_SCHEMA}}
)";
  return tmpl;
}

inline std::string load_prompt_template(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prompt template '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Deterministic template instantiation; `history` renders as a trajectory
/// section listing recent joint actions and is omitted entirely when empty.
struct HistoryEntry {
  int t = 0;
  std::vector<int> actions;
};

inline std::string build_prompt(const EnvSummary& s, const std::vector<HistoryEntry>& history,
                                const std::string& tmpl = default_prompt_template()) {
  using detail::fmt1;
  std::string uav_table;
  for (std::size_t k = 0; k < s.uav_xy.size(); ++k)
    uav_table += "UAV " + std::to_string(k + 1) + ": position (" + fmt1(s.uav_xy[k].x()) + ", " +
                 fmt1(s.uav_xy[k].y()) + "), coverage range " + fmt1(s.coverage[k]) +
                 " m, capacity " + std::to_string(s.capacity[k]) + " GTs\n";
  std::string gt_table;
  for (std::size_t i = 0; i < s.gt_pos.size(); ++i)
    gt_table += "GT " + std::to_string(i + 1) + ": (" + fmt1(s.gt_pos[i].x()) + ", " +
                fmt1(s.gt_pos[i].y()) + ")\n";
  std::string eve_table = s.eve_pos.empty() ? "(none known)\n" : "";
  for (std::size_t e = 0; e < s.eve_pos.size(); ++e)
    eve_table += "Eve " + std::to_string(e + 1) + ": (" + fmt1(s.eve_pos[e].x()) + ", " +
                 fmt1(s.eve_pos[e].y()) + ")\n";

  std::string catalog = "still = hover in place (no level).\n";
  catalog += "Directions: right (+x), up (+y), left (-x), down (-y).\nSpeed levels:";
  for (int l = 1; l < s.spec.levels(); ++l)
    catalog += std::string(l > 1 ? "," : "") + " level " + std::to_string(l) + " = " +
               fmt1(s.spec.speeds[static_cast<std::size_t>(l)]) + " m/s";
  catalog += ".";

  std::string trajectory;
  if (!history.empty()) {
    trajectory = "Recent trajectory (oldest first):\n";
    const std::size_t start = history.size() > 5 ? history.size() - 5 : 0;
    for (std::size_t h = start; h < history.size(); ++h) {
      std::string line =
          detail::replace_all(format_joint_action(s.spec, history[h].actions), "\n", "; ");
      trajectory += "t=" + std::to_string(history[h].t) + ": " + line + "\n";
    }
    trajectory += "\n";
  }

  std::string schema =
      "Reply with exactly one line per UAV, in order, and nothing else. Use the exact format "
      "'UAV <id>: <direction>, level <n>' or 'UAV <id>: still'. Expected lines:\n";
  for (std::size_t k = 0; k < s.uav_xy.size(); ++k)
    schema += "UAV " + std::to_string(k + 1) + ": ...\n";

  std::string text = tmpl;
  text = detail::replace_all(text, "{{N_UAV}}", std::to_string(s.uav_xy.size()));
  text = detail::replace_all(text, "{{AREA_D}}", fmt1(s.area_d));
  text = detail::replace_all(text, "{{D_C}}", fmt1(s.d_c));
  text = detail::replace_all(text, "{{T}}", std::to_string(s.t + 1));
  text = detail::replace_all(text, "{{N_SLOTS}}", std::to_string(s.n_slots));
  text = detail::replace_all(text, "{{UAV_TABLE}}", uav_table);
  text = detail::replace_all(text, "{{GT_TABLE}}", gt_table);
  text = detail::replace_all(text, "{{EVE_TABLE}}", eve_table);
  text = detail::replace_all(text, "{{TRAJECTORY_SECTION}}", trajectory);
  text = detail::replace_all(text, "{{ACTION_CATALOG}}", catalog);
  text = detail::replace_all(text, "{{ANSWER_SCHEMA}}", schema);
  return text;
}

struct ExpertParseError : std::runtime_error {
  explicit ExpertParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Scan free-form text for per-UAV action lines. Requires exactly one entry
/// per UAV id 1..n_uav; duplicates, gaps, unknown levels, or a missing level
/// on a movement direction are parse errors.
inline std::vector<int> parse_llm_action(const std::string& text, const ActionSpec& spec,
                                         int n_uav) {
  static const std::regex re(
      R"(UAV\s*(\d+)\s*:\s*(right|up|left|down|still)\b(?:\s*,\s*level\s*(\d+))?)",
      std::regex::icase);
  std::map<int, std::pair<std::string, int>> found;  // id -> (direction, level or -1)
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re);
       it != std::sregex_iterator(); ++it) {
    const std::smatch& m = *it;
    const int id = std::stoi(m[1].str());
    if (found.count(id))
      throw ExpertParseError("duplicate entry for UAV " + std::to_string(id));
    std::string dir = m[2].str();
    std::transform(dir.begin(), dir.end(), dir.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    found[id] = {dir, m[3].matched ? std::stoi(m[3].str()) : -1};
  }
  if (found.empty()) throw ExpertParseError("no action lines found");

  std::vector<int> actions(static_cast<std::size_t>(n_uav));
  for (int k = 1; k <= n_uav; ++k) {
    const auto it = found.find(k);
    if (it == found.end())
      throw ExpertParseError("missing entry for UAV " + std::to_string(k));
    const auto& [dir, level] = it->second;
    if (dir == "still") {
      actions[static_cast<std::size_t>(k - 1)] = spec.still_index();
      continue;
    }
    int d = -1;
    for (int c = 0; c < 4; ++c)
      if (dir == direction_names()[static_cast<std::size_t>(c)]) d = c;
    if (level < 0)
      throw ExpertParseError("UAV " + std::to_string(k) + ": direction '" + dir +
                             "' needs a speed level");
    if (level < 1 || level >= spec.levels())
      throw ExpertParseError("UAV " + std::to_string(k) + ": level " + std::to_string(level) +
                             " outside [1," + std::to_string(spec.levels() - 1) + "]");
    actions[static_cast<std::size_t>(k - 1)] = spec.encode(d, level);
  }
  if (static_cast<int>(found.size()) > n_uav)
    throw ExpertParseError("more action lines than UAVs");
  return actions;
}

struct ProviderResult {
  std::vector<int> actions;
  bool fallback = false;  // set when the scripted policy substituted this slot
};

struct ExpertError : std::runtime_error {
  explicit ExpertError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Action source for dataset collection; implementations must be
/// deterministic functions of their configuration and the inputs.
class ExpertProvider {
 public:
  virtual ~ExpertProvider() = default;
  virtual ProviderResult act(const EnvSummary& summary,
                             const std::vector<HistoryEntry>& history) = 0;
};

class ScriptedExpert final : public ExpertProvider {
 public:
  ProviderResult act(const EnvSummary& summary, const std::vector<HistoryEntry>&) override {
    return {scripted_heuristic_act(summary), false};
  }
};

}  // namespace hetuav

// The HTTP client is only pulled in where the remote expert is used.
#include <httplib.h>

namespace hetuav {

/// Chat-completion client for a remote expert. Transport or parse failures
/// retry up to the limit, then the scripted heuristic substitutes for the
/// slot and the result carries the fallback flag.
class HttpExpert final : public ExpertProvider {
 public:
  HttpExpert(std::string url, std::string api_key, std::string model, int retry_limit = 2,
             int timeout_s = 30, std::string template_text = default_prompt_template())
      : url_(std::move(url)),
        api_key_(std::move(api_key)),
        model_(std::move(model)),
        retry_limit_(retry_limit),
        timeout_s_(timeout_s),
        template_(std::move(template_text)) {}

  ProviderResult act(const EnvSummary& summary,
                     const std::vector<HistoryEntry>& history) override {
    const std::string prompt = build_prompt(summary, history, template_);
    for (int attempt = 0; attempt <= retry_limit_; ++attempt) {
      try {
        const std::string reply = complete(prompt);
        return {parse_llm_action(reply, summary.spec,
                                 static_cast<int>(summary.uav_xy.size())),
                false};
      } catch (const std::exception&) {
        // transport or parse failure: try again, then fall back
      }
    }
    return {scripted_heuristic_act(summary), true};
  }

 private:
  std::string complete(const std::string& prompt) {
    std::string base = url_, path = "/";
    const auto scheme = url_.find("://");
    const auto slash = scheme == std::string::npos ? url_.find('/')
                                                   : url_.find('/', scheme + 3);
    if (slash != std::string::npos) {
      base = url_.substr(0, slash);
      path = url_.substr(slash);
    }
    httplib::Client client(base);
    client.set_connection_timeout(timeout_s_, 0);
    client.set_read_timeout(timeout_s_, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const nlohmann::json body = {
        {"model", model_},
        {"temperature", 0.0},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt}}})}};
    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) throw ExpertError("expert endpoint unreachable: " + url_);
    if (res->status != 200)
      throw ExpertError("expert endpoint returned status " + std::to_string(res->status));
    const auto parsed = nlohmann::json::parse(res->body);
    return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
  }

  std::string url_, api_key_, model_;
  int retry_limit_;
  int timeout_s_;
  std::string template_;
};

/// Remote expert when EXPERT_API_URL is set, scripted otherwise.
inline std::unique_ptr<ExpertProvider> make_expert_provider(const ScenarioConfig& cfg) {
  const char* url = std::getenv("EXPERT_API_URL");
  if (url == nullptr || *url == '\0') return std::make_unique<ScriptedExpert>();
  const char* key = std::getenv("EXPERT_API_KEY");
  const char* model = std::getenv("EXPERT_MODEL");
  return std::make_unique<HttpExpert>(url, key ? key : "", model ? model : "",
                                      cfg.expert_retry_limit);
}

struct DatasetStats {
  std::vector<std::string> files;  // one per agent, indexed by agent id
  int episodes_completed = 0;
  int episodes_aborted = 0;
  int fallback_slots = 0;
  std::size_t records_per_agent = 0;
};

/// Roll `episodes` full episodes under the provider and write one record
/// file per agent (\<prefix\>_agent\<k\>.jsonl). Rewards flow through the full
/// slot pipeline of env.step. Episode e uses seed base_seed + e. A provider
/// that throws aborts its episode; the episode's records are discarded.
inline DatasetStats collect_dataset(ExpertProvider& provider, SecEnv& env, int episodes,
                                    std::uint64_t base_seed, const std::string& out_prefix) {
  const int n_k = env.config().n_uav;
  std::vector<std::vector<Transition>> per_agent(static_cast<std::size_t>(n_k));
  DatasetStats stats;

  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(base_seed + static_cast<std::uint64_t>(ep));
    std::vector<HistoryEntry> history;
    std::vector<std::vector<Transition>> episode_buf(static_cast<std::size_t>(n_k));
    int episode_fallbacks = 0;
    try {
      for (int t = 0; t < env.config().n_slots; ++t) {
        const EnvSummary summary =
            summarize(env, history.empty() ? std::vector<int>{} : history.back().actions);
        const ProviderResult choice = provider.act(summary, history);
        if (static_cast<int>(choice.actions.size()) != n_k)
          throw ExpertError("provider returned " + std::to_string(choice.actions.size()) +
                            " actions for " + std::to_string(n_k) + " UAVs");
        auto res = env.step(choice.actions);
        for (int k = 0; k < n_k; ++k) {
          res.transitions[static_cast<std::size_t>(k)].fallback = choice.fallback;
          episode_buf[static_cast<std::size_t>(k)].push_back(
              std::move(res.transitions[static_cast<std::size_t>(k)]));
        }
        history.push_back({t, choice.actions});
        if (choice.fallback) ++episode_fallbacks;
      }
    } catch (const ExpertError&) {
      ++stats.episodes_aborted;
      continue;  // exclude the partial episode
    }
    for (int k = 0; k < n_k; ++k) {
      auto& dst = per_agent[static_cast<std::size_t>(k)];
      auto& src = episode_buf[static_cast<std::size_t>(k)];
      dst.insert(dst.end(), std::make_move_iterator(src.begin()),
                 std::make_move_iterator(src.end()));
    }
    stats.fallback_slots += episode_fallbacks;
    ++stats.episodes_completed;
  }

  for (int k = 0; k < n_k; ++k) {
    const std::string path = out_prefix + "_agent" + std::to_string(k) + ".jsonl";
    write_transitions(path, per_agent[static_cast<std::size_t>(k)]);
    stats.files.push_back(path);
  }
  stats.records_per_agent = per_agent.empty() ? 0 : per_agent[0].size();
  return stats;
}

}  // namespace hetuav
