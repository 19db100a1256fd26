#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "hetuav/env.hpp"
#include "hetuav/nn.hpp"

namespace hetuav {

inline Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd p = (logits.array() - top).exp();
  return p / p.sum();
}

inline Eigen::MatrixXd softmax_cols(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (int j = 0; j < logits.cols(); ++j) p.col(j) = softmax(logits.col(j));
  return p;
}

/// H = -sum p log p in nats; zero-probability entries contribute zero.
inline double policy_entropy(const Eigen::VectorXd& probs) {
  double h = 0.0;
  for (int a = 0; a < probs.size(); ++a)
    if (probs[a] > 0.0) h -= probs[a] * std::log(probs[a]);
  return h;
}

inline Eigen::VectorXd entropy_cols(const Eigen::MatrixXd& probs) {
  Eigen::VectorXd h(probs.cols());
  for (int j = 0; j < probs.cols(); ++j) h[j] = policy_entropy(probs.col(j));
  return h;
}

inline Eigen::VectorXd policy_probs(const Mlp& actor, const Eigen::VectorXd& obs) {
  return softmax(actor.forward_one(obs));
}

struct Batch {
  Eigen::MatrixXd obs;       // dim x B
  Eigen::VectorXi actions;   // B
  Eigen::VectorXd rewards;   // B
  Eigen::MatrixXd next_obs;  // dim x B
  Eigen::VectorXd done;      // B, 0 or 1
  int size() const { return static_cast<int>(actions.size()); }
};

inline Batch make_batch(const std::vector<Transition>& data,
                        const std::vector<std::size_t>& idx) {
  if (idx.empty()) throw std::invalid_argument("make_batch: empty index set");
  const int dim = static_cast<int>(data[idx[0]].obs.size());
  const int n = static_cast<int>(idx.size());
  Batch b;
  b.obs.resize(dim, n);
  b.next_obs.resize(dim, n);
  b.actions.resize(n);
  b.rewards.resize(n);
  b.done.resize(n);
  for (int j = 0; j < n; ++j) {
    const Transition& tr = data[idx[static_cast<std::size_t>(j)]];
    b.obs.col(j) = tr.obs;
    b.next_obs.col(j) = tr.next_obs;
    b.actions[j] = tr.action;
    b.rewards[j] = tr.reward;
    b.done[j] = tr.done ? 1.0 : 0.0;
  }
  return b;
}

/// Expected-value bootstrap with the min over target critics:
/// y = r + gamma (1 - done) sum_a' pi(a'|s') [min Q_hat(s',a') - alpha log pi],
/// the entropy part folded in as + alpha H(pi(s')). No gradients flow here.
inline Eigen::VectorXd critic_target(const Batch& batch, const Mlp& actor, const Mlp& target1,
                                     const Mlp& target2, double alpha, double gamma) {
  const Eigen::MatrixXd probs = softmax_cols(actor.forward(batch.next_obs));
  const Eigen::MatrixXd qmin =
      target1.forward(batch.next_obs).cwiseMin(target2.forward(batch.next_obs));
  const Eigen::VectorXd expected = (probs.array() * qmin.array()).colwise().sum();
  const Eigen::VectorXd h = entropy_cols(probs);
  return batch.rewards.array() +
         gamma * (1.0 - batch.done.array()) * (expected.array() + alpha * h.array());
}

inline double critic_loss(const Mlp& critic, const Batch& batch, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd q = critic.forward(batch.obs);
  double loss = 0.0;
  for (int j = 0; j < batch.size(); ++j) {
    const double diff = q(batch.actions[j], j) - y[j];
    loss += diff * diff;
  }
  return loss / batch.size();
}

/// Conservative penalty for one state: log sum_a exp Q(s,a) - Q(s, a_expert).
inline double cql_penalty(const Eigen::VectorXd& q_row, int expert_action) {
  const double top = q_row.maxCoeff();
  const double lse = top + std::log((q_row.array() - top).exp().sum());
  return lse - q_row[expert_action];
}

/// MSE-to-target plus beta-weighted conservative penalty (beta = 0 gives the
/// plain Bellman-residual loss); returns the loss and accumulates dL/dparams.
inline double critic_grad(const Mlp& critic, const Batch& batch, const Eigen::VectorXd& y,
                          double cql_beta, Mlp& grad) {
  Mlp::Trace trace;
  const Eigen::MatrixXd q = critic.forward(batch.obs, &trace);
  const int n = batch.size();
  Eigen::MatrixXd dq = Eigen::MatrixXd::Zero(q.rows(), q.cols());
  double loss = 0.0;
  for (int j = 0; j < n; ++j) {
    const double diff = q(batch.actions[j], j) - y[j];
    loss += diff * diff;
    dq(batch.actions[j], j) += 2.0 * diff / n;
  }
  loss /= n;
  if (cql_beta != 0.0) {
    for (int j = 0; j < n; ++j) {
      loss += cql_beta * cql_penalty(q.col(j), batch.actions[j]) / n;
      const Eigen::VectorXd soft = softmax(q.col(j));
      dq.col(j) += (cql_beta / n) * soft;
      dq(batch.actions[j], j) -= cql_beta / n;
    }
  }
  critic.backward(trace, dq, grad);
  return loss;
}

/// E_s sum_a pi(a|s) [alpha log pi(a|s) - min_i Q_i(s,a)].
inline double actor_loss(const Mlp& actor, const Mlp& q1, const Mlp& q2,
                         const Eigen::MatrixXd& obs, double alpha) {
  const Eigen::MatrixXd probs = softmax_cols(actor.forward(obs));
  const Eigen::MatrixXd qmin = q1.forward(obs).cwiseMin(q2.forward(obs));
  double loss = 0.0;
  for (int j = 0; j < obs.cols(); ++j) {
    loss -= alpha * policy_entropy(probs.col(j));
    loss -= (probs.col(j).array() * qmin.col(j).array()).sum();
  }
  return loss / obs.cols();
}

/// Per-logit gradient pi_j (g_j - gbar) with g = alpha log pi - min Q; the
/// critics are treated as constants.
inline double actor_grad(const Mlp& actor, const Mlp& q1, const Mlp& q2,
                         const Eigen::MatrixXd& obs, double alpha, Mlp& grad) {
  Mlp::Trace trace;
  const Eigen::MatrixXd logits = actor.forward(obs, &trace);
  const Eigen::MatrixXd qmin = q1.forward(obs).cwiseMin(q2.forward(obs));
  const int n = static_cast<int>(obs.cols());
  Eigen::MatrixXd dz(logits.rows(), n);
  double loss = 0.0;
  for (int j = 0; j < n; ++j) {
    const Eigen::VectorXd p = softmax(logits.col(j));
    Eigen::VectorXd g(p.size());
    for (int a = 0; a < p.size(); ++a) {
      const double logp = p[a] > 0.0 ? std::log(p[a]) : -745.0;  // exp underflow floor
      g[a] = alpha * logp - qmin(a, j);
    }
    const double mean_g = (p.array() * g.array()).sum();
    loss += mean_g;
    dz.col(j) = (p.array() * (g.array() - mean_g)).matrix() / n;
  }
  actor.backward(trace, dz, grad);
  return loss / n;
}

/// L(alpha) = E_s alpha (H(pi(s)) - target); descent raises alpha when the
/// policy is below the target entropy and lowers it above.
inline double temperature_loss(double alpha, const Eigen::MatrixXd& probs,
                               double target_entropy) {
  return alpha * (entropy_cols(probs).mean() - target_entropy);
}

inline double temperature_grad_log_alpha(double log_alpha, const Eigen::MatrixXd& probs,
                                         double target_entropy) {
  return std::exp(log_alpha) * (entropy_cols(probs).mean() - target_entropy);
}

/// Uniform-replay ring buffer owned by one agent (owner >= 0) or shared
/// (owner < 0). Reads are tallied per requesting agent, and an owned buffer
/// rejects foreign readers outright.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity, int owner = -1)
      : capacity_(capacity), owner_(owner) {
    if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: capacity must be positive");
  }

  int owner() const { return owner_; }
  std::size_t size() const { return data_.size(); }
  const std::map<int, long>& reads_by_agent() const { return reads_; }

  void push(Transition tr) {
    if (data_.size() < capacity_) {
      data_.push_back(std::move(tr));
    } else {
      data_[next_] = std::move(tr);
    }
    next_ = (next_ + 1) % capacity_;
  }

  Batch sample(int requester, int batch_size, RngStream& rng) const {
    if (owner_ >= 0 && requester != owner_)
      throw std::logic_error("replay isolation violated: agent " + std::to_string(requester) +
                             " read the buffer of agent " + std::to_string(owner_));
    if (data_.empty()) throw std::logic_error("ReplayBuffer: sample from empty buffer");
    ++reads_[requester];
    std::vector<std::size_t> idx(static_cast<std::size_t>(batch_size));
    for (auto& i : idx) i = static_cast<std::size_t>(rng.uniform_index(data_.size()));
    return make_batch(data_, idx);
  }

 private:
  std::size_t capacity_;
  int owner_;
  std::vector<Transition> data_;
  std::size_t next_ = 0;
  mutable std::map<int, long> reads_;
};

struct SacConfig {
  std::vector<int> hidden = {256, 256, 128};
  double gamma = 0.99;
  double lr = 5e-4;
  double tau = 0.005;
  double beta = 1.0;
  double grad_clip = 10.0;
  double target_entropy = 0.0;
  double alpha0 = 0.2;
  int batch_distill = 512;
  int batch_online = 1024;
};

inline SacConfig sac_config_from(const ScenarioConfig& cfg, int n_actions) {
  SacConfig c;
  c.hidden = cfg.hidden;
  c.gamma = cfg.gamma;
  c.lr = cfg.lr;
  c.tau = cfg.tau;
  c.beta = cfg.beta;
  c.alpha0 = cfg.alpha0;
  c.grad_clip = cfg.grad_clip;
  c.target_entropy = cfg.target_entropy_frac * std::log(static_cast<double>(n_actions));
  c.batch_distill = cfg.batch_distill;
  c.batch_online = cfg.batch_online;
  return c;
}

/// Independent discrete soft actor-critic state for one agent: policy net,
/// dual critics with target copies, learned log-temperature, and optimizers.
/// All randomness (init, batch sampling, exploration) flows from one keyed
/// stream so training runs are reproducible.
class AgentLearner {
 public:
  AgentLearner(int obs_dim, int n_actions, SacConfig cfg, std::uint64_t seed)
      : cfg_(std::move(cfg)), rng_(derive_key(seed, {0x6c6561726eULL})) {
    std::vector<int> sizes{obs_dim};
    for (int hsize : cfg_.hidden) sizes.push_back(hsize);
    sizes.push_back(n_actions);
    actor = Mlp::init(sizes, rng_);
    q1 = Mlp::init(sizes, rng_);
    q2 = Mlp::init(sizes, rng_);
    t1 = q1;
    t2 = q2;
    opt_actor = Adam::like(actor, cfg_.lr);
    opt_q1 = Adam::like(q1, cfg_.lr);
    opt_q2 = Adam::like(q2, cfg_.lr);
    opt_alpha.lr = cfg_.lr;
    log_alpha = std::log(cfg_.alpha0);
  }

  const SacConfig& config() const { return cfg_; }
  double alpha() const { return std::exp(log_alpha); }
  RngStream& rng() { return rng_; }
  const RngStream& rng() const { return rng_; }

  Eigen::VectorXd probs(const Eigen::VectorXd& obs) const { return policy_probs(actor, obs); }

  int act_greedy(const Eigen::VectorXd& obs) const {
    Eigen::Index best = 0;
    actor.forward_one(obs).maxCoeff(&best);
    return static_cast<int>(best);
  }

  int act_sample(const Eigen::VectorXd& obs) {
    const Eigen::VectorXd p = probs(obs);
    double u = rng_.uniform01();
    for (int a = 0; a < p.size(); ++a) {
      u -= p[a];
      if (u <= 0.0) return a;
    }
    return static_cast<int>(p.size()) - 1;
  }

  /// One offline mini-batch step (Alg. 2 body): critics fit the bootstrap
  /// target plus the beta-scaled conservative penalty toward the dataset
  /// action, the actor follows, targets soft-update. Temperature stays fixed.
  void update_offline(const Batch& batch) {
    const Eigen::VectorXd y = critic_target(batch, actor, t1, t2, alpha(), cfg_.gamma);
    step_critic(q1, opt_q1, batch, y, cfg_.beta);
    step_critic(q2, opt_q2, batch, y, cfg_.beta);
    step_actor(batch);
    soft_update(t1, q1, cfg_.tau);
    soft_update(t2, q2, cfg_.tau);
  }

  /// One online step (Alg. 3 body): plain critics, actor, learned
  /// temperature, target soft updates.
  void update_online(const Batch& batch) {
    const Eigen::VectorXd y = critic_target(batch, actor, t1, t2, alpha(), cfg_.gamma);
    step_critic(q1, opt_q1, batch, y, 0.0);
    step_critic(q2, opt_q2, batch, y, 0.0);
    step_actor(batch);
    const Eigen::MatrixXd probs_now = softmax_cols(actor.forward(batch.obs));
    opt_alpha.step(log_alpha,
                   temperature_grad_log_alpha(log_alpha, probs_now, cfg_.target_entropy));
    soft_update(t1, q1, cfg_.tau);
    soft_update(t2, q2, cfg_.tau);
  }

  Mlp actor, q1, q2, t1, t2;
  Adam opt_actor, opt_q1, opt_q2;
  AdamScalar opt_alpha;
  double log_alpha = 0.0;

 private:
  void step_critic(Mlp& net, Adam& opt, const Batch& batch, const Eigen::VectorXd& y,
                   double cql_beta) {
    Mlp grad = net.zeros_like();
    critic_grad(net, batch, y, cql_beta, grad);
    opt.step(net, grad, cfg_.grad_clip);
  }
  void step_actor(const Batch& batch) {
    Mlp grad = actor.zeros_like();
    actor_grad(actor, q1, q2, batch.obs, alpha(), grad);
    opt_actor.step(actor, grad, cfg_.grad_clip);
  }

  SacConfig cfg_;
  RngStream rng_;
};

/// Offline distillation (Alg. 2): per update and per agent, one mini-batch
/// from that agent's dataset partition through update_offline.
inline void distill(const std::vector<std::vector<Transition>>& partitions,
                    std::vector<AgentLearner>& agents, int n_updates) {
  if (partitions.size() != agents.size())
    throw std::invalid_argument("distill: one dataset partition per agent required");
  for (std::size_t k = 0; k < partitions.size(); ++k)
    if (partitions[k].empty())
      throw std::invalid_argument("distill: empty dataset partition for agent " +
                                  std::to_string(k));
  for (int u = 0; u < n_updates; ++u) {
    for (std::size_t k = 0; k < agents.size(); ++k) {
      AgentLearner& agent = agents[k];
      const int bsz = agent.config().batch_distill;
      std::vector<std::size_t> idx(static_cast<std::size_t>(bsz));
      for (auto& i : idx)
        i = static_cast<std::size_t>(agent.rng().uniform_index(partitions[k].size()));
      agent.update_offline(make_batch(partitions[k], idx));
    }
  }
}

/// Per-episode aggregates mirroring the experiment metrics schema (wall time
/// is measured but reported separately from the deterministic columns).
struct EpisodeStats {
  int episode = 0;
  double mean_reward = 0.0;  // per-agent average of summed slot rewards
  double cum_f1 = 0.0;
  double cum_energy = 0.0;
  int collisions = 0;
  int boundary = 0;
  double s2dc_iter_mean = 0.0;
  double wall_s = 0.0;
};

/// Online adaptation (Alg. 3): episodes of environment interaction with one
/// gradient update per agent per slot once its buffer can fill a batch.
/// `buffers` holds one pointer per agent; aliasing them to a single shared
/// buffer is exactly the experience-sharing baseline.
inline std::vector<EpisodeStats> online_adapt(SecEnv& env, std::vector<AgentLearner>& agents,
                                              const std::vector<ReplayBuffer*>& buffers,
                                              int episodes, std::uint64_t run_seed) {
  const int n_k = env.config().n_uav;
  if (static_cast<int>(agents.size()) != n_k || static_cast<int>(buffers.size()) != n_k)
    throw std::invalid_argument("online_adapt: need one agent and one buffer per UAV");
  std::vector<EpisodeStats> trace;
  trace.reserve(static_cast<std::size_t>(episodes));

  for (int ep = 0; ep < episodes; ++ep) {
    const auto wall_start = std::chrono::steady_clock::now();
    std::vector<Eigen::VectorXd> obs = env.reset(run_seed);
    EpisodeStats stats;
    stats.episode = ep;
    double reward_sum = 0.0;
    long iter_sum = 0;
    for (int t = 0; t < env.config().n_slots; ++t) {
      std::vector<int> joint(static_cast<std::size_t>(n_k));
      for (int k = 0; k < n_k; ++k)
        joint[static_cast<std::size_t>(k)] =
            agents[static_cast<std::size_t>(k)].act_sample(obs[static_cast<std::size_t>(k)]);
      const auto res = env.step(joint);
      for (int k = 0; k < n_k; ++k) {
        reward_sum += res.transitions[static_cast<std::size_t>(k)].reward;
        buffers[static_cast<std::size_t>(k)]->push(res.transitions[static_cast<std::size_t>(k)]);
      }
      stats.cum_f1 += res.info.f1;
      stats.cum_energy += res.info.fleet_energy;
      stats.collisions += res.info.collision_count;
      stats.boundary += res.info.boundary_count;
      iter_sum += res.info.s2dc_iterations;
      for (int k = 0; k < n_k; ++k) {
        AgentLearner& agent = agents[static_cast<std::size_t>(k)];
        ReplayBuffer& buf = *buffers[static_cast<std::size_t>(k)];
        if (static_cast<int>(buf.size()) >= agent.config().batch_online)
          agent.update_online(buf.sample(k, agent.config().batch_online, agent.rng()));
      }
      for (int k = 0; k < n_k; ++k)
        obs[static_cast<std::size_t>(k)] = res.transitions[static_cast<std::size_t>(k)].next_obs;
    }
    stats.mean_reward = reward_sum / n_k;
    stats.s2dc_iter_mean = static_cast<double>(iter_sum) / env.config().n_slots;
    stats.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start)
                       .count();
    trace.push_back(stats);
  }
  return trace;
}

/// Max relative error between `analytic` and central finite differences of
/// `loss` over every parameter of `net` (small nets only).
template <typename LossFn>
double gradient_check(Mlp& net, LossFn&& loss, const Mlp& analytic, double h = 1e-5) {
  double worst = 0.0;
  std::size_t flat = 0;
  std::vector<double> grads;
  analytic.for_each([&grads](double g) { grads.push_back(g); });
  net.visit([&](double& p) {
    const double saved = p;
    p = saved + h;
    const double up = loss(static_cast<const Mlp&>(net));
    p = saved - h;
    const double down = loss(static_cast<const Mlp&>(net));
    p = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double rel = std::abs(grads[flat] - numeric) / (std::abs(grads[flat]) + 1e-8);
    worst = std::max(worst, rel);
    ++flat;
  });
  return worst;
}

namespace detail {

inline void write_raw(std::ostream& out, const void* data, std::size_t bytes) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
}
inline void read_raw(std::istream& in, void* data, std::size_t bytes) {
  if (!in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes)))
    throw std::runtime_error("checkpoint truncated");
}

inline void write_net(std::ostream& out, const Mlp& net) {
  const std::uint32_t layers = static_cast<std::uint32_t>(net.w.size());
  write_raw(out, &layers, sizeof layers);
  for (std::size_t l = 0; l < net.w.size(); ++l) {
    const std::uint32_t rows = static_cast<std::uint32_t>(net.w[l].rows());
    const std::uint32_t cols = static_cast<std::uint32_t>(net.w[l].cols());
    write_raw(out, &rows, sizeof rows);
    write_raw(out, &cols, sizeof cols);
    write_raw(out, net.w[l].data(), sizeof(double) * static_cast<std::size_t>(net.w[l].size()));
    write_raw(out, net.b[l].data(), sizeof(double) * static_cast<std::size_t>(net.b[l].size()));
  }
}

inline Mlp read_net(std::istream& in) {
  std::uint32_t layers = 0;
  read_raw(in, &layers, sizeof layers);
  Mlp net;
  for (std::uint32_t l = 0; l < layers; ++l) {
    std::uint32_t rows = 0, cols = 0;
    read_raw(in, &rows, sizeof rows);
    read_raw(in, &cols, sizeof cols);
    Eigen::MatrixXd w(rows, cols);
    Eigen::VectorXd b(rows);
    read_raw(in, w.data(), sizeof(double) * static_cast<std::size_t>(w.size()));
    read_raw(in, b.data(), sizeof(double) * static_cast<std::size_t>(b.size()));
    net.w.push_back(std::move(w));
    net.b.push_back(std::move(b));
  }
  return net;
}

inline void write_adam(std::ostream& out, const Adam& opt) {
  write_raw(out, &opt.lr, sizeof opt.lr);
  write_raw(out, &opt.step_count, sizeof opt.step_count);
  write_net(out, opt.m);
  write_net(out, opt.v);
}

inline void read_adam(std::istream& in, Adam& opt) {
  read_raw(in, &opt.lr, sizeof opt.lr);
  read_raw(in, &opt.step_count, sizeof opt.step_count);
  opt.m = read_net(in);
  opt.v = read_net(in);
}

inline void write_adam_scalar(std::ostream& out, const AdamScalar& opt) {
  write_raw(out, &opt.lr, sizeof opt.lr);
  write_raw(out, &opt.step_count, sizeof opt.step_count);
  write_raw(out, &opt.m, sizeof opt.m);
  write_raw(out, &opt.v, sizeof opt.v);
}

inline void read_adam_scalar(std::istream& in, AdamScalar& opt) {
  read_raw(in, &opt.lr, sizeof opt.lr);
  read_raw(in, &opt.step_count, sizeof opt.step_count);
  read_raw(in, &opt.m, sizeof opt.m);
  read_raw(in, &opt.v, sizeof opt.v);
}

}  // namespace detail

inline constexpr char k_checkpoint_magic[8] = {'H', 'T', 'U', 'V', 'C', 'K', '0', '1'};

/// Versioned binary dump of every agent: nets, optimizer moments, learned
/// temperature (with its optimizer), and the RNG stream. Round-trips
/// bit-exactly.
inline void save_checkpoint(const std::string& path, const std::vector<AgentLearner>& agents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint '" + path + "' for writing");
  detail::write_raw(out, k_checkpoint_magic, sizeof k_checkpoint_magic);
  const std::uint32_t n = static_cast<std::uint32_t>(agents.size());
  detail::write_raw(out, &n, sizeof n);
  for (const AgentLearner& a : agents) {
    detail::write_net(out, a.actor);
    detail::write_net(out, a.q1);
    detail::write_net(out, a.q2);
    detail::write_net(out, a.t1);
    detail::write_net(out, a.t2);
    detail::write_adam(out, a.opt_actor);
    detail::write_adam(out, a.opt_q1);
    detail::write_adam(out, a.opt_q2);
    detail::write_adam_scalar(out, a.opt_alpha);
    detail::write_raw(out, &a.log_alpha, sizeof a.log_alpha);
    const std::uint64_t state = a.rng().state();
    const std::uint8_t have_spare = a.rng().have_spare() ? 1 : 0;
    const double spare = a.rng().spare();
    detail::write_raw(out, &state, sizeof state);
    detail::write_raw(out, &have_spare, sizeof have_spare);
    detail::write_raw(out, &spare, sizeof spare);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

/// Restores into already-constructed agents (shapes must match the save).
inline void load_checkpoint(const std::string& path, std::vector<AgentLearner>& agents) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path + "'");
  char magic[8] = {};
  detail::read_raw(in, magic, sizeof magic);
  if (std::memcmp(magic, k_checkpoint_magic, sizeof magic) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  std::uint32_t n = 0;
  detail::read_raw(in, &n, sizeof n);
  if (n != agents.size())
    throw std::runtime_error("checkpoint holds " + std::to_string(n) + " agents, expected " +
                             std::to_string(agents.size()));
  for (AgentLearner& a : agents) {
    a.actor = detail::read_net(in);
    a.q1 = detail::read_net(in);
    a.q2 = detail::read_net(in);
    a.t1 = detail::read_net(in);
    a.t2 = detail::read_net(in);
    detail::read_adam(in, a.opt_actor);
    detail::read_adam(in, a.opt_q1);
    detail::read_adam(in, a.opt_q2);
    detail::read_adam_scalar(in, a.opt_alpha);
    detail::read_raw(in, &a.log_alpha, sizeof a.log_alpha);
    std::uint64_t state = 0;
    std::uint8_t have_spare = 0;
    double spare = 0.0;
    detail::read_raw(in, &state, sizeof state);
    detail::read_raw(in, &have_spare, sizeof have_spare);
    detail::read_raw(in, &spare, sizeof spare);
    a.rng().restore(state, have_spare != 0, spare);
  }
}

}  // namespace hetuav
