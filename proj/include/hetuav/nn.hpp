#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "hetuav/rng.hpp"

namespace hetuav {

/// Fully connected net with rectified-linear hidden layers and a linear
/// output. Batches are column-major: one sample per column.
struct Mlp {
  std::vector<Eigen::MatrixXd> w;  // [l]: out x in
  std::vector<Eigen::VectorXd> b;  // [l]: out

  static Mlp init(const std::vector<int>& sizes, RngStream& rng) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp: need at least input and output sizes");
    Mlp net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
      const int in = sizes[l], out = sizes[l + 1];
      if (in < 1 || out < 1) throw std::invalid_argument("Mlp: layer sizes must be positive");
      Eigen::MatrixXd wl(out, in);
      const double scale = std::sqrt(2.0 / static_cast<double>(in));
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) wl(r, c) = scale * rng.normal();
      net.w.push_back(std::move(wl));
      net.b.push_back(Eigen::VectorXd::Zero(out));
    }
    return net;
  }

  int input_size() const { return static_cast<int>(w.front().cols()); }
  int output_size() const { return static_cast<int>(w.back().rows()); }
  std::size_t layers() const { return w.size(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < w.size(); ++l)
      n += static_cast<std::size_t>(w[l].size()) + static_cast<std::size_t>(b[l].size());
    return n;
  }

  /// Zero-initialized clone of this net's shape (gradient/moment buffers).
  Mlp zeros_like() const {
    Mlp g;
    for (std::size_t l = 0; l < w.size(); ++l) {
      g.w.push_back(Eigen::MatrixXd::Zero(w[l].rows(), w[l].cols()));
      g.b.push_back(Eigen::VectorXd::Zero(b[l].size()));
    }
    return g;
  }

  void set_zero() {
    for (auto& m : w) m.setZero();
    for (auto& v : b) v.setZero();
  }

  /// Visit every parameter in a fixed order (layer, weights row-major, bias).
  template <typename Fn>
  void visit(Fn&& fn) {
    for (std::size_t l = 0; l < w.size(); ++l) {
      for (int r = 0; r < w[l].rows(); ++r)
        for (int c = 0; c < w[l].cols(); ++c) fn(w[l](r, c));
      for (int r = 0; r < b[l].size(); ++r) fn(b[l](r));
    }
  }
  template <typename Fn>
  void visit(const Mlp& other, Fn&& fn) {
    for (std::size_t l = 0; l < w.size(); ++l) {
      for (int r = 0; r < w[l].rows(); ++r)
        for (int c = 0; c < w[l].cols(); ++c) fn(w[l](r, c), other.w[l](r, c));
      for (int r = 0; r < b[l].size(); ++r) fn(b[l](r), other.b[l](r));
    }
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t l = 0; l < w.size(); ++l) {
      for (int r = 0; r < w[l].rows(); ++r)
        for (int c = 0; c < w[l].cols(); ++c) fn(w[l](r, c));
      for (int r = 0; r < b[l].size(); ++r) fn(b[l](r));
    }
  }

  struct Trace {
    std::vector<Eigen::MatrixXd> act;  // act[0] = input, act[l] = layer l output
    std::vector<Eigen::MatrixXd> pre;  // pre-activation of hidden layers
  };

  /// Forward pass over a batch (input_size x B). With a trace the
  /// intermediates needed by backward() are kept.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Trace* trace = nullptr) const {
    Eigen::MatrixXd cur = x;
    if (trace != nullptr) {
      trace->act.clear();
      trace->pre.clear();
      trace->act.push_back(cur);
    }
    for (std::size_t l = 0; l < w.size(); ++l) {
      Eigen::MatrixXd z = (w[l] * cur).colwise() + b[l];
      if (l + 1 < w.size()) {
        if (trace != nullptr) trace->pre.push_back(z);
        cur = z.cwiseMax(0.0);
      } else {
        cur = std::move(z);
      }
      if (trace != nullptr) trace->act.push_back(cur);
    }
    return cur;
  }

  Eigen::VectorXd forward_one(const Eigen::VectorXd& x) const { return forward(x); }

  /// Accumulate parameter gradients for upstream dL/d(output) `dout`;
  /// `grad` must be shaped like this net.
  void backward(const Trace& trace, const Eigen::MatrixXd& dout, Mlp& grad) const {
    Eigen::MatrixXd delta = dout;
    for (std::size_t l = w.size(); l-- > 0;) {
      grad.w[l].noalias() += delta * trace.act[l].transpose();
      grad.b[l] += delta.rowwise().sum();
      if (l > 0) {
        Eigen::MatrixXd dact = w[l].transpose() * delta;
        delta = dact.cwiseProduct(
            (trace.pre[l - 1].array() > 0.0).cast<double>().matrix());
      }
    }
  }
};

/// phi_hat = tau * phi + (1 - tau) * phi_hat, the standard Polyak step.
inline void soft_update(Mlp& target, const Mlp& online, double tau) {
  target.visit(online, [tau](double& t, double o) { t = tau * o + (1.0 - tau) * t; });
}

inline double grad_global_norm(const Mlp& grad) {
  double sq = 0.0;
  grad.for_each([&sq](double g) { sq += g * g; });
  return std::sqrt(sq);
}

/// Adaptive moment estimation with global-norm gradient clipping.
struct Adam {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  Mlp m, v;

  static Adam like(const Mlp& net, double lr) {
    Adam opt;
    opt.lr = lr;
    opt.m = net.zeros_like();
    opt.v = net.zeros_like();
    return opt;
  }

  void step(Mlp& params, Mlp& grad, double clip) {
    if (clip > 0.0) {
      const double norm = grad_global_norm(grad);
      if (norm > clip) {
        const double scale = clip / norm;
        grad.visit([scale](double& g) { g *= scale; });
      }
    }
    ++step_count;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
    auto update = [&](auto& p, auto& g, auto& mm, auto& vv) {
      mm = beta1 * mm + (1.0 - beta1) * g;
      vv = beta2 * vv + (1.0 - beta2) * g.cwiseProduct(g);
      p.array() -= lr * (mm.array() / c1) / ((vv.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < params.w.size(); ++l) {
      update(params.w[l], grad.w[l], m.w[l], v.w[l]);
      update(params.b[l], grad.b[l], m.b[l], v.b[l]);
    }
  }
};

/// Scalar Adam for the temperature parameter (log alpha).
struct AdamScalar {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step_count = 0;
  double m = 0.0;
  double v = 0.0;

  void step(double& param, double grad) {
    ++step_count;
    m = beta1 * m + (1.0 - beta1) * grad;
    v = beta2 * v + (1.0 - beta2) * grad * grad;
    const double mh = m / (1.0 - std::pow(beta1, static_cast<double>(step_count)));
    const double vh = v / (1.0 - std::pow(beta2, static_cast<double>(step_count)));
    param -= lr * mh / (std::sqrt(vh) + eps);
  }
};

}  // namespace hetuav
