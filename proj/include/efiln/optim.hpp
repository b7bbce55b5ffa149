#pragma once

// First- and quasi-second-order optimizers over a flat parameter vector.

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace efiln {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

struct AdamState {
  AdamConfig config;
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg);
};

/// One bias-corrected Adam update of theta in place:
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g*g,
///   theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps).
/// Throws NonFiniteGradient (state untouched) if any entry of g is NaN/Inf.
void adam_step(AdamState& state, std::span<double> theta, std::span<const double> gradient);

struct LbfgsConfig {
  std::size_t history_size = 50;
  /// Trial step for the line search; capped at 1/|g| on the first iteration.
  double step_scale = 10.0;
  double grad_tol = 1e-12;    // on max |g_i|
  double change_tol = 1e-12;  // on |f_{k+1} - f_k|
  std::size_t max_iterations = 2000;
  std::size_t max_backtracks = 40;
  double armijo_c1 = 1e-4;
  /// Upper bound on the per-backtrack contraction factor.
  double contraction = 0.5;
  /// Pairs with s'y <= curvature_eps |s| |y| are discarded.
  double curvature_eps = 1e-10;

  void validate() const;
};

/// Ring of the most recent (s, y) pairs, s = x_{k+1} - x_k and
/// y = g_{k+1} - g_k.
class LbfgsState {
 public:
  explicit LbfgsState(LbfgsConfig config = {}) : config_(config) {}

  /// Stores the pair unless it violates the curvature guard. Returns whether
  /// it was stored; the oldest pair is evicted once history_size is reached.
  bool push(std::vector<double> s, std::vector<double> y);
  void clear() { pairs_.clear(); }
  std::size_t size() const { return pairs_.size(); }
  const LbfgsConfig& config() const { return config_; }

  struct Pair {
    std::vector<double> s;
    std::vector<double> y;
    double rho = 0.0;  // 1 / (s'y)
  };
  /// Oldest first.
  const std::deque<Pair>& pairs() const { return pairs_; }

 private:
  LbfgsConfig config_;
  std::deque<Pair> pairs_;
};

/// Two-loop recursion: returns -H g where H is the inverse-Hessian estimate
/// built from the stored pairs on top of gamma I, gamma = s'y / y'y of the
/// newest pair. With no history the result is -g.
std::vector<double> lbfgs_direction(const LbfgsState& state, std::span<const double> gradient);

enum class TerminationReason {
  GradientTolerance,
  ChangeTolerance,
  LineSearchFailure,
  MaxIterations,
};

std::string to_string(TerminationReason r);

/// f(x) with the gradient written into g.
using LossAndGradient = std::function<double(std::span<const double> x, std::span<double> g)>;

struct LbfgsResult {
  std::vector<double> x;
  double f = 0.0;
  double initial_f = 0.0;
  double grad_inf = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  TerminationReason reason = TerminationReason::MaxIterations;
};

/// Called after every accepted iteration with (iteration, x, f).
using LbfgsObserver = std::function<void(std::size_t, std::span<const double>, double)>;

/// Minimizes f from x0 with L-BFGS directions and a backtracking Armijo line
/// search. Accepted iterates never increase f. Throws NonFiniteLoss when f or
/// g is not finite at x0.
LbfgsResult lbfgs_minimize(std::vector<double> x0, const LossAndGradient& fg,
                           const LbfgsConfig& config, const LbfgsObserver& observer = {});

}  // namespace efiln
