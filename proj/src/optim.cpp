#include "efiln/optim.hpp"

#include <algorithm>
#include <cmath>

#include "efiln/errors.hpp"

namespace efiln {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double norm_inf(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

bool all_finite(std::span<const double> a) {
  return std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); });
}

}  // namespace

// ---------------------------------------------------------------- Adam

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("adam learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ConfigError("adam decay rates must lie in [0, 1)");
  if (!(epsilon >= 0.0)) throw ConfigError("adam epsilon must be non-negative");
}

AdamState::AdamState(std::size_t n, AdamConfig cfg)
    : config(cfg), first_moment(n, 0.0), second_moment(n, 0.0) {
  config.validate();
}

void adam_step(AdamState& state, std::span<double> theta, std::span<const double> gradient) {
  const std::size_t n = theta.size();
  if (gradient.size() != n || state.first_moment.size() != n || state.second_moment.size() != n)
    throw ShapeMismatch("adam state, parameters and gradient must have the same length");
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(gradient[i]))
      throw NonFiniteGradient("non-finite gradient entry at index " + std::to_string(i));

  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < n; ++i) {
    const double g = gradient[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    const double denom = std::sqrt(v_hat) + c.epsilon;
    // With epsilon = 0 and a zero gradient history the step is 0/0; treat as no move.
    if (denom > 0.0) theta[i] -= c.learning_rate * m_hat / denom;
  }
}

// ---------------------------------------------------------------- L-BFGS

void LbfgsConfig::validate() const {
  if (history_size == 0) throw ConfigError("lbfgs history size must be positive");
  if (!(step_scale > 0.0)) throw ConfigError("lbfgs step scale must be positive");
  if (!(grad_tol >= 0.0) || !(change_tol >= 0.0)) throw ConfigError("lbfgs tolerances must be >= 0");
  if (!(armijo_c1 > 0.0 && armijo_c1 < 1.0)) throw ConfigError("armijo constant must lie in (0, 1)");
  if (!(contraction > 0.1 && contraction < 1.0))
    throw ConfigError("lbfgs contraction must lie in (0.1, 1)");
}

bool LbfgsState::push(std::vector<double> s, std::vector<double> y) {
  if (s.size() != y.size()) throw ShapeMismatch("lbfgs pair vectors differ in length");
  const double sy = dot(s, y);
  if (!std::isfinite(sy) || sy <= config_.curvature_eps * norm2(s) * norm2(y)) return false;
  if (pairs_.size() == config_.history_size) pairs_.pop_front();
  pairs_.push_back({std::move(s), std::move(y), 1.0 / sy});
  return true;
}

std::vector<double> lbfgs_direction(const LbfgsState& state, std::span<const double> gradient) {
  std::vector<double> q(gradient.begin(), gradient.end());
  const auto& pairs = state.pairs();
  for (const auto& p : pairs)
    if (p.s.size() != q.size()) throw ShapeMismatch("lbfgs history does not match gradient length");

  std::vector<double> alpha(pairs.size());
  for (std::size_t k = pairs.size(); k-- > 0;) {
    const auto& p = pairs[k];
    alpha[k] = p.rho * dot(p.s, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * p.y[i];
  }
  if (!pairs.empty()) {
    const auto& newest = pairs.back();
    const double gamma = 1.0 / (newest.rho * dot(newest.y, newest.y));
    for (double& v : q) v *= gamma;
  }
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& p = pairs[k];
    const double beta = p.rho * dot(p.y, q);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += p.s[i] * (alpha[k] - beta);
  }
  for (double& v : q) v = -v;
  return q;
}

std::string to_string(TerminationReason r) {
  switch (r) {
    case TerminationReason::GradientTolerance: return "gradient_tolerance";
    case TerminationReason::ChangeTolerance: return "change_tolerance";
    case TerminationReason::LineSearchFailure: return "line_search_failure";
    case TerminationReason::MaxIterations: return "max_iterations";
  }
  return "unknown";
}

LbfgsResult lbfgs_minimize(std::vector<double> x0, const LossAndGradient& fg,
                           const LbfgsConfig& config, const LbfgsObserver& observer) {
  config.validate();
  const std::size_t n = x0.size();
  LbfgsResult res;
  res.x = std::move(x0);
  std::vector<double> g(n);
  double f = fg(res.x, g);
  res.evaluations = 1;
  if (!std::isfinite(f) || !all_finite(g))
    throw NonFiniteLoss("loss or gradient is not finite at the starting point");
  res.initial_f = f;
  res.f = f;
  res.grad_inf = norm_inf(g);
  if (res.grad_inf <= config.grad_tol) {
    res.reason = TerminationReason::GradientTolerance;
    return res;
  }

  LbfgsState state(config);
  std::vector<double> x_trial(n);
  std::vector<double> g_trial(n);
  res.reason = TerminationReason::MaxIterations;

  for (std::size_t iter = 0; iter < config.max_iterations; ++iter) {
    auto d = lbfgs_direction(state, g);
    double dg = dot(d, g);
    if (!(dg < 0.0)) {
      // Lost descent; restart from steepest descent.
      state.clear();
      for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
      dg = -dot(g, g);
    }

    double t = iter == 0 ? std::min(config.step_scale, 1.0 / norm2(g)) : config.step_scale;
    bool accepted = false;
    double f_trial = 0.0;
    for (std::size_t bt = 0; bt <= config.max_backtracks; ++bt) {
      for (std::size_t i = 0; i < n; ++i) x_trial[i] = res.x[i] + t * d[i];
      f_trial = fg(x_trial, g_trial);
      ++res.evaluations;
      const bool finite = std::isfinite(f_trial) && all_finite(g_trial);
      if (finite && f_trial <= f + config.armijo_c1 * t * dg) {
        accepted = true;
        break;
      }
      // Minimizer of the quadratic through f(0), f'(0) and f(t), kept inside
      // [0.1 t, contraction * t].
      double next = config.contraction * t;
      if (finite) {
        const double denom = 2.0 * (f_trial - f - dg * t);
        if (denom > 0.0) {
          const double q = -dg * t * t / denom;
          if (std::isfinite(q)) next = std::clamp(q, 0.1 * t, config.contraction * t);
        }
      }
      t = next;
    }
    if (!accepted) {
      res.reason = TerminationReason::LineSearchFailure;
      break;
    }

    std::vector<double> s(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_trial[i] - res.x[i];
      y[i] = g_trial[i] - g[i];
    }
    state.push(std::move(s), std::move(y));
    const double change = std::abs(f_trial - f);
    res.x.swap(x_trial);
    g.swap(g_trial);
    f = f_trial;
    res.f = f;
    res.grad_inf = norm_inf(g);
    res.iterations = iter + 1;
    if (observer) observer(res.iterations, res.x, f);

    if (res.grad_inf <= config.grad_tol) {
      res.reason = TerminationReason::GradientTolerance;
      break;
    }
    if (change <= config.change_tol) {
      res.reason = TerminationReason::ChangeTolerance;
      break;
    }
  }
  return res;
}

}  // namespace efiln
