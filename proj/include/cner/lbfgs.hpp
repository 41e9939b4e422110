#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <string>
#include <vector>

namespace cner {

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 200;
  /// Stop once (f_prev - f) / max(|f_prev|, |f|, 1) falls below this.
  double tolerance = 1e-5;
  double gradient_tolerance = 1e-10;
  int max_backtracks = 40;
  double armijo = 1e-4;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  /// Objective at the start point, then after each accepted step.
  std::vector<double> history;
  int iterations = 0;
  bool converged = false;
  std::string stop_reason;
};

/// Minimizes f, where f(x, grad) returns the objective and writes the gradient.
/// Every accepted step satisfies the Armijo condition, so the history is
/// non-increasing. A non-finite objective is handed to `on_nonfinite(iteration)`,
/// which is expected to throw. `on_step(iteration, objective)` sees the starting point as
/// iteration 0, then each accepted step.
template <typename Fn, typename OnNonFinite, typename OnStep>
LbfgsResult minimize_lbfgs(Fn&& f, Eigen::VectorXd x, const LbfgsOptions& opt, OnNonFinite&& on_nonfinite,
                           OnStep&& on_step) {
  LbfgsResult res;
  Eigen::VectorXd g(x.size());
  double fx = f(x, g);
  if (!std::isfinite(fx)) on_nonfinite(0);
  res.history.push_back(fx);
  on_step(0, fx);

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  Eigen::VectorXd x_new(x.size()), g_new(x.size());

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    if (g.norm() <= opt.gradient_tolerance * std::max(1.0, x.norm())) {
      res.converged = true;
      res.stop_reason = "gradient norm below tolerance";
      break;
    }

    // Two-loop recursion.
    Eigen::VectorXd d = -g;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t i = s_hist.size(); i-- > 0;) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(d);
      d -= alpha[i] * y_hist[i];
    }
    if (!s_hist.empty()) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      double beta = rho_hist[i] * y_hist[i].dot(d);
      d += (alpha[i] - beta) * s_hist[i];
    }
    double slope = g.dot(d);
    if (!(slope < 0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      slope = -g.squaredNorm();
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / g.norm()) : 1.0;
    bool accepted = false;
    double f_new = fx;
    for (int k = 0; k < opt.max_backtracks; ++k) {
      x_new = x + step * d;
      f_new = f(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + opt.armijo * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!std::isfinite(f_new)) on_nonfinite(iter);
      res.stop_reason = "line search failed";
      break;
    }

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }

    const double relative = (fx - f_new) / std::max({std::abs(fx), std::abs(f_new), 1.0});
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
    res.history.push_back(fx);
    res.iterations = iter;
    on_step(iter, fx);
    if (relative < opt.tolerance) {
      res.converged = true;
      res.stop_reason = "relative objective change below tolerance";
      break;
    }
  }
  if (res.stop_reason.empty()) res.stop_reason = "maximum iterations reached";
  res.x = std::move(x);
  return res;
}

}  // namespace cner
