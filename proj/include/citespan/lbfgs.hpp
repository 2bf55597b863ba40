#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (bracket + zoom).
// Self-contained so training is bit-reproducible across platforms; the
// objective callback returns the value and fills the gradient.

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace citespan {

using Objective =
    std::function<double(const std::vector<double>&, std::vector<double>&)>;

struct LbfgsOptions {
  int history = 10;
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;
  double c1 = 1e-4;  // sufficient decrease
  double c2 = 0.9;   // curvature
  int max_line_search_steps = 50;
};

struct LbfgsResult {
  std::vector<double> x;
  double value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace detail

inline LbfgsResult lbfgs_minimize(const Objective& objective,
                                  std::vector<double> x0,
                                  const LbfgsOptions& options = {}) {
  const std::size_t n = x0.size();
  LbfgsResult result;
  result.x = std::move(x0);

  std::vector<double> grad(n, 0.0);
  double value = objective(result.x, grad);
  ++result.evaluations;
  if (!std::isfinite(value))
    throw std::runtime_error("optimizer: objective is not finite at the start");

  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;

  std::vector<double> direction(n), x_trial(n), grad_trial(n);

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter;
    result.value = value;
    result.gradient_norm = detail::norm(grad);
    if (result.gradient_norm <= options.gradient_tolerance) {
      result.converged = true;
      return result;
    }

    // Two-loop recursion: direction = -H grad.
    direction = grad;
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * detail::dot(s_hist[k], direction);
      for (std::size_t i = 0; i < n; ++i)
        direction[i] -= alpha[k] * y_hist[k][i];
    }
    if (!s_hist.empty()) {
      double gamma = detail::dot(s_hist.back(), y_hist.back()) /
                     detail::dot(y_hist.back(), y_hist.back());
      for (auto& d : direction) d *= gamma;
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      double beta = rho_hist[k] * detail::dot(y_hist[k], direction);
      for (std::size_t i = 0; i < n; ++i)
        direction[i] += (alpha[k] - beta) * s_hist[k][i];
    }
    for (auto& d : direction) d = -d;

    double dg0 = detail::dot(grad, direction);
    if (dg0 >= 0.0) {
      // Not a descent direction (numerical breakdown): restart from the
      // steepest descent direction.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i];
      dg0 = -detail::dot(grad, grad);
      if (dg0 == 0.0) {
        result.converged = true;
        return result;
      }
    }

    // Strong-Wolfe line search along `direction`.
    auto eval_at = [&](double step) {
      for (std::size_t i = 0; i < n; ++i)
        x_trial[i] = result.x[i] + step * direction[i];
      double v = objective(x_trial, grad_trial);
      ++result.evaluations;
      return v;
    };

    const double phi0 = value;
    double step = 1.0;
    double prev_step = 0.0;
    double prev_phi = phi0;
    double accepted_step = -1.0;
    double phi = 0.0;

    auto wolfe_ok = [&](double v, double dg) {
      return v <= phi0 + options.c1 * step * dg0 &&
             std::fabs(dg) <= options.c2 * std::fabs(dg0);
    };

    double lo = 0.0, hi = 0.0, phi_lo = phi0;
    bool bracketed = false;

    for (int ls = 0; ls < options.max_line_search_steps; ++ls) {
      phi = eval_at(step);
      double dg = detail::dot(grad_trial, direction);
      if (!std::isfinite(phi)) {
        step = 0.5 * (prev_step + step);
        continue;
      }
      if (phi > phi0 + options.c1 * step * dg0 || (ls > 0 && phi >= prev_phi)) {
        lo = prev_step;
        hi = step;
        phi_lo = prev_phi;
        bracketed = true;
        break;
      }
      if (wolfe_ok(phi, dg)) {
        accepted_step = step;
        break;
      }
      if (dg >= 0.0) {
        lo = step;
        hi = prev_step;
        phi_lo = phi;
        bracketed = true;
        break;
      }
      prev_step = step;
      prev_phi = phi;
      step *= 2.0;
    }

    if (accepted_step < 0.0 && bracketed) {
      for (int z = 0; z < options.max_line_search_steps; ++z) {
        step = 0.5 * (lo + hi);
        phi = eval_at(step);
        double dg = detail::dot(grad_trial, direction);
        if (!std::isfinite(phi) ||
            phi > phi0 + options.c1 * step * dg0 || phi >= phi_lo) {
          hi = step;
          continue;
        }
        if (wolfe_ok(phi, dg)) {
          accepted_step = step;
          break;
        }
        if (dg * (hi - lo) >= 0.0) hi = lo;
        lo = step;
        phi_lo = phi;
      }
      if (accepted_step < 0.0 && phi_lo < phi0) {
        // Zoom exhausted without the curvature condition; take the best
        // sufficient-decrease point seen.
        accepted_step = lo;
        phi = eval_at(accepted_step);
      }
    }

    if (accepted_step <= 0.0) {
      // Line search failed to improve: treat the current point as final.
      return result;
    }

    // Accept the step; x_trial/grad_trial hold the last evaluation, which
    // was at accepted_step in every acceptance path.
    std::vector<double> s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = x_trial[i] - result.x[i];
      y[i] = grad_trial[i] - grad[i];
    }
    double sy = detail::dot(s, y);
    result.x = x_trial;
    grad = grad_trial;
    value = phi;
    if (sy > 1e-12) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > options.history) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
  }

  result.iterations = options.max_iterations;
  result.value = value;
  result.gradient_norm = detail::norm(grad);
  result.converged = result.gradient_norm <= options.gradient_tolerance;
  return result;
}

}  // namespace citespan
