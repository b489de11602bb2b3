#pragma once

// Small dense BFGS with backtracking line search, shared by the circuit
// optimizer, Gibbs fitting, staircase fidelity maximization and the spectral
// learning outer loop. Gradients are analytic when supplied, otherwise
// central finite differences.

#include <functional>

#include "iqs/common.hpp"

namespace iqs::optim {

using Objective = std::function<double(const VectorXd&)>;
using Gradient = std::function<VectorXd(const VectorXd&)>;

struct BfgsOptions {
  int max_iters = 200;
  double grad_tol = 1e-8;
  double step_tol = 1e-11;
  double fd_step = 1e-5;
  double initial_step = 1.0;
};

struct BfgsResult {
  VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

inline VectorXd finite_difference_gradient(const Objective& f, const VectorXd& x, double h) {
  VectorXd g(x.size());
  VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double orig = xp[i];
    xp[i] = orig + h;
    const double fp = f(xp);
    xp[i] = orig - h;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline BfgsResult bfgs_minimize(const Objective& f, const Gradient& grad_in, VectorXd x0,
                                const BfgsOptions& opts = {}) {
  const Eigen::Index n = x0.size();
  Gradient grad = grad_in;
  if (!grad)
    grad = [&f, &opts](const VectorXd& x) {
      return finite_difference_gradient(f, x, opts.fd_step);
    };

  BfgsResult res;
  res.x = std::move(x0);
  res.value = f(res.x);
  if (n == 0) {
    res.converged = true;
    return res;
  }
  MatrixXd h_inv = MatrixXd::Identity(n, n);
  VectorXd g = grad(res.x);

  for (int it = 0; it < opts.max_iters; ++it) {
    res.iterations = it;
    if (g.norm() <= opts.grad_tol) {
      res.converged = true;
      return res;
    }
    VectorXd p = -(h_inv * g);
    if (p.dot(g) >= 0.0) {  // reset on loss of descent
      h_inv.setIdentity();
      p = -g;
    }
    double alpha = opts.initial_step;
    const double slope = g.dot(p);
    double f_new = res.value;
    VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      x_new = res.x + alpha * p;
      f_new = f(x_new);
      if (f_new <= res.value + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted || (res.x - x_new).norm() <= opts.step_tol) {
      res.converged = g.norm() <= 1e2 * opts.grad_tol || !accepted;
      res.x = accepted ? x_new : res.x;
      res.value = accepted ? f_new : res.value;
      return res;
    }
    VectorXd g_new = grad(x_new);
    VectorXd s = x_new - res.x;
    VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      MatrixXd left = MatrixXd::Identity(n, n) - rho * s * y.transpose();
      h_inv = left * h_inv * left.transpose() + rho * s * s.transpose();
    }
    res.x = x_new;
    res.value = f_new;
    g = g_new;
  }
  res.iterations = opts.max_iters;
  res.converged = g.norm() <= opts.grad_tol;
  return res;
}

}  // namespace iqs::optim
