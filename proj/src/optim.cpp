#include "vacstrat/optim.hpp"

#include <cmath>
#include <limits>

namespace vacstrat::optim {

Eigen::VectorXd forward_gradient(const Objective& f, const Eigen::VectorXd& x, double fx, double step,
                                 int* evaluations) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xh = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * std::max(1.0, std::fabs(x[i]));
    xh[i] = x[i] + h;
    double fh = f(xh);
    if (!std::isfinite(fh)) {
      xh[i] = x[i] - h;
      fh = -(f(xh) - fx) + fx;
      if (evaluations) ++*evaluations;
    }
    g[i] = (fh - fx) / h;
    xh[i] = x[i];
    if (evaluations) ++*evaluations;
  }
  return g;
}

BfgsResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options) {
  BfgsResult res;
  const Eigen::Index n = x0.size();
  res.x = std::move(x0);
  res.value = f(res.x);
  res.evaluations = 1;
  if (!std::isfinite(res.value)) {
    res.message = "objective not finite at the starting point";
    return res;
  }
  if (n == 0) {
    res.converged = true;
    res.message = "no free parameters";
    return res;
  }

  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd g = forward_gradient(f, res.x, res.value, options.fd_step, &res.evaluations);
  int small_steps = 0;
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      return res;
    }
    Eigen::VectorXd dir = -inv_h * g;
    double slope = g.dot(dir);
    if (!(slope < 0)) {
      inv_h.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    // Keep the first trial step bounded in parameter space.
    double step = std::min(1.0, 1.0 / std::max(1e-12, dir.lpNorm<Eigen::Infinity>()));
    Eigen::VectorXd x_new;
    double f_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int k = 0; k < 40; ++k) {
      x_new = res.x + step * dir;
      f_new = f(x_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // Steepest descent has nowhere to go at this resolution: treat as a
      // stationary point if the gradient is already small.
      res.converged = g.lpNorm<Eigen::Infinity>() < 1e3 * options.gradient_tolerance;
      res.message = res.converged ? "line search stalled near a stationary point" : "line search failed";
      return res;
    }
    const Eigen::VectorXd g_new = forward_gradient(f, x_new, f_new, options.fd_step, &res.evaluations);
    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double decrease = res.value - f_new;
    res.x = x_new;
    g = g_new;
    const double prev = res.value;
    res.value = f_new;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
      inv_h = (I - rho * s * y.transpose()) * inv_h * (I - rho * y * s.transpose()) + rho * s * s.transpose();
    }
    if (decrease <= options.relative_tolerance * (std::fabs(prev) + options.relative_tolerance)) {
      if (++small_steps >= 3) {
        res.converged = true;
        res.message = "relative tolerance reached";
        return res;
      }
    } else {
      small_steps = 0;
    }
  }
  res.message = "iteration limit reached";
  return res;
}

Eigen::MatrixXd numeric_hessian(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& steps) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd h(n, n);
  const double f0 = f(x);
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hi = steps[i];
    xp[i] = x[i] + hi;
    const double fp = f(xp);
    xp[i] = x[i] - hi;
    const double fm = f(xp);
    xp[i] = x[i];
    h(i, i) = (fp - 2.0 * f0 + fm) / (hi * hi);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double hj = steps[j];
      auto eval = [&](double si, double sj) {
        xp[i] = x[i] + si * hi;
        xp[j] = x[j] + sj * hj;
        const double v = f(xp);
        xp[i] = x[i];
        xp[j] = x[j];
        return v;
      };
      const double v = (eval(1, 1) - eval(1, -1) - eval(-1, 1) + eval(-1, -1)) / (4.0 * hi * hj);
      h(i, j) = v;
      h(j, i) = v;
    }
  }
  return h;
}

}  // namespace vacstrat::optim
