#include "betalink/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace betalink::optim {
namespace {

bool evaluate(const Objective& objective, const Vector& u, double& f, Vector& grad) {
  return objective(u, f, grad) && std::isfinite(f) && grad.allFinite();
}

Matrix scaled_identity(const Vector& grad) {
  const double norm = grad.norm();
  const double scale = norm > 1.0 ? 1.0 / norm : 1.0;
  return Matrix::Identity(grad.size(), grad.size()) * scale;
}

}  // namespace

BfgsResult minimize_bfgs(const Objective& objective, Vector u0, const StopRule& stop,
                         const InverseHessianGuess& guess, const BfgsOptions& options) {
  BfgsResult result;
  result.u = std::move(u0);
  if (!evaluate(objective, result.u, result.f, result.grad)) {
    result.message = "objective is not finite at the starting point";
    return result;
  }
  result.trace.push_back(result.f);

  Vector& u = result.u;
  double& f = result.f;
  Vector& g = result.grad;
  const Eigen::Index dim = u.size();

  auto reset = [&](Matrix& h) {
    if (!(guess && guess(u, h) && h.allFinite() && h.rows() == dim)) h = scaled_identity(g);
  };
  Matrix h;
  reset(h);
  bool fresh = true;

  if (stop(u, f, g)) {
    result.converged = true;
    return result;
  }

  Vector u_new(dim), g_new(dim);
  double f_new = 0.0;
  int stalled = 0;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    result.iterations = iter;
    Vector d = -h * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      if (!fresh) {
        reset(h);
        fresh = true;
        d = -h * g;
        slope = g.dot(d);
      }
      if (!(slope < 0.0)) {
        h = scaled_identity(g);
        d = -h * g;
        slope = g.dot(d);
      }
    }

    double alpha = 1.0;
    const double longest = d.lpNorm<Eigen::Infinity>();
    if (longest > options.max_step) alpha = options.max_step / longest;

    // Armijo, or — near the optimum, where f is flat to rounding — a step
    // that leaves f within the noise band and shrinks the gradient.
    const double noise = options.f_noise * (1.0 + std::fabs(f));
    const double g_inf = g.lpNorm<Eigen::Infinity>();
    bool accepted = false;
    for (int k = 0; k < options.max_backtracks; ++k) {
      u_new = u + alpha * d;
      if (evaluate(objective, u_new, f_new, g_new) &&
          (f_new <= f + options.armijo * alpha * slope ||
           (f_new <= f + noise && g_new.lpNorm<Eigen::Infinity>() < g_inf))) {
        accepted = true;
        break;
      }
      alpha *= options.backtrack;
    }

    if (!accepted) {
      if (fresh) {
        result.message = "line search could not find a decrease";
        return result;
      }
      reset(h);
      fresh = true;
      continue;
    }

    const Vector s = u_new - u;
    const Vector yv = g_new - g;
    const bool progressed = f_new < f - noise || g_new.lpNorm<Eigen::Infinity>() < 0.5 * g_inf;
    stalled = progressed ? 0 : stalled + 1;
    u = u_new;
    f = f_new;
    g = g_new;
    result.trace.push_back(f);
    fresh = false;

    if (stop(u, f, g)) {
      result.converged = true;
      return result;
    }
    if (stalled >= options.max_stalled) {
      result.message = "no progress beyond rounding level";
      return result;
    }

    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      const Vector hy = h * yv;
      const double yhy = yv.dot(hy);
      h += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) - (hy * s.transpose() + s * hy.transpose()) / sy;
    }
  }
  result.message = "iteration limit reached";
  return result;
}

int newton_polish(const Objective& objective, Vector& u, double& f, Vector& grad, int max_steps,
                  const StopRule& stop, double f_noise) {
  const Eigen::Index dim = u.size();
  int accepted_steps = 0;
  Vector up(dim), gp(dim), gm(dim);
  for (int step = 0; step < max_steps; ++step) {
    Matrix hess(dim, dim);
    double fp = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i) {
      const double h = 1e-5 * std::max(1.0, std::fabs(u[i]));
      up = u;
      up[i] += h;
      if (!evaluate(objective, up, fp, gp)) return accepted_steps;
      up[i] = u[i] - h;
      if (!evaluate(objective, up, fp, gm)) return accepted_steps;
      hess.col(i) = (gp - gm) / (2.0 * h);
    }
    hess = 0.5 * (hess + hess.transpose()).eval();
    // Modified Newton: eigenvalues reflected and floored so flat or
    // slightly indefinite directions (FD noise) still give a descent step.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(hess);
    if (eig.info() != Eigen::Success) return accepted_steps;
    const Vector& ev = eig.eigenvalues();
    const double floor = 1e-8 * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    const Vector inv = ev.cwiseAbs().cwiseMax(floor).cwiseInverse();
    const Vector d = -(eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose()) * grad;
    if (!d.allFinite()) return accepted_steps;

    const double g_inf = grad.lpNorm<Eigen::Infinity>();
    bool accepted = false;
    double t = 1.0;
    for (int k = 0; k < 6 && !accepted; ++k, t *= 0.5) {
      up = u + t * d;
      if (!evaluate(objective, up, fp, gp)) continue;
      if (fp <= f + f_noise * (1.0 + std::fabs(f)) && gp.lpNorm<Eigen::Infinity>() < g_inf) {
        u = up;
        f = fp;
        grad = gp;
        accepted = true;
      }
    }
    if (!accepted) return accepted_steps;
    ++accepted_steps;
    if (stop && stop(u, f, grad) && grad.lpNorm<Eigen::Infinity>() < 1e-10 * std::max(1.0, std::fabs(f))) {
      return accepted_steps;
    }
  }
  return accepted_steps;
}

}  // namespace betalink::optim
