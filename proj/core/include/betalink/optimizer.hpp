#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

namespace betalink::optim {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Evaluates f(u) and ∇f(u). Returns false when u is outside the domain;
/// the line search then treats f(u) as +∞ and shortens the step.
using Objective = std::function<bool(const Vector& u, double& f, Vector& grad)>;

/// Convergence test on an accepted iterate.
using StopRule = std::function<bool(const Vector& u, double f, const Vector& grad)>;

/// Curvature model used when the quasi-Newton matrix must be rebuilt.
using InverseHessianGuess = std::function<bool(const Vector& u, Matrix& inv_hessian)>;

struct BfgsOptions {
  int max_iterations = 500;
  double armijo = 1e-4;
  double backtrack = 0.5;
  int max_backtracks = 60;
  double max_step = 10.0;  ///< cap on the ∞-norm of a trial step
  /// Relative size of rounding noise in f; steps within it are accepted
  /// when they shrink the gradient.
  double f_noise = 1e-10;
  /// Consecutive accepted steps without real progress before giving up.
  int max_stalled = 5;
};

struct BfgsResult {
  Vector u;
  double f = 0.0;
  Vector grad;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  ///< objective at every accepted iterate, starting point first
  std::string message;
};

/// Minimizes f by BFGS on the inverse Hessian with backtracking Armijo line
/// search. `guess` seeds the inverse Hessian at the start and after a failed
/// line search; when it declines, a scaled identity is used.
BfgsResult minimize_bfgs(const Objective& objective, Vector u0, const StopRule& stop,
                         const InverseHessianGuess& guess, const BfgsOptions& options = {});

/// Newton refinement with a central-difference Hessian of the analytic
/// gradient. Steps are accepted only if f does not rise beyond the noise
/// band and the largest gradient entry shrinks. Returns the number of
/// accepted steps.
int newton_polish(const Objective& objective, Vector& u, double& f, Vector& grad, int max_steps,
                  const StopRule& stop, double f_noise = 1e-10);

}  // namespace betalink::optim
