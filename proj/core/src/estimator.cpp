#include "betalink/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "betalink/optimizer.hpp"

namespace betalink {
namespace {

constexpr double kSqueezeLow = 0.005;
constexpr double kSqueezeHigh = 0.995;
constexpr double kMaxStartDispersion = 0.9;

double default_lambda(LinkFamily family) {
  return family.kind() == LinkKind::AoSymmetric ? 0.5 : 1.0;
}

double start_lambda(LinkFamily family, LambdaMode mode, const LambdaStart& start) {
  if (!family.has_shape_parameter() || !mode.free) return mode.value;
  if (start.kind == LambdaStart::Kind::Explicit) return start.value;
  return default_lambda(family);
}

const std::vector<double>& grid_for(LinkFamily family, const FitOptions& options) {
  return family.kind() == LinkKind::AoSymmetric ? options.symmetric_grid : options.asymmetric_grid;
}

bool is_restricted(const Restriction& restriction, Index i) {
  return std::find(restriction.indices.begin(), restriction.indices.end(), i) != restriction.indices.end();
}

void validate_restriction(const ModelSpec& spec, const Restriction& restriction) {
  if (restriction.indices.size() != restriction.values.size()) {
    throw InputError("restriction has mismatched index and value counts");
  }
  for (std::size_t k = 0; k < restriction.indices.size(); ++k) {
    const Index i = restriction.indices[k];
    if (i < 0 || i >= spec.num_params()) throw InputError("restricted parameter index out of range");
    for (std::size_t j = 0; j < k; ++j) {
      if (restriction.indices[j] == i) throw InputError("restriction lists a parameter twice");
    }
  }
}

// Optimizer coordinates: the unrestricted entries of flat θ, with λ of an
// asymmetric link on the log scale.
class Reparameterization {
 public:
  Reparameterization(const ModelSpec& spec, const Restriction& restriction, Vector base)
      : spec_(spec), base_(std::move(base)) {
    for (std::size_t k = 0; k < restriction.indices.size(); ++k) {
      base_[restriction.indices[k]] = restriction.values[k];
    }
    for (Index i = 0; i < spec.num_params(); ++i) {
      if (is_restricted(restriction, i)) continue;
      free_.push_back(i);
      log_scale_.push_back(is_log_lambda(i));
    }
  }

  [[nodiscard]] Index dim() const { return static_cast<Index>(free_.size()); }

  [[nodiscard]] Vector to_u(const Vector& flat) const {
    Vector u(dim());
    for (Index k = 0; k < dim(); ++k) {
      const double v = flat[free_[k]];
      u[k] = log_scale_[k] ? std::log(v) : v;
    }
    return u;
  }

  [[nodiscard]] Vector to_flat(const Vector& u) const {
    Vector flat = base_;
    for (Index k = 0; k < dim(); ++k) flat[free_[k]] = log_scale_[k] ? std::exp(u[k]) : u[k];
    return flat;
  }

  /// dθ_free/du at u.
  [[nodiscard]] Vector jacobian(const Vector& u) const {
    Vector j(dim());
    for (Index k = 0; k < dim(); ++k) j[k] = log_scale_[k] ? std::exp(u[k]) : 1.0;
    return j;
  }

  [[nodiscard]] Vector free_part(const Vector& full) const {
    Vector out(dim());
    for (Index k = 0; k < dim(); ++k) out[k] = full[free_[k]];
    return out;
  }

  [[nodiscard]] Matrix free_block(const Matrix& full) const {
    Matrix out(dim(), dim());
    for (Index a = 0; a < dim(); ++a)
      for (Index b = 0; b < dim(); ++b) out(a, b) = full(free_[a], free_[b]);
    return out;
  }

 private:
  bool is_log_lambda(Index i) const {
    if (spec_.lambda1_free() && i == spec_.lambda1_index())
      return spec_.mean_link().kind() == LinkKind::AoAsymmetric;
    if (spec_.lambda2_free() && i == spec_.lambda2_index())
      return spec_.disp_link().kind() == LinkKind::AoAsymmetric;
    return false;
  }

  const ModelSpec& spec_;
  Vector base_;
  std::vector<Index> free_;
  std::vector<bool> log_scale_;
};

struct Attempt {
  bool started = false;
  bool converged = false;
  Vector flat;
  double loglik = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  std::vector<double> trace;
  StartRecord start;
};

Attempt run_attempt(const ModelSpec& spec, const ResponseVector& y, const FitOptions& options,
                    const Restriction& restriction, const ParamVector& theta0, StartRecord record) {
  Attempt attempt;
  attempt.start = record;
  const Reparameterization map(spec, restriction, theta0.pack(spec));
  const double tol = options.gradient_tolerance * static_cast<double>(std::max<Index>(1, spec.n()));

  // Natural-scale free score, cached from the last objective evaluation.
  Vector flat_grad;
  const optim::Objective objective = [&](const Vector& u, double& f, Vector& g) {
    const Vector flat = map.to_flat(u);
    double ll = 0.0;
    if (!log_likelihood_and_score(spec, ParamVector::unpack(spec, flat), y, ll, flat_grad)) return false;
    const Vector jac = map.jacobian(u);
    g = -map.free_part(flat_grad).cwiseProduct(jac);
    f = -ll;
    return true;
  };
  // Measured on the optimizer's scale: for a log-scale λ the entry is
  // λ·∂ℓ/∂λ, which vanishes both at interior optima and as λ̂ drifts to the
  // boundary of a flat profile.
  const optim::StopRule stop = [&](const Vector&, double, const Vector& g) {
    return g.lpNorm<Eigen::Infinity>() <= tol;
  };
  const optim::InverseHessianGuess guess = [&](const Vector& u, Matrix& inv) {
    try {
      const Vector jac = map.jacobian(u);
      const Matrix k = map.free_block(fisher_information(spec, ParamVector::unpack(spec, map.to_flat(u))));
      const Matrix ku = jac.asDiagonal() * k * jac.asDiagonal();
      Eigen::LDLT<Matrix> ldlt(ku);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || (ldlt.vectorD().array() <= 0.0).any())
        return false;
      inv = ldlt.solve(Matrix::Identity(ku.rows(), ku.cols()));
      return inv.allFinite();
    } catch (const Error&) {
      return false;
    }
  };

  optim::BfgsOptions bfgs;
  bfgs.max_iterations = options.max_iterations;
  optim::BfgsResult res = optim::minimize_bfgs(objective, map.to_u(theta0.pack(spec)), stop, guess, bfgs);
  if (res.trace.empty()) return attempt;
  attempt.started = true;

  if (options.polish_steps > 0) {
    const int steps = optim::newton_polish(objective, res.u, res.f, res.grad, options.polish_steps, stop);
    if (steps > 0) res.trace.push_back(res.f);
  }
  attempt.converged = stop(res.u, res.f, res.grad);
  attempt.flat = map.to_flat(res.u);
  attempt.loglik = -res.f;
  attempt.iterations = res.iterations;
  attempt.trace.reserve(res.trace.size());
  for (double f : res.trace) attempt.trace.push_back(-f);
  return attempt;
}

FittedModel assemble(const ModelSpec& spec, const ResponseVector& y, const Attempt& best,
                     const Restriction& restriction) {
  const ParamVector theta = ParamVector::unpack(spec, best.flat);
  FittedModel out{spec, theta};
  double ll = 0.0;
  log_likelihood_and_score(spec, theta, y, ll, out.score);
  out.loglik = ll;
  out.fisher = fisher_information(spec, theta);
  out.cov = invert_information(out.fisher, out.singular_fisher);
  out.surfaces = surfaces(spec, theta);
  out.converged = best.converged;
  out.iterations = best.iterations;
  out.start_used = best.start;
  out.restriction = restriction;
  out.trace = best.trace;
  return out;
}

// Pulls the LS start toward the intercept-only solution until every
// observation is inside the link domains.
ParamVector make_admissible(const ModelSpec& spec, const ResponseVector& y, ParamVector theta,
                            const Vector& beta_flat) {
  if (std::isfinite(log_likelihood(spec, theta, y))) return theta;
  const Vector beta_ls = theta.beta;
  for (int m = 1; m <= 40; ++m) {
    theta.beta = beta_flat + std::ldexp(1.0, -m) * (beta_ls - beta_flat);
    if (std::isfinite(log_likelihood(spec, theta, y))) return theta;
  }
  theta.beta = beta_flat;
  return theta;
}

}  // namespace

Matrix invert_information(const Matrix& k, bool& singular) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(k);
  singular = false;
  if (eig.info() != Eigen::Success) {
    singular = true;
    return Matrix::Constant(k.rows(), k.cols(), std::numeric_limits<double>::quiet_NaN());
  }
  const Vector& values = eig.eigenvalues();
  const double largest = values.cwiseAbs().maxCoeff();
  const double cutoff = largest * 1e-13;
  Vector inv(values.size());
  for (Index i = 0; i < values.size(); ++i) {
    if (values[i] > cutoff) {
      inv[i] = 1.0 / values[i];
    } else {
      inv[i] = 0.0;
      singular = true;
    }
  }
  Matrix cov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  return 0.5 * (cov + cov.transpose());
}

ParamVector initial_values(const ModelSpec& spec, const ResponseVector& y, const FitOptions& options) {
  if (y.size() != spec.n()) throw InputError("response length does not match the design");
  const Index n = spec.n();
  ParamVector theta;
  theta.lambda1 = start_lambda(spec.mean_link(), spec.lambda1_mode(), options.lambda1_start);
  theta.lambda2 = start_lambda(spec.disp_link(), spec.lambda2_mode(), options.lambda2_start);

  Vector target(n);
  for (Index t = 0; t < n; ++t) {
    const double squeezed = std::clamp(y[t], kSqueezeLow, kSqueezeHigh);
    target[t] = link_eval(spec.mean_link(), squeezed, theta.lambda1);
  }
  const Eigen::ColPivHouseholderQR<Matrix> qr(spec.x());
  if (qr.rank() < spec.r()) throw InputError("mean design matrix X is rank deficient");
  theta.beta = qr.solve(target);

  const double ybar = y.values().mean();
  const double var = (y.values().array() - ybar).square().sum() / static_cast<double>(std::max<Index>(1, n - 1));
  double dispersion = std::sqrt(var / (ybar * (1.0 - ybar)));
  dispersion = std::min(kMaxStartDispersion, std::max(dispersion, 1e-3));
  theta.gamma = Vector::Zero(spec.s());
  theta.gamma[0] = link_eval(spec.disp_link(), dispersion, theta.lambda2);

  const double mean_eta = link_eval(spec.mean_link(), std::clamp(ybar, kSqueezeLow, kSqueezeHigh), theta.lambda1);
  const Vector beta_flat = qr.solve(Vector::Constant(n, mean_eta));
  return make_admissible(spec, y, std::move(theta), beta_flat);
}

FittedModel fit(const ModelSpec& spec, const ResponseVector& y, const FitOptions& options,
                const Restriction& restriction) {
  if (y.size() != spec.n()) throw InputError("response length does not match the design");
  if (spec.n() <= spec.num_params()) {
    throw InputError("need more observations than parameters (n = " + std::to_string(spec.n()) +
                     ", q = " + std::to_string(spec.num_params()) + ")");
  }
  validate_restriction(spec, restriction);

  const bool grid_only = options.lambda1_start.kind == LambdaStart::Kind::Grid ||
                         options.lambda2_start.kind == LambdaStart::Kind::Grid;
  Attempt best;
  auto consider = [&](Attempt&& a) {
    if (!a.started) return;
    const bool better = (a.converged && !best.converged) ||
                        (a.converged == best.converged && a.loglik > best.loglik);
    if (better || !best.started) best = std::move(a);
  };

  if (!grid_only) {
    const ParamVector theta0 = options.start ? *options.start : initial_values(spec, y, options);
    consider(run_attempt(spec, y, options, restriction, theta0, {theta0.lambda1, theta0.lambda2, 0}));
    if (best.converged) return assemble(spec, y, best, restriction);
  }

  if (options.multistart || grid_only) {
    auto candidates = [&](bool free, Index index, LinkFamily family, double current) {
      if (!free) return std::vector<double>{current};
      for (std::size_t k = 0; k < restriction.indices.size(); ++k) {
        if (restriction.indices[k] == index) return std::vector<double>{restriction.values[k]};
      }
      return grid_for(family, options);
    };
    const auto l1 = candidates(spec.lambda1_free(), spec.lambda1_index(), spec.mean_link(),
                               spec.lambda1_mode().value);
    const auto l2 = candidates(spec.lambda2_free(), spec.lambda2_index(), spec.disp_link(),
                               spec.lambda2_mode().value);
    int cell = 0;
    for (double a : l1) {
      for (double b : l2) {
        ++cell;
        FitOptions cell_options = options;
        cell_options.lambda1_start = LambdaStart::explicit_value(a);
        cell_options.lambda2_start = LambdaStart::explicit_value(b);
        try {
          const ParamVector theta0 = initial_values(spec, y, cell_options);
          consider(run_attempt(spec, y, cell_options, restriction, theta0, {a, b, cell}));
        } catch (const DomainError&) {
          // the grid value is not admissible for this family
        }
      }
    }
  }

  if (!best.converged) {
    std::string what = "no admissible starting point found";
    if (best.started) {
      what = "no starting point reached the gradient criterion (best log-likelihood " + std::to_string(best.loglik) +
             ")";
      // A dispersion link with a bounded domain lets one σ_t reach 0 at finite
      // parameters; the likelihood then grows without bound along that path.
      const auto sf = try_surfaces(spec, ParamVector::unpack(spec, best.flat));
      if (sf && sf->sigma.minCoeff() <= 10.0 * kMinDispersion) {
        what += "; an observation's dispersion collapsed to the admissible floor, where the likelihood is unbounded";
      }
    }
    throw FitConvergenceError(what, best.trace, best.loglik, best.flat);
  }
  return assemble(spec, y, best, restriction);
}

FittedModel evaluate_model(const ModelSpec& spec, const ResponseVector& y, const ParamVector& theta,
                           bool converged) {
  if (y.size() != spec.n()) throw InputError("response length does not match the design");
  if (theta.beta.size() != spec.r() || theta.gamma.size() != spec.s())
    throw InputError("parameter vector does not match the design");
  const double ll = log_likelihood(spec, theta, y);
  if (!std::isfinite(ll)) throw DomainError("parameters put an observation outside a link domain");
  Attempt a;
  a.started = true;
  a.converged = converged;
  a.flat = theta.pack(spec);
  a.loglik = ll;
  a.start = {theta.lambda1, theta.lambda2, 0};
  a.trace = {ll};
  return assemble(spec, y, a, {});
}

std::vector<ProfileCell> profile_lambda(const ModelSpec& spec, const ResponseVector& y,
                                        const FitOptions& options,
                                        const std::vector<double>& lambda1_grid,
                                        const std::vector<double>& lambda2_grid) {
  std::vector<ProfileCell> cells;
  for (double a : lambda1_grid) {
    for (double b : lambda2_grid) {
      ProfileCell cell{a, b, -std::numeric_limits<double>::infinity(), false};
      try {
        const ModelSpec fixed = spec.with_lambdas(LambdaMode::fixed(a), LambdaMode::fixed(b));
        const FittedModel f = fit(fixed, y, options);
        cell.loglik = f.loglik;
        cell.converged = f.converged;
      } catch (const ConvergenceError&) {
      } catch (const DomainError&) {
      }
      cells.push_back(cell);
    }
  }
  std::stable_sort(cells.begin(), cells.end(), [](const ProfileCell& p, const ProfileCell& q) {
    if (p.converged != q.converged) return p.converged;
    return p.loglik > q.loglik;
  });
  return cells;
}

}  // namespace betalink
