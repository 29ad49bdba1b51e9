#include "gpc/ocp.hpp"

#include <chrono>
#include <cmath>
#include <limits>

#include "gpc/errors.hpp"

namespace gpc {

void CostWeights::validate() const {
  if ((state_weights.array() < 0.0).any() || !state_weights.allFinite()) {
    throw ConfigError("state weights must be non-negative");
  }
  for (const auto& c : collision) {
    if (!(c.scale >= 0.0) || !(c.steepness > 0.0)) {
      throw ConfigError("collision weights need scale >= 0 and steepness > 0");
    }
  }
  if (horizon < 1 || !(dt > 0.0) || !(delay >= 0.0)) {
    throw ConfigError("horizon must be >= 1, dt > 0 and delay >= 0");
  }
}

const CollisionWeights& CostWeights::collisionFor(std::size_t j) const {
  if (collision.empty()) {
    throw ConfigError("no collision weights configured");
  }
  return collision[std::min(j, collision.size() - 1)];
}

double trackingCost(const StateVector& x, const StateVector& reference, const StateVector& weights) {
  const StateVector e = x - reference;
  return e.dot(weights.cwiseProduct(e));
}

double collisionCost(const Eigen::Vector2d& position, std::span<const ObstacleTerm> obstacles) {
  double cost = 0.0;
  for (const auto& o : obstacles) {
    const double d = (position - o.position).norm();
    cost += o.scale / (1.0 + std::exp(o.steepness * (d - o.threshold)));
  }
  return cost;
}

RolloutObjective::RolloutObjective(const State& x0, const ReferenceWindow& refs,
                                   std::span<const ObstacleState> obstacles, const CostWeights& w,
                                   const RobotParams& plant)
    : x0_(x0),
      refs_(refs),
      state_weights_(w.state_weights),
      dt_(w.dt),
      horizon_(w.horizon),
      plant_(plant) {
  if (static_cast<int>(refs.size()) != w.horizon) {
    throw DimensionMismatch("reference window length must equal the horizon");
  }
  obstacle_terms_.resize(horizon_);
  for (int k = 0; k < horizon_; ++k) {
    const double t = (k + 1) * dt_;
    for (std::size_t j = 0; j < obstacles.size(); ++j) {
      const auto& cw = w.collisionFor(j);
      obstacle_terms_[k].push_back(ObstacleTerm{predictObstacle(obstacles[j], 0.0, t, w.delay),
                                                cw.scale, cw.steepness, obstacles[j].threshold});
    }
  }
}

double RolloutObjective::stageCost(int k, const State& x) const {
  return trackingCost(x.q, refs_.states[k - 1], state_weights_) +
         collisionCost(x.q.head<2>(), obstacle_terms_[k - 1]);
}

double RolloutObjective::value(const Eigen::VectorXd& u) const {
  State x = x0_;
  double cost = 0.0;
  for (int k = 0; k < horizon_; ++k) {
    x = stepRk4(x, Torques{u(2 * k), u(2 * k + 1)}, dt_, plant_);
    cost += stageCost(k + 1, x);
  }
  return cost;
}

Eigen::VectorXd RolloutObjective::gradient(const Eigen::VectorXd& u) const {
  std::vector<State> states(horizon_ + 1);
  states[0] = x0_;
  for (int k = 0; k < horizon_; ++k) {
    states[k + 1] = stepRk4(states[k], Torques{u(2 * k), u(2 * k + 1)}, dt_, plant_);
  }
  auto suffix_cost = [&](int k, const Torques& first) {
    State x = stepRk4(states[k], first, dt_, plant_);
    double cost = stageCost(k + 1, x);
    for (int j = k + 1; j < horizon_; ++j) {
      x = stepRk4(x, Torques{u(2 * j), u(2 * j + 1)}, dt_, plant_);
      cost += stageCost(j + 1, x);
    }
    return cost;
  };
  Eigen::VectorXd g(dimension());
  for (int i = 0; i < dimension(); ++i) {
    const int k = i / 2;
    const double h = 1e-6 * (1.0 + std::abs(u(i)));
    Torques plus{u(2 * k), u(2 * k + 1)};
    Torques minus = plus;
    if (i % 2 == 0) {
      plus.right += h;
      minus.right -= h;
    } else {
      plus.left += h;
      minus.left -= h;
    }
    g(i) = (suffix_cost(k, plus) - suffix_cost(k, minus)) / (2.0 * h);
  }
  return g;
}

double rolloutCost(const State& x0, const ControlSequence& u, const ReferenceWindow& refs,
                   std::span<const ObstacleState> obstacles, const CostWeights& w,
                   const RobotParams& plant) {
  if (u.cols() != w.horizon) {
    throw DimensionMismatch("control sequence length must equal the horizon");
  }
  return RolloutObjective(x0, refs, obstacles, w, plant).value(flatten(u));
}

Eigen::VectorXd flatten(const ControlSequence& u) {
  return Eigen::Map<const Eigen::VectorXd>(u.data(), u.size());
}

ControlSequence unflatten(const Eigen::VectorXd& u) {
  return Eigen::Map<const ControlSequence>(u.data(), 2, u.size() / 2);
}

Eigen::VectorXd projectedGradient(const Eigen::VectorXd& x, const Eigen::VectorXd& g,
                                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  Eigen::VectorXd pg = g;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if ((x(i) <= lower(i) && g(i) > 0.0) || (x(i) >= upper(i) && g(i) < 0.0)) {
      pg(i) = 0.0;
    }
  }
  return pg;
}

Eigen::VectorXd solveBoxQp(const Eigen::MatrixXd& hessian, const Eigen::VectorXd& gradient,
                           const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
  enum class Bound { Free, Lower, Upper };
  const Eigen::Index n = gradient.size();
  Eigen::VectorXd p = Eigen::VectorXd::Zero(n).cwiseMax(lower).cwiseMin(upper);
  std::vector<Bound> state(n, Bound::Free);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (p(i) <= lower(i) && gradient(i) > 0.0) state[i] = Bound::Lower;
    if (p(i) >= upper(i) && gradient(i) < 0.0) state[i] = Bound::Upper;
  }

  const int max_iterations = 10 * static_cast<int>(n) + 10;
  for (int iter = 0; iter < max_iterations; ++iter) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (state[i] == Bound::Free) free.push_back(i);
    }
    const Eigen::VectorXd model_grad = gradient + hessian * p;
    Eigen::VectorXd step = Eigen::VectorXd::Zero(n);
    if (!free.empty()) {
      const auto m = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd h_ff(m, m);
      Eigen::VectorXd rhs(m);
      for (Eigen::Index a = 0; a < m; ++a) {
        rhs(a) = -model_grad(free[a]);
        for (Eigen::Index b = 0; b < m; ++b) h_ff(a, b) = hessian(free[a], free[b]);
      }
      const Eigen::VectorXd d = h_ff.ldlt().solve(rhs);
      for (Eigen::Index a = 0; a < m; ++a) step(free[a]) = d(a);
    }

    // Largest feasible fraction of the step.
    double alpha = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i : free) {
      if (step(i) > 0.0 && p(i) + step(i) > upper(i)) {
        const double a = (upper(i) - p(i)) / step(i);
        if (a < alpha) {
          alpha = a;
          blocking = i;
        }
      } else if (step(i) < 0.0 && p(i) + step(i) < lower(i)) {
        const double a = (lower(i) - p(i)) / step(i);
        if (a < alpha) {
          alpha = a;
          blocking = i;
        }
      }
    }
    p += std::max(alpha, 0.0) * step;
    if (blocking >= 0) {
      state[blocking] = step(blocking) > 0.0 ? Bound::Upper : Bound::Lower;
      p(blocking) = step(blocking) > 0.0 ? upper(blocking) : lower(blocking);
      continue;
    }

    // Full step taken: release the bound with the most negative multiplier.
    const Eigen::VectorXd grad = gradient + hessian * p;
    Eigen::Index release = -1;
    double worst = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double multiplier = 0.0;
      if (state[i] == Bound::Lower) multiplier = grad(i);
      if (state[i] == Bound::Upper) multiplier = -grad(i);
      if (multiplier < worst) {
        worst = multiplier;
        release = i;
      }
    }
    if (release < 0) break;
    state[release] = Bound::Free;
  }
  return p.cwiseMax(lower).cwiseMin(upper);
}

namespace {

void requireFinite(double f) {
  if (!std::isfinite(f)) {
    throw NonFiniteCost("objective evaluated to a non-finite value");
  }
}

// Damped BFGS update (Powell) keeping the Hessian approximation positive definite.
void bfgsUpdate(Eigen::MatrixXd& hessian, const Eigen::VectorXd& s, const Eigen::VectorXd& y) {
  const Eigen::VectorXd hs = hessian * s;
  const double shs = s.dot(hs);
  if (!(shs > 0.0)) return;
  const double sy = s.dot(y);
  double theta = 1.0;
  if (sy < 0.2 * shs) theta = 0.8 * shs / (shs - sy);
  const Eigen::VectorXd r = theta * y + (1.0 - theta) * hs;
  const double sr = s.dot(r);
  if (!(sr > 0.0)) return;
  hessian += r * r.transpose() / sr - hs * hs.transpose() / shs;
}

}  // namespace

BoxSolution minimizeBoxConstrained(const BoxProblem& problem, const Eigen::VectorXd& x0,
                                   const SolverOptions& options,
                                   const Eigen::MatrixXd* initial_hessian) {
  const auto start = std::chrono::steady_clock::now();
  const Eigen::VectorXd& lo = problem.lower;
  const Eigen::VectorXd& hi = problem.upper;
  const Eigen::Index n = x0.size();

  BoxSolution out;
  SolveReport& report = out.report;
  Eigen::VectorXd x = x0.cwiseMax(lo).cwiseMin(hi);
  double f = problem.value(x);
  ++report.cost_evaluations;
  requireFinite(f);
  Eigen::VectorXd g = problem.gradient(x);
  const bool warm = initial_hessian != nullptr && initial_hessian->rows() == n &&
                    initial_hessian->cols() == n;
  Eigen::MatrixXd hessian = warm ? *initial_hessian : Eigen::MatrixXd::Identity(n, n);
  bool identity_hessian = !warm;
  bool scaled = warm;

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    if (projectedGradient(x, g, lo, hi).lpNorm<Eigen::Infinity>() <= options.gtol) {
      report.converged = true;
      break;
    }
    Eigen::VectorXd p = solveBoxQp(hessian, g, lo - x, hi - x);
    double slope = g.dot(p);
    if (!(slope < 0.0)) {
      hessian.setIdentity();
      identity_hessian = true;
      p = solveBoxQp(hessian, g, lo - x, hi - x);
      slope = g.dot(p);
    }
    if (p.lpNorm<Eigen::Infinity>() <= options.xtol || !(slope < 0.0)) {
      report.converged = true;
      break;
    }

    double alpha = 1.0;
    double f_new = f;
    Eigen::VectorXd x_new = x;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = (x + alpha * p).cwiseMax(lo).cwiseMin(hi);
      f_new = problem.value(x_new);
      ++report.cost_evaluations;
      requireFinite(f_new);
      if (f_new <= f + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (identity_hessian) break;
      hessian.setIdentity();
      identity_hessian = true;
      scaled = false;
      continue;
    }

    const Eigen::VectorXd g_new = problem.gradient(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    if (!scaled) {
      const double sy = s.dot(y);
      if (sy > 0.0) hessian = (y.squaredNorm() / sy) * Eigen::MatrixXd::Identity(n, n);
      scaled = true;
    }
    bfgsUpdate(hessian, s, y);
    identity_hessian = false;

    const double decrease = f - f_new;
    x = x_new;
    g = g_new;
    f = f_new;
    report.iterations = iter + 1;
    if (s.lpNorm<Eigen::Infinity>() <= options.xtol ||
        (options.ftol > 0.0 && decrease <= options.ftol * std::max(1.0, std::abs(f)))) {
      report.converged = true;
      break;
    }
  }

  report.cost = f;
  report.gradient_norm = projectedGradient(x, g, lo, hi).lpNorm<Eigen::Infinity>();
  report.status = report.converged ? SolveStatus::Converged : SolveStatus::NotConverged;
  report.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out.x = std::move(x);
  out.hessian = std::move(hessian);
  return out;
}

OcpSolution solveOcp(const State& x0, const ReferenceWindow& refs,
                     std::span<const ObstacleState> obstacles, const CostWeights& w,
                     const ControlSequence& u_init, const TorqueBounds& bounds,
                     const SolverOptions& options, const RobotParams& plant,
                     const Eigen::MatrixXd* warm_hessian) {
  if (u_init.cols() != w.horizon) {
    throw DimensionMismatch("initial control sequence length must equal the horizon");
  }
  const RolloutObjective objective(x0, refs, obstacles, w, plant);
  const Eigen::Index n = objective.dimension();
  BoxProblem problem{[&objective](const Eigen::VectorXd& u) { return objective.value(u); },
                     [&objective](const Eigen::VectorXd& u) { return objective.gradient(u); },
                     Eigen::VectorXd::Constant(n, bounds.lower),
                     Eigen::VectorXd::Constant(n, bounds.upper)};
  BoxSolution solution = minimizeBoxConstrained(problem, flatten(u_init), options, warm_hessian);
  return {unflatten(solution.x), solution.report, std::move(solution.hessian)};
}

Eigen::MatrixXd shiftHessian(const Eigen::MatrixXd& hessian) {
  const Eigen::Index n = hessian.rows();
  Eigen::MatrixXd shifted = Eigen::MatrixXd::Zero(n, n);
  if (n < 2) return hessian;
  shifted.topLeftCorner(n - 2, n - 2) = hessian.bottomRightCorner(n - 2, n - 2);
  shifted.bottomRightCorner(2, 2) = hessian.bottomRightCorner(2, 2);
  return shifted;
}

}  // namespace gpc
