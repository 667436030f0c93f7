#include "dynbath/propagator.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "dynbath/error.hpp"

namespace dynbath {

void PropagatorConfig::validate() const {
  if (!(time_step > 0.0) || !std::isfinite(time_step))
    throw ValidationError("time step must be positive and finite");
  if (taylor_order < 2) throw ValidationError("taylor order must be at least 2");
  if (branching < 2) throw ValidationError("branching must be at least 2");
  if (depth < 0) throw ValidationError("recursion depth must be nonnegative");
  if (!(step_bound > 0.0)) throw ValidationError("step bound must be positive");
}

double step_measure(const SectorOperator& h, StepNorm norm) {
  if (h.matrix.size() == 0) return 0.0;
  if (norm == StepNorm::MaxElement) return h.max_element();
  return eigenvalues(h).cwiseAbs().maxCoeff();
}

double gershgorin_bound(const SectorOperator& h) {
  if (h.matrix.size() == 0) return 0.0;
  return h.matrix.cwiseAbs().rowwise().sum().maxCoeff();
}

StepChoice choose_time_step(double max_element, double spectral_bound, int taylor_order,
                            double horizon, double tolerance, double unit, double step_bound) {
  if (!(unit > 0.0)) throw ValidationError("time-step unit must be positive");
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be positive");
  if (taylor_order < 2) throw ValidationError("taylor order must be at least 2");
  const double factorial = std::tgamma(static_cast<double>(taylor_order) + 2.0);
  const double rho = std::max(spectral_bound, max_element);
  const double span = std::max(horizon, 1.0);
  for (int p = 0; p < 60; ++p) {
    const double dt = std::ldexp(unit, -p);
    if (dt * max_element > step_bound) continue;
    const double x = rho * dt;
    const double err = span * rho * std::pow(x, taylor_order) / factorial;
    if (err <= tolerance) return {dt, p, err};
  }
  throw StepTooLarge("no time step down to unit/2^59 meets the tolerance");
}

int choose_depth(double time_step, int branching, double horizon) {
  if (!(time_step > 0.0) || branching < 2) throw ValidationError("invalid ladder parameters");
  int depth = 0;
  double span = time_step;
  while (span * branching <= horizon * (1.0 + 1e-12) && depth < 62) {
    span *= branching;
    ++depth;
  }
  return depth;
}

Eigen::MatrixXcd base_step(const SectorOperator& h, const PropagatorConfig& cfg) {
  cfg.validate();
  if (h.matrix.rows() != h.matrix.cols()) throw ValidationError("Hamiltonian is not square");
  const double defect = h.hermiticity_defect();
  if (defect > 1e-10) {
    std::ostringstream msg;
    msg << "base step needs a Hermitian operator (relative defect " << defect << ")";
    throw ValidationError(msg.str());
  }
  const double measure = step_measure(h, cfg.step_norm);
  if (cfg.time_step * measure > cfg.step_bound) {
    std::ostringstream msg;
    msg << "time step " << cfg.time_step << " times operator norm " << measure << " exceeds "
        << cfg.step_bound << "; use a step of at most " << cfg.step_bound / measure;
    throw StepTooLarge(msg.str());
  }
  const Eigen::Index d = h.matrix.rows();
  const Eigen::MatrixXcd a = cplx(0.0, -cfg.time_step) * h.matrix;
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Identity(d, d);
  for (int k = cfg.taylor_order; k >= 1; --k) {
    Eigen::MatrixXcd next = a * u;
    next /= static_cast<double>(k);
    next.diagonal().array() += 1.0;
    u.swap(next);
  }
  return u;
}

double unitarity_defect(const Eigen::MatrixXcd& u) {
  if (u.size() == 0) return 0.0;
  Eigen::MatrixXcd g = u.adjoint() * u;
  g.diagonal().array() -= 1.0;
  return g.cwiseAbs().maxCoeff();
}

PropagatorLadder::PropagatorLadder(BasisPtr basis, double time_step, int branching,
                                   std::vector<Eigen::MatrixXcd> rungs)
    : basis_(std::move(basis)), time_step_(time_step), branching_(branching),
      rungs_(std::move(rungs)) {
  if (rungs_.empty()) throw ValidationError("ladder needs at least one rung");
  std::int64_t steps = 1;
  for (std::size_t k = 0; k < rungs_.size(); ++k) {
    if (k > 0) {
      if (steps > std::numeric_limits<std::int64_t>::max() / branching_)
        throw CapacityError("ladder span overflows the step counter");
      steps *= branching_;
    }
    rung_steps_.push_back(steps);
  }
}

double PropagatorLadder::max_unitarity_defect() const {
  double worst = 0.0;
  for (const auto& u : rungs_) worst = std::max(worst, unitarity_defect(u));
  return worst;
}

PropagatorLadder build_ladder(Eigen::MatrixXcd u0, BasisPtr basis, const PropagatorConfig& cfg) {
  cfg.validate();
  if (u0.rows() != u0.cols()) throw ValidationError("base step is not square");
  if (basis && static_cast<std::size_t>(u0.rows()) != basis->dimension())
    throw SectorMismatch("base step does not match the basis dimension");
  const std::size_t bytes =
      static_cast<std::size_t>(u0.rows()) * static_cast<std::size_t>(u0.cols()) * sizeof(cplx);
  if (bytes > cfg.rung_memory_cap) {
    std::ostringstream msg;
    msg << "one rung needs " << bytes << " bytes, above the cap of " << cfg.rung_memory_cap;
    throw CapacityError(msg.str());
  }
  // One Newton-Schulz step towards the nearest unitary: U (3 - U^+U) / 2.
  auto polar_step = [](Eigen::MatrixXcd& u) {
    Eigen::MatrixXcd g = -(u.adjoint() * u);
    g.diagonal().array() += 3.0;
    u = 0.5 * (u * g);
  };
  std::vector<Eigen::MatrixXcd> rungs;
  rungs.reserve(static_cast<std::size_t>(cfg.depth) + 1);
  if (cfg.renormalize) polar_step(u0);
  rungs.push_back(std::move(u0));
  for (int k = 1; k <= cfg.depth; ++k) {
    const Eigen::MatrixXcd& prev = rungs.back();
    Eigen::MatrixXcd next = prev;
    for (int m = 1; m < cfg.branching; ++m) next = prev * next;
    if (cfg.renormalize) polar_step(next);
    rungs.push_back(std::move(next));
  }
  return PropagatorLadder(std::move(basis), cfg.time_step, cfg.branching, std::move(rungs));
}

PropagatorLadder build_ladder(const SectorOperator& h, const PropagatorConfig& cfg) {
  return build_ladder(base_step(h, cfg), h.basis, cfg);
}

std::vector<std::int64_t> decompose_steps(std::int64_t steps, const PropagatorLadder& ladder) {
  if (steps < 0) throw ValidationError("step count must be nonnegative");
  std::vector<std::int64_t> counts(static_cast<std::size_t>(ladder.depth()) + 1, 0);
  for (int k = ladder.depth(); k >= 0; --k) {
    const std::int64_t span = ladder.rung_steps(k);
    counts[static_cast<std::size_t>(k)] = steps / span;
    steps %= span;
  }
  return counts;
}

SnappedTime snap_time(double t, double time_step, bool allow_snap) {
  if (!std::isfinite(t)) throw ValidationError("time must be finite");
  if (!(time_step > 0.0)) throw ValidationError("time step must be positive");
  const double ratio = t / time_step;
  if (std::abs(ratio) > 9.0e15) throw CapacityError("time is too far beyond the step lattice");
  const auto steps = static_cast<std::int64_t>(std::llround(ratio));
  const bool on_lattice = std::abs(ratio - static_cast<double>(steps)) <= 1e-6;
  if (!on_lattice && !allow_snap) {
    const double lo = std::floor(ratio) * time_step;
    const double hi = std::ceil(ratio) * time_step;
    std::ostringstream msg;
    msg.precision(17);
    msg << "time " << t << " is not on the step lattice; nearest reachable times are " << lo
        << " and " << hi << " (enable snapping to round)";
    throw UnreachableTime(msg.str());
  }
  return {t, static_cast<double>(steps) * time_step, steps, !on_lattice};
}

namespace {

void check_ladder_sector(const StateVector& psi, const PropagatorLadder& ladder) {
  if (static_cast<std::size_t>(ladder.rung(0).rows()) != psi.basis().dimension())
    throw SectorMismatch("state and ladder belong to different sectors");
}

}  // namespace

StateVector evolve_steps(const StateVector& psi, std::int64_t steps, const PropagatorLadder& ladder) {
  check_ladder_sector(psi, ladder);
  const std::int64_t s[1] = {steps};
  Eigen::MatrixXcd out = evolve_columns(psi.amplitudes(), s, ladder);
  return StateVector(psi.basis_ptr(), out.col(0));
}

StateVector evolve_to(const StateVector& psi, double t, const PropagatorLadder& ladder,
                      bool allow_snap) {
  if (t < 0.0) throw ValidationError("evolve_to needs a nonnegative time");
  const SnappedTime snapped = snap_time(t, ladder.time_step(), allow_snap);
  return evolve_steps(psi, snapped.steps, ladder);
}

Eigen::MatrixXcd evolve_columns(Eigen::MatrixXcd x, std::span<const std::int64_t> steps,
                                const PropagatorLadder& ladder) {
  if (static_cast<std::size_t>(x.cols()) != steps.size())
    throw ValidationError("one step count per column is required");
  if (x.rows() != ladder.rung(0).rows()) throw SectorMismatch("columns do not match the ladder");
  const std::size_t cols = steps.size();
  std::vector<std::int64_t> remaining(cols);
  std::vector<int> sign(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    sign[c] = steps[c] < 0 ? -1 : 1;
    remaining[c] = steps[c] < 0 ? -steps[c] : steps[c];
  }

  std::vector<Eigen::Index> picked;
  for (int k = ladder.depth(); k >= 0; --k) {
    const std::int64_t span = ladder.rung_steps(k);
    std::vector<std::int64_t> count(cols);
    std::int64_t most = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      count[c] = remaining[c] / span;
      remaining[c] %= span;
      most = std::max(most, count[c]);
    }
    const Eigen::MatrixXcd& u = ladder.rung(k);
    for (std::int64_t rep = 1; rep <= most; ++rep) {
      for (int direction : {1, -1}) {
        picked.clear();
        for (std::size_t c = 0; c < cols; ++c)
          if (sign[c] == direction && count[c] >= rep) picked.push_back(static_cast<Eigen::Index>(c));
        if (picked.empty()) continue;
        if (picked.size() == cols) {
          x = direction > 0 ? Eigen::MatrixXcd(u * x) : Eigen::MatrixXcd(u.adjoint() * x);
          continue;
        }
        Eigen::MatrixXcd sub = x(Eigen::all, picked);
        sub = direction > 0 ? Eigen::MatrixXcd(u * sub) : Eigen::MatrixXcd(u.adjoint() * sub);
        x(Eigen::all, picked) = sub;
      }
    }
  }
  return x;
}

}  // namespace dynbath
