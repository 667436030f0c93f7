#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dynbath/fock.hpp"
#include "dynbath/hamiltonian.hpp"

namespace dynbath {

enum class StepNorm {
  MaxElement,  // largest |H_ij|
  Spectral,    // largest |eigenvalue|
};

struct PropagatorConfig {
  double time_step = 0.0;      // base step dt in units of 1/J
  int taylor_order = 4;        // k_max
  int branching = 2;           // n
  int depth = 10;              // r: rungs U_0..U_r
  StepNorm step_norm = StepNorm::MaxElement;
  double step_bound = 0.1;     // dt * norm(H) must not exceed this
  bool renormalize = false;    // Newton-Schulz polar correction per rung
  std::size_t rung_memory_cap = std::size_t{4} << 30;  // bytes per rung

  void validate() const;
};

double step_measure(const SectorOperator& h, StepNorm norm);
// Row-sum bound on the spectral radius of H.
double gershgorin_bound(const SectorOperator& h);

struct StepChoice {
  double time_step = 0.0;
  int halvings = 0;            // time_step = unit / 2^halvings
  double error_estimate = 0.0; // accumulated series remainder over the horizon
};

// Largest dt = unit / 2^p with dt * max_element <= step_bound and the series
// remainder horizon * rho * (rho dt)^k / (k+1)! <= tolerance.
StepChoice choose_time_step(double max_element, double spectral_bound, int taylor_order,
                            double horizon, double tolerance, double unit = 1.0,
                            double step_bound = 0.1);

// Smallest depth whose top rung does not exceed the horizon.
int choose_depth(double time_step, int branching, double horizon);

// Truncated series sum_{k<=k_max} (-i dt H)^k / k!, evaluated by Horner's rule.
Eigen::MatrixXcd base_step(const SectorOperator& h, const PropagatorConfig& cfg);

double unitarity_defect(const Eigen::MatrixXcd& u);

class PropagatorLadder {
 public:
  PropagatorLadder(BasisPtr basis, double time_step, int branching,
                   std::vector<Eigen::MatrixXcd> rungs);

  const BasisPtr& basis() const { return basis_; }
  double time_step() const { return time_step_; }
  int branching() const { return branching_; }
  int depth() const { return static_cast<int>(rungs_.size()) - 1; }
  const Eigen::MatrixXcd& rung(int k) const { return rungs_.at(static_cast<std::size_t>(k)); }
  // Number of base steps spanned by rung k.
  std::int64_t rung_steps(int k) const { return rung_steps_.at(static_cast<std::size_t>(k)); }
  double rung_span(int k) const { return static_cast<double>(rung_steps(k)) * time_step_; }
  double max_unitarity_defect() const;

 private:
  BasisPtr basis_;
  double time_step_;
  int branching_;
  std::vector<Eigen::MatrixXcd> rungs_;
  std::vector<std::int64_t> rung_steps_;
};

using LadderPtr = std::shared_ptr<const PropagatorLadder>;

// U_k = (U_{k-1})^n for k = 1..depth.
PropagatorLadder build_ladder(Eigen::MatrixXcd u0, BasisPtr basis, const PropagatorConfig& cfg);
PropagatorLadder build_ladder(const SectorOperator& h, const PropagatorConfig& cfg);

// Greedy largest-first rung counts for a step count; the top rung may repeat.
std::vector<std::int64_t> decompose_steps(std::int64_t steps, const PropagatorLadder& ladder);

struct SnappedTime {
  double requested = 0.0;
  double actual = 0.0;
  std::int64_t steps = 0;
  bool snapped = false;
};

// Maps a time onto the dt lattice. Without snapping, a time off the lattice
// raises UnreachableTime naming the two nearest reachable times.
SnappedTime snap_time(double t, double time_step, bool allow_snap);

StateVector evolve_steps(const StateVector& psi, std::int64_t steps, const PropagatorLadder& ladder);
StateVector evolve_to(const StateVector& psi, double t, const PropagatorLadder& ladder,
                      bool allow_snap = false);

// Evolves column c of X by steps[c] base steps; negative counts run backwards
// through the adjoint rungs. Columns sharing a rung are multiplied together.
Eigen::MatrixXcd evolve_columns(Eigen::MatrixXcd x, std::span<const std::int64_t> steps,
                                const PropagatorLadder& ladder);

}  // namespace dynbath
