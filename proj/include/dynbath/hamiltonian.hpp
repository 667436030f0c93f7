#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <utility>

#include <Eigen/Dense>

#include "dynbath/fock.hpp"

namespace dynbath {

// Energies are in units of the hopping J.
struct HamiltonianParams {
  std::size_t num_modes = 5;
  int num_particles = 0;
  double level_spacing = 10.0;  // Delta
  double hopping = 1.0;         // J
  double intra_level = 1.0;     // U
  double inter_level = 0.1;     // U'

  void validate() const;
};

struct SectorOperator {
  BasisPtr basis;
  Eigen::MatrixXcd matrix;

  std::size_t dimension() const { return static_cast<std::size_t>(matrix.rows()); }
  double max_element() const { return matrix.cwiseAbs().maxCoeff(); }
  // max |H - H^dagger| / max |H|, zero for the zero matrix.
  double hermiticity_defect() const;
};

// Delta sum (i-1) n_i + J sum_{i!=j} b_i^+ b_j + U sum b_i^+ b_i^+ b_i b_i
// + U' sum over ordered (i,j,l,m) not all equal of b_i^+ b_j^+ b_l b_m.
SectorOperator build_hamiltonian(const HamiltonianParams& params, BasisPtr basis);

// H psi without forming the matrix; usable on sectors too large to store.
StateVector apply_hamiltonian(const HamiltonianParams& params, const StateVector& psi);

struct EigenSystem {
  BasisPtr basis;
  Eigen::VectorXd energies;   // ascending
  Eigen::MatrixXcd vectors;   // columns are eigenvectors
};

EigenSystem diagonalize(const SectorOperator& op);
Eigen::VectorXd eigenvalues(const SectorOperator& op);

struct ChaosReport {
  double mean_ratio = 0.0;
  std::size_t ratio_count = 0;     // number of r_k averaged
  std::size_t merged_levels = 0;   // levels folded into a neighbour as degenerate
  std::size_t level_count = 0;     // levels considered after windowing
};

// Mean adjacent-gap ratio. Levels closer than 1e-12 of the spectral width are
// merged first. An optional window [lo, hi] restricts the levels used.
ChaosReport r_ratio(std::span<const double> ascending,
                    std::optional<std::pair<double, double>> window = std::nullopt);

void write_eigenvalues_csv(const std::filesystem::path& path, const Eigen::VectorXd& energies);

}  // namespace dynbath
