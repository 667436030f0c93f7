#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dynbath/fock.hpp"

namespace dynbath {

// Splits a fixed-N basis into system and reservoir occupation labels. Both
// label lists run over totals 0..N, ordered by total and then by the
// decreasing-lexicographic sector order.
class PartitionMap {
 public:
  PartitionMap(BasisPtr basis, std::vector<std::size_t> system_modes);

  const FockBasis& basis() const { return *basis_; }
  const std::vector<std::size_t>& system_modes() const { return system_modes_; }
  const std::vector<std::size_t>& reservoir_modes() const { return reservoir_modes_; }

  std::size_t system_config_count() const { return system_offset_.back(); }
  std::size_t reservoir_config_count() const { return reservoir_offset_.back(); }
  std::span<const int> system_config(std::size_t s) const;
  std::span<const int> reservoir_config(std::size_t r) const;
  // Particle total carried by system configuration s.
  int system_total(std::size_t s) const;

  // Global label of full-basis state k.
  std::size_t system_index(std::size_t k) const;
  std::size_t reservoir_index(std::size_t k) const;

  // Block k holds system configurations with total k: [offset(k), offset(k+1)).
  std::size_t system_block_offset(int total) const { return system_offset_[static_cast<std::size_t>(total)]; }
  std::size_t reservoir_block_offset(int total) const { return reservoir_offset_[static_cast<std::size_t>(total)]; }

 private:
  BasisPtr basis_;
  std::vector<std::size_t> system_modes_;
  std::vector<std::size_t> reservoir_modes_;
  std::vector<BasisPtr> system_sectors_;
  std::vector<BasisPtr> reservoir_sectors_;
  std::vector<std::size_t> system_offset_;     // size N+2
  std::vector<std::size_t> reservoir_offset_;  // size N+2
  std::vector<std::size_t> system_label_;
  std::vector<std::size_t> reservoir_label_;
};

PartitionMap build_partition(BasisPtr basis, std::vector<std::size_t> system_modes);

struct DensityBlock {
  int particles;        // system particle total
  std::size_t offset;   // first global system label of the block
  Eigen::MatrixXcd rho;
};

// Block-diagonal reduced density matrix; coherences between different system
// particle totals vanish and are not stored.
struct ReducedDensityMatrix {
  std::size_t dimension = 0;
  std::vector<DensityBlock> blocks;

  Eigen::MatrixXcd dense() const;
  cplx trace() const;
};

// Reduced density of the system modes, or of the reservoir modes when
// keep_reservoir is set.
ReducedDensityMatrix reduced_density(const StateVector& psi, const PartitionMap& pm,
                                     bool keep_reservoir = false);

// -sum lambda ln lambda over eigenvalues of the Hermitized blocks.
double entanglement_entropy(const ReducedDensityMatrix& rho);

// ln of the smaller configuration count.
double entropy_bound(const PartitionMap& pm);

// tr(rho A) for an operator indexed by system labels.
cplx subsystem_expectation(const ReducedDensityMatrix& rho, const Eigen::MatrixXcd& op);

// Diagonal number operator on system labels: one mode, or all system modes
// when mode is omitted. The mode index refers to the full mode list.
Eigen::MatrixXcd system_number_operator(const PartitionMap& pm);
Eigen::MatrixXcd system_number_operator(const PartitionMap& pm, std::size_t mode);

}  // namespace dynbath
