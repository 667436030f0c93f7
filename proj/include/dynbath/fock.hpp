#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace dynbath {

using cplx = std::complex<double>;

// binomial(N+M-1, M-1); throws CapacityError when it does not fit in 64 bits.
std::uint64_t sector_dimension(std::size_t num_modes, int num_particles);

// Occupation tuples with fixed total N over M modes, ordered lexicographically
// decreasing: (N,0,..,0) has index 0 and (0,..,0,N) is last.
class FockBasis {
 public:
  static constexpr std::size_t kDefaultDimensionCap = 40000;

  FockBasis(std::size_t num_modes, int num_particles,
            std::size_t dimension_cap = kDefaultDimensionCap);

  std::size_t num_modes() const { return modes_; }
  int num_particles() const { return particles_; }
  std::size_t dimension() const { return dim_; }

  std::span<const int> state(std::size_t k) const {
    return {occupations_.data() + k * modes_, modes_};
  }

  // Position of a tuple, or nullopt when it is not in this sector.
  std::optional<std::size_t> find(std::span<const int> occupation) const;
  // Same as find but throws ValidationError for foreign tuples.
  std::size_t index_of(std::span<const int> occupation) const;

 private:
  // Unchecked rank of a tuple known to belong to the sector.
  std::size_t rank(std::span<const int> occupation) const;

  std::size_t modes_;
  int particles_;
  std::size_t dim_;
  std::vector<int> occupations_;
  // count_[m][r]: number of tuples over m modes with total r.
  std::vector<std::vector<std::size_t>> count_;
};

using BasisPtr = std::shared_ptr<const FockBasis>;

BasisPtr enumerate_basis(std::size_t num_modes, int num_particles,
                         std::size_t dimension_cap = FockBasis::kDefaultDimensionCap);

std::string format_occupation(std::span<const int> occupation);

// Ladder primitives on a single tuple. Each returns the matrix element and
// updates the tuple in place; a zero return leaves the tuple untouched.
double annihilate(std::span<int> occupation, std::size_t mode);
double create(std::span<int> occupation, std::size_t mode);

class StateVector {
 public:
  StateVector(BasisPtr basis, Eigen::VectorXcd amplitudes);
  static StateVector zero(BasisPtr basis);

  const FockBasis& basis() const { return *basis_; }
  const BasisPtr& basis_ptr() const { return basis_; }
  const Eigen::VectorXcd& amplitudes() const { return amplitudes_; }
  Eigen::VectorXcd& amplitudes() { return amplitudes_; }

  double norm() const { return amplitudes_.norm(); }
  bool is_normalized(double tol = 1e-8) const;
  // <this|other>; throws SectorMismatch for different sectors.
  cplx dot(const StateVector& other) const;

 private:
  BasisPtr basis_;
  Eigen::VectorXcd amplitudes_;
};

// Sparse action of b_i from sector N to sector N-1, stored once and reused
// for b_i (lower) and for b_i^dagger from N-1 back to N (raise).
class LadderMap {
 public:
  LadderMap(BasisPtr upper, BasisPtr lower, std::size_t mode);

  const BasisPtr& upper() const { return upper_; }
  const BasisPtr& lower() const { return lower_; }
  std::size_t mode() const { return mode_; }

  // Rows of X live in the upper sector; result rows live in the lower sector.
  Eigen::MatrixXcd lower_columns(const Eigen::MatrixXcd& x) const;
  // Rows of X live in the lower sector; result rows live in the upper sector.
  Eigen::MatrixXcd raise_columns(const Eigen::MatrixXcd& x) const;

 private:
  BasisPtr upper_;
  BasisPtr lower_;
  std::size_t mode_;
  std::vector<std::ptrdiff_t> target_;  // -1 when n_i = 0
  std::vector<double> amplitude_;
};

StateVector apply_annihilation(std::size_t mode, const StateVector& psi, BasisPtr target);
StateVector apply_creation(std::size_t mode, const StateVector& psi, BasisPtr target);
StateVector apply_number(std::size_t mode, const StateVector& psi);

// <psi|n_i|psi>, not divided by the norm.
double number_expectation(std::size_t mode, const StateVector& psi);
// Occupation numbers n_i of every basis tuple for one mode.
Eigen::VectorXd mode_occupations(const FockBasis& basis, std::size_t mode);

// Lazily built bases for a fixed mode count, shared across threads.
class SectorCache {
 public:
  explicit SectorCache(std::size_t num_modes,
                       std::size_t dimension_cap = FockBasis::kDefaultDimensionCap);
  BasisPtr get(int num_particles);
  std::size_t num_modes() const { return modes_; }

 private:
  std::size_t modes_;
  std::size_t cap_;
  std::mutex mutex_;
  std::map<int, BasisPtr> sectors_;
};

}  // namespace dynbath
