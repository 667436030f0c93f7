#include "dynbath/fock.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "dynbath/error.hpp"

namespace dynbath {

std::uint64_t sector_dimension(std::size_t num_modes, int num_particles) {
  if (num_modes == 0) throw ValidationError("mode count must be at least 1");
  if (num_particles < 0) throw ValidationError("particle count must be nonnegative");
  // C(N+M-1, k) for k = 1..M-1, kept exact by dividing after each product.
  std::uint64_t result = 1;
  const std::uint64_t n = static_cast<std::uint64_t>(num_particles);
  for (std::uint64_t k = 1; k < num_modes; ++k) {
    const std::uint64_t factor = n + k;
    if (result > std::numeric_limits<std::uint64_t>::max() / factor)
      throw CapacityError("sector dimension overflows 64 bits");
    result = result * factor / k;
  }
  return result;
}

FockBasis::FockBasis(std::size_t num_modes, int num_particles, std::size_t dimension_cap)
    : modes_(num_modes), particles_(num_particles), dim_(0) {
  const std::uint64_t dim = sector_dimension(num_modes, num_particles);
  if (dim > dimension_cap) {
    std::ostringstream msg;
    msg << "sector (M=" << num_modes << ", N=" << num_particles << ") has dimension " << dim
        << ", above the cap of " << dimension_cap;
    throw CapacityError(msg.str());
  }
  dim_ = static_cast<std::size_t>(dim);

  count_.assign(modes_ + 1, std::vector<std::size_t>(particles_ + 1, 0));
  count_[0][0] = 1;
  for (std::size_t m = 1; m <= modes_; ++m) {
    std::size_t acc = 0;
    for (int r = 0; r <= particles_; ++r) {
      acc += count_[m - 1][r];
      count_[m][r] = acc;
    }
  }

  occupations_.resize(dim_ * modes_);
  std::vector<int> tuple(modes_, 0);
  std::size_t next = 0;
  // Odometer over tuples in decreasing lexicographic order.
  tuple[0] = particles_;
  while (true) {
    std::copy(tuple.begin(), tuple.end(), occupations_.begin() + next * modes_);
    ++next;
    if (modes_ == 1) break;
    // Find the rightmost nonzero entry among the first M-1 positions.
    std::ptrdiff_t k = static_cast<std::ptrdiff_t>(modes_) - 2;
    while (k >= 0 && tuple[k] == 0) --k;
    if (k < 0) break;
    const int tail = tuple[modes_ - 1];
    tuple[modes_ - 1] = 0;
    --tuple[k];
    tuple[k + 1] = tail + 1;
  }
  if (next != dim_) throw IntegrityError("basis enumeration count mismatch");
}

std::size_t FockBasis::rank(std::span<const int> occupation) const {
  std::size_t r = 0;
  int remaining = particles_;
  for (std::size_t k = 0; k + 1 < modes_; ++k) {
    const int above = remaining - occupation[k] - 1;
    if (above >= 0) r += count_[modes_ - k][above];
    remaining -= occupation[k];
  }
  return r;
}

std::optional<std::size_t> FockBasis::find(std::span<const int> occupation) const {
  if (occupation.size() != modes_) return std::nullopt;
  long total = 0;
  for (int n : occupation) {
    if (n < 0) return std::nullopt;
    total += n;
  }
  if (total != particles_) return std::nullopt;
  return rank(occupation);
}

std::size_t FockBasis::index_of(std::span<const int> occupation) const {
  auto idx = find(occupation);
  if (!idx) {
    std::ostringstream msg;
    msg << "occupation " << format_occupation(occupation) << " is not in the sector M=" << modes_
        << ", N=" << particles_;
    throw ValidationError(msg.str());
  }
  return *idx;
}

BasisPtr enumerate_basis(std::size_t num_modes, int num_particles, std::size_t dimension_cap) {
  return std::make_shared<const FockBasis>(num_modes, num_particles, dimension_cap);
}

std::string format_occupation(std::span<const int> occupation) {
  std::ostringstream out;
  out << '(';
  for (std::size_t k = 0; k < occupation.size(); ++k) {
    if (k) out << ',';
    out << occupation[k];
  }
  out << ')';
  return out.str();
}

double annihilate(std::span<int> occupation, std::size_t mode) {
  const int n = occupation[mode];
  if (n == 0) return 0.0;
  occupation[mode] = n - 1;
  return std::sqrt(static_cast<double>(n));
}

double create(std::span<int> occupation, std::size_t mode) {
  const int n = occupation[mode];
  occupation[mode] = n + 1;
  return std::sqrt(static_cast<double>(n + 1));
}

StateVector::StateVector(BasisPtr basis, Eigen::VectorXcd amplitudes)
    : basis_(std::move(basis)), amplitudes_(std::move(amplitudes)) {
  if (!basis_) throw ValidationError("state vector needs a basis");
  if (static_cast<std::size_t>(amplitudes_.size()) != basis_->dimension())
    throw ValidationError("amplitude count does not match the basis dimension");
}

StateVector StateVector::zero(BasisPtr basis) {
  const auto dim = static_cast<Eigen::Index>(basis->dimension());
  return StateVector(std::move(basis), Eigen::VectorXcd::Zero(dim));
}

bool StateVector::is_normalized(double tol) const { return std::abs(norm() - 1.0) <= tol; }

cplx StateVector::dot(const StateVector& other) const {
  if (basis_->num_modes() != other.basis_->num_modes() ||
      basis_->num_particles() != other.basis_->num_particles())
    throw SectorMismatch("inner product between different sectors");
  return amplitudes_.dot(other.amplitudes_);
}

LadderMap::LadderMap(BasisPtr upper, BasisPtr lower, std::size_t mode)
    : upper_(std::move(upper)), lower_(std::move(lower)), mode_(mode) {
  if (upper_->num_modes() != lower_->num_modes())
    throw SectorMismatch("ladder map between bases with different mode counts");
  if (lower_->num_particles() != upper_->num_particles() - 1) {
    std::ostringstream msg;
    msg << "ladder map expects sectors N and N-1, got " << upper_->num_particles() << " and "
        << lower_->num_particles();
    throw SectorMismatch(msg.str());
  }
  if (mode >= upper_->num_modes()) throw ValidationError("mode index out of range");
  const std::size_t dim = upper_->dimension();
  target_.assign(dim, -1);
  amplitude_.assign(dim, 0.0);
  std::vector<int> tuple(upper_->num_modes());
  for (std::size_t k = 0; k < dim; ++k) {
    auto s = upper_->state(k);
    std::copy(s.begin(), s.end(), tuple.begin());
    const double a = annihilate(tuple, mode);
    if (a == 0.0) continue;
    target_[k] = static_cast<std::ptrdiff_t>(*lower_->find(tuple));
    amplitude_[k] = a;
  }
}

Eigen::MatrixXcd LadderMap::lower_columns(const Eigen::MatrixXcd& x) const {
  if (static_cast<std::size_t>(x.rows()) != upper_->dimension())
    throw SectorMismatch("input rows do not match the upper sector");
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(lower_->dimension()), x.cols());
  for (std::size_t k = 0; k < target_.size(); ++k)
    if (target_[k] >= 0) y.row(target_[k]) = amplitude_[k] * x.row(static_cast<Eigen::Index>(k));
  return y;
}

Eigen::MatrixXcd LadderMap::raise_columns(const Eigen::MatrixXcd& x) const {
  if (static_cast<std::size_t>(x.rows()) != lower_->dimension())
    throw SectorMismatch("input rows do not match the lower sector");
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(upper_->dimension()), x.cols());
  for (std::size_t k = 0; k < target_.size(); ++k)
    if (target_[k] >= 0) y.row(static_cast<Eigen::Index>(k)) = amplitude_[k] * x.row(target_[k]);
  return y;
}

namespace {

void check_target(const StateVector& psi, const BasisPtr& target, int expected_particles) {
  if (!target) throw SectorMismatch("target basis is missing");
  if (target->num_modes() != psi.basis().num_modes() ||
      target->num_particles() != expected_particles) {
    std::ostringstream msg;
    msg << "target basis has N=" << target->num_particles() << ", expected N="
        << expected_particles;
    throw SectorMismatch(msg.str());
  }
}

}  // namespace

StateVector apply_annihilation(std::size_t mode, const StateVector& psi, BasisPtr target) {
  if (psi.basis().num_particles() < 1) throw SectorMismatch("annihilation on the vacuum sector");
  check_target(psi, target, psi.basis().num_particles() - 1);
  LadderMap map(psi.basis_ptr(), target, mode);
  Eigen::VectorXcd out = map.lower_columns(psi.amplitudes());
  return StateVector(std::move(target), std::move(out));
}

StateVector apply_creation(std::size_t mode, const StateVector& psi, BasisPtr target) {
  check_target(psi, target, psi.basis().num_particles() + 1);
  LadderMap map(target, psi.basis_ptr(), mode);
  Eigen::VectorXcd out = map.raise_columns(psi.amplitudes());
  return StateVector(std::move(target), std::move(out));
}

Eigen::VectorXd mode_occupations(const FockBasis& basis, std::size_t mode) {
  if (mode >= basis.num_modes()) throw ValidationError("mode index out of range");
  Eigen::VectorXd n(static_cast<Eigen::Index>(basis.dimension()));
  for (std::size_t k = 0; k < basis.dimension(); ++k)
    n[static_cast<Eigen::Index>(k)] = basis.state(k)[mode];
  return n;
}

StateVector apply_number(std::size_t mode, const StateVector& psi) {
  Eigen::VectorXcd out = mode_occupations(psi.basis(), mode).cwiseProduct(psi.amplitudes());
  return StateVector(psi.basis_ptr(), std::move(out));
}

double number_expectation(std::size_t mode, const StateVector& psi) {
  return mode_occupations(psi.basis(), mode).dot(psi.amplitudes().cwiseAbs2());
}

SectorCache::SectorCache(std::size_t num_modes, std::size_t dimension_cap)
    : modes_(num_modes), cap_(dimension_cap) {}

BasisPtr SectorCache::get(int num_particles) {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = sectors_.find(num_particles);
  if (it != sectors_.end()) return it->second;
  auto basis = enumerate_basis(modes_, num_particles, cap_);
  sectors_.emplace(num_particles, basis);
  return basis;
}

}  // namespace dynbath
