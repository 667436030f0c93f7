#include "dynbath/partition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dynbath/error.hpp"

namespace dynbath {

namespace {

constexpr std::size_t kNoCap = std::numeric_limits<std::size_t>::max();

void build_labels(const std::vector<BasisPtr>& sectors, std::vector<std::size_t>& offset) {
  offset.assign(sectors.size() + 1, 0);
  for (std::size_t k = 0; k < sectors.size(); ++k) offset[k + 1] = offset[k] + sectors[k]->dimension();
}

std::span<const int> config_at(const std::vector<BasisPtr>& sectors,
                               const std::vector<std::size_t>& offset, std::size_t label) {
  if (label >= offset.back()) throw ValidationError("configuration label out of range");
  const auto it = std::upper_bound(offset.begin(), offset.end(), label);
  const std::size_t total = static_cast<std::size_t>(it - offset.begin()) - 1;
  return sectors[total]->state(label - offset[total]);
}

}  // namespace

PartitionMap::PartitionMap(BasisPtr basis, std::vector<std::size_t> system_modes)
    : basis_(std::move(basis)), system_modes_(std::move(system_modes)) {
  if (!basis_) throw ValidationError("partition needs a basis");
  const std::size_t M = basis_->num_modes();
  std::sort(system_modes_.begin(), system_modes_.end());
  if (system_modes_.empty() || system_modes_.size() >= M)
    throw ValidationError("system modes must be a nonempty proper subset of the modes");
  if (std::adjacent_find(system_modes_.begin(), system_modes_.end()) != system_modes_.end())
    throw ValidationError("system modes contain duplicates");
  if (system_modes_.back() >= M) throw ValidationError("system mode index out of range");
  for (std::size_t i = 0; i < M; ++i)
    if (!std::binary_search(system_modes_.begin(), system_modes_.end(), i))
      reservoir_modes_.push_back(i);

  const int N = basis_->num_particles();
  for (int k = 0; k <= N; ++k) {
    system_sectors_.push_back(enumerate_basis(system_modes_.size(), k, kNoCap));
    reservoir_sectors_.push_back(enumerate_basis(reservoir_modes_.size(), k, kNoCap));
  }
  build_labels(system_sectors_, system_offset_);
  build_labels(reservoir_sectors_, reservoir_offset_);

  const std::size_t dim = basis_->dimension();
  system_label_.resize(dim);
  reservoir_label_.resize(dim);
  std::vector<int> sys(system_modes_.size());
  std::vector<int> res(reservoir_modes_.size());
  for (std::size_t k = 0; k < dim; ++k) {
    const auto full = basis_->state(k);
    int ns = 0;
    for (std::size_t a = 0; a < sys.size(); ++a) ns += (sys[a] = full[system_modes_[a]]);
    for (std::size_t a = 0; a < res.size(); ++a) res[a] = full[reservoir_modes_[a]];
    system_label_[k] = system_offset_[static_cast<std::size_t>(ns)] +
                       system_sectors_[static_cast<std::size_t>(ns)]->index_of(sys);
    reservoir_label_[k] = reservoir_offset_[static_cast<std::size_t>(N - ns)] +
                          reservoir_sectors_[static_cast<std::size_t>(N - ns)]->index_of(res);
  }
}

std::span<const int> PartitionMap::system_config(std::size_t s) const {
  return config_at(system_sectors_, system_offset_, s);
}

std::span<const int> PartitionMap::reservoir_config(std::size_t r) const {
  return config_at(reservoir_sectors_, reservoir_offset_, r);
}

int PartitionMap::system_total(std::size_t s) const {
  if (s >= system_offset_.back()) throw ValidationError("configuration label out of range");
  const auto it = std::upper_bound(system_offset_.begin(), system_offset_.end(), s);
  return static_cast<int>(it - system_offset_.begin()) - 1;
}

std::size_t PartitionMap::system_index(std::size_t k) const { return system_label_.at(k); }
std::size_t PartitionMap::reservoir_index(std::size_t k) const { return reservoir_label_.at(k); }

PartitionMap build_partition(BasisPtr basis, std::vector<std::size_t> system_modes) {
  return PartitionMap(std::move(basis), std::move(system_modes));
}

Eigen::MatrixXcd ReducedDensityMatrix::dense() const {
  const auto d = static_cast<Eigen::Index>(dimension);
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(d, d);
  for (const auto& b : blocks)
    out.block(static_cast<Eigen::Index>(b.offset), static_cast<Eigen::Index>(b.offset),
              b.rho.rows(), b.rho.cols()) = b.rho;
  return out;
}

cplx ReducedDensityMatrix::trace() const {
  cplx t = 0.0;
  for (const auto& b : blocks) t += b.rho.trace();
  return t;
}

ReducedDensityMatrix reduced_density(const StateVector& psi, const PartitionMap& pm,
                                     bool keep_reservoir) {
  const FockBasis& basis = pm.basis();
  if (psi.basis().num_modes() != basis.num_modes() ||
      psi.basis().num_particles() != basis.num_particles())
    throw SectorMismatch("state and partition belong to different sectors");
  if (std::abs(psi.norm() - 1.0) > 1e-6) {
    std::ostringstream msg;
    msg << "reduced density needs a normalized state (norm " << psi.norm() << ")";
    throw ValidationError(msg.str());
  }
  const int N = basis.num_particles();
  const std::size_t kept_count = keep_reservoir ? pm.reservoir_config_count() : pm.system_config_count();

  // Coefficient blocks C_k[s, r] for kept total k.
  std::vector<Eigen::MatrixXcd> coeff(static_cast<std::size_t>(N) + 1);
  for (int k = 0; k <= N; ++k) {
    const std::size_t rows = keep_reservoir
                                 ? pm.reservoir_block_offset(k + 1) - pm.reservoir_block_offset(k)
                                 : pm.system_block_offset(k + 1) - pm.system_block_offset(k);
    const std::size_t cols = keep_reservoir
                                 ? pm.system_block_offset(N - k + 1) - pm.system_block_offset(N - k)
                                 : pm.reservoir_block_offset(N - k + 1) - pm.reservoir_block_offset(N - k);
    coeff[static_cast<std::size_t>(k)] =
        Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  }
  const auto& amp = psi.amplitudes();
  for (std::size_t idx = 0; idx < basis.dimension(); ++idx) {
    const std::size_t s = pm.system_index(idx);
    const std::size_t r = pm.reservoir_index(idx);
    const int ks = pm.system_total(s);
    if (keep_reservoir) {
      const int kr = N - ks;
      coeff[static_cast<std::size_t>(kr)](
          static_cast<Eigen::Index>(r - pm.reservoir_block_offset(kr)),
          static_cast<Eigen::Index>(s - pm.system_block_offset(ks))) = amp[static_cast<Eigen::Index>(idx)];
    } else {
      coeff[static_cast<std::size_t>(ks)](
          static_cast<Eigen::Index>(s - pm.system_block_offset(ks)),
          static_cast<Eigen::Index>(r - pm.reservoir_block_offset(N - ks))) = amp[static_cast<Eigen::Index>(idx)];
    }
  }

  ReducedDensityMatrix out;
  out.dimension = kept_count;
  for (int k = 0; k <= N; ++k) {
    const auto& c = coeff[static_cast<std::size_t>(k)];
    const std::size_t offset = keep_reservoir ? pm.reservoir_block_offset(k) : pm.system_block_offset(k);
    out.blocks.push_back({k, offset, c * c.adjoint()});
  }
  return out;
}

double entanglement_entropy(const ReducedDensityMatrix& rho) {
  double s = 0.0;
  for (const auto& b : rho.blocks) {
    if (b.rho.size() == 0) continue;
    const Eigen::MatrixXcd h = 0.5 * (b.rho + b.rho.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
      throw ConvergenceError("eigensolver failed on a reduced density block");
    for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k) {
      const double lambda = solver.eigenvalues()[k];
      if (lambda < -1e-12) {
        std::ostringstream msg;
        msg << "reduced density has eigenvalue " << lambda << " in block N_S=" << b.particles;
        throw IntegrityError(msg.str());
      }
      if (lambda < 1e-14) continue;
      s -= lambda * std::log(lambda);
    }
  }
  return s;
}

double entropy_bound(const PartitionMap& pm) {
  return std::log(static_cast<double>(std::min(pm.system_config_count(), pm.reservoir_config_count())));
}

cplx subsystem_expectation(const ReducedDensityMatrix& rho, const Eigen::MatrixXcd& op) {
  const auto d = static_cast<Eigen::Index>(rho.dimension);
  if (op.rows() != d || op.cols() != d) throw ValidationError("operator shape does not match rho_S");
  cplx total = 0.0;
  // Only the diagonal blocks of rho are nonzero.
  for (const auto& b : rho.blocks) {
    const auto o = static_cast<Eigen::Index>(b.offset);
    const auto n = b.rho.rows();
    total += (b.rho * op.block(o, o, n, n)).trace();
  }
  return total;
}

namespace {

Eigen::MatrixXcd number_operator(const PartitionMap& pm, const std::vector<std::size_t>& positions) {
  const std::size_t d = pm.system_config_count();
  Eigen::VectorXcd diag(static_cast<Eigen::Index>(d));
  for (std::size_t s = 0; s < d; ++s) {
    const auto cfg = pm.system_config(s);
    double n = 0.0;
    for (std::size_t p : positions) n += cfg[p];
    diag[static_cast<Eigen::Index>(s)] = n;
  }
  return diag.asDiagonal();
}

}  // namespace

Eigen::MatrixXcd system_number_operator(const PartitionMap& pm) {
  std::vector<std::size_t> all(pm.system_modes().size());
  for (std::size_t a = 0; a < all.size(); ++a) all[a] = a;
  return number_operator(pm, all);
}

Eigen::MatrixXcd system_number_operator(const PartitionMap& pm, std::size_t mode) {
  const auto& modes = pm.system_modes();
  const auto it = std::find(modes.begin(), modes.end(), mode);
  if (it == modes.end()) throw ValidationError("mode is not part of the system");
  return number_operator(pm, {static_cast<std::size_t>(it - modes.begin())});
}

}  // namespace dynbath
