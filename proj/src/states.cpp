#include "dynbath/states.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "dynbath/csv.hpp"
#include "dynbath/error.hpp"

namespace dynbath {

StateVector occupation_state(BasisPtr basis, std::span<const int> occupation) {
  if (!basis) throw ValidationError("occupation state needs a basis");
  const std::size_t idx = basis->index_of(occupation);
  StateVector psi = StateVector::zero(std::move(basis));
  psi.amplitudes()[static_cast<Eigen::Index>(idx)] = 1.0;
  return psi;
}

std::vector<std::size_t> window_indices(const EigenSystem& eig, double e_min, double e_max) {
  std::vector<std::size_t> out;
  for (Eigen::Index k = 0; k < eig.energies.size(); ++k)
    if (eig.energies[k] >= e_min && eig.energies[k] <= e_max) out.push_back(static_cast<std::size_t>(k));
  return out;
}

StateVector microcanonical_state(const EigenSystem& eig, double e_min, double e_max,
                                 PhaseConvention phases, std::uint64_t seed) {
  if (!(e_min <= e_max)) throw ValidationError("energy window must satisfy E_min <= E_max");
  if (eig.energies.size() == 0) throw ValidationError("empty eigensystem");
  const auto picked = window_indices(eig, e_min, e_max);
  if (picked.empty()) {
    const double mid = 0.5 * (e_min + e_max);
    std::vector<double> sorted(eig.energies.data(), eig.energies.data() + eig.energies.size());
    auto it = std::lower_bound(sorted.begin(), sorted.end(), mid);
    std::ostringstream msg;
    msg.precision(10);
    msg << "no eigenvalue in [" << e_min << ", " << e_max << "]; nearest eigenvalues:";
    if (it != sorted.begin()) msg << ' ' << *std::prev(it);
    if (it != sorted.end()) msg << ' ' << *it;
    throw ValidationError(msg.str());
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  Eigen::VectorXcd amp = Eigen::VectorXcd::Zero(eig.vectors.rows());
  const double scale = 1.0 / std::sqrt(static_cast<double>(picked.size()));
  for (std::size_t k : picked) {
    const cplx phase = phases == PhaseConvention::Random ? std::polar(1.0, angle(rng)) : cplx(1.0);
    amp += (scale * phase) * eig.vectors.col(static_cast<Eigen::Index>(k));
  }
  return StateVector(eig.basis, std::move(amp));
}

StateSpectrum state_spectrum(const EigenSystem& eig, const StateVector& psi, double threshold) {
  if (static_cast<std::size_t>(eig.vectors.rows()) != psi.basis().dimension())
    throw SectorMismatch("state and eigensystem belong to different sectors");
  const Eigen::VectorXd w = (eig.vectors.adjoint() * psi.amplitudes()).cwiseAbs2();
  StateSpectrum out;
  out.total_weight = w.sum();
  if (out.total_weight > 0.0) {
    out.mean_energy = w.dot(eig.energies) / out.total_weight;
    const double var =
        w.dot((eig.energies.array() - out.mean_energy).square().matrix()) / out.total_weight;
    out.width = std::sqrt(std::max(var, 0.0));
  }
  for (Eigen::Index k = 0; k < w.size(); ++k)
    if (w[k] >= threshold * out.total_weight && w[k] > 0.0)
      out.entries.push_back({eig.energies[k], w[k]});
  return out;
}

void write_spectrum_csv(const std::filesystem::path& path, const StateSpectrum& spectrum) {
  CsvWriter csv(path, {"E_over_J", "weight"});
  for (const auto& e : spectrum.entries) csv.row({e.energy, e.weight});
}

}  // namespace dynbath
