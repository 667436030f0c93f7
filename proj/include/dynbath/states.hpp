#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "dynbath/fock.hpp"
#include "dynbath/hamiltonian.hpp"

namespace dynbath {

StateVector occupation_state(BasisPtr basis, std::span<const int> occupation);

enum class PhaseConvention { Positive, Random };

// Eigenstates with E_min <= E <= E_max.
std::vector<std::size_t> window_indices(const EigenSystem& eig, double e_min, double e_max);

// (1/sqrt K) sum over the K eigenstates in [e_min, e_max]. Random phases are
// drawn from a seeded mt19937_64 when requested.
StateVector microcanonical_state(const EigenSystem& eig, double e_min, double e_max,
                                 PhaseConvention phases = PhaseConvention::Positive,
                                 std::uint64_t seed = 0);

struct SpectrumEntry {
  double energy;
  double weight;
};

struct StateSpectrum {
  std::vector<SpectrumEntry> entries;  // ascending energy, weight >= threshold
  double mean_energy = 0.0;
  double width = 0.0;                  // root variance over the full distribution
  double total_weight = 0.0;           // over the full distribution
};

StateSpectrum state_spectrum(const EigenSystem& eig, const StateVector& psi,
                             double threshold = 1e-12);

void write_spectrum_csv(const std::filesystem::path& path, const StateSpectrum& spectrum);

}  // namespace dynbath
