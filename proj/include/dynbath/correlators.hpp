#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dynbath/fock.hpp"
#include "dynbath/propagator.hpp"

namespace dynbath {

enum class CorrelatorKind {
  Lesser,
  Greater,
  Keldysh,
  Spectral,
  DensityForward,       // <n_i(t1) n_j(t2)>
  DensityReversed,      // <n_j(t2) n_i(t1)>
  DensityDisconnected,  // <n_i(t1)> <n_j(t2)>
};

std::string kind_name(CorrelatorKind kind);

struct ModePair {
  std::size_t i = 0;
  std::size_t j = 0;
  bool operator==(const ModePair&) const = default;
};

// Symmetric relative-time grid tau_k = k * step for k = -K..K. The step is an
// even number of base steps so that t +- tau/2 stays on the time lattice.
struct TauGrid {
  double step = 0.0;
  std::int64_t half_count = 0;  // K
  std::int64_t half_steps = 0;  // base steps in step/2

  std::size_t size() const { return static_cast<std::size_t>(2 * half_count + 1); }
  double tau(std::int64_t k) const { return static_cast<double>(k) * step; }
  double max() const { return static_cast<double>(half_count) * step; }
};

// Snaps the requested step to the nearest multiple of 2 dt; requested and
// actual values differ only when the request is off the lattice.
TauGrid make_tau_grid(double tau_max, double tau_step, double time_step);

struct TwoTimeSeries {
  CorrelatorKind kind = CorrelatorKind::Lesser;
  double com_time = 0.0;
  TauGrid grid;
  std::size_t num_modes = 0;
  std::vector<ModePair> pairs;
  Eigen::MatrixXcd values;  // row per pair, column k + K
  double norm_drift = 0.0;  // worst |norm - expected| along the evaluation chain

  std::size_t row(ModePair p) const;
};

struct SectorLadders {
  LadderPtr lower;   // N-1, may be empty when N = 0
  LadderPtr center;  // N
  LadderPtr upper;   // N+1
};

struct GreenFunctions {
  TwoTimeSeries lesser;
  TwoTimeSeries greater;
};

// G^<_ij(t1,t2) = -i <b_j^+(t2) b_i(t1)> and G^>_ij(t1,t2) = -i <b_i(t1) b_j^+(t2)>
// with t1 = t + tau/2 and t2 = t - tau/2.
GreenFunctions single_particle_correlators(const StateVector& psi0, const SectorLadders& ladders,
                                           std::span<const ModePair> pairs, double com_time,
                                           const TauGrid& grid, bool allow_snap = false);

struct KeldyshSpectral {
  TwoTimeSeries keldysh;   // G^> + G^<
  TwoTimeSeries spectral;  // i (G^> - G^<)
};

KeldyshSpectral keldysh_and_spectral(const TwoTimeSeries& lesser, const TwoTimeSeries& greater);

struct DensityCorrelators {
  TwoTimeSeries forward;
  TwoTimeSeries reversed;
  TwoTimeSeries disconnected;
};

DensityCorrelators density_correlators(const StateVector& psi0, const PropagatorLadder& center,
                                       std::span<const ModePair> pairs, double com_time,
                                       const TauGrid& grid, bool allow_snap = false);

// Pointwise a - b on matching grids; used to remove the disconnected part.
TwoTimeSeries subtract(const TwoTimeSeries& a, const TwoTimeSeries& b);

enum class WindowKind { Hann, Rectangular };

std::string window_name(WindowKind kind);
WindowKind parse_window(const std::string& name);
double window_weight(WindowKind kind, double tau, double tau_max);

struct EnergyGrid {
  double start = 0.0;
  double step = 0.0;
  std::size_t count = 0;
  double at(std::size_t k) const { return start + static_cast<double>(k) * step; }
};

// Covers the full band [-pi/dtau, pi/dtau) with oversample * (2K+1) points.
EnergyGrid nyquist_grid(const TauGrid& grid, std::size_t oversample = 4);
EnergyGrid uniform_energy_grid(double e_min, double e_max, double e_step);

struct CorrelatorSpectrum {
  CorrelatorKind kind = CorrelatorKind::Lesser;
  double com_time = 0.0;
  TauGrid grid;
  WindowKind window = WindowKind::Hann;
  EnergyGrid energies;
  std::size_t num_modes = 0;
  std::vector<ModePair> pairs;  // empty for a level trace
  bool traced = false;
  Eigen::MatrixXcd values;      // row per pair (one row when traced), column per energy

  std::size_t row(ModePair p) const;
  Eigen::VectorXd energy_vector() const;
};

// F(E) = sum_k w(tau_k) f(tau_k) e^{i E tau_k} dtau.
CorrelatorSpectrum to_energy(const TwoTimeSeries& series, const EnergyGrid& energies,
                             WindowKind window = WindowKind::Hann);

// Sums the (i,i) rows over all modes.
CorrelatorSpectrum trace_levels(const CorrelatorSpectrum& spectrum);

// (1/2pi) sum_E F(E) dE for one row.
cplx spectral_integral(const CorrelatorSpectrum& spectrum, std::size_t row);

struct RealityDiagnostics {
  double imag_to_real = 0.0;       // max |Im F| / max |Re F|
  double negative_fraction = 0.0;  // -min Re F / max Re F, zero when nonnegative
};

RealityDiagnostics reality_diagnostics(const CorrelatorSpectrum& spectrum, std::size_t row);

void write_spectrum_csv(const std::filesystem::path& path, const CorrelatorSpectrum& spectrum,
                        std::size_t row, cplx scale = 1.0);
void write_series_csv(const std::filesystem::path& path, const TwoTimeSeries& series,
                      std::size_t row);

}  // namespace dynbath
