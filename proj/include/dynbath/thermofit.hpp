#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dynbath/correlators.hpp"

namespace dynbath {

using EnergyWindow = std::pair<double, double>;

struct Peak {
  double center = 0.0;
  double width = 0.0;   // half width gamma
  double weight = 0.0;  // area / (2 pi w(0))
  double center_error = 0.0;
  double width_error = 0.0;
  double weight_error = 0.0;
};

struct PeakSet {
  std::vector<Peak> peaks;     // ascending centers
  Eigen::MatrixXd covariance;  // over (center, width, weight) per peak
  double residual_norm = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string status;
};

struct LorentzianOptions {
  std::vector<double> seed_centers;      // default (i-1) * level_spacing
  double level_spacing = 10.0;
  // Centers stay within this distance of their seeds; <= 0 means half the
  // smallest seed separation (or the level spacing for a single peak).
  double center_freedom = 0.0;
  double min_width = 0.0;                // <= 0 means the window resolution
  double max_width = 0.0;                // <= 0 means center_freedom
  std::optional<EnergyWindow> window;    // default: seeds +- one spacing
  std::uint64_t seed = 0;
  int restarts = 6;
};

// Fits sum_i A_i (g_i/pi) / ((E-E_i)^2 + g_i^2) to the real part of one row.
PeakSet fit_lorentzians(const CorrelatorSpectrum& spectrum, std::size_t row, std::size_t peak_count,
                        const LorentzianOptions& options = {});
// Same model on raw samples; weights are reported as area * area_scale.
PeakSet fit_lorentzians(std::span<const double> energies, std::span<const double> values,
                        std::size_t peak_count, const LorentzianOptions& options,
                        double area_scale = 1.0);

double lorentzian_sum(const PeakSet& peaks, double energy, double area_scale = 1.0);

struct FdtOccupation {
  double ratio = 0.0;       // i G^K / A
  double occupation = 0.0;  // (ratio - 1) / 2
  bool unphysical = false;  // ratio below 1 - tolerance
};

FdtOccupation occupation_from_fdt(cplx keldysh_weight, double spectral_weight, double tolerance = 1e-9);
// Real weight of i G^K instead of G^K.
FdtOccupation occupation_from_ratio(double ik_weight, double spectral_weight, double tolerance = 1e-9);

struct FdtPoint {
  double energy = 0.0;
  double occupation = 0.0;
  double sigma = 1.0;
  bool unphysical = false;
};

// Matches peaks by index; both sets must have the same size.
std::vector<FdtPoint> fdt_points_from_peaks(const PeakSet& spectral, const PeakSet& keldysh_i);

// Pointwise n(E) = (iG^K(E)/A(E) - 1)/2 where A exceeds min_fraction of its
// maximum inside the window; sigma = relative_error * (n + 1/2). The Keldysh
// spectrum holds G^K itself, not i G^K.
std::vector<FdtPoint> fdt_points_pointwise(const CorrelatorSpectrum& spectral, std::size_t a_row,
                                           const CorrelatorSpectrum& keldysh, std::size_t k_row,
                                           EnergyWindow window, double min_fraction = 0.05,
                                           double relative_error = 0.01);

struct TemperatureFit {
  double temperature = std::numeric_limits<double>::quiet_NaN();
  double temperature_error = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double beta_error = std::numeric_limits<double>::quiet_NaN();
  EnergyWindow window{0.0, 0.0};
  double residual_norm = 0.0;
  std::vector<double> normalized_residuals;
  std::size_t point_count = 0;
  bool converged = false;
  bool thermal = false;
  std::string status;
};

double bose_einstein(double energy, double temperature);

// Single-parameter weighted fit of n = 1/(exp(E/T)-1) over points with E > 0.
TemperatureFit fit_bose_einstein(std::span<const FdtPoint> points, std::uint64_t seed = 0);

inline constexpr EnergyWindow kDefaultBetaWindow{2.0, 60.0};

// beta from ln f(E) - ln r(E) = beta E, with f = e^{beta E} r for the e^{iE tau}
// transform. Only energies where f and r share a sign are used; weights are
// min(|f|,|r|) normalized to mean one.
TemperatureFit fit_fdt_beta(const CorrelatorSpectrum& forward, const CorrelatorSpectrum& reversed,
                            std::size_t row, EnergyWindow window = kDefaultBetaWindow);
TemperatureFit fit_fdt_beta(std::span<const double> energies, std::span<const double> forward,
                            std::span<const double> reversed, EnergyWindow window = kDefaultBetaWindow);

struct PlateauStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation
  std::size_t count = 0;
};

PlateauStats plateau_stats(std::span<const double> series, double tail_fraction = 0.2);

struct RelaxationFit {
  double a1 = 0.0, a2 = 0.0, tau1 = 0.0, tau2 = 0.0;
  double a1_error = 0.0, a2_error = 0.0, tau1_error = 0.0, tau2_error = 0.0;
  double plateau = 0.0;
  double sigma_inf = 0.0;
  double residual_norm = 0.0;
  bool converged = false;
  bool degenerate = false;  // tau1 ~ tau2 or one amplitude negligible
  std::string status;
};

// Fits |y - plateau| to a1 e^{-t/tau1} + a2 e^{-t/tau2} + sigma_inf on a log scale.
RelaxationFit fit_biexponential(std::span<const double> times, std::span<const double> values,
                                double plateau, double sigma_inf, std::uint64_t seed = 0);

struct TimelineInput {
  double com_time = 0.0;
  const CorrelatorSpectrum* forward = nullptr;
  const CorrelatorSpectrum* reversed = nullptr;
  std::size_t row = 0;
};

struct TimelineEntry {
  double com_time = 0.0;
  std::optional<TemperatureFit> fit;  // empty for a gap
  std::string gap_reason;
};

std::vector<TimelineEntry> temperature_timeline(std::span<const TimelineInput> inputs,
                                                EnergyWindow window = kDefaultBetaWindow);

void write_fdt_points_csv(const std::filesystem::path& path, std::span<const FdtPoint> points);

}  // namespace dynbath
