#include "dynbath/correlators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "dynbath/csv.hpp"
#include "dynbath/error.hpp"

namespace dynbath {

std::string kind_name(CorrelatorKind kind) {
  switch (kind) {
    case CorrelatorKind::Lesser: return "lesser";
    case CorrelatorKind::Greater: return "greater";
    case CorrelatorKind::Keldysh: return "keldysh";
    case CorrelatorKind::Spectral: return "spectral";
    case CorrelatorKind::DensityForward: return "density_forward";
    case CorrelatorKind::DensityReversed: return "density_reversed";
    case CorrelatorKind::DensityDisconnected: return "density_disconnected";
  }
  return "unknown";
}

TauGrid make_tau_grid(double tau_max, double tau_step, double time_step) {
  if (!(tau_step > 0.0) || !(tau_max >= 0.0) || !std::isfinite(tau_max))
    throw ValidationError("tau grid needs tau_max >= 0 and a positive step");
  if (!(time_step > 0.0)) throw ValidationError("time step must be positive");
  TauGrid g;
  g.half_steps = std::max<std::int64_t>(1, std::llround(0.5 * tau_step / time_step));
  g.step = 2.0 * static_cast<double>(g.half_steps) * time_step;
  g.half_count = std::llround(tau_max / g.step);
  return g;
}

std::size_t TwoTimeSeries::row(ModePair p) const {
  auto it = std::find(pairs.begin(), pairs.end(), p);
  if (it == pairs.end()) throw ValidationError("pair not present in the series");
  return static_cast<std::size_t>(it - pairs.begin());
}

std::size_t CorrelatorSpectrum::row(ModePair p) const {
  if (traced) throw ValidationError("a level trace has no pair rows");
  auto it = std::find(pairs.begin(), pairs.end(), p);
  if (it == pairs.end()) throw ValidationError("pair not present in the spectrum");
  return static_cast<std::size_t>(it - pairs.begin());
}

Eigen::VectorXd CorrelatorSpectrum::energy_vector() const {
  Eigen::VectorXd e(static_cast<Eigen::Index>(energies.count));
  for (std::size_t k = 0; k < energies.count; ++k) e[static_cast<Eigen::Index>(k)] = energies.at(k);
  return e;
}

namespace {

struct Prefix {
  // Column m + K holds psi(t + m h), h = tau_step / 2.
  Eigen::MatrixXcd phi;
  double norm_drift = 0.0;
  double com_time = 0.0;
};

Prefix prefix_states(const StateVector& psi0, const PropagatorLadder& ladder, double com_time,
                     const TauGrid& grid, bool allow_snap) {
  if (static_cast<std::size_t>(ladder.rung(0).rows()) != psi0.basis().dimension())
    throw SectorMismatch("state and sector-N ladder differ");
  if (com_time < 0.0) throw ValidationError("center-of-motion time must be nonnegative");
  const SnappedTime t = snap_time(com_time, ladder.time_step(), allow_snap);
  const std::int64_t K = grid.half_count;
  Prefix out;
  out.com_time = t.actual;
  out.phi.resize(psi0.amplitudes().size(), static_cast<Eigen::Index>(grid.size()));
  StateVector cur = evolve_steps(psi0, t.steps - K * grid.half_steps, ladder);
  out.phi.col(0) = cur.amplitudes();
  for (std::int64_t m = 1; m <= 2 * K; ++m) {
    cur = evolve_steps(cur, grid.half_steps, ladder);
    out.phi.col(static_cast<Eigen::Index>(m)) = cur.amplitudes();
  }
  const double n0 = psi0.norm();
  for (Eigen::Index c = 0; c < out.phi.cols(); ++c)
    out.norm_drift = std::max(out.norm_drift, std::abs(out.phi.col(c).norm() - n0));
  return out;
}

void check_pairs(std::span<const ModePair> pairs, std::size_t modes) {
  if (pairs.empty()) throw ValidationError("at least one mode pair is required");
  for (const auto& p : pairs)
    if (p.i >= modes || p.j >= modes) throw ValidationError("mode pair index out of range");
}

void check_ladder(const LadderPtr& ladder, const BasisPtr& basis, const PropagatorLadder& center,
                  const char* which) {
  if (!ladder) throw ValidationError(std::string("missing ladder for sector ") + which);
  if (static_cast<std::size_t>(ladder->rung(0).rows()) != basis->dimension())
    throw SectorMismatch(std::string("ladder for sector ") + which + " has the wrong dimension");
  if (ladder->time_step() != center.time_step())
    throw ValidationError("all sector ladders must share one time step");
}

// Signed base-step counts 2 m h for m = -K..K, optionally reversed in sign.
std::vector<std::int64_t> relative_steps(const TauGrid& grid, int sign) {
  std::vector<std::int64_t> s(grid.size());
  for (std::int64_t m = -grid.half_count; m <= grid.half_count; ++m)
    s[static_cast<std::size_t>(m + grid.half_count)] = sign * 2 * m * grid.half_steps;
  return s;
}

double evolution_drift(const Eigen::MatrixXcd& before, const Eigen::MatrixXcd& after) {
  double worst = 0.0;
  for (Eigen::Index c = 0; c < before.cols(); ++c)
    worst = std::max(worst, std::abs(after.col(c).norm() - before.col(c).norm()));
  return worst;
}

// Column-wise <bra[:, K - m], ket[:, K + m]> for m = -K..K.
Eigen::RowVectorXcd mirrored_overlaps(const Eigen::MatrixXcd& bra, const Eigen::MatrixXcd& ket) {
  const Eigen::Index n = ket.cols();
  Eigen::RowVectorXcd out(n);
  for (Eigen::Index c = 0; c < n; ++c) out[c] = bra.col(n - 1 - c).dot(ket.col(c));
  return out;
}

TwoTimeSeries empty_series(CorrelatorKind kind, double t, const TauGrid& grid, std::size_t modes,
                           std::span<const ModePair> pairs) {
  TwoTimeSeries s;
  s.kind = kind;
  s.com_time = t;
  s.grid = grid;
  s.num_modes = modes;
  s.pairs.assign(pairs.begin(), pairs.end());
  s.values = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(pairs.size()),
                                    static_cast<Eigen::Index>(grid.size()));
  return s;
}

}  // namespace

GreenFunctions single_particle_correlators(const StateVector& psi0, const SectorLadders& ladders,
                                           std::span<const ModePair> pairs, double com_time,
                                           const TauGrid& grid, bool allow_snap) {
  const std::size_t M = psi0.basis().num_modes();
  const int N = psi0.basis().num_particles();
  check_pairs(pairs, M);
  if (!ladders.center) throw ValidationError("missing ladder for sector N");
  const PropagatorLadder& center = *ladders.center;
  if (static_cast<std::size_t>(center.rung(0).rows()) != psi0.basis().dimension())
    throw SectorMismatch("sector-N ladder does not match the state");
  const BasisPtr here = psi0.basis_ptr();
  const BasisPtr up = ladders.upper ? ladders.upper->basis() : nullptr;
  const BasisPtr down = ladders.lower ? ladders.lower->basis() : nullptr;
  if (!up) throw ValidationError("missing ladder for sector N+1");
  check_ladder(ladders.upper, up, center, "N+1");
  if (N > 0) check_ladder(ladders.lower, down, center, "N-1");

  const Prefix pre = prefix_states(psi0, center, com_time, grid, allow_snap);
  GreenFunctions out{empty_series(CorrelatorKind::Lesser, pre.com_time, grid, M, pairs),
                     empty_series(CorrelatorKind::Greater, pre.com_time, grid, M, pairs)};
  double drift = pre.norm_drift;

  std::map<std::size_t, LadderMap> lower_maps;  // b_i : N -> N-1
  std::map<std::size_t, LadderMap> upper_maps;  // b_i : N+1 -> N
  for (const auto& p : pairs) {
    for (std::size_t mode : {p.i, p.j}) {
      if (N > 0 && !lower_maps.count(mode)) lower_maps.emplace(mode, LadderMap(here, down, mode));
      if (!upper_maps.count(mode)) upper_maps.emplace(mode, LadderMap(up, here, mode));
    }
  }

  const auto forward = relative_steps(grid, 1);
  const auto backward = relative_steps(grid, -1);

  if (N > 0) {
    std::map<std::size_t, Eigen::MatrixXcd> bras;  // b_j phi_m
    for (const auto& p : pairs)
      if (!bras.count(p.j)) bras.emplace(p.j, lower_maps.at(p.j).lower_columns(pre.phi));
    std::vector<std::size_t> sources;
    for (const auto& p : pairs)
      if (std::find(sources.begin(), sources.end(), p.i) == sources.end()) sources.push_back(p.i);
    for (std::size_t i : sources) {
      // Z[:, m] = U_{N-1}(-2 m h) b_i phi_m
      const Eigen::MatrixXcd excited = lower_maps.at(i).lower_columns(pre.phi);
      const Eigen::MatrixXcd z = evolve_columns(excited, backward, *ladders.lower);
      drift = std::max(drift, evolution_drift(excited, z));
      for (std::size_t r = 0; r < pairs.size(); ++r) {
        if (pairs[r].i != i) continue;
        const Eigen::MatrixXcd& bra = bras.at(pairs[r].j);
        out.lesser.values.row(static_cast<Eigen::Index>(r)) = cplx(0.0, -1.0) * mirrored_overlaps(bra, z);
      }
    }
  }

  {
    // Bra side of G^>: b_i^+ phi_m in sector N+1.
    std::map<std::size_t, Eigen::MatrixXcd> bras;
    for (const auto& p : pairs)
      if (!bras.count(p.i)) bras.emplace(p.i, upper_maps.at(p.i).raise_columns(pre.phi));
    std::vector<std::size_t> sources;
    for (const auto& p : pairs)
      if (std::find(sources.begin(), sources.end(), p.j) == sources.end()) sources.push_back(p.j);
    for (std::size_t j : sources) {
      // Z[:, m] = U_{N+1}(2 m h) b_j^+ phi_{-m}
      Eigen::MatrixXcd excited = upper_maps.at(j).raise_columns(pre.phi);
      excited = excited.rowwise().reverse().eval();
      const Eigen::MatrixXcd z = evolve_columns(excited, forward, *ladders.upper);
      drift = std::max(drift, evolution_drift(excited, z));
      for (std::size_t r = 0; r < pairs.size(); ++r) {
        if (pairs[r].j != j) continue;
        const Eigen::MatrixXcd& bra = bras.at(pairs[r].i);
        Eigen::RowVectorXcd v(z.cols());
        for (Eigen::Index c = 0; c < z.cols(); ++c) v[c] = bra.col(c).dot(z.col(c));
        out.greater.values.row(static_cast<Eigen::Index>(r)) = cplx(0.0, -1.0) * v;
      }
    }
  }
  out.lesser.norm_drift = drift;
  out.greater.norm_drift = drift;
  return out;
}

namespace {

void check_same_grid(const TwoTimeSeries& a, const TwoTimeSeries& b) {
  if (a.grid.step != b.grid.step || a.grid.half_count != b.grid.half_count ||
      a.com_time != b.com_time || a.pairs != b.pairs || a.num_modes != b.num_modes)
    throw ValidationError("correlator series are on different grids");
}

}  // namespace

KeldyshSpectral keldysh_and_spectral(const TwoTimeSeries& lesser, const TwoTimeSeries& greater) {
  check_same_grid(lesser, greater);
  KeldyshSpectral out{lesser, lesser};
  out.keldysh.kind = CorrelatorKind::Keldysh;
  out.keldysh.values = greater.values + lesser.values;
  out.spectral.kind = CorrelatorKind::Spectral;
  out.spectral.values = cplx(0.0, 1.0) * (greater.values - lesser.values);
  out.keldysh.norm_drift = out.spectral.norm_drift = std::max(lesser.norm_drift, greater.norm_drift);
  return out;
}

DensityCorrelators density_correlators(const StateVector& psi0, const PropagatorLadder& center,
                                       std::span<const ModePair> pairs, double com_time,
                                       const TauGrid& grid, bool allow_snap) {
  const std::size_t M = psi0.basis().num_modes();
  check_pairs(pairs, M);
  const Prefix pre = prefix_states(psi0, center, com_time, grid, allow_snap);
  DensityCorrelators out{empty_series(CorrelatorKind::DensityForward, pre.com_time, grid, M, pairs),
                         empty_series(CorrelatorKind::DensityReversed, pre.com_time, grid, M, pairs),
                         empty_series(CorrelatorKind::DensityDisconnected, pre.com_time, grid, M, pairs)};
  double drift = pre.norm_drift;
  const auto forward = relative_steps(grid, 1);

  std::map<std::size_t, Eigen::MatrixXcd> weighted;  // n_i phi_m
  std::map<std::size_t, Eigen::VectorXd> means;       // <phi_m|n_i|phi_m>
  for (const auto& p : pairs)
    for (std::size_t mode : {p.i, p.j})
      if (!weighted.count(mode)) {
        const Eigen::VectorXd n = mode_occupations(psi0.basis(), mode);
        weighted.emplace(mode, n.asDiagonal() * pre.phi);
        means.emplace(mode, (pre.phi.cwiseAbs2().transpose() * n));
      }

  // Z_j[:, m] = U_N(2 m h) n_j phi_{-m}
  std::map<std::size_t, Eigen::MatrixXcd> z;
  for (const auto& p : pairs)
    for (std::size_t mode : {p.i, p.j})
      if (!z.count(mode)) {
        const Eigen::MatrixXcd excited = weighted.at(mode).rowwise().reverse();
        Eigen::MatrixXcd evolved = evolve_columns(excited, forward, center);
        drift = std::max(drift, evolution_drift(excited, evolved));
        z.emplace(mode, std::move(evolved));
      }

  const Eigen::Index cols = static_cast<Eigen::Index>(grid.size());
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const auto [i, j] = pairs[r];
    const auto row = static_cast<Eigen::Index>(r);
    const Eigen::MatrixXcd& ni_phi = weighted.at(i);
    const Eigen::MatrixXcd& nj_phi = weighted.at(j);
    const Eigen::MatrixXcd& zj = z.at(j);
    const Eigen::MatrixXcd& zi = z.at(i);
    for (Eigen::Index c = 0; c < cols; ++c) {
      // forward[m] = <n_i phi_m, Z_j[:, m]>, reversed[m] = <n_j phi_{-m}, Z_i[:, -m]>
      out.forward.values(row, c) = ni_phi.col(c).dot(zj.col(c));
      out.reversed.values(row, c) = nj_phi.col(cols - 1 - c).dot(zi.col(cols - 1 - c));
      out.disconnected.values(row, c) = means.at(i)[c] * means.at(j)[cols - 1 - c];
    }
  }
  out.forward.norm_drift = out.reversed.norm_drift = out.disconnected.norm_drift = drift;
  return out;
}

TwoTimeSeries subtract(const TwoTimeSeries& a, const TwoTimeSeries& b) {
  check_same_grid(a, b);
  TwoTimeSeries out = a;
  out.values = a.values - b.values;
  return out;
}

std::string window_name(WindowKind kind) {
  return kind == WindowKind::Hann ? "hann" : "rectangular";
}

WindowKind parse_window(const std::string& name) {
  if (name == "hann") return WindowKind::Hann;
  if (name == "rectangular" || name == "rect") return WindowKind::Rectangular;
  throw ValidationError("unknown window kind '" + name + "' (expected hann or rectangular)");
}

double window_weight(WindowKind kind, double tau, double tau_max) {
  if (kind == WindowKind::Rectangular || tau_max <= 0.0) return 1.0;
  const double c = std::cos(0.5 * std::numbers::pi * tau / tau_max);
  return c * c;
}

EnergyGrid nyquist_grid(const TauGrid& grid, std::size_t oversample) {
  if (grid.step <= 0.0) throw ValidationError("tau grid has no step");
  const std::size_t count = std::max<std::size_t>(oversample, 1) * grid.size();
  EnergyGrid e;
  e.start = -std::numbers::pi / grid.step;
  e.step = 2.0 * std::numbers::pi / (grid.step * static_cast<double>(count));
  e.count = count;
  return e;
}

EnergyGrid uniform_energy_grid(double e_min, double e_max, double e_step) {
  if (!(e_step > 0.0) || !(e_max >= e_min)) throw ValidationError("invalid energy grid");
  EnergyGrid e;
  e.start = e_min;
  e.step = e_step;
  e.count = static_cast<std::size_t>(std::floor((e_max - e_min) / e_step + 1e-9)) + 1;
  return e;
}

CorrelatorSpectrum to_energy(const TwoTimeSeries& series, const EnergyGrid& energies,
                             WindowKind window) {
  if (energies.count == 0 || !(energies.step > 0.0)) throw ValidationError("empty energy grid");
  const double dtau = series.grid.step;
  const double e_abs = std::max(std::abs(energies.at(0)), std::abs(energies.at(energies.count - 1)));
  if (e_abs * dtau > std::numbers::pi * (1.0 + 1e-9)) {
    std::ostringstream msg;
    msg << "energy " << e_abs << " exceeds the Nyquist limit pi/dtau = " << std::numbers::pi / dtau;
    throw AliasingError(msg.str());
  }
  const std::int64_t K = series.grid.half_count;
  const double tau_max = series.grid.max();
  std::vector<double> w(series.grid.size());
  for (std::int64_t k = -K; k <= K; ++k)
    w[static_cast<std::size_t>(k + K)] = window_weight(window, series.grid.tau(k), tau_max) * dtau;

  CorrelatorSpectrum out;
  out.kind = series.kind;
  out.com_time = series.com_time;
  out.grid = series.grid;
  out.window = window;
  out.energies = energies;
  out.num_modes = series.num_modes;
  out.pairs = series.pairs;
  const Eigen::Index rows = series.values.rows();
  out.values = Eigen::MatrixXcd::Zero(rows, static_cast<Eigen::Index>(energies.count));

  Eigen::MatrixXcd weighted = series.values;
  for (Eigen::Index c = 0; c < weighted.cols(); ++c) weighted.col(c) *= w[static_cast<std::size_t>(c)];

  for (std::size_t e = 0; e < energies.count; ++e) {
    const double energy = energies.at(e);
    const cplx step = std::polar(1.0, energy * dtau);
    // Walk outwards from tau = 0 so rounding stays symmetric in tau.
    Eigen::VectorXcd acc = weighted.col(static_cast<Eigen::Index>(K));
    cplx up = 1.0;
    for (std::int64_t k = 1; k <= K; ++k) {
      up *= step;
      if ((k & 63) == 0) up = std::polar(1.0, energy * dtau * static_cast<double>(k));
      acc += up * weighted.col(static_cast<Eigen::Index>(K + k)) +
             std::conj(up) * weighted.col(static_cast<Eigen::Index>(K - k));
    }
    out.values.col(static_cast<Eigen::Index>(e)) = acc;
  }
  return out;
}

CorrelatorSpectrum trace_levels(const CorrelatorSpectrum& spectrum) {
  if (spectrum.traced) throw ValidationError("spectrum is already traced");
  CorrelatorSpectrum out = spectrum;
  out.traced = true;
  out.pairs.clear();
  out.values = Eigen::MatrixXcd::Zero(1, spectrum.values.cols());
  for (std::size_t i = 0; i < spectrum.num_modes; ++i) {
    auto it = std::find(spectrum.pairs.begin(), spectrum.pairs.end(), ModePair{i, i});
    if (it == spectrum.pairs.end()) {
      std::ostringstream msg;
      msg << "level trace needs the diagonal pair (" << i + 1 << "," << i + 1 << ")";
      throw ValidationError(msg.str());
    }
    out.values.row(0) += spectrum.values.row(it - spectrum.pairs.begin());
  }
  return out;
}

cplx spectral_integral(const CorrelatorSpectrum& spectrum, std::size_t row) {
  return spectrum.values.row(static_cast<Eigen::Index>(row)).sum() * spectrum.energies.step /
         (2.0 * std::numbers::pi);
}

RealityDiagnostics reality_diagnostics(const CorrelatorSpectrum& spectrum, std::size_t row) {
  const auto v = spectrum.values.row(static_cast<Eigen::Index>(row));
  RealityDiagnostics d;
  const double peak = v.real().maxCoeff();
  if (peak <= 0.0) {
    d.imag_to_real = std::numeric_limits<double>::infinity();
    d.negative_fraction = std::numeric_limits<double>::infinity();
    return d;
  }
  d.imag_to_real = v.imag().cwiseAbs().maxCoeff() / peak;
  d.negative_fraction = std::max(0.0, -v.real().minCoeff()) / peak;
  return d;
}

void write_spectrum_csv(const std::filesystem::path& path, const CorrelatorSpectrum& spectrum,
                        std::size_t row, cplx scale) {
  CsvWriter csv(path, {"E_over_J", "re", "im"});
  for (std::size_t e = 0; e < spectrum.energies.count; ++e) {
    const cplx v = scale * spectrum.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(e));
    csv.row({spectrum.energies.at(e), v.real(), v.imag()});
  }
}

void write_series_csv(const std::filesystem::path& path, const TwoTimeSeries& series, std::size_t row) {
  CsvWriter csv(path, {"Jtau", "re", "im"});
  for (std::int64_t k = -series.grid.half_count; k <= series.grid.half_count; ++k) {
    const cplx v = series.values(static_cast<Eigen::Index>(row),
                                 static_cast<Eigen::Index>(k + series.grid.half_count));
    csv.row({series.grid.tau(k), v.real(), v.imag()});
  }
}

}  // namespace dynbath
