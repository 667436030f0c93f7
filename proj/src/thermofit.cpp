#include "dynbath/thermofit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "dynbath/csv.hpp"
#include "dynbath/error.hpp"
#include "dynbath/least_squares.hpp"

namespace dynbath {

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

double lorentzian_sum(const PeakSet& peaks, double energy, double area_scale) {
  double y = 0.0;
  for (const auto& p : peaks.peaks) {
    const double d = energy - p.center;
    y += (p.weight / area_scale) * (p.width / std::numbers::pi) / (d * d + p.width * p.width);
  }
  return y;
}

PeakSet fit_lorentzians(std::span<const double> energies, std::span<const double> values,
                        std::size_t peak_count, const LorentzianOptions& options, double area_scale) {
  if (peak_count < 1) throw ValidationError("peak count must be at least 1");
  if (energies.size() != values.size()) throw ValidationError("energy and value counts differ");

  std::vector<double> seeds = options.seed_centers;
  if (seeds.empty())
    for (std::size_t i = 0; i < peak_count; ++i) seeds.push_back(static_cast<double>(i) * options.level_spacing);
  if (seeds.size() != peak_count) throw ValidationError("one seed center per peak is required");
  std::sort(seeds.begin(), seeds.end());

  double freedom = options.center_freedom;
  if (freedom <= 0.0) {
    freedom = std::abs(options.level_spacing);
    for (std::size_t k = 1; k < seeds.size(); ++k) freedom = std::min(freedom, seeds[k] - seeds[k - 1]);
    freedom *= 0.5;
  }
  if (!(freedom > 0.0)) throw ValidationError("seed centers must be distinct");

  const EnergyWindow window = options.window.value_or(
      EnergyWindow{seeds.front() - 2.0 * freedom, seeds.back() + 2.0 * freedom});
  std::vector<double> e, y;
  for (std::size_t k = 0; k < energies.size(); ++k)
    if (energies[k] >= window.first && energies[k] <= window.second && std::isfinite(values[k])) {
      e.push_back(energies[k]);
      y.push_back(values[k]);
    }
  const std::size_t nparam = 3 * peak_count;
  if (e.size() < nparam + 1) throw ValidationError("too few spectrum points inside the fit window");

  double min_width = options.min_width;
  if (min_width <= 0.0) {
    double de = std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < e.size(); ++k) de = std::min(de, std::abs(e[k] - e[k - 1]));
    min_width = std::isfinite(de) ? 2.0 * de : 1e-3;
  }

  const double max_width = options.max_width > 0.0 ? options.max_width : freedom;
  if (!(max_width > min_width)) throw ValidationError("max_width must exceed min_width");
  const double span = max_width - min_width;
  auto logistic = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };

  // Parameters per peak: (u, v, area) with center = seed + freedom tanh(u)
  // and width = min_width + span * logistic(v).
  const auto m = static_cast<Eigen::Index>(e.size());
  ResidualFn f = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    for (Eigen::Index k = 0; k < m; ++k) {
      double model = 0.0;
      for (std::size_t i = 0; i < peak_count; ++i) {
        const double c = seeds[i] + freedom * std::tanh(p[3 * i]);
        const double g = min_width + span * logistic(p[3 * i + 1]);
        const double d = e[static_cast<std::size_t>(k)] - c;
        model += p[3 * i + 2] * (g / std::numbers::pi) / (d * d + g * g);
      }
      r[k] = model - y[static_cast<std::size_t>(k)];
    }
  };

  auto height_at = [&](double c) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < e.size(); ++k)
      if (std::abs(e[k] - c) < std::abs(e[best] - c)) best = k;
    return y[best];
  };

  std::vector<Eigen::VectorXd> starts;
  const double g0 = std::min(std::max(3.0 * min_width, 0.05 * freedom), min_width + 0.5 * span);
  Eigen::VectorXd base(static_cast<Eigen::Index>(nparam));
  for (std::size_t i = 0; i < peak_count; ++i) {
    base[3 * i] = 0.0;
    base[3 * i + 1] = -std::log(span / (g0 - min_width) - 1.0);
    base[3 * i + 2] = height_at(seeds[i]) * std::numbers::pi * (min_width + g0);
  }
  starts.push_back(base);
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < options.restarts; ++s) {
    Eigen::VectorXd p = base;
    for (std::size_t i = 0; i < peak_count; ++i) {
      p[3 * i] = 0.3 * gauss(rng);
      p[3 * i + 1] += 0.7 * gauss(rng);
      p[3 * i + 2] *= std::exp(0.3 * gauss(rng));
    }
    starts.push_back(p);
  }

  const LeastSquaresResult fit = best_of(f, starts, m);
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "Lorentzian fit did not converge (" << fit.status << "); best residual norm "
        << std::sqrt(2.0 * fit.cost);
    throw ConvergenceError(msg.str());
  }
  const Eigen::MatrixXd cov_raw = parameter_covariance(fit, true);
  Eigen::VectorXd d(static_cast<Eigen::Index>(nparam));
  PeakSet out;
  std::vector<Peak> peaks;
  for (std::size_t i = 0; i < peak_count; ++i) {
    const double t = std::tanh(fit.params[3 * i]);
    Peak pk;
    pk.center = seeds[i] + freedom * t;
    const double l = logistic(fit.params[3 * i + 1]);
    pk.width = min_width + span * l;
    pk.weight = fit.params[3 * i + 2] * area_scale;
    d[3 * i] = freedom * (1.0 - t * t);
    d[3 * i + 1] = span * l * (1.0 - l);
    d[3 * i + 2] = area_scale;
    peaks.push_back(pk);
  }
  const Eigen::MatrixXd cov = d.asDiagonal() * cov_raw * d.asDiagonal();
  for (std::size_t i = 0; i < peak_count; ++i) {
    peaks[i].center_error = std::sqrt(std::max(0.0, cov(3 * i, 3 * i)));
    peaks[i].width_error = std::sqrt(std::max(0.0, cov(3 * i + 1, 3 * i + 1)));
    peaks[i].weight_error = std::sqrt(std::max(0.0, cov(3 * i + 2, 3 * i + 2)));
  }
  // Seeds are sorted and centers cannot cross, so peaks are already ascending.
  out.peaks = std::move(peaks);
  out.covariance = cov;
  out.residual_norm = std::sqrt(2.0 * fit.cost);
  out.converged = fit.converged;
  out.iterations = fit.iterations;
  out.status = fit.status;
  return out;
}

PeakSet fit_lorentzians(const CorrelatorSpectrum& spectrum, std::size_t row, std::size_t peak_count,
                        const LorentzianOptions& options) {
  if (row >= static_cast<std::size_t>(spectrum.values.rows())) throw ValidationError("row out of range");
  const Eigen::VectorXd e = spectrum.energy_vector();
  const Eigen::VectorXd y = spectrum.values.row(static_cast<Eigen::Index>(row)).real().transpose();
  LorentzianOptions opts = options;
  if (opts.min_width <= 0.0 && spectrum.grid.max() > 0.0)
    opts.min_width = std::numbers::pi / (2.0 * spectrum.grid.max());
  // Integral of F over E is 2 pi w(0) f(0); both windows have w(0) = 1.
  const double w0 = window_weight(spectrum.window, 0.0, spectrum.grid.max());
  return fit_lorentzians(std::span<const double>(e.data(), static_cast<std::size_t>(e.size())),
                         std::span<const double>(y.data(), static_cast<std::size_t>(y.size())),
                         peak_count, opts, 1.0 / (2.0 * std::numbers::pi * w0));
}

FdtOccupation occupation_from_ratio(double ik_weight, double spectral_weight, double tolerance) {
  if (spectral_weight == 0.0 || !std::isfinite(spectral_weight))
    throw ValidationError("spectral weight must be finite and nonzero");
  FdtOccupation out;
  out.ratio = ik_weight / spectral_weight;
  out.occupation = 0.5 * (out.ratio - 1.0);
  out.unphysical = out.ratio < 1.0 - tolerance;
  return out;
}

FdtOccupation occupation_from_fdt(cplx keldysh_weight, double spectral_weight, double tolerance) {
  return occupation_from_ratio((cplx(0.0, 1.0) * keldysh_weight).real(), spectral_weight, tolerance);
}

std::vector<FdtPoint> fdt_points_from_peaks(const PeakSet& spectral, const PeakSet& keldysh_i) {
  if (spectral.peaks.size() != keldysh_i.peaks.size())
    throw ValidationError("spectral and Keldysh fits have different peak counts");
  std::vector<FdtPoint> out;
  for (std::size_t k = 0; k < spectral.peaks.size(); ++k) {
    const Peak& a = spectral.peaks[k];
    const Peak& g = keldysh_i.peaks[k];
    const FdtOccupation occ = occupation_from_ratio(g.weight, a.weight);
    FdtPoint p;
    p.energy = a.center;
    p.occupation = occ.occupation;
    p.unphysical = occ.unphysical;
    const double rel_a = a.weight_error / std::abs(a.weight);
    const double rel_g = g.weight_error / std::abs(g.weight);
    p.sigma = 0.5 * std::abs(occ.ratio) * std::sqrt(rel_a * rel_a + rel_g * rel_g);
    out.push_back(p);
  }
  return out;
}

std::vector<FdtPoint> fdt_points_pointwise(const CorrelatorSpectrum& spectral, std::size_t a_row,
                                           const CorrelatorSpectrum& keldysh, std::size_t k_row,
                                           EnergyWindow window, double min_fraction,
                                           double relative_error) {
  if (spectral.energies.count != keldysh.energies.count ||
      spectral.energies.start != keldysh.energies.start || spectral.energies.step != keldysh.energies.step)
    throw ValidationError("spectral and Keldysh spectra are on different energy grids");
  const auto a = spectral.values.row(static_cast<Eigen::Index>(a_row)).real();
  const Eigen::RowVectorXcd gk = keldysh.values.row(static_cast<Eigen::Index>(k_row));
  double a_max = 0.0;
  for (std::size_t k = 0; k < spectral.energies.count; ++k) {
    const double e = spectral.energies.at(k);
    if (e >= window.first && e <= window.second) a_max = std::max(a_max, a[static_cast<Eigen::Index>(k)]);
  }
  std::vector<FdtPoint> out;
  if (a_max <= 0.0) return out;
  for (std::size_t k = 0; k < spectral.energies.count; ++k) {
    const double e = spectral.energies.at(k);
    const double ak = a[static_cast<Eigen::Index>(k)];
    if (e < window.first || e > window.second || ak < min_fraction * a_max) continue;
    const FdtOccupation occ = occupation_from_fdt(gk[static_cast<Eigen::Index>(k)], ak);
    out.push_back({e, occ.occupation, relative_error * (std::abs(occ.occupation) + 0.5), occ.unphysical});
  }
  return out;
}

double bose_einstein(double energy, double temperature) {
  return 1.0 / std::expm1(energy / temperature);
}

TemperatureFit fit_bose_einstein(std::span<const FdtPoint> points, std::uint64_t seed) {
  std::vector<FdtPoint> usable;
  for (const auto& p : points)
    if (p.energy > 0.0 && std::isfinite(p.occupation) && p.sigma > 0.0) usable.push_back(p);
  if (usable.size() < 2) throw ValidationError("Bose-Einstein fit needs at least 2 points with E > 0");
  std::vector<double> guesses;
  for (const auto& p : usable)
    if (p.occupation > 0.0) guesses.push_back(p.energy / std::log1p(1.0 / p.occupation));
  if (guesses.empty()) throw ValidationError("all occupations are negative");

  const auto m = static_cast<Eigen::Index>(usable.size());
  ResidualFn f = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    const double t = std::exp(p[0]);
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto& q = usable[static_cast<std::size_t>(k)];
      r[k] = (bose_einstein(q.energy, t) - q.occupation) / q.sigma;
    }
  };
  const double t0 = median(guesses);
  std::vector<Eigen::VectorXd> starts;
  for (double factor : {1.0, 0.3, 3.0}) starts.push_back(Eigen::VectorXd::Constant(1, std::log(t0 * factor)));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int s = 0; s < 3; ++s) starts.push_back(Eigen::VectorXd::Constant(1, std::log(t0) + gauss(rng)));
  const LeastSquaresResult fit = best_of(f, starts, m);

  TemperatureFit out;
  out.point_count = usable.size();
  out.window = {usable.front().energy, usable.front().energy};
  for (const auto& p : usable) {
    out.window.first = std::min(out.window.first, p.energy);
    out.window.second = std::max(out.window.second, p.energy);
  }
  out.converged = fit.converged;
  out.status = fit.status;
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "Bose-Einstein fit did not converge (" << fit.status << ")";
    throw ConvergenceError(msg.str());
  }
  Eigen::MatrixXd cov = parameter_covariance(fit, false);
  const Eigen::Index dof = m - 1;
  if (dof > 0) cov *= std::max(1.0, 2.0 * fit.cost / static_cast<double>(dof));
  out.temperature = std::exp(fit.params[0]);
  out.temperature_error = out.temperature * std::sqrt(cov(0, 0));
  if (!std::isfinite(out.temperature_error)) {
    std::ostringstream msg;
    msg << "Bose-Einstein fit is flat in T near T = " << out.temperature << "; no finite standard error";
    throw ConvergenceError(msg.str());
  }
  out.beta = 1.0 / out.temperature;
  out.beta_error = out.temperature_error / (out.temperature * out.temperature);
  out.residual_norm = std::sqrt(2.0 * fit.cost);
  for (Eigen::Index k = 0; k < m; ++k) out.normalized_residuals.push_back(-fit.residuals[k]);
  out.thermal = std::isfinite(out.temperature) && out.temperature > 0.0;
  return out;
}

TemperatureFit fit_fdt_beta(std::span<const double> energies, std::span<const double> forward,
                            std::span<const double> reversed, EnergyWindow window) {
  if (energies.size() != forward.size() || energies.size() != reversed.size())
    throw ValidationError("forward and reversed spectra have different lengths");
  std::vector<double> e, y, w;
  for (std::size_t k = 0; k < energies.size(); ++k) {
    const double f = forward[k], r = reversed[k];
    if (energies[k] < window.first || energies[k] > window.second) continue;
    if (!std::isfinite(f) || !std::isfinite(r) || f * r <= 0.0) continue;
    e.push_back(energies[k]);
    y.push_back(std::log(std::abs(f)) - std::log(std::abs(r)));
    w.push_back(std::min(std::abs(f), std::abs(r)));
  }
  if (e.size() < 5) {
    std::ostringstream msg;
    msg << "only " << e.size() << " usable energy points in [" << window.first << ", "
        << window.second << "]; at least 5 are required";
    throw ValidationError(msg.str());
  }
  const double mean_w = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  double swee = 0.0, swey = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    w[k] /= mean_w;
    swee += w[k] * e[k] * e[k];
    swey += w[k] * e[k] * y[k];
  }
  TemperatureFit out;
  out.window = window;
  out.point_count = e.size();
  out.beta = swey / swee;
  double ss = 0.0;
  std::vector<double> resid(e.size());
  for (std::size_t k = 0; k < e.size(); ++k) {
    resid[k] = y[k] - out.beta * e[k];
    ss += w[k] * resid[k] * resid[k];
  }
  const double s2 = ss / static_cast<double>(e.size() - 1);
  out.beta_error = std::sqrt(s2 / swee);
  out.residual_norm = std::sqrt(ss);
  const double s = std::sqrt(s2);
  for (std::size_t k = 0; k < e.size(); ++k)
    out.normalized_residuals.push_back(s > 0.0 ? resid[k] * std::sqrt(w[k]) / s : 0.0);
  out.converged = true;
  if (out.beta > 0.0) {
    out.thermal = true;
    out.temperature = 1.0 / out.beta;
    out.temperature_error = out.beta_error / (out.beta * out.beta);
    out.status = "thermal";
  } else {
    out.thermal = false;
    out.temperature = std::numeric_limits<double>::infinity();
    out.temperature_error = std::numeric_limits<double>::infinity();
    out.status = "not thermal: beta <= 0";
  }
  return out;
}

TemperatureFit fit_fdt_beta(const CorrelatorSpectrum& forward, const CorrelatorSpectrum& reversed,
                            std::size_t row, EnergyWindow window) {
  if (forward.energies.count != reversed.energies.count ||
      forward.energies.start != reversed.energies.start || forward.energies.step != reversed.energies.step)
    throw ValidationError("forward and reversed spectra are on different energy grids");
  const double lo = forward.energies.at(0);
  const double hi = forward.energies.at(forward.energies.count - 1);
  if (window.first < lo || window.second > hi) throw ValidationError("fit window lies outside the energy grid");
  const Eigen::VectorXd e = forward.energy_vector();
  const Eigen::VectorXd f = forward.values.row(static_cast<Eigen::Index>(row)).real().transpose();
  const Eigen::VectorXd r = reversed.values.row(static_cast<Eigen::Index>(row)).real().transpose();
  const auto n = static_cast<std::size_t>(e.size());
  return fit_fdt_beta({e.data(), n}, {f.data(), n}, {r.data(), n}, window);
}

PlateauStats plateau_stats(std::span<const double> series, double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0)) throw ValidationError("tail fraction must lie in (0, 1]");
  const auto count = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(series.size()) - 1e-9));
  if (count < 10) {
    std::ostringstream msg;
    msg << "plateau tail has " << count << " points; at least 10 are required";
    throw ValidationError(msg.str());
  }
  const auto tail = series.subspan(series.size() - count);
  PlateauStats out;
  out.count = count;
  out.mean = std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(count);
  double ss = 0.0;
  for (double v : tail) ss += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(ss / static_cast<double>(count - 1));
  return out;
}

RelaxationFit fit_biexponential(std::span<const double> times, std::span<const double> values,
                                double plateau, double sigma_inf, std::uint64_t seed) {
  if (times.size() != values.size()) throw ValidationError("time and value counts differ");
  if (!(sigma_inf >= 0.0) || !std::isfinite(plateau)) throw ValidationError("invalid plateau parameters");
  std::vector<double> t, z;
  for (std::size_t k = 0; k < times.size(); ++k)
    if (std::isfinite(times[k]) && std::isfinite(values[k])) {
      t.push_back(times[k]);
      z.push_back(std::abs(values[k] - plateau));
    }
  if (t.size() < 8) throw ValidationError("bi-exponential fit needs at least 8 points");
  const double z_max = *std::max_element(z.begin(), z.end());
  if (!(z_max > 0.0)) throw ValidationError("series does not deviate from the plateau");
  const double floor = std::max(1e-12 * z_max, 1e-300);
  const double t0 = *std::min_element(t.begin(), t.end());
  const double t1 = *std::max_element(t.begin(), t.end());
  double dt_min = t1 - t0;
  {
    std::vector<double> sorted = t;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k = 1; k < sorted.size(); ++k)
      if (sorted[k] > sorted[k - 1]) dt_min = std::min(dt_min, sorted[k] - sorted[k - 1]);
  }
  if (!(t1 > t0)) throw ValidationError("bi-exponential fit needs distinct times");

  const auto m = static_cast<Eigen::Index>(t.size());
  // p = (ln a1, ln a2, ln tau1, ln tau2)
  ResidualFn f = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    const double a1 = std::exp(p[0]), a2 = std::exp(p[1]);
    const double tau1 = std::exp(p[2]), tau2 = std::exp(p[3]);
    for (Eigen::Index k = 0; k < m; ++k) {
      const double tk = t[static_cast<std::size_t>(k)];
      const double model = a1 * std::exp(-tk / tau1) + a2 * std::exp(-tk / tau2) + sigma_inf;
      r[k] = std::log(std::max(z[static_cast<std::size_t>(k)], floor)) - std::log(model);
    }
  };

  std::vector<double> scales;
  const double lo = std::max(dt_min, 1e-6 * (t1 - t0));
  const double hi = t1 - t0;
  for (int k = 0; k < 7; ++k) scales.push_back(lo * std::pow(hi / lo, k / 6.0));
  std::vector<Eigen::VectorXd> starts;
  for (std::size_t a = 0; a < scales.size(); ++a)
    for (std::size_t b = a + 1; b < scales.size(); ++b) {
      Eigen::VectorXd p(4);
      p << std::log(0.7 * z_max), std::log(0.3 * z_max), std::log(scales[a]), std::log(scales[b]);
      starts.push_back(p);
    }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t grid_starts = starts.size();
  for (std::size_t s = 0; s < 6; ++s) {
    Eigen::VectorXd p = starts[s * grid_starts / 6];
    for (Eigen::Index k = 0; k < 4; ++k) p[k] += 0.5 * gauss(rng);
    starts.push_back(p);
  }
  const LeastSquaresResult fit = best_of(f, starts, m);
  if (!fit.converged) {
    std::ostringstream msg;
    msg << "bi-exponential fit did not converge (" << fit.status << ")";
    throw ConvergenceError(msg.str());
  }
  const Eigen::MatrixXd cov = parameter_covariance(fit, true);

  RelaxationFit out;
  out.plateau = plateau;
  out.sigma_inf = sigma_inf;
  out.converged = true;
  out.status = fit.status;
  out.residual_norm = std::sqrt(2.0 * fit.cost);
  std::array<double, 4> v{}, err{};
  for (int k = 0; k < 4; ++k) {
    v[k] = std::exp(fit.params[k]);
    err[k] = v[k] * std::sqrt(std::max(0.0, cov(k, k)));
  }
  if (v[2] > v[3]) {
    std::swap(v[0], v[1]);
    std::swap(err[0], err[1]);
    std::swap(v[2], v[3]);
    std::swap(err[2], err[3]);
  }
  out.a1 = v[0];
  out.a2 = v[1];
  out.tau1 = v[2];
  out.tau2 = v[3];
  out.a1_error = err[0];
  out.a2_error = err[1];
  out.tau1_error = err[2];
  out.tau2_error = err[3];
  if (std::abs(std::log(out.tau2 / out.tau1)) < 0.02) {
    // Both terms describe one decay; report it as a single exponential.
    out.a1 += out.a2;
    out.a1_error = std::hypot(out.a1_error, out.a2_error);
    out.a2 = 0.0;
    out.a2_error = 0.0;
    out.degenerate = true;
    out.status += "; tau1 ~ tau2, single exponential";
  } else if (out.a2 < 1e-3 * out.a1 || out.a1 < 1e-3 * out.a2) {
    out.degenerate = true;
    out.status += "; one amplitude negligible";
  }
  return out;
}

std::vector<TimelineEntry> temperature_timeline(std::span<const TimelineInput> inputs, EnergyWindow window) {
  std::vector<TimelineEntry> out;
  for (const auto& in : inputs) {
    TimelineEntry entry;
    entry.com_time = in.com_time;
    if (!in.forward || !in.reversed) {
      entry.gap_reason = "missing spectra";
      out.push_back(std::move(entry));
      continue;
    }
    try {
      entry.fit = fit_fdt_beta(*in.forward, *in.reversed, in.row, window);
    } catch (const std::runtime_error& e) {
      entry.gap_reason = e.what();
    }
    out.push_back(std::move(entry));
  }
  return out;
}

void write_fdt_points_csv(const std::filesystem::path& path, std::span<const FdtPoint> points) {
  CsvWriter csv(path, {"E_over_J", "n_B", "sigma"});
  for (const auto& p : points) csv.row({p.energy, p.occupation, p.sigma});
}

}  // namespace dynbath
