#include <doctest.h>

#include <random>

#include "dynbath/error.hpp"
#include "dynbath/thermofit.hpp"

using namespace dynbath;

namespace {

double lorentz(double e, double c, double g, double w) {
  return w * (g / std::numbers::pi) / ((e - c) * (e - c) + g * g);
}

}  // namespace

TEST_CASE("single Lorentzian with one percent noise") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.01);
  std::vector<double> e, y;
  const double peak = lorentz(10, 10, 0.5, 1);
  for (double x = 0; x <= 20.0001; x += 0.02) {
    e.push_back(x);
    y.push_back(lorentz(x, 10, 0.5, 1) + noise(rng) * peak);
  }
  LorentzianOptions opt;
  opt.seed_centers = {9.5};
  opt.min_width = 0.01;
  const auto fit = fit_lorentzians(e, y, 1, opt);
  REQUIRE(fit.converged);
  CHECK(fit.peaks[0].center == doctest::Approx(10).epsilon(0.03));
  CHECK(fit.peaks[0].width == doctest::Approx(0.5).epsilon(0.03));
  CHECK(fit.peaks[0].weight == doctest::Approx(1).epsilon(0.03));
  CHECK(fit.peaks[0].center_error > 0);
}

TEST_CASE("two separated Lorentzians") {
  std::vector<double> e, y;
  for (double x = -5; x <= 25; x += 0.02) {
    e.push_back(x);
    y.push_back(lorentz(x, 0.3, 0.4, 2.0) + lorentz(x, 10.6, 0.8, 0.7));
  }
  LorentzianOptions opt;
  opt.min_width = 0.01;
  const auto fit = fit_lorentzians(e, y, 2, opt);  // seeds 0 and 10
  REQUIRE(fit.peaks.size() == 2);
  CHECK(std::abs(fit.peaks[0].center - 0.3) <= 0.1 * 0.4);
  CHECK(std::abs(fit.peaks[1].center - 10.6) <= 0.1 * 0.8);
  CHECK(fit.peaks[0].weight == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(fit.peaks[1].width == doctest::Approx(0.8).epsilon(1e-4));
  CHECK(fit.peaks[0].center < fit.peaks[1].center);
  CHECK(lorentzian_sum(fit, 10.6) == doctest::Approx(y[static_cast<std::size_t>((10.6 + 5) / 0.02 + 0.5)]).epsilon(1e-3));
}

TEST_CASE("FDT inversion") {
  CHECK(occupation_from_ratio(3.0, 1.0).occupation == doctest::Approx(1.0));
  CHECK(occupation_from_ratio(1.0, 1.0).occupation == doctest::Approx(0.0));
  const auto neg = occupation_from_ratio(0.5, 1.0);
  CHECK(neg.unphysical);
  CHECK(neg.occupation == doctest::Approx(-0.25));
  // G^K = -i A (2n + 1)
  const auto o = occupation_from_fdt(cplx(0, -2.0 * 5.0), 2.0);
  CHECK(o.ratio == doctest::Approx(5.0));
  CHECK(o.occupation == doctest::Approx(2.0));
  CHECK_THROWS_AS(occupation_from_ratio(1.0, 0.0), ValidationError);
}

TEST_CASE("FDT inversion undoes the forward map") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.1, 5.0);
  for (int k = 0; k < 50; ++k) {
    const double a = u(rng), e = u(rng) * 10, t = u(rng) * 20;
    const double n = bose_einstein(e, t);
    const cplx keldysh = cplx(0, -1) * a * (2 * n + 1);
    CHECK(occupation_from_fdt(keldysh, a).occupation == doctest::Approx(n).epsilon(1e-12));
  }
}

TEST_CASE("exact Bose-Einstein points") {
  std::vector<FdtPoint> pts;
  for (double e : {3.0, 10.0, 25.0, 40.0, 80.0}) pts.push_back({e, bose_einstein(e, 50.0), 0.01, false});
  const auto fit = fit_bose_einstein(pts);
  REQUIRE(fit.converged);
  CHECK(fit.temperature == doctest::Approx(50.0).epsilon(1e-6));
  CHECK(fit.beta == doctest::Approx(1 / 50.0).epsilon(1e-6));
  CHECK(fit.point_count == 5);
}

TEST_CASE("Bose-Einstein fit scales with energy") {
  std::vector<FdtPoint> pts, scaled;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> noise(0.0, 0.02);
  for (double e : {2.0, 5.0, 9.0, 14.0}) {
    const double n = bose_einstein(e, 7.0) * (1 + noise(rng));
    pts.push_back({e, n, 0.02 * n, false});
    scaled.push_back({3.5 * e, n, 0.02 * n, false});
  }
  const auto a = fit_bose_einstein(pts), b = fit_bose_einstein(scaled);
  CHECK(b.temperature == doctest::Approx(3.5 * a.temperature).epsilon(1e-8));
  CHECK(b.temperature_error == doctest::Approx(3.5 * a.temperature_error).epsilon(1e-6));
}

TEST_CASE("inconsistent points still return a least-squares temperature") {
  std::vector<FdtPoint> pts{{10.0, bose_einstein(10.0, 5.0), 0.01, false},
                            {20.0, bose_einstein(20.0, 50.0), 0.01, false}};
  const auto fit = fit_bose_einstein(pts);
  CHECK(std::isfinite(fit.temperature));
  CHECK(fit.temperature > 5.0);
  CHECK(fit.temperature < 50.0);
  CHECK(fit.residual_norm > 10.0);
}

TEST_CASE("Bose-Einstein preconditions") {
  std::vector<FdtPoint> one{{10.0, 1.0, 0.1, false}};
  CHECK_THROWS_AS(fit_bose_einstein(one), ValidationError);
  std::vector<FdtPoint> neg{{10.0, -1.0, 0.1, true}, {20.0, -0.5, 0.1, true}};
  CHECK_THROWS_AS(fit_bose_einstein(neg), ValidationError);
}

TEST_CASE("exact exponential ratio gives beta") {
  const double beta = 1.0 / 200.0;
  std::vector<double> e, f, r;
  for (double x = 2; x <= 60; x += 0.5) {
    e.push_back(x);
    const double base = std::exp(-0.01 * (x - 30) * (x - 30)) + 0.2;
    r.push_back(base);
    f.push_back(base * std::exp(beta * x));
  }
  const auto fit = fit_fdt_beta(e, f, r);
  CHECK(fit.beta == doctest::Approx(beta).epsilon(1e-4));
  CHECK(fit.temperature == doctest::Approx(200.0).epsilon(1e-4));
  CHECK(fit.thermal);

  // Multiplying both spectra by a common positive function leaves beta alone.
  std::vector<double> f2 = f, r2 = r;
  for (std::size_t k = 0; k < e.size(); ++k) {
    const double g = 1.0 + 0.5 * std::sin(e[k]);
    f2[k] *= g;
    r2[k] *= g;
  }
  CHECK(fit_fdt_beta(e, f2, r2).beta == doctest::Approx(fit.beta).epsilon(1e-10));
}

TEST_CASE("identical spectra are not thermal") {
  std::vector<double> e, f;
  for (double x = 2; x <= 60; x += 1) {
    e.push_back(x);
    f.push_back(1.0 / x);
  }
  const auto fit = fit_fdt_beta(e, f, f);
  CHECK(fit.beta == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_FALSE(fit.thermal);
  CHECK(std::isinf(fit.temperature));
}

TEST_CASE("beta fit needs five points") {
  const std::vector<double> e{3, 4, 5, 6}, f{1, 1, 1, 1};
  CHECK_THROWS_AS(fit_fdt_beta(e, f, f), ValidationError);
}

TEST_CASE("plateau statistics") {
  std::vector<double> c(50, 2.5);
  const auto s = plateau_stats(c);
  CHECK(s.mean == 2.5);
  CHECK(s.std == 0.0);
  CHECK(s.count == 10);
  std::vector<double> shortseries(20, 1.0);
  CHECK_THROWS_AS(plateau_stats(shortseries, 0.2), ValidationError);
  CHECK_THROWS_AS(plateau_stats(c, 0.0), ValidationError);

  std::mt19937_64 rng(31);
  std::normal_distribution<double> g(1.0, 0.3);
  std::vector<double> noisy(500);
  for (auto& x : noisy) x = g(rng);
  const auto n = plateau_stats(noisy, 0.2);
  CHECK(n.count == 100);
  CHECK(n.std == doctest::Approx(0.3).epsilon(0.2));
}

TEST_CASE("bi-exponential recovery with two percent noise") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.02);
  std::vector<double> t, y;
  const double plateau = 4.0;
  for (double x = 0; x <= 8.0; x += 0.02) {
    t.push_back(x);
    const double dev = 3.0 * std::exp(-x / 0.25) + 0.4 * std::exp(-x / 1.5);
    y.push_back(plateau - dev * (1 + noise(rng)));
  }
  const auto fit = fit_biexponential(t, y, plateau, 0.0);
  REQUIRE(fit.converged);
  CHECK(fit.a1 == doctest::Approx(3.0).epsilon(0.05));
  CHECK(fit.a2 == doctest::Approx(0.4).epsilon(0.05));
  CHECK(fit.tau1 == doctest::Approx(0.25).epsilon(0.05));
  CHECK(fit.tau2 == doctest::Approx(1.5).epsilon(0.05));
  CHECK(fit.tau1 <= fit.tau2);
  CHECK_FALSE(fit.degenerate);
}

TEST_CASE("single exponential data collapses the second amplitude") {
  std::vector<double> t, y;
  for (double x = 0; x <= 6.0; x += 0.05) {
    t.push_back(x);
    y.push_back(2.0 * std::exp(-x / 0.8));
  }
  const auto fit = fit_biexponential(t, y, 0.0, 0.0);
  CHECK(fit.degenerate);
  const double small = std::min(fit.a1, fit.a2), big = std::max(fit.a1, fit.a2);
  CHECK(small <= 1e-3 * big);
  CHECK(big == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("fits are deterministic") {
  std::vector<double> t, y;
  for (double x = 0; x <= 5.0; x += 0.05) {
    t.push_back(x);
    y.push_back(1.0 + 0.7 * std::exp(-x / 0.3) + 0.2 * std::exp(-x / 2.0) + 0.01 * std::sin(37 * x));
  }
  const auto a = fit_biexponential(t, y, 1.0, 0.0, 3);
  const auto b = fit_biexponential(t, y, 1.0, 0.0, 3);
  CHECK(a.a1 == b.a1);
  CHECK(a.tau2 == b.tau2);
}

TEST_CASE("timeline keeps gaps") {
  CorrelatorSpectrum fwd, rev;
  fwd.energies = uniform_energy_grid(-10, 70, 0.5);
  fwd.pairs = {{0, 1}};
  fwd.values.resize(1, static_cast<Eigen::Index>(fwd.energies.count));
  rev = fwd;
  for (std::size_t k = 0; k < fwd.energies.count; ++k) {
    const double e = fwd.energies.at(k);
    rev.values(0, static_cast<Eigen::Index>(k)) = 1.0 / (1 + e * e / 400);
    fwd.values(0, static_cast<Eigen::Index>(k)) = rev.values(0, static_cast<Eigen::Index>(k)) * std::exp(e / 20.0);
  }
  CorrelatorSpectrum zero = fwd;
  zero.values.setZero();
  const std::vector<TimelineInput> in{{1.0, &zero, &zero, 0}, {2.0, &fwd, &rev, 0}};
  const auto out = temperature_timeline(in);
  REQUIRE(out.size() == 2);
  CHECK_FALSE(out[0].fit.has_value());
  CHECK_FALSE(out[0].gap_reason.empty());
  REQUIRE(out[1].fit.has_value());
  CHECK(out[1].fit->temperature == doctest::Approx(20.0).epsilon(1e-8));
}
