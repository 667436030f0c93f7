#include <doctest.h>

#include <random>

#include "dynbath/error.hpp"
#include "dynbath/partition.hpp"
#include "dynbath/propagator.hpp"
#include "dynbath/states.hpp"
#include "oracles.hpp"

using namespace dynbath;

namespace {

// Partial trace by comparing reservoir occupations tuple by tuple.
Eigen::MatrixXcd brute_reduced(const FockBasis& b, const Eigen::VectorXcd& c,
                               const std::vector<std::size_t>& sys, const PartitionMap& pm) {
  const auto d = static_cast<Eigen::Index>(pm.system_config_count());
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
  auto split = [&](std::size_t k, bool want_system) {
    std::vector<int> part;
    for (std::size_t i = 0; i < b.num_modes(); ++i) {
      const bool in_sys = std::find(sys.begin(), sys.end(), i) != sys.end();
      if (in_sys == want_system) part.push_back(b.state(k)[i]);
    }
    return part;
  };
  auto label = [&](const std::vector<int>& s) {
    for (std::size_t x = 0; x < pm.system_config_count(); ++x) {
      const auto cfg = pm.system_config(x);
      if (std::equal(cfg.begin(), cfg.end(), s.begin(), s.end())) return static_cast<Eigen::Index>(x);
    }
    return Eigen::Index{-1};
  };
  for (std::size_t a = 0; a < b.dimension(); ++a)
    for (std::size_t a2 = 0; a2 < b.dimension(); ++a2) {
      if (split(a, false) != split(a2, false)) continue;
      const auto s = label(split(a, true)), s2 = label(split(a2, true));
      rho(s, s2) += c[static_cast<Eigen::Index>(a)] * std::conj(c[static_cast<Eigen::Index>(a2)]);
    }
  return rho;
}

}  // namespace

TEST_CASE("N=25 configuration counts") {
  auto basis = enumerate_basis(5, 25);
  PartitionMap upper(basis, {2, 3, 4});
  CHECK(upper.system_config_count() == 3276);
  CHECK(upper.system_config_count() == static_cast<std::size_t>(oracle::binomial(28, 3)));
  CHECK(upper.reservoir_config_count() == 351);
  PartitionMap lower(basis, {0, 1});
  CHECK(lower.system_config_count() == 351);
  CHECK(entropy_bound(upper) == doctest::Approx(std::log(351.0)));
  CHECK(entropy_bound(upper) == doctest::Approx(5.861).epsilon(1e-3));
}

TEST_CASE("single particle on two modes") {
  auto basis = enumerate_basis(2, 1);
  PartitionMap pm(basis, {0});
  REQUIRE(pm.system_config_count() == 2);
  REQUIRE(pm.reservoir_config_count() == 2);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(pm.system_config(pm.system_index(k))[0] == basis->state(k)[0]);
    CHECK(pm.reservoir_config(pm.reservoir_index(k))[0] == basis->state(k)[1]);
  }
  StateVector psi(basis, Eigen::VectorXcd::Constant(2, 1.0 / std::sqrt(2.0)));
  const auto rho = reduced_density(psi, pm);
  const Eigen::MatrixXcd dense = rho.dense();
  CHECK(std::abs(dense(0, 0) - 0.5) < 1e-15);
  CHECK(std::abs(dense(1, 1) - 0.5) < 1e-15);
  CHECK(std::abs(dense(0, 1)) == 0.0);
  CHECK(entanglement_entropy(rho) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("labels factor every basis state") {
  auto basis = enumerate_basis(5, 6);
  PartitionMap pm(basis, {1, 3});
  for (std::size_t k = 0; k < basis->dimension(); ++k) {
    const auto s = pm.system_config(pm.system_index(k));
    const auto r = pm.reservoir_config(pm.reservoir_index(k));
    CHECK(s[0] == basis->state(k)[1]);
    CHECK(s[1] == basis->state(k)[3]);
    CHECK(r[0] == basis->state(k)[0]);
    CHECK(pm.system_total(pm.system_index(k)) + r[0] + r[1] + r[2] == 6);
  }
}

TEST_CASE("invalid subsets") {
  auto basis = enumerate_basis(3, 2);
  CHECK_THROWS_AS(PartitionMap(basis, {}), ValidationError);
  CHECK_THROWS_AS(PartitionMap(basis, {0, 1, 2}), ValidationError);
  CHECK_THROWS_AS(PartitionMap(basis, {3}), ValidationError);
  CHECK_THROWS_AS(PartitionMap(basis, {1, 1}), ValidationError);
}

TEST_CASE("reduced density matches the dense partial-trace oracle") {
  std::mt19937_64 rng(41);
  const std::vector<std::pair<std::size_t, int>> sizes{{3, 4}, {4, 3}, {5, 2}, {4, 5}};
  for (auto [M, N] : sizes) {
    auto basis = enumerate_basis(M, N);
    REQUIRE(basis->dimension() <= 100);
    const Eigen::VectorXcd c = oracle::random_state(static_cast<Eigen::Index>(basis->dimension()), rng);
    StateVector psi(basis, c);
    for (std::vector<std::size_t> sys : {std::vector<std::size_t>{0}, {1, 2}, {0, M - 1}}) {
      PartitionMap pm(basis, sys);
      const auto rho = reduced_density(psi, pm);
      const Eigen::MatrixXcd ref = brute_reduced(*basis, c, sys, pm);
      CHECK((rho.dense() - ref).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(std::abs(rho.trace() - 1.0) <= 1e-10);
      // Pure state: both sides carry the same entropy.
      const double s_sys = entanglement_entropy(rho);
      const double s_res = entanglement_entropy(reduced_density(psi, pm, true));
      CHECK(s_sys == doctest::Approx(s_res).epsilon(1e-8));
      CHECK(s_sys <= entropy_bound(pm) + 1e-12);
      const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(rho.dense().rows(), rho.dense().cols());
      CHECK(std::abs(subsystem_expectation(rho, id) - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("occupation state gives a rank-one projector") {
  auto basis = enumerate_basis(4, 4);
  const std::vector<int> occ{1, 2, 0, 1};
  PartitionMap pm(basis, {1, 2});
  const auto rho = reduced_density(occupation_state(basis, occ), pm).dense();
  CHECK(std::abs(rho.trace() - 1.0) < 1e-15);
  CHECK((rho * rho - rho).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("system number operator reproduces full-space expectation over time") {
  HamiltonianParams p;
  p.num_modes = 5;
  p.num_particles = 5;
  auto basis = enumerate_basis(5, 5);
  const auto h = build_hamiltonian(p, basis);
  PropagatorConfig cfg;
  cfg.time_step = choose_time_step(h.max_element(), gershgorin_bound(h), 10, 20.0, 1e-9).time_step;
  cfg.taylor_order = 10;
  cfg.depth = choose_depth(cfg.time_step, 2, 20.0);
  const auto ladder = build_ladder(h, cfg);
  PartitionMap pm(basis, {2, 3, 4});
  const Eigen::MatrixXcd nsys = system_number_operator(pm);
  const Eigen::MatrixXcd n3 = system_number_operator(pm, 2);
  const std::vector<int> occ{5, 0, 0, 0, 0};
  const auto psi0 = occupation_state(basis, occ);
  CHECK(entanglement_entropy(reduced_density(psi0, pm)) <= 1e-10);
  for (double t : {0.0, 0.5, 3.0, 17.0}) {
    const auto psi = evolve_to(psi0, t, ladder, true);
    const auto rho = reduced_density(psi, pm);
    const double direct = number_expectation(2, psi) + number_expectation(3, psi) + number_expectation(4, psi);
    const cplx via_rho = subsystem_expectation(rho, nsys);
    CHECK(via_rho.real() == doctest::Approx(direct).epsilon(1e-10));
    CHECK(std::abs(via_rho.imag()) < 1e-12);
    CHECK(via_rho.real() >= -1e-12);
    CHECK(via_rho.real() <= 5 + 1e-12);
    CHECK(subsystem_expectation(rho, n3).real() == doctest::Approx(number_expectation(2, psi)).epsilon(1e-10));
    // Full-state purity stays one.
    CHECK(std::pow(psi.norm(), 4) == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("full entropy of a two-state ensemble is time invariant") {
  std::mt19937_64 rng(8);
  HamiltonianParams p;
  p.num_modes = 3;
  p.num_particles = 3;
  auto basis = enumerate_basis(3, 3);
  const auto h = build_hamiltonian(p, basis);
  const oracle::Exact exact(h.matrix);
  const Eigen::VectorXcd a = oracle::random_state(10, rng), b = oracle::random_state(10, rng);
  auto entropy_at = [&](double t) {
    const Eigen::VectorXcd at = exact.evolve(a, t), bt = exact.evolve(b, t);
    const Eigen::MatrixXcd rho = 0.3 * at * at.adjoint() + 0.7 * bt * bt.adjoint();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> s(rho);
    double total = 0;
    for (double l : s.eigenvalues()) if (l > 1e-14) total -= l * std::log(l);
    return total;
  };
  const double s0 = entropy_at(0.0);
  for (double t : {1.0, 7.5, 40.0}) CHECK(entropy_at(t) == doctest::Approx(s0).epsilon(1e-6));
}

TEST_CASE("negative eigenvalues are an integrity error") {
  ReducedDensityMatrix rho;
  rho.dimension = 2;
  Eigen::MatrixXcd m(2, 2);
  m << 1.1, 0, 0, -0.1;
  rho.blocks.push_back({0, 0, m});
  CHECK_THROWS_AS(entanglement_entropy(rho), IntegrityError);
}
