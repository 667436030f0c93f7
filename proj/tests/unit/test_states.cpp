#include <doctest.h>

#include <random>

#include "dynbath/error.hpp"
#include "dynbath/partition.hpp"
#include "dynbath/propagator.hpp"
#include "dynbath/states.hpp"
#include "oracles.hpp"

using namespace dynbath;

namespace {

struct Model {
  SectorOperator h;
  EigenSystem eig;
};

Model model(std::size_t M, int N) {
  HamiltonianParams p;
  p.num_modes = M;
  p.num_particles = N;
  auto h = build_hamiltonian(p, enumerate_basis(M, N));
  auto eig = diagonalize(h);
  return {std::move(h), std::move(eig)};
}

double energy(const SectorOperator& h, const StateVector& psi) {
  return psi.amplitudes().dot(h.matrix * psi.amplitudes()).real();
}

}  // namespace

TEST_CASE("condensate occupation state on the N=25 sector") {
  auto basis = enumerate_basis(5, 25);
  const std::vector<int> occ{25, 0, 0, 0, 0};
  const auto psi = occupation_state(basis, occ);
  CHECK(psi.amplitudes()[static_cast<Eigen::Index>(basis->index_of(occ))] == cplx(1.0));
  CHECK(psi.norm() == 1.0);
  CHECK(number_expectation(0, psi) == 25.0);
  for (std::size_t i = 1; i < 5; ++i) CHECK(number_expectation(i, psi) == 0.0);
}

TEST_CASE("occupation states are product states") {
  auto basis = enumerate_basis(4, 5);
  for (std::size_t k = 0; k < basis->dimension(); k += 7) {
    const auto psi = occupation_state(basis, basis->state(k));
    for (std::vector<std::size_t> sys : {std::vector<std::size_t>{0}, {1, 3}, {0, 2, 3}}) {
      PartitionMap pm(basis, sys);
      CHECK(entanglement_entropy(reduced_density(psi, pm)) == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("invalid occupation tuples are rejected") {
  auto basis = enumerate_basis(3, 2);
  CHECK_THROWS_AS(occupation_state(basis, std::vector<int>{1, 0, 0}), ValidationError);
  CHECK_THROWS_AS(occupation_state(basis, std::vector<int>{2, 0}), ValidationError);
}

TEST_CASE("single-level window is a stationary eigenstate") {
  const auto m = model(3, 3);
  const double e = m.eig.energies[4];
  const auto psi = microcanonical_state(m.eig, e - 1e-9, e + 1e-9);
  const auto spec = state_spectrum(m.eig, psi);
  REQUIRE(spec.entries.size() == 1);
  CHECK(spec.entries[0].weight == doctest::Approx(1.0));
  CHECK(spec.width == doctest::Approx(0.0).epsilon(1e-6));
  PropagatorConfig cfg;
  cfg.time_step = 0.1 / m.h.max_element();
  cfg.taylor_order = 10;
  cfg.depth = 8;
  const auto ladder = build_ladder(m.h, cfg);
  for (std::int64_t s : {1, 13, 255}) {
    const auto out = evolve_steps(psi, s, ladder);
    CHECK(std::abs(std::abs(psi.dot(out)) - 1.0) < 1e-9);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(number_expectation(i, out) == doctest::Approx(number_expectation(i, psi)).epsilon(1e-9));
  }
}

TEST_CASE("microcanonical window bounds the width") {
  const auto m = model(4, 5);
  const double lo = m.eig.energies[10], hi = m.eig.energies[30];
  const auto idx = window_indices(m.eig, lo, hi);
  CHECK(idx.size() == 21);
  for (auto phases : {PhaseConvention::Positive, PhaseConvention::Random}) {
    const auto psi = microcanonical_state(m.eig, lo, hi, phases, 17);
    CHECK(psi.is_normalized());
    const auto spec = state_spectrum(m.eig, psi);
    CHECK(spec.entries.size() == 21);
    CHECK(spec.width <= (hi - lo) / 2);
    for (const auto& e : spec.entries) CHECK(e.weight == doctest::Approx(1.0 / 21));
    CHECK(spec.mean_energy == doctest::Approx(energy(m.h, psi)).epsilon(1e-8));
  }
  // Positive phases: every eigenbasis coefficient is +1/sqrt(K).
  const auto psi = microcanonical_state(m.eig, lo, hi);
  const Eigen::VectorXcd c = m.eig.vectors.adjoint() * psi.amplitudes();
  for (auto k : idx) CHECK(std::abs(c[static_cast<Eigen::Index>(k)] - 1.0 / std::sqrt(21.0)) < 1e-12);
}

TEST_CASE("random phases are reproducible from the seed") {
  const auto m = model(3, 4);
  const double lo = m.eig.energies[2], hi = m.eig.energies[9];
  const auto a = microcanonical_state(m.eig, lo, hi, PhaseConvention::Random, 5);
  const auto b = microcanonical_state(m.eig, lo, hi, PhaseConvention::Random, 5);
  const auto c = microcanonical_state(m.eig, lo, hi, PhaseConvention::Random, 6);
  CHECK((a.amplitudes() - b.amplitudes()).norm() == 0.0);
  CHECK((a.amplitudes() - c.amplitudes()).norm() > 1e-3);
}

TEST_CASE("empty window names nearby levels") {
  const auto m = model(2, 1);
  try {
    microcanonical_state(m.eig, 100.0, 101.0);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("nearest") != std::string::npos);
  }
}

TEST_CASE("two-eigenstate superposition") {
  const auto m = model(3, 2);
  Eigen::VectorXcd v = (m.eig.vectors.col(1) + m.eig.vectors.col(4)) / std::sqrt(2.0);
  const auto spec = state_spectrum(m.eig, StateVector(m.h.basis, v));
  REQUIRE(spec.entries.size() == 2);
  CHECK(spec.entries[0].weight == doctest::Approx(0.5));
  CHECK(spec.mean_energy == doctest::Approx((m.eig.energies[1] + m.eig.energies[4]) / 2));
}

TEST_CASE("spectrum invariants on a broad state") {
  const auto m = model(5, 6);
  const std::vector<int> occ{6, 0, 0, 0, 0};
  const auto psi = occupation_state(m.h.basis, occ);
  const auto spec = state_spectrum(m.eig, psi);
  CHECK(spec.total_weight == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(spec.mean_energy == doctest::Approx(energy(m.h, psi)).epsilon(1e-8));
  CHECK(spec.mean_energy == doctest::Approx(30.0));  // U N (N-1)
  CHECK(spec.width > 0.0);
  CHECK(spec.width <= spec.mean_energy);
  for (std::size_t k = 1; k < spec.entries.size(); ++k)
    CHECK(spec.entries[k - 1].energy <= spec.entries[k].energy);

  PropagatorConfig cfg;
  const auto choice = choose_time_step(m.h.max_element(), gershgorin_bound(m.h), 10, 64.0, 1e-9);
  cfg.time_step = choice.time_step;
  cfg.taylor_order = 10;
  cfg.depth = choose_depth(cfg.time_step, 2, 64.0);
  const auto ladder = build_ladder(m.h, cfg);
  const auto later = state_spectrum(m.eig, evolve_to(psi, 50.0, ladder, true));
  REQUIRE(later.entries.size() == spec.entries.size());
  for (std::size_t k = 0; k < spec.entries.size(); ++k)
    CHECK(later.entries[k].weight == doctest::Approx(spec.entries[k].weight).epsilon(1e-6));
  CHECK(later.mean_energy == doctest::Approx(spec.mean_energy).epsilon(1e-8));
}
