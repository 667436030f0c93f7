#include <doctest.h>

#include <random>

#include "dynbath/error.hpp"
#include "dynbath/fock.hpp"
#include "oracles.hpp"

using namespace dynbath;

TEST_CASE("N=25, M=5 sector has dimension 23751") {
  CHECK(sector_dimension(5, 25) == static_cast<std::uint64_t>(oracle::binomial(29, 4)));
  CHECK(sector_dimension(5, 25) == 23751);
  FockBasis b(5, 25);
  CHECK(b.dimension() == 23751);
}

TEST_CASE("vacuum sector") {
  FockBasis b(5, 0);
  REQUIRE(b.dimension() == 1);
  for (int n : b.state(0)) CHECK(n == 0);
}

TEST_CASE("two modes two particles in decreasing order") {
  FockBasis b(2, 2);
  REQUIRE(b.dimension() == 3);
  CHECK(std::vector<int>(b.state(0).begin(), b.state(0).end()) == std::vector<int>{2, 0});
  CHECK(std::vector<int>(b.state(1).begin(), b.state(1).end()) == std::vector<int>{1, 1});
  CHECK(std::vector<int>(b.state(2).begin(), b.state(2).end()) == std::vector<int>{0, 2});
}

TEST_CASE("dimension formula and ordering match exhaustive enumeration") {
  for (std::size_t M = 1; M <= 6; ++M)
    for (int N = 0; N <= 30; ++N) {
      const auto expected = static_cast<std::uint64_t>(oracle::binomial(N + static_cast<int>(M) - 1, static_cast<int>(M) - 1));
      CHECK(sector_dimension(M, N) == expected);
      if (expected > 3000) continue;
      const auto brute = oracle::enumerate(M, N);
      FockBasis b(M, N);
      REQUIRE(b.dimension() == brute.size());
      for (std::size_t k = 0; k < brute.size(); ++k) {
        CHECK(std::equal(brute[k].begin(), brute[k].end(), b.state(k).begin()));
        CHECK(b.index_of(b.state(k)) == k);
      }
    }
}

TEST_CASE("index lookup rejects foreign tuples") {
  FockBasis b(3, 4);
  CHECK_FALSE(b.find(std::vector<int>{1, 1, 1}).has_value());
  CHECK_FALSE(b.find(std::vector<int>{5, -1, 0}).has_value());
  CHECK_THROWS_AS(b.index_of(std::vector<int>{1, 1}), ValidationError);
}

TEST_CASE("dimension cap") {
  CHECK_THROWS_AS(FockBasis(5, 25, 1000), CapacityError);
  CHECK_NOTHROW(FockBasis(5, 25, 23751));
  CHECK_THROWS_AS(FockBasis(0, 3), ValidationError);
  CHECK_THROWS_AS(FockBasis(3, -1), ValidationError);
}

TEST_CASE("ladder rules on small states") {
  auto b2 = enumerate_basis(2, 2);
  auto b1 = enumerate_basis(2, 1);
  auto b0 = enumerate_basis(2, 0);
  const std::vector<int> twenty{2, 0};
  const StateVector psi = [&] {
    StateVector s = StateVector::zero(b2);
    s.amplitudes()[static_cast<Eigen::Index>(b2->index_of(twenty))] = 1.0;
    return s;
  }();

  const StateVector a1 = apply_annihilation(0, psi, b1);
  CHECK(a1.amplitudes()[static_cast<Eigen::Index>(b1->index_of(std::vector<int>{1, 0}))].real() ==
        doctest::Approx(std::sqrt(2.0)));
  CHECK(a1.norm() == doctest::Approx(std::sqrt(2.0)));

  const StateVector a2 = apply_annihilation(1, psi, b1);
  CHECK(a2.norm() == 0.0);

  StateVector vac = StateVector::zero(b0);
  vac.amplitudes()[0] = 1.0;
  const StateVector c1 = apply_creation(0, vac, b1);
  CHECK(c1.amplitudes()[static_cast<Eigen::Index>(b1->index_of(std::vector<int>{1, 0}))].real() == doctest::Approx(1.0));
  const StateVector c2 = apply_creation(0, c1, b2);
  CHECK(c2.amplitudes()[static_cast<Eigen::Index>(b2->index_of(twenty))].real() == doctest::Approx(std::sqrt(2.0)));

  const StateVector n1 = apply_number(0, psi);
  CHECK(n1.amplitudes()[0].real() == doctest::Approx(2.0));

  CHECK_THROWS_AS(apply_annihilation(0, psi, b2), SectorMismatch);
  CHECK_THROWS_AS(apply_creation(0, psi, b1), SectorMismatch);
}

TEST_CASE("number expectation on an equal superposition") {
  auto b = enumerate_basis(2, 2);
  StateVector psi = StateVector::zero(b);
  psi.amplitudes()[static_cast<Eigen::Index>(b->index_of(std::vector<int>{2, 0}))] = 1.0 / std::sqrt(2.0);
  psi.amplitudes()[static_cast<Eigen::Index>(b->index_of(std::vector<int>{0, 2}))] = 1.0 / std::sqrt(2.0);
  CHECK(number_expectation(0, psi) == doctest::Approx(1.0));
}

TEST_CASE("random states: norm identity, number conservation, adjoint pairing") {
  std::mt19937_64 rng(11);
  for (std::size_t M : {2u, 3u, 5u})
    for (int N : {1, 3, 6}) {
      auto hi = enumerate_basis(M, N);
      auto lo = enumerate_basis(M, N - 1);
      StateVector psi(hi, oracle::random_state(static_cast<Eigen::Index>(hi->dimension()), rng));
      StateVector phi(lo, oracle::random_state(static_cast<Eigen::Index>(lo->dimension()), rng));
      double total = 0.0;
      for (std::size_t i = 0; i < M; ++i) {
        const StateVector down = apply_annihilation(i, psi, lo);
        CHECK(down.amplitudes().squaredNorm() == doctest::Approx(number_expectation(i, psi)).epsilon(1e-12));
        CHECK(psi.dot(apply_number(i, psi)).imag() == doctest::Approx(0.0).epsilon(1e-14));
        total += number_expectation(i, psi);
        // <phi| b_i |psi> = conj(<psi| b_i^+ |phi>)
        const cplx lhs = phi.dot(down);
        const cplx rhs = std::conj(psi.dot(apply_creation(i, phi, hi)));
        CHECK(std::abs(lhs - rhs) < 1e-12);
      }
      CHECK(total == doctest::Approx(static_cast<double>(N)).epsilon(1e-12));
    }
}

TEST_CASE("creation matrix is the adjoint of annihilation up to dimension 500") {
  for (std::size_t M : {2u, 3u, 4u, 5u})
    for (int N = 1; N <= 8; ++N) {
      auto hi = enumerate_basis(M, N);
      auto lo = enumerate_basis(M, N - 1);
      if (hi->dimension() > 500) continue;
      for (std::size_t i = 0; i < M; ++i) {
        LadderMap map(hi, lo, i);
        const auto dh = static_cast<Eigen::Index>(hi->dimension());
        const auto dl = static_cast<Eigen::Index>(lo->dimension());
        const Eigen::MatrixXcd a = map.lower_columns(Eigen::MatrixXcd::Identity(dh, dh));
        const Eigen::MatrixXcd c = map.raise_columns(Eigen::MatrixXcd::Identity(dl, dl));
        CHECK((c - a.adjoint()).cwiseAbs().maxCoeff() == 0.0);
        CHECK((a.real() - oracle::annihilation(M, N, i)).cwiseAbs().maxCoeff() < 1e-15);
      }
    }
}

TEST_CASE("commutator b b^+ - b^+ b is the identity on small sectors") {
  for (std::size_t M = 1; M <= 4; ++M)
    for (int N = 0; N <= 6; ++N) {
      auto here = enumerate_basis(M, N);
      auto up = enumerate_basis(M, N + 1);
      const auto d = static_cast<Eigen::Index>(here->dimension());
      for (std::size_t i = 0; i < M; ++i) {
        LadderMap raise(up, here, i);
        Eigen::MatrixXcd bbdag = raise.lower_columns(raise.raise_columns(Eigen::MatrixXcd::Identity(d, d)));
        Eigen::MatrixXcd bdagb = Eigen::MatrixXcd::Zero(d, d);
        if (N > 0) {
          auto down = enumerate_basis(M, N - 1);
          LadderMap lower(here, down, i);
          bdagb = lower.raise_columns(lower.lower_columns(Eigen::MatrixXcd::Identity(d, d)));
        }
        CHECK(((bbdag - bdagb) - Eigen::MatrixXcd::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
}

TEST_CASE("sector cache returns shared bases") {
  SectorCache cache(5);
  auto a = cache.get(4);
  auto b = cache.get(4);
  CHECK(a.get() == b.get());
  CHECK(cache.get(3)->num_particles() == 3);
}

TEST_CASE("state vector validates its amplitude count") {
  auto b = enumerate_basis(2, 2);
  CHECK_THROWS_AS(StateVector(b, Eigen::VectorXcd::Zero(2)), ValidationError);
}
