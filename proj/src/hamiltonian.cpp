#include "dynbath/hamiltonian.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dynbath/csv.hpp"
#include "dynbath/error.hpp"

namespace dynbath {

void HamiltonianParams::validate() const {
  if (num_modes < 1) throw ValidationError("mode count must be at least 1");
  if (num_particles < 0) throw ValidationError("particle count must be nonnegative");
  for (double v : {level_spacing, hopping, intra_level, inter_level})
    if (!std::isfinite(v)) throw ValidationError("Hamiltonian parameters must be finite");
  if (!(hopping > 0.0)) throw ValidationError("hopping J must be positive");
}

double SectorOperator::hermiticity_defect() const {
  const double scale = matrix.size() ? matrix.cwiseAbs().maxCoeff() : 0.0;
  if (scale == 0.0) return 0.0;
  return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() / scale;
}

namespace {

// One normal-ordered product: annihilators applied right to left first, then
// creators. Stored in application order.
struct Term {
  double coefficient;
  std::vector<std::size_t> annihilate;
  std::vector<std::size_t> create;
};

std::vector<Term> hamiltonian_terms(const HamiltonianParams& p) {
  const std::size_t M = p.num_modes;
  std::vector<Term> terms;
  for (std::size_t i = 0; i < M; ++i)
    if (p.level_spacing != 0.0 && i > 0)
      terms.push_back({p.level_spacing * static_cast<double>(i), {i}, {i}});
  for (std::size_t i = 0; i < M; ++i)
    for (std::size_t j = 0; j < M; ++j)
      if (i != j) terms.push_back({p.hopping, {j}, {i}});
  if (p.intra_level != 0.0)
    for (std::size_t i = 0; i < M; ++i) terms.push_back({p.intra_level, {i, i}, {i, i}});
  if (p.inter_level != 0.0)
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t j = 0; j < M; ++j)
        for (std::size_t l = 0; l < M; ++l)
          for (std::size_t m = 0; m < M; ++m) {
            if (i == j && j == l && l == m) continue;
            // b_i^+ b_j^+ b_l b_m: b_m acts first, b_i^+ last.
            terms.push_back({p.inter_level, {m, l}, {j, i}});
          }
  return terms;
}

// Visits every nonzero H_{row,col} contribution of one basis column.
template <class Sink>
void apply_terms(const std::vector<Term>& terms, const FockBasis& basis, std::size_t col,
                 std::vector<int>& tuple, Sink&& sink) {
  const auto src = basis.state(col);
  for (const Term& term : terms) {
    std::copy(src.begin(), src.end(), tuple.begin());
    double amp = term.coefficient;
    for (std::size_t mode : term.annihilate) {
      amp *= annihilate(tuple, mode);
      if (amp == 0.0) break;
    }
    if (amp == 0.0) continue;
    for (std::size_t mode : term.create) amp *= create(tuple, mode);
    sink(*basis.find(tuple), amp);
  }
}

}  // namespace

StateVector apply_hamiltonian(const HamiltonianParams& params, const StateVector& psi) {
  params.validate();
  const FockBasis& basis = psi.basis();
  if (basis.num_modes() != params.num_modes || basis.num_particles() != params.num_particles)
    throw SectorMismatch("state does not match the Hamiltonian parameters (M, N)");
  const auto terms = hamiltonian_terms(params);
  StateVector out = StateVector::zero(psi.basis_ptr());
  std::vector<int> tuple(params.num_modes);
  for (std::size_t col = 0; col < basis.dimension(); ++col) {
    const cplx c = psi.amplitudes()[static_cast<Eigen::Index>(col)];
    if (c == 0.0) continue;
    apply_terms(terms, basis, col, tuple,
                [&](std::size_t row, double amp) { out.amplitudes()[static_cast<Eigen::Index>(row)] += amp * c; });
  }
  return out;
}

SectorOperator build_hamiltonian(const HamiltonianParams& params, BasisPtr basis) {
  params.validate();
  if (!basis) throw ValidationError("Hamiltonian needs a basis");
  if (basis->num_modes() != params.num_modes || basis->num_particles() != params.num_particles)
    throw SectorMismatch("basis does not match the Hamiltonian parameters (M, N)");

  const auto terms = hamiltonian_terms(params);
  const auto dim = static_cast<Eigen::Index>(basis->dimension());
  // Assembled in real arithmetic; every coefficient and ladder element is real.
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);

#pragma omp parallel
  {
    std::vector<int> tuple(params.num_modes);
#pragma omp for schedule(static)
    for (Eigen::Index col = 0; col < dim; ++col)
      apply_terms(terms, *basis, static_cast<std::size_t>(col), tuple,
                  [&](std::size_t row, double amp) { h(static_cast<Eigen::Index>(row), col) += amp; });
  }

  SectorOperator op{std::move(basis), h.cast<cplx>()};
  const double defect = op.hermiticity_defect();
  if (defect > 1e-12) {
    std::ostringstream msg;
    msg << "assembled Hamiltonian is not Hermitian (relative defect " << defect << ")";
    throw IntegrityError(msg.str());
  }
  return op;
}

namespace {

void require_hermitian(const SectorOperator& op) {
  if (op.matrix.rows() != op.matrix.cols()) throw ValidationError("operator is not square");
  const double defect = op.hermiticity_defect();
  if (defect > 1e-10) {
    std::ostringstream msg;
    msg << "operator is not Hermitian (relative defect " << defect << ")";
    throw ValidationError(msg.str());
  }
}

bool is_real(const Eigen::MatrixXcd& m) { return m.imag().cwiseAbs().maxCoeff() == 0.0; }

[[noreturn]] void convergence_failure(const SectorOperator& op) {
  std::ostringstream msg;
  msg << "eigensolver did not converge (dimension " << op.matrix.rows() << ", max element "
      << op.max_element() << ", Frobenius norm " << op.matrix.norm() << ")";
  throw ConvergenceError(msg.str());
}

}  // namespace

EigenSystem diagonalize(const SectorOperator& op) {
  require_hermitian(op);
  EigenSystem out;
  out.basis = op.basis;
  if (op.matrix.size() == 0) return out;
  if (is_real(op.matrix)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.matrix.real());
    if (solver.info() != Eigen::Success) convergence_failure(op);
    out.energies = solver.eigenvalues();
    out.vectors = solver.eigenvectors().cast<cplx>();
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(op.matrix);
    if (solver.info() != Eigen::Success) convergence_failure(op);
    out.energies = solver.eigenvalues();
    out.vectors = solver.eigenvectors();
  }
  return out;
}

Eigen::VectorXd eigenvalues(const SectorOperator& op) {
  require_hermitian(op);
  if (op.matrix.size() == 0) return {};
  if (is_real(op.matrix)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.matrix.real(), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) convergence_failure(op);
    return solver.eigenvalues();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(op.matrix, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) convergence_failure(op);
  return solver.eigenvalues();
}

ChaosReport r_ratio(std::span<const double> ascending,
                    std::optional<std::pair<double, double>> window) {
  std::vector<double> levels;
  for (double e : ascending) {
    if (!std::isfinite(e)) throw ValidationError("non-finite eigenvalue");
    if (window && (e < window->first || e > window->second)) continue;
    levels.push_back(e);
  }
  if (!std::is_sorted(levels.begin(), levels.end()))
    throw ValidationError("eigenvalues must be ascending");
  if (levels.size() < 3) throw ValidationError("r-ratio needs at least 3 levels");

  ChaosReport report;
  report.level_count = levels.size();
  const double width = levels.back() - levels.front();
  const double merge = 1e-12 * width;
  std::vector<double> distinct{levels.front()};
  for (std::size_t k = 1; k < levels.size(); ++k) {
    if (levels[k] - distinct.back() <= merge) {
      ++report.merged_levels;
    } else {
      distinct.push_back(levels[k]);
    }
  }
  if (distinct.size() < 3) throw ValidationError("r-ratio needs at least 3 distinct levels");

  double sum = 0.0;
  for (std::size_t k = 0; k + 2 < distinct.size(); ++k) {
    const double s0 = distinct[k + 1] - distinct[k];
    const double s1 = distinct[k + 2] - distinct[k + 1];
    sum += std::min(s0, s1) / std::max(s0, s1);
  }
  report.ratio_count = distinct.size() - 2;
  report.mean_ratio = sum / static_cast<double>(report.ratio_count);
  return report;
}

void write_eigenvalues_csv(const std::filesystem::path& path, const Eigen::VectorXd& energies) {
  CsvWriter csv(path, {"index", "E_over_J"});
  for (Eigen::Index k = 0; k < energies.size(); ++k)
    csv.row({static_cast<double>(k), energies[k]});
}

}  // namespace dynbath
