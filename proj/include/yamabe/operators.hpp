#pragma once

// Discrete realization of the quadratic forms int a<grad u, grad v> dV and
// int b u v dV on a reduced domain.
//
// The stiffness is stored as one conductance per cell, a_{i+1/2} w_{i+1/2}/h_i,
// and applied in flux form, so constants are annihilated exactly. The mass
// matrices are lumped: M_f = diag(quad_i f_i).

#include <memory>
#include <vector>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "yamabe/domain.hpp"

namespace yamabe {

template <typename Scalar>
struct EllipticOperatorSet {
  Vector<Scalar> conductance;           // one per cell
  Eigen::SparseMatrix<Scalar> stiffness;  // K_a, tridiagonal, symmetric
  Vector<Scalar> mass_1;                // diagonal of M_1
  Vector<Scalar> mass_b;                // diagonal of M_b
  Vector<Scalar> mass_c;                // diagonal of M_c
  std::array<bool, 2> dirichlet{false, false};

  Eigen::Index size() const { return mass_1.size(); }
};

template <typename Scalar>
EllipticOperatorSet<Scalar> assemble_operators(const ReducedDomain<Scalar>& dom) {
  using std::abs;
  dom.validate();
  const Eigen::Index n = dom.nodes();
  EllipticOperatorSet<Scalar> ops;
  ops.conductance.resize(n - 1);
  const Scalar min_spacing = Scalar(64) * std::numeric_limits<Scalar>::epsilon() * abs(dom.span());
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Scalar h = dom.grid(i + 1) - dom.grid(i);
    if (!(h > min_spacing)) throw AssemblyError("assemble: degenerate grid spacing at cell " + std::to_string(i));
    const Scalar a_mid = Scalar(0.5) * (dom.a(i) + dom.a(i + 1));
    ops.conductance(i) = a_mid * dom.midpoint_weight(i) / h;
  }

  std::vector<Eigen::Triplet<Scalar>> entries;
  entries.reserve(3 * n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Scalar diag = 0;
    if (i > 0) diag += ops.conductance(i - 1);
    if (i + 1 < n) diag += ops.conductance(i);
    entries.emplace_back(i, i, diag);
    if (i + 1 < n) {
      entries.emplace_back(i, i + 1, -ops.conductance(i));
      entries.emplace_back(i + 1, i, -ops.conductance(i));
    }
  }
  ops.stiffness.resize(n, n);
  ops.stiffness.setFromTriplets(entries.begin(), entries.end());
  ops.stiffness.makeCompressed();

  ops.mass_1 = dom.quad;
  ops.mass_b = dom.quad.cwiseProduct(dom.b);
  ops.mass_c = dom.quad.cwiseProduct(dom.c);
  ops.dirichlet = {dom.bc[0] == BoundaryTag::Dirichlet, dom.bc[1] == BoundaryTag::Dirichlet};
  return ops;
}

/// K_a u in flux form.
template <typename Scalar>
Field<Scalar> stiffness_apply(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u) {
  const Eigen::Index n = ops.size();
  Field<Scalar> out = Field<Scalar>::Zero(n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    const Scalar flux = ops.conductance(i) * (u(i + 1) - u(i));
    out(i) -= flux;
    out(i + 1) += flux;
  }
  return out;
}

/// v^T K_a u
template <typename Scalar>
Scalar stiffness_form(const EllipticOperatorSet<Scalar>& ops, const Field<Scalar>& u, const Field<Scalar>& v) {
  Scalar sum = 0;
  for (Eigen::Index i = 0; i + 1 < ops.size(); ++i) sum += ops.conductance(i) * (u(i + 1) - u(i)) * (v(i + 1) - v(i));
  return sum;
}

enum class LinearSolverKind { Direct, ConjugateGradient };

/// Solver for (K_a + A M_1) x = rhs with the domain's Dirichlet rows pinned.
///
/// Direct uses a sparse LDL^T factorization computed once. ConjugateGradient
/// uses Jacobi-preconditioned CG to relative residual 1e-10 with an iteration
/// cap of 50 (N+1).
template <typename Scalar>
class ShiftedSolver {
 public:
  ShiftedSolver(const EllipticOperatorSet<Scalar>& ops, Scalar shift, LinearSolverKind kind)
      : kind_(kind), dirichlet_(ops.dirichlet) {
    matrix_ = ops.stiffness;
    for (Eigen::Index i = 0; i < ops.size(); ++i) matrix_.coeffRef(i, i) += shift * ops.mass_1(i);
    pin_dirichlet_rows();
    if (kind_ == LinearSolverKind::Direct) {
      ldlt_.compute(matrix_);
      if (ldlt_.info() != Eigen::Success) throw LinearSolveError("LDL^T factorization of K_a + A M_1 failed");
    } else {
      cg_.setTolerance(Scalar(1e-10));
      cg_.setMaxIterations(50 * matrix_.rows());
      cg_.compute(matrix_);
    }
  }

  ShiftedSolver(const ShiftedSolver&) = delete;
  ShiftedSolver& operator=(const ShiftedSolver&) = delete;

  Field<Scalar> solve(Field<Scalar> rhs) const {
    const Eigen::Index n = rhs.size();
    if (dirichlet_[0]) rhs(0) = 0;
    if (dirichlet_[1]) rhs(n - 1) = 0;
    if (kind_ == LinearSolverKind::Direct) return ldlt_.solve(rhs);
    if (rhs.isZero(0)) return Field<Scalar>::Zero(n);
    Field<Scalar> x = cg_.solve(rhs);
    if (cg_.info() != Eigen::Success)
      throw LinearSolveError("conjugate gradient did not reach relative residual 1e-10 after " +
                             std::to_string(cg_.iterations()) + " iterations");
    return x;
  }

  LinearSolverKind kind() const { return kind_; }
  const Eigen::SparseMatrix<Scalar>& matrix() const { return matrix_; }

 private:
  void pin_dirichlet_rows() {
    const Eigen::Index n = matrix_.rows();
    for (int side = 0; side < 2; ++side) {
      if (!dirichlet_[side]) continue;
      const Eigen::Index i = side == 0 ? 0 : n - 1;
      for (Eigen::Index j = std::max<Eigen::Index>(0, i - 1); j <= std::min(n - 1, i + 1); ++j) {
        if (j == i) continue;
        matrix_.coeffRef(i, j) = 0;
        matrix_.coeffRef(j, i) = 0;
      }
      matrix_.coeffRef(i, i) = 1;
    }
    matrix_.prune(Scalar(0));
    matrix_.makeCompressed();
  }

  LinearSolverKind kind_;
  std::array<bool, 2> dirichlet_;
  Eigen::SparseMatrix<Scalar> matrix_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar>> ldlt_;
  Eigen::ConjugateGradient<Eigen::SparseMatrix<Scalar>, Eigen::Lower | Eigen::Upper,
                           Eigen::DiagonalPreconditioner<Scalar>>
      cg_;
};

}  // namespace yamabe
