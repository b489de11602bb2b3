#pragma once

// Hamiltonian learning by variance minimization: correlation-matrix assembly,
// kernel analysis, energy biasing, ridge weights, sign-constrained convex QP,
// and Hilbert-Schmidt fitting of Gibbs states.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "iqs/common.hpp"
#include "iqs/opalg.hpp"

namespace iqs::hamlearn {

using opalg::MixedState;
using opalg::OperatorSum;
using opalg::QuantumState;

using State = std::variant<QuantumState, MixedState>;

struct LinearConstraint {
  enum class Kind { Equality, GreaterEqual };
  Kind kind = Kind::GreaterEqual;
  VectorXd coefficients;  // a . c (kind) rhs
  double rhs = 0.0;

  static LinearConstraint non_negative(Eigen::Index index, Eigen::Index n);
};

struct LearnProblem {
  OperatorSum reference_h0;  // may have zero terms
  std::vector<OperatorSum> ansatz_terms;
  VectorXd weights;          // ridge weights w_i >= 0; empty = zeros
  double alpha = 0.0;        // energy bias
  std::vector<LinearConstraint> constraints;
  bool normalize = false;    // impose sum c_i^2 = 1 (reference must be empty)
  double kernel_tolerance = 1e-10;   // relative eigenvalue cutoff for ker(G)
  double consistency_tolerance = 1e-6;  // NoSolution when ||P_ker v|| exceeds it
};

struct CorrelationSystem {
  MatrixXd g;       // G_ij = <{h_i,h_j}>/2 - <h_i><h_j>
  VectorXd v;       // v_i = <H0><h_i> - <{H0,h_i}>/2
  VectorXd means;   // <h_i>
  double e0 = 0.0;  // <H0>
  double var0 = 0.0;
};

CorrelationSystem correlation_system(const State& state, const LearnProblem& problem);

struct LearnResult {
  VectorXd coefficients;
  double variance = 0.0;       // var of H0 + sum c_i h_i on the input state
  int kernel_dimension = 0;
  MatrixXd kernel_basis;       // orthonormal columns spanning ker(G)
  double kernel_overlap = 0.0; // ||P_ker v||
  double residual = 0.0;       // ||(G + W) c - (v - alpha m)|| (unconstrained)
  double kkt_residual = 0.0;   // constrained solves only
};

LearnResult learn(const State& state, const LearnProblem& problem);

double variance(const State& state, const OperatorSum& h);

// H0 + sum_i c_i h_i, canonicalized.
OperatorSum assemble(const OperatorSum& h0, const std::vector<OperatorSum>& terms,
                     const VectorXd& coefficients);

// --- convex quadratic programming ------------------------------------------

struct QpProblem {
  MatrixXd q;   // symmetric PSD
  VectorXd b;   // minimize (1/2) x'Qx - b'x
  std::vector<LinearConstraint> constraints;
};

struct QpResult {
  VectorXd x;
  VectorXd multipliers;  // one per constraint, aligned with the input order
  double kkt_residual = 0.0;
  int iterations = 0;
};

// Primal active-set method (null-space steps, pseudo-inverse on singular
// reduced Hessians). Throws InfeasibleConstraints / NoSolution / IterationCap.
QpResult solve_qp(const QpProblem& problem);

// --- Gibbs-state learning ---------------------------------------------------

struct GibbsLearnResult {
  VectorXd coefficients;
  double distance = 0.0;  // Hilbert-Schmidt distance at the optimum
  int iterations = 0;
};

// Minimize || exp(-beta H(c))/Z - rho_target ||_HS^2 over the ansatz
// coefficients by finite-difference quasi-Newton descent.
GibbsLearnResult gibbs_learn(const MixedState& target, const std::vector<OperatorSum>& ansatz,
                             double beta, const VectorXd& c0 = VectorXd(),
                             int max_iters = 400);

std::string to_json(const LearnResult& result, const std::vector<std::string>& labels,
                    const VectorXd& weights, const std::vector<bool>& constrained);

}  // namespace iqs::hamlearn
