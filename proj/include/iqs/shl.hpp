#pragma once

// Spectral Hamiltonian learning: tangent-space response matrices from the
// time-dependent variational principle at a ground state, the variational
// susceptibility, spectral cost functions, and the outer parameter loop.
// Includes the worked models: two coupled spins, the three-spin ring
// exchange, and periodic ferromagnetic / antiferromagnetic chains.

#include <functional>
#include <string>
#include <vector>

#include "iqs/common.hpp"
#include "iqs/exact.hpp"
#include "iqs/opalg.hpp"

namespace iqs::shl {

using exact::PeakList;
using exact::Susceptibility;
using opalg::OperatorSum;
using opalg::QuantumState;

struct TangentAnsatz {
  std::vector<OperatorSum> generators;  // Hermitian
};

struct ResponseProblem {
  OperatorSum h0;
  QuantumState ground;
  OperatorSum drive;   // V, Hermitian
  OperatorSum probe;   // O, Hermitian
  TangentAnsatz ansatz;
  VectorXd grid;
  double delta = 0.05;
  double variance_tolerance = 1e-6;  // NotGroundState beyond this (strict mode)
  bool strict = false;
};

struct TdvpMatrices {
  MatrixXd m;  // metric, Re<u_i|u_j> - <A_i><A_j>
  MatrixXd k;  // Im<u_j|(H-E)|u_i>, real antisymmetric
  VectorXd v;  // Re<u_j|(V-<V>)|psi>
  VectorXd o;  // i[<u_j|O|psi> - c.c.]
  double ground_variance = 0.0;
};

TdvpMatrices tdvp_matrices(const ResponseProblem& problem);

// Modal form of chi(w) = o^T (-i(w+id) M + K)^{-1} v with the metric kernel
// projected out (relative singular-value cutoff 1e-10).
class ChiEvaluator {
 public:
  explicit ChiEvaluator(const TdvpMatrices& mats, double metric_cutoff = 1e-10);
  Complex at(double omega, double delta) const;
  // magnitudes of the modal frequencies (variational pole positions)
  std::vector<double> pole_frequencies() const;

 private:
  VectorXcd poles_;    // eigenvalues of the whitened K
  VectorXcd weights_;  // q_j p_j per mode
};

Susceptibility variational_susceptibility(const TdvpMatrices& mats, const VectorXd& grid,
                                          double delta);

enum class CostVariant { Overlap, L2 };

// Grid-sampled cost between two spectra: Overlap is the negative frequency
// integral of Im chi_var Im chi_tar / 2 pi, L2 the squared modulus distance.
double spectral_cost(const Susceptibility& chi_var, const Susceptibility& chi_tar,
                     CostVariant variant);

// Discrete-peak reduction of the overlap cost: sum_n w_n Im chi_var(w_n).
double spectral_cost(const ChiEvaluator& chi_var, const PeakList& target, double delta);

// Response enhancement at one frequency: Im chi_var(w*).
double peak_cost(const ChiEvaluator& chi_var, double omega_star, double delta);

// --- outer learning loop -----------------------------------------------------

// One drive/target pairing (a momentum mode or a probe setting).
struct ShlChannel {
  OperatorSum drive;  // Hermitian, also used as the probe
  TangentAnsatz ansatz;
  PeakList target;
};

struct ShlOptions {
  double delta = 0.05;
  // coarse-to-fine broadenings run before the final stage at `delta`;
  // wide stages merge spectral basins so crude starts find the right one
  std::vector<double> delta_schedule;
  double fd_step = 1e-4;
  double param_tol = 1e-6;
  int max_iters = 200;
  double stall_probe = 0.05;  // axis probe used to leave zero-gradient points
  exact::GroundOptions ground;
  bool reject_degenerate = true;
};

struct ShlResult {
  VectorXd params;
  std::vector<std::pair<VectorXd, double>> trajectory;  // (params, cost)
  bool converged = false;
};

// Minimizes the aggregated peak-overlap cost over Hamiltonian parameters by
// finite-difference quasi-Newton. `ground_sector` selects the ED sector for
// the candidate ground state, which is then embedded into the full space for
// the response algebra.
ShlResult shl_learn(const std::function<OperatorSum(const VectorXd&)>& family,
                    const std::vector<ShlChannel>& channels,
                    const opalg::Sector& ground_sector, const VectorXd& x0,
                    const ShlOptions& options = {});

// --- momentum-resolved tangent ansatz ----------------------------------------

enum class ChainModel { Ferro, Antiferro };
enum class AnsatzLevel { OneParticle, UpToTwoParticle, UpToThreeParticle };

// Hermitian generator pairs built from momentum spin operators: (s_k^+ +
// s_k^-) and i(s_k^+ - s_k^-) at the one-particle level, plus s^z_{k'} s^+_
// {k-k'} (and z z s^+) combinations at higher levels.
TangentAnsatz momentum_ansatz(ChainModel model, int sites, double k, AnsatzLevel level);

// --- worked models -------------------------------------------------------------

// B_z (s^z_1 + s^z_2) - J_I s^z_1 s^z_2 - J_H s_1 . s_2
OperatorSum two_spin_model(double b_z, double j_i, double j_h);

// B_z sum s^z - J_H sum pairs s_i . s_j + J_re s_1 . (s_2 x s_3) on a triangle
OperatorSum ring_exchange_model(double b_z, double j_h, double j_re);

// B_z sum s^z_j - J sum_j s_j . s_{j+1}, periodic chain
OperatorSum heisenberg_chain(int sites, double b_z, double j);

// all 9 one-spin plus all 27 two-spin Pauli generators on three sites
TangentAnsatz three_spin_tangent_ansatz();

std::string to_csv(const ShlResult& result);

}  // namespace iqs::shl
