#pragma once

// Staircase circuits: the 15-parameter two-qubit gate, statevector reference,
// Pauli/MPO expectation values by CPTP channel contraction in O(N), and
// fidelity optimization against exact ground states.

#include <array>
#include <string>
#include <vector>

#include "iqs/common.hpp"
#include "iqs/opalg.hpp"

namespace iqs::staircase {

using opalg::PauliString;
using opalg::QuantumState;

using Matrix2 = Eigen::Matrix2cd;
using Matrix4 = Eigen::Matrix4cd;

// Generator basis order: two-qubit terms (xx,xy,xz,yx,yy,yz,zx,zy,zz),
// then single-site terms on qubit 1 (x,y,z) and qubit 2 (x,y,z).
struct TwoQubitGate {
  std::array<double, 15> thetas{};
};

// exp(-i sum_theta P) by eigendecomposition of the Hermitian generator.
Matrix4 gate_matrix(const TwoQubitGate& gate);

// Inverse map: parameters of the traceless Hermitian log of a (special)
// unitary; the global phase is dropped.
TwoQubitGate gate_from_unitary(const Matrix4& u);

// CZ * (I x H): chains the path-graph cluster state from |+0...0>.
TwoQubitGate cluster_gate();
// CNOT: chains the GHZ state from |+0...0>.
TwoQubitGate ghz_gate();

struct StaircaseCircuit {
  TwoQubitGate gate;
  int length = 0;  // chain sites; |0...0> with a Hadamard on site 1, then
                   // the same gate on (1,2), (2,3), ..., (N-1,N)
};

// Dense statevector (oracle-scale sizes).
QuantumState statevector(const StaircaseCircuit& circuit, int max_sites = 24);

// <P> for a single Pauli string by right-to-left channel contraction; O(N)
// with 4x4 arithmetic, valid for arbitrary chain lengths.
double pauli_expectation(const StaircaseCircuit& circuit, const PauliString& p);

struct Mpo {
  int chi = 0;
  std::vector<Matrix2> first;  // 1 x chi row of operator blocks
  std::vector<Matrix2> bulk;   // chi x chi, row-major
  std::vector<Matrix2> last;   // chi x 1 column

  const Matrix2& at(int row, int col) const { return bulk[std::size_t(row * chi + col)]; }
};

// Cluster Ising Hamiltonian as a bond-dimension-4 MPO.
Mpo cim_mpo(double g);

// Expectation of an MPO in a single right-to-left channel sweep.
double mpo_expectation(const StaircaseCircuit& circuit, const Mpo& mpo);

// Kraus operators of the measure-and-reset channel, K_m = (|0><m| x 1) U.
std::array<Matrix4, 2> kraus_operators(const TwoQubitGate& gate);

struct FidelityResult {
  TwoQubitGate gate;
  double fidelity = 0.0;
};

struct FidelityOptions {
  int starts = 32;
  std::uint64_t seed = 2;
  int max_iters = 300;
};

// Maximize |<target|staircase>|^2 over the 15 gate parameters by multi-start
// quasi-Newton; one result per target state.
std::vector<FidelityResult> fidelity_optimize(const std::vector<QuantumState>& targets,
                                              int length, const FidelityOptions& opts = {});

std::string to_json(const TwoQubitGate& gate);
TwoQubitGate gate_from_json(const std::string& text);

}  // namespace iqs::staircase
