#pragma once

// Operator algebra and Hilbert-space representation: Pauli strings,
// normal-ordered fermion terms, symmetry sectors, sparse matrix assembly
// and expectation values. All types are immutable value types once built.
//
// Basis conventions (fixed, relied on by serialized data):
//  * spin kind: site i (0-based) occupies bit (N-1-i) of the basis index,
//    so Z on site 0 of N=2 is diag(+1,+1,-1,-1). |0> is the Z=+1 state.
//  * fermion kind: mode mu = site for spin-up, mu = L + site for spin-down
//    (sites enumerated rung-major on ladders). Mode mu occupies bit mu of
//    the occupation mask; sector bases enumerate masks in ascending order.
//    Jordan-Wigner signs use this mode ordering.

#include <optional>
#include <string>
#include <vector>

#include "iqs/common.hpp"

namespace iqs::opalg {

enum class OpKind { Spin, Fermion };
enum class Spin { Up, Down };

struct PauliString {
  std::string letters;  // over {'I','X','Y','Z'}, one per site
  Complex coeff{1.0, 0.0};

  int sites() const { return static_cast<int>(letters.size()); }
  bool is_identity() const;
};

struct FermionOp {
  int site = 0;
  Spin spin = Spin::Up;
  bool dagger = false;
};

struct FermionTerm {
  std::vector<FermionOp> factors;  // applied right-to-left as written
  Complex coeff{1.0, 0.0};
};

// Mode index of a fermionic operator under the canonical site-spin order:
// all spin-up modes first, then all spin-down modes.
inline int mode_index(int site, Spin s, int site_count) {
  return (s == Spin::Up) ? site : site_count + site;
}

struct OperatorSum {
  OpKind kind = OpKind::Spin;
  int site_count = 0;
  std::vector<PauliString> paulis;     // used when kind == Spin
  std::vector<FermionTerm> fermions;   // used when kind == Fermion

  std::size_t term_count() const {
    return kind == OpKind::Spin ? paulis.size() : fermions.size();
  }
};

OperatorSum spin_operator(int sites, std::vector<PauliString> terms);
OperatorSum fermion_operator(int sites, std::vector<FermionTerm> terms);

// Single Pauli string helpers; `spec` like "Z0 X2" or a full letter string.
PauliString pauli_from_sites(int sites, const std::vector<std::pair<int, char>>& ops,
                             Complex coeff = {1.0, 0.0});

OperatorSum operator+(const OperatorSum& a, const OperatorSum& b);
OperatorSum operator*(Complex s, const OperatorSum& a);
OperatorSum adjoint(const OperatorSum& a);

// Normal order all terms (daggers left of annihilators, each block sorted by
// mode; anticommutator contractions expanded) and merge duplicates. For spin
// kind merges equal letter strings. The result is the unique canonical form.
OperatorSum canonicalize(const OperatorSum& a, double drop_tol = 1e-14);

// Product of spin operator sums under Pauli multiplication rules.
OperatorSum spin_product(const OperatorSum& a, const OperatorSum& b);

bool is_hermitian(const OperatorSum& a, double tol = 1e-12);

// Jordan-Wigner image of a fermionic operator as a Pauli sum over 2L qubits
// (qubit mu = mode mu, little-endian masks; see header comment).
OperatorSum jw_transform(const OperatorSum& fermionic);

// ---------------------------------------------------------------------------

struct Sector {
  OpKind kind = OpKind::Spin;
  int site_count = 0;
  // fermion: particle numbers per spin species; empty = full Fock space.
  std::optional<int> n_up, n_down;
  // spin: total magnetization sum_i sigma^z_i; empty = full space.
  std::optional<int> magnetization;

  static Sector spin_full(int sites);
  static Sector spin_magnetization(int sites, int two_sz);
  static Sector fermion(int sites, int n_up, int n_down);
  static Sector fermion_full(int sites);

  int modes() const { return kind == OpKind::Spin ? site_count : 2 * site_count; }
};

// Deterministic, ascending-mask basis enumeration for a sector, with O(log d)
// index lookup. Built once and shared.
class Basis {
 public:
  explicit Basis(const Sector& sector);

  const Sector& sector() const { return sector_; }
  Eigen::Index dimension() const { return static_cast<Eigen::Index>(masks_.size()); }
  std::uint64_t mask(Eigen::Index i) const { return masks_[static_cast<std::size_t>(i)]; }
  // -1 when the mask lies outside the sector.
  Eigen::Index index_of(std::uint64_t mask) const;

 private:
  Sector sector_;
  std::vector<std::uint64_t> masks_;
};

struct QuantumState {
  Sector sector;
  VectorXcd amplitudes;

  double norm() const { return amplitudes.norm(); }
};

struct MixedState {
  Sector sector;
  VectorXd weights;    // p_alpha, sum to 1
  MatrixXcd vectors;   // orthonormal columns, one per weight
  double purity = 1.0;

  Eigen::Index rank() const { return weights.size(); }
};

QuantumState normalized(QuantumState s);
MixedState mixed_from_pure(const QuantumState& s);

// Embed a sector-restricted state into a larger sector of the same kind
// (amplitudes carried over by basis mask).
QuantumState embed_state(const QuantumState& s, const Sector& target);

// ---------------------------------------------------------------------------

// Sparse matrix of `op` on the sector basis. Deterministic term ordering so
// repeated builds are bit-identical. Fermion terms must conserve the sector's
// particle numbers when those are fixed (SectorViolation otherwise).
SparseXcd build_matrix(const OperatorSum& op, const Basis& basis);

// Matrix-free y = op * x on the sector basis.
VectorXcd apply_operator(const OperatorSum& op, const Basis& basis, const VectorXcd& x);

Complex expectation(const QuantumState& state, const OperatorSum& op);
Complex expectation(const MixedState& state, const OperatorSum& op);
Complex expectation(const QuantumState& state, const SparseXcd& op_matrix);

// Expectation of one Jordan-Wigner Pauli string (letter position = mode
// index, little-endian masks) on a state in a fermionic sector basis.
Complex jw_pauli_expectation(const PauliString& p, const Basis& basis, const VectorXcd& x);

double variance(const QuantumState& state, const OperatorSum& op);
double variance(const MixedState& state, const OperatorSum& op);

// ---------------------------------------------------------------------------
// Model constructors.

// Two-leg Hubbard ladder, open boundaries along the legs. Site (r, leg) has
// index 2r + leg. Terms: -t_x and -t_y hoppings (both spins) and U n_up n_dn.
OperatorSum hubbard_ladder(int rungs, double t_x, double t_y, double u);

// Component Hubbard generators used as circuit resources.
OperatorSum hubbard_hop_x(int rungs);
OperatorSum hubbard_hop_y(int rungs);
OperatorSum hubbard_onsite(int rungs);

// Rung singlet annihilator Delta_i = c_{(i,0)up} c_{(i,1)dn} - c_{(i,0)dn} c_{(i,1)up}.
OperatorSum rung_singlet_annihilator(int rungs, int rung);

// Hermitian pair correlator: Delta_i^dag Delta_j + Delta_j^dag Delta_i for
// i != j, and the rung singlet density Delta_i^dag Delta_i for i == j.
OperatorSum dwave_correlator(int rungs, int rung_i, int rung_j);

// Sum over r of Re<Delta_0^dag Delta_r> as an operator:
// Delta_0^dag Delta_0 + (1/2) sum_{r>0} dwave_correlator(0, r).
OperatorSum dwave_sum(int rungs);

// Momentum-space spin flip operators on a periodic chain, k = 2 pi n / N.
// sigma_k^+ = N^{-1/2} sum_j e^{ikj} sigma_j^+, sigma_k^- = (sigma_k^+)^dag.
OperatorSum sigma_k_plus(int sites, double k);
OperatorSum sigma_k_minus(int sites, double k);
OperatorSum sigma_k_z(int sites, double k);

// ---------------------------------------------------------------------------
// JSON interchange: {kind, siteCount, terms:[{letters|factors, re, im}]}.

std::string to_json(const OperatorSum& op);
OperatorSum operator_from_json(const std::string& text);

}  // namespace iqs::opalg
