#pragma once

// Exact-diagonalization services: ground states, Gibbs states, Kubo
// susceptibilities, dynamical structure factors, adiabatic sweeps.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "iqs/common.hpp"
#include "iqs/opalg.hpp"

namespace iqs::exact {

using opalg::Basis;
using opalg::MixedState;
using opalg::OperatorSum;
using opalg::QuantumState;
using opalg::Sector;

struct SpectrumSlice {
  VectorXd energies;   // ascending
  MatrixXcd states;    // orthonormal columns matching energies
  int requested = 0;
};

struct Susceptibility {
  VectorXd frequencies;
  VectorXcd values;
  double broadening = 0.05;
};

struct Peak {
  double omega = 0.0;
  double weight = 0.0;
};
using PeakList = std::vector<Peak>;

struct GroundResult {
  double energy = 0.0;
  QuantumState state;
  bool degenerate = false;  // gap to the next state below the threshold
};

struct GroundOptions {
  Eigen::Index dense_threshold = 4096;  // iterative solver above this
  double tolerance = 1e-9;              // residual per ||H|| estimate
  int max_iterations = 600;             // Lanczos restarts
  double degeneracy_gap = 1e-10;
};

GroundResult ground_state(const OperatorSum& h, const Sector& sector,
                          const GroundOptions& opts = {});
GroundResult ground_state(const SparseXcd& h, const Sector& sector,
                          const GroundOptions& opts = {});

// Lowest `count` eigenpairs by dense diagonalization (DimensionCap above cap).
SpectrumSlice spectrum_slice(const OperatorSum& h, const Sector& sector, int count,
                             Eigen::Index cap = 4096);

// Full dense eigendecomposition, shared by the Kubo and Gibbs routines.
SpectrumSlice full_spectrum(const SparseXcd& h, Eigen::Index cap = 4096);

MixedState gibbs_state(const OperatorSum& h, double temperature, const Sector& sector,
                       Eigen::Index cap = 4096);

// Lehmann representation of the retarded response of O to a drive V,
// chi(w) = sum_n [ <0|O|n><n|V|0> / (w + i d - w_n)
//                - <0|V|n><n|O|0> / (w + i d + w_n) ].
Susceptibility kubo_susceptibility(const OperatorSum& h, const QuantumState& ground,
                                   const OperatorSum& drive, const OperatorSum& probe,
                                   const VectorXd& grid, double delta,
                                   Eigen::Index cap = 4096);

// Positive-frequency pole list for the symmetrized case probe = drive^dag;
// weights are |<n|V|0>|^2 merged over degenerate frequencies.
PeakList kubo_peaks(const OperatorSum& h, const QuantumState& ground,
                    const OperatorSum& drive, double weight_floor = 1e-12,
                    Eigen::Index cap = 4096);

// Same, reusing a precomputed eigenbasis (one diagonalization, many drives).
PeakList kubo_peaks(const SpectrumSlice& spectrum, const QuantumState& ground,
                    const OperatorSum& drive, double weight_floor = 1e-12);
Susceptibility kubo_susceptibility(const SpectrumSlice& spectrum, const QuantumState& ground,
                                   const OperatorSum& h, const OperatorSum& drive,
                                   const OperatorSum& probe, const VectorXd& grid,
                                   double delta);

enum class SfChannel { SpinFlipSym, SpinFlipPlus };

struct StructureFactorResult {
  std::map<double, Susceptibility> by_momentum;
  std::map<double, PeakList> peaks;
};

// Per-momentum Kubo susceptibility of a periodic spin chain with
// V = sigma_k^+ + sigma_k^- (sym) or V = sigma_k^+, O = V^dag (plus).
StructureFactorResult structure_factor(const OperatorSum& h, const QuantumState& ground,
                                       const std::vector<double>& momenta,
                                       const VectorXd& grid, double delta,
                                       SfChannel channel = SfChannel::SpinFlipSym,
                                       Eigen::Index cap = 4096);

struct SweepResult {
  QuantumState final_state;
  double return_probability = 0.0;
};

// Time-ordered evolution of (1-tau) H_start + tau H_end with midpoint
// discretization; each step applies the exact exponential of its generator.
SweepResult adiabatic_unprepare(const OperatorSum& h_start, const OperatorSum& h_end,
                                const QuantumState& state, double total_time, int steps,
                                const std::optional<QuantumState>& target = std::nullopt);

// exp(-i H t) v via adaptively restarted Hermitian Lanczos.
VectorXcd krylov_propagate(const SparseXcd& h, const VectorXcd& v, double time);

std::string to_csv(const Susceptibility& chi);
std::string to_json(const Susceptibility& chi);
std::string to_json(const PeakList& peaks);
std::string to_csv(const SpectrumSlice& slice);
PeakList peaks_from_json(const std::string& text);

}  // namespace iqs::exact
