#pragma once

// Variational circuits and their optimization: layered exponential products,
// reverse-sweep gradients, ADAPT selection with Hessian augmentation,
// finite-temperature references, shot-limited evaluation and pattern search.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "iqs/common.hpp"
#include "iqs/opalg.hpp"

namespace iqs::varcirc {

using opalg::MixedState;
using opalg::OperatorSum;
using opalg::QuantumState;

using Reference = std::variant<QuantumState, MixedState>;

struct Layer {
  OperatorSum generator;  // Hermitian
  double angle = 0.0;
};

struct VariationalCircuit {
  std::vector<Layer> layers;  // applied in ascending order: exp(-i t_k G_k)
  Reference reference;

  VectorXd angles() const;
  void set_angles(const VectorXd& theta);
};

struct CostSpec {
  OperatorSum energy_part;                 // may be empty (zero operator)
  std::optional<OperatorSum> bonus_part;   // subtracted with weight lambda
  double lambda = 0.0;

  OperatorSum cost_operator() const;  // energy - lambda * bonus
};

struct OperatorPool {
  std::vector<OperatorSum> candidates;  // Hermitian, shared site count
};

// Gibbs references keep eigenvectors with p > 1e-8 up to mass 1 - 1e-6.
MixedState truncate_reference(const MixedState& rho, double weight_floor = 1e-8,
                              double mass_goal = 1.0 - 1e-6);

Reference apply(const VariationalCircuit& circuit);

struct CostAndGradient {
  double value = 0.0;
  VectorXd gradient;
};

// Exact expectation of the cost and its reverse-sweep angle gradient,
// grad_i = 2 Im <phi_i| G_i |psi_i> (weighted over eigenvectors when mixed).
CostAndGradient cost_and_gradient(const VariationalCircuit& circuit, const CostSpec& cost);

// ADAPT selection gradient, component i = i <[A_i, H]> on the circuit state.
VectorXd adapt_gradient(const OperatorPool& pool, const Reference& state,
                        const OperatorSum& h);

struct AdaptHessian {
  MatrixXd matrix;       // symmetrized second derivative in pool directions
  VectorXd eigenvalues;  // ascending
  MatrixXd eigenvectors;
};

AdaptHessian adapt_hessian(const OperatorPool& pool, const Reference& state,
                           const OperatorSum& h);

struct TrajectoryRow {
  int iter = 0;
  VectorXd theta;
  double cost = 0.0;
  double exact_cost = 0.0;
  long shots_cumulative = 0;
};

struct OptimizeOptions {
  int max_iterations = 2000;     // inner quasi-Newton cap
  double gradient_tolerance = 1e-8;
  bool adapt_growth = false;
  OperatorPool pool;             // consulted when growth is on
  double weight_cutoff = 0.2;    // eigenvector weight for simultaneous insertion
  int max_layers = 64;
  int max_growth_rounds = 32;
  double hessian_tolerance = 1e-7;  // PSD threshold for termination
  double kick = 0.1;             // displacement along unstable directions
  std::uint64_t seed = 1;
};

struct OptimizeResult {
  VariationalCircuit circuit;
  std::vector<TrajectoryRow> trajectory;
  double final_cost = 0.0;
  bool converged = false;
};

OptimizeResult optimize(const VariationalCircuit& circuit, const CostSpec& cost,
                        const OptimizeOptions& options = {});

// --- shot-noise machinery ----------------------------------------------------

struct ShotModel {
  int shots_per_eval = 15;
  std::uint64_t rng_seed = 0;
};

struct SampledValue {
  double estimate = 0.0;
  double stderr_estimate = 0.0;
};

// Term-by-term projective sampling of the cost operator in each Pauli term's
// eigenbasis. Streams are keyed by (seed, eval_index) so evaluations are
// reproducible in any order.
SampledValue sampled_cost(const VariationalCircuit& circuit, const CostSpec& cost,
                          const ShotModel& model, std::uint64_t eval_index = 0);

struct PatternSearchOptions {
  double initial_step = 0.3;
  double shrink = 0.5;
  double acceptance_margin = 1.0;  // in pooled standard errors
  double min_step = 1e-4;
};

struct PatternSearchResult {
  VariationalCircuit circuit;
  std::vector<TrajectoryRow> trajectory;
  long shots_used = 0;
};

// Coordinate polling with shrinking step; a move is accepted only when it
// improves by more than the pooled standard error. Stops at budget exhaustion.
PatternSearchResult pattern_search(const VariationalCircuit& circuit, const CostSpec& cost,
                                   const ShotModel& model, long budget,
                                   const PatternSearchOptions& options = {});

// Hubbard-quench circuit of the given depth cycling {hop_x, hop_y, onsite}.
VariationalCircuit hubbard_cycle_circuit(int rungs, int depth, Reference reference);

std::string trajectory_to_json(const std::vector<TrajectoryRow>& rows);

}  // namespace iqs::varcirc
