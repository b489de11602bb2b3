#include "iqs/varcirc.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "iqs/optim.hpp"

namespace iqs::varcirc {

namespace {

using opalg::Basis;

const opalg::Sector& sector_of(const Reference& r) {
  if (std::holds_alternative<QuantumState>(r)) return std::get<QuantumState>(r).sector;
  return std::get<MixedState>(r).sector;
}

// Reference eigenvectors with weights; pure states carry weight one.
struct ReferenceView {
  MatrixXcd vectors;
  VectorXd weights;
};

ReferenceView view_of(const Reference& r) {
  ReferenceView v;
  if (std::holds_alternative<QuantumState>(r)) {
    const auto& q = std::get<QuantumState>(r);
    v.vectors = q.amplitudes;
    v.weights = VectorXd::Ones(1);
  } else {
    const auto& m = std::get<MixedState>(r);
    v.vectors = m.vectors;
    v.weights = m.weights;
  }
  return v;
}

struct Gen {
  SparseXcd sparse;
  MatrixXcd vectors;
  VectorXd values;
};

// Eigendecompositions of large generators are memoized across engines; the
// learning maps rebuild circuits over the same Hubbard quench generators for
// every grid cell.
std::shared_ptr<const Gen> decompose_generator(const OperatorSum& g, const Basis& basis) {
  if (!opalg::is_hermitian(g)) throw NonHermitianPool("circuit generator not Hermitian");
  static std::map<std::string, std::shared_ptr<const Gen>> cache;
  std::string key;
  const bool cacheable = basis.dimension() >= 128;
  if (cacheable) {
    key = std::to_string(int(basis.sector().kind)) + ":" +
          std::to_string(basis.dimension()) + ":" + opalg::to_json(opalg::canonicalize(g));
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
  }
  auto gen = std::make_shared<Gen>();
  gen->sparse = build_matrix(g, basis);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es{MatrixXcd(gen->sparse)};
  gen->vectors = es.eigenvectors();
  gen->values = es.eigenvalues();
  if (cacheable) {
    if (cache.size() > 24) cache.clear();
    cache.emplace(key, gen);
  }
  return gen;
}

// Cached eigendecompositions of the layer generators plus sparse forms; the
// workhorse behind repeated angle updates during optimization.
class CircuitEngine {
 public:
  CircuitEngine(const Reference& reference, const std::vector<OperatorSum>& generators)
      : basis_(sector_of(reference)), reference_(view_of(reference)) {
    for (const auto& g : generators) add_generator(g);
  }

  void add_generator(const OperatorSum& g) { gens_.push_back(decompose_generator(g, basis_)); }

  const Basis& basis() const { return basis_; }
  const ReferenceView& reference() const { return reference_; }
  std::size_t generator_count() const { return gens_.size(); }

  // exp(-i sign * theta * G_k) v
  VectorXcd propagate(std::size_t k, double theta, double sign, const VectorXcd& v) const {
    const auto& g = *gens_[k];
    VectorXcd coeff = g.vectors.adjoint() * v;
    for (Eigen::Index i = 0; i < coeff.size(); ++i)
      coeff[i] *= std::exp(Complex(0, -sign * theta * g.values[i]));
    return g.vectors * coeff;
  }

  VectorXcd generator_apply(std::size_t k, const VectorXcd& v) const {
    return gens_[k]->sparse * v;
  }

  // full circuit applied to one reference column
  VectorXcd forward(const VectorXd& theta, const VectorXcd& v) const {
    VectorXcd psi = v;
    for (std::size_t k = 0; k < gens_.size(); ++k)
      psi = propagate(k, theta[Eigen::Index(k)], 1.0, psi);
    return psi;
  }

 private:
  Basis basis_;
  ReferenceView reference_;
  std::vector<std::shared_ptr<const Gen>> gens_;
};

std::vector<OperatorSum> generators_of(const VariationalCircuit& c) {
  std::vector<OperatorSum> g;
  for (const auto& l : c.layers) g.push_back(l.generator);
  return g;
}

CostAndGradient engine_cost_and_gradient(const CircuitEngine& engine, const SparseXcd& cost_mat,
                                         const VectorXd& theta) {
  const auto n = Eigen::Index(engine.generator_count());
  CostAndGradient out;
  out.gradient = VectorXd::Zero(n);
  const auto& ref = engine.reference();
  for (Eigen::Index a = 0; a < ref.weights.size(); ++a) {
    const double p = ref.weights[a];
    VectorXcd psi = engine.forward(theta, ref.vectors.col(a));
    VectorXcd phi = cost_mat * psi;
    out.value += p * psi.dot(phi).real();
    // reverse sweep: peel layers off both vectors
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      out.gradient[i] +=
          p * 2.0 * phi.dot(engine.generator_apply(std::size_t(i), psi)).imag();
      if (i > 0) {
        psi = engine.propagate(std::size_t(i), theta[i], -1.0, psi);
        phi = engine.propagate(std::size_t(i), theta[i], -1.0, phi);
      }
    }
  }
  return out;
}

}  // namespace

VectorXd VariationalCircuit::angles() const {
  VectorXd t(Eigen::Index(layers.size()));
  for (std::size_t i = 0; i < layers.size(); ++i) t[Eigen::Index(i)] = layers[i].angle;
  return t;
}

void VariationalCircuit::set_angles(const VectorXd& theta) {
  if (theta.size() != Eigen::Index(layers.size()))
    throw DimensionMismatch("angle count != layer count");
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].angle = theta[Eigen::Index(i)];
}

OperatorSum CostSpec::cost_operator() const {
  if (!bonus_part || lambda == 0.0) return energy_part;
  return opalg::canonicalize(energy_part + Complex(-lambda, 0.0) * *bonus_part);
}

MixedState truncate_reference(const MixedState& rho, double weight_floor, double mass_goal) {
  std::vector<Eigen::Index> order(std::size_t(rho.rank()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = Eigen::Index(i);
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return rho.weights[a] > rho.weights[b]; });
  std::vector<Eigen::Index> keep;
  double mass = 0.0;
  for (Eigen::Index i : order) {
    if (mass >= mass_goal && rho.weights[i] <= weight_floor) break;
    keep.push_back(i);
    mass += rho.weights[i];
  }
  MixedState out;
  out.sector = rho.sector;
  out.weights.resize(Eigen::Index(keep.size()));
  out.vectors.resize(rho.vectors.rows(), Eigen::Index(keep.size()));
  for (std::size_t i = 0; i < keep.size(); ++i) {
    out.weights[Eigen::Index(i)] = rho.weights[keep[i]];
    out.vectors.col(Eigen::Index(i)) = rho.vectors.col(keep[i]);
  }
  out.purity = rho.purity;  // purity of the untruncated state
  return out;
}

Reference apply(const VariationalCircuit& circuit) {
  CircuitEngine engine(circuit.reference, generators_of(circuit));
  const VectorXd theta = circuit.angles();
  if (std::holds_alternative<QuantumState>(circuit.reference)) {
    const auto& q = std::get<QuantumState>(circuit.reference);
    return QuantumState{q.sector, engine.forward(theta, q.amplitudes)};
  }
  const auto& m = std::get<MixedState>(circuit.reference);
  MixedState out = m;
  for (Eigen::Index a = 0; a < m.rank(); ++a)
    out.vectors.col(a) = engine.forward(theta, m.vectors.col(a));
  return out;
}

CostAndGradient cost_and_gradient(const VariationalCircuit& circuit, const CostSpec& cost) {
  CircuitEngine engine(circuit.reference, generators_of(circuit));
  SparseXcd cost_mat = build_matrix(cost.cost_operator(), engine.basis());
  return engine_cost_and_gradient(engine, cost_mat, circuit.angles());
}

VectorXd adapt_gradient(const OperatorPool& pool, const Reference& state, const OperatorSum& h) {
  Basis basis(sector_of(state));
  ReferenceView ref = view_of(state);
  const auto n = Eigen::Index(pool.candidates.size());
  VectorXd g = VectorXd::Zero(n);
  for (const auto& a : pool.candidates)
    if (!opalg::is_hermitian(a)) throw NonHermitianPool("pool operator not Hermitian");
  for (Eigen::Index alpha = 0; alpha < ref.weights.size(); ++alpha) {
    VectorXcd psi = ref.vectors.col(alpha);
    VectorXcd hpsi = opalg::apply_operator(h, basis, psi);
    for (Eigen::Index i = 0; i < n; ++i) {
      VectorXcd apsi = opalg::apply_operator(pool.candidates[std::size_t(i)], basis, psi);
      // i<[A,H]> = i(<AH> - conj) = -2 Im <A H>
      g[i] += ref.weights[alpha] * (-2.0) * apsi.dot(hpsi).imag();
    }
  }
  return g;
}

AdaptHessian adapt_hessian(const OperatorPool& pool, const Reference& state,
                           const OperatorSum& h) {
  Basis basis(sector_of(state));
  ReferenceView ref = view_of(state);
  const auto n = Eigen::Index(pool.candidates.size());
  for (const auto& a : pool.candidates)
    if (!opalg::is_hermitian(a)) throw NonHermitianPool("pool operator not Hermitian");
  MatrixXd hess = MatrixXd::Zero(n, n);
  for (Eigen::Index alpha = 0; alpha < ref.weights.size(); ++alpha) {
    const double p = ref.weights[alpha];
    VectorXcd psi = ref.vectors.col(alpha);
    VectorXcd hpsi = opalg::apply_operator(h, basis, psi);
    MatrixXcd a_psi(psi.size(), n), d(psi.size(), n), b(psi.size(), n);
    for (Eigen::Index i = 0; i < n; ++i) {
      a_psi.col(i) = opalg::apply_operator(pool.candidates[std::size_t(i)], basis, psi);
      d.col(i) = opalg::apply_operator(pool.candidates[std::size_t(i)], basis, hpsi);
      b.col(i) = opalg::apply_operator(h, basis, a_psi.col(i));
    }
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        // -(1/2)(<[A_i,[A_j,H]]> + <[A_j,[A_i,H]]>), expanded in matvecs
        const double term = -a_psi.col(i).dot(d.col(j)).real() -
                            a_psi.col(j).dot(d.col(i)).real() +
                            2.0 * a_psi.col(i).dot(b.col(j)).real();
        hess(i, j) += p * term;
      }
  }
  hess = 0.5 * (hess + hess.transpose()).eval();
  AdaptHessian out;
  out.matrix = hess;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(hess);
  out.eigenvalues = es.eigenvalues();
  out.eigenvectors = es.eigenvectors();
  return out;
}

OptimizeResult optimize(const VariationalCircuit& circuit, const CostSpec& cost,
                        const OptimizeOptions& options) {
  OptimizeResult res;
  res.circuit = circuit;
  OperatorSum cost_op = cost.cost_operator();

  CircuitEngine engine(circuit.reference, generators_of(circuit));
  SparseXcd cost_mat = build_matrix(cost_op, engine.basis());

  std::mt19937_64 rng(stream_seed(options.seed, 0x6f7074ULL));
  std::normal_distribution<double> gauss;
  int iter_counter = 0;

  auto record = [&](const VectorXd& theta, double value) {
    TrajectoryRow row;
    row.iter = iter_counter++;
    row.theta = theta;
    row.cost = value;
    row.exact_cost = value;
    res.trajectory.push_back(row);
  };

  auto inner_minimize = [&](VectorXd theta) {
    optim::BfgsOptions bopts;
    bopts.max_iters = options.max_iterations;
    bopts.grad_tol = options.gradient_tolerance;
    auto f = [&](const VectorXd& t) {
      return engine_cost_and_gradient(engine, cost_mat, t).value;
    };
    auto g = [&](const VectorXd& t) {
      return engine_cost_and_gradient(engine, cost_mat, t).gradient;
    };
    return optim::bfgs_minimize(f, g, std::move(theta), bopts);
  };

  VectorXd theta = res.circuit.angles();
  auto sol = inner_minimize(theta);
  theta = sol.x;
  double value = sol.value;
  record(theta, value);

  if (!options.adapt_growth) {
    // a zero-gradient start can sit on a saddle (real Hamiltonian, real
    // state); kick the angles and retry while it helps
    for (int attempt = 0; attempt < 3; ++attempt) {
      VectorXd probe = theta;
      for (Eigen::Index i = 0; i < probe.size(); ++i) probe[i] += options.kick * gauss(rng);
      auto retry = inner_minimize(probe);
      if (retry.value < value - 1e-12) {
        theta = retry.x;
        value = retry.value;
        record(theta, value);
      }
    }
    res.circuit.set_angles(theta);
    res.final_cost = value;
    res.converged = true;
    return res;
  }

  // Hessian-augmented ADAPT growth
  if (options.pool.candidates.empty()) throw ConfigInvalid("adapt growth needs a pool");
  for (int round = 0; round < options.max_growth_rounds; ++round) {
    res.circuit.set_angles(theta);
    Reference state = apply(res.circuit);
    VectorXd g = adapt_gradient(options.pool, state, cost_op);
    Eigen::Index gi = 0;
    const double gmax = g.size() ? g.cwiseAbs().maxCoeff(&gi) : 0.0;

    std::vector<std::pair<Eigen::Index, double>> additions;  // pool index, start angle
    if (gmax >= options.gradient_tolerance) {
      additions.emplace_back(gi, 0.0);
    } else {
      auto hess = adapt_hessian(options.pool, state, cost_op);
      if (hess.eigenvalues[0] >= -options.hessian_tolerance) {
        res.converged = true;  // gradient flat and Hessian positive semidefinite
        break;
      }
      // append every pool operator carrying weight in the most unstable
      // direction, displaced along it so the next sweep sees the curvature
      VectorXd dir = hess.eigenvectors.col(0);
      for (Eigen::Index i = 0; i < dir.size(); ++i)
        if (std::abs(dir[i]) > options.weight_cutoff)
          additions.emplace_back(i, options.kick * dir[i]);
    }
    if (additions.empty() ||
        res.circuit.layers.size() + additions.size() > std::size_t(options.max_layers))
      break;
    for (auto [idx, angle] : additions) {
      res.circuit.layers.push_back(Layer{options.pool.candidates[std::size_t(idx)], angle});
      engine.add_generator(options.pool.candidates[std::size_t(idx)]);
    }
    theta = res.circuit.angles();
    auto grown = inner_minimize(theta);
    theta = grown.x;
    value = grown.value;
    record(theta, value);
  }
  res.circuit.set_angles(theta);
  res.final_cost = value;
  return res;
}

// --- shot-noise machinery ----------------------------------------------------

namespace {

// Pauli view of the cost operator: spin operators pass through, fermionic
// ones go through the Jordan-Wigner image. Terms are sampled one at a time.
struct SampledTerm {
  opalg::PauliString string;
  double coefficient;  // Hermitian sums have real coefficients
  bool identity;
};

struct Sampler {
  std::vector<SampledTerm> terms;
  bool jw = false;

  explicit Sampler(const OperatorSum& op) {
    OperatorSum pauli;
    if (op.kind == opalg::OpKind::Fermion) {
      pauli = opalg::jw_transform(op);
      jw = true;
    } else {
      pauli = opalg::canonicalize(op);
    }
    for (const auto& t : pauli.paulis) {
      if (std::abs(t.coeff.imag()) > 1e-10 * std::max(1.0, std::abs(t.coeff)))
        throw Error("sampled cost operator must be Hermitian");
      terms.push_back({t, t.coeff.real(), t.is_identity()});
    }
  }

  double string_mean(const opalg::PauliString& p, const Basis& basis,
                     const VectorXcd& psi) const {
    opalg::PauliString unit = p;
    unit.coeff = {1.0, 0.0};
    if (jw) return opalg::jw_pauli_expectation(unit, basis, psi).real();
    OperatorSum one;
    one.kind = opalg::OpKind::Spin;
    one.site_count = p.sites();
    one.paulis = {unit};
    return psi.dot(opalg::apply_operator(one, basis, psi)).real();
  }
};

SampledValue sample_from_view(const Sampler& sampler, const Basis& basis,
                              const ReferenceView& ref, const ShotModel& model,
                              std::uint64_t eval_index) {
  if (model.shots_per_eval < 1) throw Error("shot model needs shots >= 1");
  std::mt19937_64 rng(stream_seed(model.rng_seed, eval_index));
  SampledValue out;
  double var_sum = 0.0;
  const int shots = model.shots_per_eval;
  for (const auto& term : sampler.terms) {
    if (term.identity) {
      out.estimate += term.coefficient;
      continue;
    }
    double mean = 0.0;
    for (Eigen::Index a = 0; a < ref.weights.size(); ++a)
      mean += ref.weights[a] * sampler.string_mean(term.string, basis, ref.vectors.col(a));
    const double p_plus = std::clamp(0.5 * (1.0 + mean), 0.0, 1.0);
    std::binomial_distribution<int> binom(shots, p_plus);
    const int plus = binom(rng);
    const double m_hat = 2.0 * double(plus) / shots - 1.0;
    out.estimate += term.coefficient * m_hat;
    if (shots > 1) {
      const double sample_var = (1.0 - m_hat * m_hat) * shots / (shots - 1.0);
      var_sum += term.coefficient * term.coefficient * sample_var / shots;
    }
  }
  out.stderr_estimate = std::sqrt(var_sum);
  return out;
}

}  // namespace

SampledValue sampled_cost(const VariationalCircuit& circuit, const CostSpec& cost,
                          const ShotModel& model, std::uint64_t eval_index) {
  Reference state = apply(circuit);
  ReferenceView ref = view_of(state);
  Basis basis(sector_of(state));
  Sampler sampler(cost.cost_operator());
  return sample_from_view(sampler, basis, ref, model, eval_index);
}

PatternSearchResult pattern_search(const VariationalCircuit& circuit, const CostSpec& cost,
                                   const ShotModel& model, long budget,
                                   const PatternSearchOptions& options) {
  PatternSearchResult res;
  res.circuit = circuit;
  if (budget < model.shots_per_eval) return res;

  // exact engine for the diagnostic column
  CircuitEngine engine(circuit.reference, generators_of(circuit));
  SparseXcd cost_mat = build_matrix(cost.cost_operator(), engine.basis());
  auto exact_at = [&](const VectorXd& t) {
    return engine_cost_and_gradient(engine, cost_mat, t).value;
  };

  Sampler sampler(cost.cost_operator());
  std::uint64_t eval_index = 0;
  auto evaluate = [&](const VectorXd& t) {
    const auto& ref = engine.reference();
    ReferenceView rotated;
    rotated.weights = ref.weights;
    rotated.vectors.resize(ref.vectors.rows(), ref.vectors.cols());
    for (Eigen::Index a = 0; a < ref.weights.size(); ++a)
      rotated.vectors.col(a) = engine.forward(t, ref.vectors.col(a));
    SampledValue v = sample_from_view(sampler, engine.basis(), rotated, model, eval_index++);
    res.shots_used += model.shots_per_eval;
    return v;
  };

  VectorXd theta = circuit.angles();
  SampledValue best = evaluate(theta);
  int iter = 0;
  auto log_row = [&](const SampledValue& v) {
    TrajectoryRow row;
    row.iter = iter++;
    row.theta = theta;
    row.cost = v.estimate;
    row.exact_cost = exact_at(theta);
    row.shots_cumulative = res.shots_used;
    res.trajectory.push_back(row);
  };
  log_row(best);

  double step = options.initial_step;
  const Eigen::Index n = theta.size();
  while (step > options.min_step && res.shots_used + model.shots_per_eval <= budget && n > 0) {
    bool improved = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (double sign : {1.0, -1.0}) {
        if (res.shots_used + model.shots_per_eval > budget) break;
        VectorXd cand = theta;
        cand[i] += sign * step;
        SampledValue v = evaluate(cand);
        const double pooled = std::hypot(v.stderr_estimate, best.stderr_estimate);
        if (v.estimate < best.estimate - options.acceptance_margin * pooled) {
          theta = cand;
          best = v;
          improved = true;
          log_row(v);
        }
      }
    }
    if (!improved) step *= options.shrink;
  }
  res.circuit.set_angles(theta);
  return res;
}

VariationalCircuit hubbard_cycle_circuit(int rungs, int depth, Reference reference) {
  VariationalCircuit c;
  c.reference = std::move(reference);
  const OperatorSum gens[3] = {opalg::hubbard_hop_x(rungs), opalg::hubbard_hop_y(rungs),
                               opalg::hubbard_onsite(rungs)};
  for (int k = 0; k < depth; ++k) c.layers.push_back(Layer{gens[k % 3], 0.0});
  return c;
}

std::string trajectory_to_json(const std::vector<TrajectoryRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json row;
    row["iter"] = r.iter;
    row["theta"] = std::vector<double>(r.theta.data(), r.theta.data() + r.theta.size());
    row["cost"] = r.cost;
    row["exact_cost"] = r.exact_cost;
    row["shots_cumulative"] = r.shots_cumulative;
    j.push_back(row);
  }
  return j.dump();
}

}  // namespace iqs::varcirc
