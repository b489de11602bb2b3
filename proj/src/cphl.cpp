#include "iqs/cphl.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "iqs/hamlearn.hpp"

namespace iqs::cphl {

namespace {

using opalg::pauli_from_sites;
using opalg::PauliString;

int count_letters(const std::string& pattern, const char* set) {
  int n = 0;
  for (char c : pattern)
    if (std::string(set).find(c) != std::string::npos) ++n;
  return n;
}

}  // namespace

OperatorSum cim_hamiltonian(int sites, double g) {
  if (sites < 4) throw IndexOutOfRange("cluster Ising chain needs at least 4 sites");
  const double cluster = -(1.0 - g) / 2.0;
  const double ising = -(1.0 + g) / 2.0;
  std::vector<PauliString> terms;
  for (int i = 1; i + 1 < sites; ++i)
    terms.push_back(pauli_from_sites(sites, {{i - 1, 'Z'}, {i, 'X'}, {i + 1, 'Z'}}, cluster));
  terms.push_back(pauli_from_sites(sites, {{0, 'X'}, {1, 'Z'}}, cluster));
  terms.push_back(pauli_from_sites(sites, {{sites - 2, 'Z'}, {sites - 1, 'X'}}, cluster));
  for (int i = 0; i + 1 < sites; ++i)
    terms.push_back(pauli_from_sites(sites, {{i, 'Z'}, {i + 1, 'Z'}}, ising));
  return opalg::spin_operator(sites, std::move(terms));
}

OperatorSum string_operator(int sites) {
  if (sites < 4) throw IndexOutOfRange("string operator needs at least 4 sites");
  std::vector<std::pair<int, char>> ops;
  ops.emplace_back(0, 'Z');
  ops.emplace_back(1, 'Y');
  for (int i = 2; i + 2 < sites; ++i) ops.emplace_back(i, 'X');
  ops.emplace_back(sites - 2, 'Y');
  ops.emplace_back(sites - 1, 'Z');
  const double sign = sites % 2 == 0 ? 1.0 : -1.0;
  return opalg::spin_operator(sites, {pauli_from_sites(sites, ops, sign)});
}

double string_order(const QuantumState& state, int sites) {
  return opalg::expectation(state, string_operator(sites)).real();
}

OperatorSum cluster_stabilizer_sum(int sites) {
  std::vector<PauliString> terms;
  for (int i = 1; i + 1 < sites; ++i)
    terms.push_back(pauli_from_sites(sites, {{i - 1, 'Z'}, {i, 'X'}, {i + 1, 'Z'}}));
  terms.push_back(pauli_from_sites(sites, {{0, 'X'}, {1, 'Z'}}));
  terms.push_back(pauli_from_sites(sites, {{sites - 2, 'Z'}, {sites - 1, 'X'}}));
  return opalg::spin_operator(sites, std::move(terms));
}

OperatorSum chain_pattern(int sites, const std::string& pattern) {
  const int len = int(pattern.size());
  if (len > sites) throw IndexOutOfRange("pattern longer than chain");
  std::vector<PauliString> terms;
  for (int offset = 0; offset + len <= sites; ++offset) {
    std::vector<std::pair<int, char>> ops;
    for (int i = 0; i < len; ++i)
      if (pattern[std::size_t(i)] != 'I') ops.emplace_back(offset + i, pattern[std::size_t(i)]);
    terms.push_back(pauli_from_sites(sites, ops));
  }
  return opalg::spin_operator(sites, std::move(terms));
}

std::vector<AnsatzTerm> cim_symmetric_ansatz(int sites) {
  struct Entry {
    const char* pattern;
    double weight;
  };
  // two-body, three-body (penalty 2), and ABBA four-body (penalty 4) patterns;
  // every pattern is real (even Y count) and commutes with the X string
  // (even number of Y/Z letters), preserving the Z2 x Z2 structure. The ZXZ
  // entry carries the X1 Z2 / Z_{N-1} X_N boundary completion so the bare
  // couplings stay exactly representable on the open chain.
  static const Entry entries[] = {
      {"XX", 1.0},   {"YY", 1.0},   {"ZZ", 1.0},   {"ZIZ", 1.0},
      {"ZXZ", 2.0},  {"XXX", 2.0},  {"YXY", 2.0},
      {"XXXX", 4.0}, {"XYYX", 4.0}, {"XZZX", 4.0}, {"YXXY", 4.0}, {"YYYY", 4.0},
      {"YZZY", 4.0}, {"ZXXZ", 4.0}, {"ZYYZ", 4.0}, {"ZZZZ", 4.0},
  };
  std::vector<AnsatzTerm> out;
  for (const auto& e : entries) {
    const std::string pattern = e.pattern;
    if (count_letters(pattern, "Y") % 2 != 0 || count_letters(pattern, "YZ") % 2 != 0)
      throw Error("ansatz pattern breaks the protecting symmetry: " + pattern);
    OperatorSum op = pattern == "ZXZ" ? cluster_stabilizer_sum(sites)
                                      : chain_pattern(sites, pattern);
    const bool bare = pattern == "ZXZ" || pattern == "ZZ";
    out.push_back(AnsatzTerm{pattern, std::move(op), e.weight, bare});
  }
  return out;
}

VectorXd HamiltonianFamily::coefficients(double g) const {
  VectorXd c = VectorXd::Zero(harmonics.rows());
  for (Eigen::Index m = 0; m < harmonics.cols(); ++m) {
    const double s = std::sin((double(m) + 1.0) * kPi * (g + 1.0) / 2.0);
    c += harmonics.col(m) * s;
  }
  return c;
}

OperatorSum HamiltonianFamily::operator_at(double g) const {
  OperatorSum h = base(g);
  const VectorXd c = coefficients(g);
  for (Eigen::Index a = 0; a < c.size(); ++a) {
    if (c[a] == 0.0) continue;
    h = h + Complex(c[a], 0.0) * terms[std::size_t(a)].op;
  }
  return opalg::canonicalize(h);
}

MatrixXd fit_harmonics(const MatrixXd& values, const VectorXd& grid, int m_max, double kappa) {
  const Eigen::Index ng = grid.size();
  MatrixXd a(ng, m_max);
  for (Eigen::Index j = 0; j < ng; ++j)
    for (int m = 0; m < m_max; ++m)
      a(j, m) = std::sin((m + 1.0) * kPi * (grid[j] + 1.0) / 2.0);
  MatrixXd normal = a.transpose() * a;
  normal.diagonal().array() += kappa;
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(normal);
  if (es.eigenvalues()[0] < 1e-12 * std::max(1.0, es.eigenvalues()[m_max - 1]))
    throw SingularSystem("harmonic design matrix is rank deficient at kappa = 0");
  Eigen::LLT<MatrixXd> llt(normal);
  MatrixXd out(values.rows(), m_max);
  for (Eigen::Index row = 0; row < values.rows(); ++row)
    out.row(row) = llt.solve(a.transpose() * values.row(row).transpose()).transpose();
  return out;
}

namespace {

// ground-state-only queries go through the iterative eigensolver
exact::GroundOptions fast_ground_options() {
  exact::GroundOptions opts;
  opts.dense_threshold = 64;
  opts.tolerance = 1e-11;
  return opts;
}

}  // namespace

StateSolver exact_state_solver(int sites) {
  return [sites](const OperatorSum& biased, double) {
    auto gr = exact::ground_state(biased, opalg::Sector::spin_full(sites), fast_ground_options());
    return gr.state;
  };
}

VectorXd string_profile(const HamiltonianFamily& family, const VectorXd& grid) {
  VectorXd out(grid.size());
  OperatorSum str = string_operator(family.sites);
  for (Eigen::Index j = 0; j < grid.size(); ++j) {
    auto gr = exact::ground_state(family.operator_at(grid[j]),
                                  opalg::Sector::spin_full(family.sites), fast_ground_options());
    out[j] = opalg::expectation(gr.state, str).real();
  }
  return out;
}

double boundary_estimate(const VectorXd& grid, const VectorXd& s, double level) {
  double boundary = grid[0];
  bool above = s[0] >= level;
  if (above) boundary = grid[grid.size() - 1];
  for (Eigen::Index j = 0; j + 1 < grid.size(); ++j) {
    if (s[j] >= level && s[j + 1] < level) {
      const double t = (s[j] - level) / (s[j] - s[j + 1]);
      boundary = grid[j] + t * (grid[j + 1] - grid[j]);
    }
  }
  return boundary;
}

CphlResult cphl_run(const CphlConfig& config, int sites, const std::vector<AnsatzTerm>& ansatz,
                    const StateSolver& solver_in) {
  if (config.grid_points < 2 || config.m_max < 1) throw ConfigInvalid("cphl grid/harmonics");
  StateSolver solver = solver_in ? solver_in : exact_state_solver(sites);
  const auto nterms = Eigen::Index(ansatz.size());

  VectorXd grid(config.grid_points);
  for (int j = 0; j < config.grid_points; ++j)
    grid[j] = -1.0 + 2.0 * j / (config.grid_points - 1.0);

  CphlResult res;
  res.grid = grid;
  res.family.sites = sites;
  res.family.base = [sites](double g) { return cim_hamiltonian(sites, g); };
  res.family.terms = ansatz;
  res.family.harmonics = MatrixXd::Zero(nterms, config.m_max);

  // corrections are learned only for the non-bare terms; bare couplings of
  // the reference family stay fixed
  std::vector<OperatorSum> term_ops;
  std::vector<Eigen::Index> learn_rows;
  for (Eigen::Index a = 0; a < nterms; ++a) {
    if (ansatz[std::size_t(a)].bare) continue;
    term_ops.push_back(ansatz[std::size_t(a)].op);
    learn_rows.push_back(a);
  }
  VectorXd weights(Eigen::Index(learn_rows.size()));
  for (std::size_t i = 0; i < learn_rows.size(); ++i)
    weights[Eigen::Index(i)] = ansatz[std::size_t(learn_rows[i])].weight;
  OperatorSum string_op = string_operator(sites);

  double delta = config.delta0;
  double prev_err = std::numeric_limits<double>::infinity();
  int shrinks = 0;
  for (int k = 0; k < config.max_iters; ++k) {
    const double lambda_k =
        config.lambda0 == 0.0 ? 0.0 : config.lambda0 / (1.0 + k * config.beta_decay);

    MatrixXd corrections(Eigen::Index(learn_rows.size()), grid.size());
    for (Eigen::Index j = 0; j < grid.size(); ++j) {
      const double g = grid[j];
      OperatorSum h_g = res.family.operator_at(g);
      OperatorSum biased = opalg::canonicalize(h_g + Complex(-lambda_k, 0.0) * string_op);
      QuantumState psi = solver(biased, g);
      hamlearn::LearnProblem problem;
      problem.reference_h0 = h_g;
      problem.ansatz_terms = term_ops;
      problem.weights = weights;
      problem.alpha = config.hl_alpha;
      corrections.col(j) = hamlearn::learn(psi, problem).coefficients;
    }

    MatrixXd fitted = fit_harmonics(corrections, grid, config.m_max, config.kappa);
    MatrixXd update = MatrixXd::Zero(nterms, config.m_max);
    for (std::size_t i = 0; i < learn_rows.size(); ++i)
      update.row(learn_rows[i]) = fitted.row(Eigen::Index(i));

    // a below-tolerance update is never committed; with lambda0 = 0 the
    // family therefore stays exactly bare
    const double early_err = delta * update.norm();
    if (early_err < config.convergence_tol) {
      res.iterations = k + 1;
      res.converged = true;
      CphlIterationRow row;
      row.iter = k;
      row.lambda = lambda_k;
      row.delta = delta;
      row.error = early_err;
      VectorXd profile = string_profile(res.family, grid);
      row.boundary = boundary_estimate(grid, profile);
      res.profiles.push_back(std::move(profile));
      res.log.push_back(row);
      break;
    }
    const double err = delta * update.norm();

    MatrixXd candidate = res.family.harmonics + delta * update;
    HamiltonianFamily trial = res.family;
    trial.harmonics = candidate;
    double max_abs = 0.0;
    for (Eigen::Index j = 0; j < grid.size(); ++j)
      max_abs = std::max(max_abs, trial.coefficients(grid[j]).cwiseAbs().maxCoeff());

    CphlIterationRow row;
    row.iter = k;
    row.lambda = lambda_k;
    row.delta = delta;
    row.error = err;

    if (max_abs > config.coefficient_cap) {
      delta /= (1.0 + config.shrink_rate);
      if (++shrinks > config.max_shrinks)
        throw DivergenceDetected("coefficient cap exceeded after max shrinks");
      VectorXd profile = string_profile(res.family, grid);
      row.boundary = boundary_estimate(grid, profile);
      res.profiles.push_back(std::move(profile));
      res.log.push_back(row);
      continue;
    }

    res.family.harmonics = candidate;
    res.iterations = k + 1;
    VectorXd profile = string_profile(res.family, grid);
    row.boundary = boundary_estimate(grid, profile);
    res.profiles.push_back(std::move(profile));
    res.log.push_back(row);

    if (err >= config.stall_ratio * prev_err) delta /= (1.0 + config.shrink_rate);
    prev_err = err;
  }

  // relevance weights on a fine grid
  res.relevance = VectorXd::Zero(nterms);
  const int fine = 401;
  for (int j = 0; j < fine; ++j) {
    const double g = -1.0 + 2.0 * j / (fine - 1.0);
    res.relevance = res.relevance.cwiseMax(res.family.coefficients(g).cwiseAbs());
  }
  return res;
}

std::string family_to_json(const HamiltonianFamily& family) {
  nlohmann::json j;
  j["model"] = "cim";
  j["sites"] = family.sites;
  j["terms"] = nlohmann::json::array();
  for (const auto& t : family.terms)
    j["terms"].push_back({{"label", t.label}, {"weight", t.weight}});
  j["harmonics"] = nlohmann::json::array();
  for (Eigen::Index a = 0; a < family.harmonics.rows(); ++a) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index m = 0; m < family.harmonics.cols(); ++m)
      row.push_back(family.harmonics(a, m));
    j["harmonics"].push_back(row);
  }
  return j.dump();
}

std::string profiles_to_csv(const CphlResult& result) {
  std::ostringstream os;
  os << "g,string_order,iteration\n";
  char buf[96];
  for (std::size_t it = 0; it < result.profiles.size(); ++it) {
    const int iter = result.log[it].iter;
    for (Eigen::Index j = 0; j < result.grid.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%d\n", result.grid[j],
                    result.profiles[it][j], iter);
      os << buf;
    }
  }
  return os.str();
}

std::string log_to_csv(const std::vector<CphlIterationRow>& rows) {
  std::ostringstream os;
  os << "iter,lambda,delta,err,phase_boundary_estimate\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.iter, r.lambda, r.delta,
                  r.error, r.boundary);
    os << buf;
  }
  return os.str();
}

}  // namespace iqs::cphl
