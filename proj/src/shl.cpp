#include "iqs/shl.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "iqs/optim.hpp"

namespace iqs::shl {

namespace {

using opalg::Basis;
using opalg::pauli_from_sites;
using opalg::PauliString;

VectorXcd apply(const OperatorSum& op, const Basis& basis, const VectorXcd& x) {
  return opalg::apply_operator(op, basis, x);
}

}  // namespace

namespace {

// core assembly on prebuilt sparse matrices; shared by the public entry point
// and the outer learning loop
TdvpMatrices assemble_tdvp(const SparseXcd& h, const std::vector<SparseXcd>& generators,
                           const SparseXcd& drive, const SparseXcd& probe,
                           const VectorXcd& psi) {
  const auto n = Eigen::Index(generators.size());
  MatrixXcd a(psi.size(), n);
  for (Eigen::Index i = 0; i < n; ++i) a.col(i) = generators[std::size_t(i)] * psi;

  VectorXcd hpsi = h * psi;
  const double energy = psi.dot(hpsi).real();

  TdvpMatrices out;
  out.ground_variance = (hpsi - energy * psi).squaredNorm();

  VectorXd means(n);
  for (Eigen::Index i = 0; i < n; ++i) means[i] = psi.dot(a.col(i)).real();

  out.m = (a.adjoint() * a).real() - means * means.transpose();
  out.m = 0.5 * (out.m + out.m.transpose()).eval();

  MatrixXcd b(psi.size(), n);  // (H - E) u_i
  for (Eigen::Index i = 0; i < n; ++i) b.col(i) = h * a.col(i) - energy * a.col(i);
  // K_ij = Im <u_j|(H - E)|u_i>
  out.k = (a.adjoint() * b).imag().transpose();

  VectorXcd vpsi = drive * psi;
  VectorXcd vshift = vpsi - psi.dot(vpsi) * psi;
  VectorXcd opsi = probe * psi;
  out.v.resize(n);
  out.o.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    out.v[j] = a.col(j).dot(vshift).real();
    out.o[j] = -2.0 * a.col(j).dot(opsi).imag();
  }
  return out;
}

}  // namespace

TdvpMatrices tdvp_matrices(const ResponseProblem& problem) {
  for (const auto& g : problem.ansatz.generators)
    if (!opalg::is_hermitian(g)) throw NonHermitianPool("tangent generator not Hermitian");
  if (!opalg::is_hermitian(problem.drive) || !opalg::is_hermitian(problem.probe))
    throw NonHermitianPool("drive and probe must be Hermitian");

  Basis basis(problem.ground.sector);
  std::vector<SparseXcd> gens;
  gens.reserve(problem.ansatz.generators.size());
  for (const auto& g : problem.ansatz.generators) gens.push_back(build_matrix(g, basis));
  TdvpMatrices out = assemble_tdvp(build_matrix(problem.h0, basis), gens,
                                   build_matrix(problem.drive, basis),
                                   build_matrix(problem.probe, basis),
                                   problem.ground.amplitudes);
  if (problem.strict && out.ground_variance > problem.variance_tolerance)
    throw NotGroundState("reference state variance exceeds the tolerance");
  return out;
}

ChiEvaluator::ChiEvaluator(const TdvpMatrices& mats, double metric_cutoff) {
  if (mats.m.rows() == 0) {
    poles_.resize(0);
    weights_.resize(0);
    return;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(mats.m);
  const double scale = es.eigenvalues().size()
                           ? std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1e-300)
                           : 0.0;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (es.eigenvalues()[i] > metric_cutoff * scale) keep.push_back(i);
  const auto r = Eigen::Index(keep.size());
  if (r == 0) {
    poles_.resize(0);
    weights_.resize(0);
    return;
  }
  MatrixXd t(mats.m.rows(), r);
  for (Eigen::Index j = 0; j < r; ++j)
    t.col(j) = es.eigenvectors().col(keep[std::size_t(j)]) /
               std::sqrt(es.eigenvalues()[keep[std::size_t(j)]]);

  MatrixXd k_w = t.transpose() * mats.k * t;  // whitened, antisymmetric
  Eigen::ComplexEigenSolver<MatrixXcd> ces(k_w.cast<Complex>());
  poles_ = ces.eigenvalues();
  MatrixXcd s = ces.eigenvectors();
  VectorXcd vt = (t.transpose() * mats.v).cast<Complex>();
  VectorXcd ot = (t.transpose() * mats.o).cast<Complex>();
  VectorXcd p = s.partialPivLu().solve(vt);
  VectorXcd q = s.transpose() * ot;
  weights_ = q.cwiseProduct(p);
}

Complex ChiEvaluator::at(double omega, double delta) const {
  if (delta <= 0.0) throw Error("broadening must be positive");
  Complex acc{0, 0};
  const Complex z = Complex(0, -1) * Complex(omega, delta);
  for (Eigen::Index j = 0; j < poles_.size(); ++j) {
    const Complex den = poles_[j] + z;
    if (std::abs(den) < 1e-14)
      throw SingularSystem("resolvent singular at omega = " + std::to_string(omega));
    acc += weights_[j] / den;
  }
  return acc;
}

std::vector<double> ChiEvaluator::pole_frequencies() const {
  std::vector<double> out;
  for (Eigen::Index j = 0; j < poles_.size(); ++j) out.push_back(std::abs(poles_[j].imag()));
  return out;
}

Susceptibility variational_susceptibility(const TdvpMatrices& mats, const VectorXd& grid,
                                          double delta) {
  ChiEvaluator chi(mats);
  Susceptibility out;
  out.frequencies = grid;
  out.broadening = delta;
  out.values.resize(grid.size());
  for (Eigen::Index i = 0; i < grid.size(); ++i) out.values[i] = chi.at(grid[i], delta);
  return out;
}

double spectral_cost(const Susceptibility& chi_var, const Susceptibility& chi_tar,
                     CostVariant variant) {
  if (chi_var.frequencies.size() != chi_tar.frequencies.size())
    throw DimensionMismatch("spectra live on different grids");
  double acc = 0.0;
  for (Eigen::Index i = 0; i + 1 < chi_var.frequencies.size(); ++i) {
    const double dw = chi_var.frequencies[i + 1] - chi_var.frequencies[i];
    auto integrand = [&](Eigen::Index j) {
      if (variant == CostVariant::Overlap)
        return -chi_var.values[j].imag() * chi_tar.values[j].imag();
      return std::norm(chi_var.values[j] - chi_tar.values[j]);
    };
    acc += 0.5 * dw * (integrand(i) + integrand(i + 1));
  }
  return acc / (2.0 * kPi);
}

double spectral_cost(const ChiEvaluator& chi_var, const PeakList& target, double delta) {
  double acc = 0.0;
  for (const auto& peak : target) acc += peak.weight * chi_var.at(peak.omega, delta).imag();
  return acc;
}

double peak_cost(const ChiEvaluator& chi_var, double omega_star, double delta) {
  return chi_var.at(omega_star, delta).imag();
}

// --- outer loop ----------------------------------------------------------------

ShlResult shl_learn(const std::function<OperatorSum(const VectorXd&)>& family,
                    const std::vector<ShlChannel>& channels,
                    const opalg::Sector& ground_sector, const VectorXd& x0,
                    const ShlOptions& options) {
  ShlResult res;
  const opalg::Sector full = ground_sector.kind == opalg::OpKind::Spin
                                 ? opalg::Sector::spin_full(ground_sector.site_count)
                                 : opalg::Sector::fermion_full(ground_sector.site_count);
  const bool restricted =
      bool(ground_sector.magnetization) || bool(ground_sector.n_up) || bool(ground_sector.n_down);
  Basis full_basis(full);
  Basis ground_basis(ground_sector);

  // parameter-independent matrices, built once
  struct Prepared {
    SparseXcd drive;
    std::vector<SparseXcd> generators;
    const PeakList* target;
  };
  std::vector<Prepared> prepared;
  for (const auto& channel : channels) {
    Prepared p;
    p.drive = build_matrix(channel.drive, full_basis);
    for (const auto& g : channel.ansatz.generators) {
      if (!opalg::is_hermitian(g)) throw NonHermitianPool("tangent generator not Hermitian");
      p.generators.push_back(build_matrix(g, full_basis));
    }
    p.target = &channel.target;
    prepared.push_back(std::move(p));
  }

  double stage_delta = options.delta;
  auto cost = [&](const VectorXd& x) {
    OperatorSum h = family(x);
    SparseXcd h_full = build_matrix(h, full_basis);
    VectorXcd psi;
    if (restricted) {
      auto gr = exact::ground_state(build_matrix(h, ground_basis), ground_sector, options.ground);
      if (gr.degenerate && options.reject_degenerate)
        throw DegenerateGroundState("candidate ground state is degenerate in its sector");
      psi = opalg::embed_state(gr.state, full).amplitudes;
    } else {
      auto gr = exact::ground_state(h_full, full, options.ground);
      if (gr.degenerate && options.reject_degenerate)
        throw DegenerateGroundState("candidate ground state is degenerate");
      psi = gr.state.amplitudes;
    }
    double acc = 0.0;
    for (const auto& p : prepared) {
      ChiEvaluator chi(assemble_tdvp(h_full, p.generators, p.drive, p.drive, psi));
      acc += spectral_cost(chi, *p.target, stage_delta);
    }
    return acc;
  };

  optim::BfgsOptions bopts;
  bopts.max_iters = options.max_iters;
  bopts.grad_tol = 1e-10;
  bopts.step_tol = options.param_tol;
  bopts.fd_step = options.fd_step;
  bopts.initial_step = 0.5;

  std::vector<double> schedule = options.delta_schedule;
  schedule.push_back(options.delta);

  VectorXd x = x0;
  for (double delta : schedule) {
    stage_delta = delta;
    double value = cost(x);
    res.trajectory.emplace_back(x, value);
    res.converged = false;
    for (int sweep = 0; sweep < 12; ++sweep) {
      auto sol = optim::bfgs_minimize(cost, nullptr, x, bopts);
      res.trajectory.emplace_back(sol.x, sol.value);
      const double moved = (sol.x - x).norm();
      x = sol.x;
      value = sol.value;
      if (moved >= options.param_tol) continue;
      // symmetric starts sit on zero-gradient points and narrow minima can be
      // straddled; probe each axis over a ladder of steps, positive side first
      bool escaped = false;
      for (double scale : {1.0, 0.25, 1.0 / 16.0, 1.0 / 64.0}) {
        for (Eigen::Index i = 0; i < x.size() && !escaped; ++i) {
          for (double sign : {1.0, -1.0}) {
            VectorXd probe = x;
            probe[i] += sign * scale * options.stall_probe;
            const double pv = cost(probe);
            if (pv < value - 1e-12) {
              x = probe;
              value = pv;
              res.trajectory.emplace_back(x, value);
              escaped = true;
              break;
            }
          }
        }
        if (escaped) break;
      }
      if (!escaped) {
        res.converged = true;
        break;
      }
    }
  }
  res.params = x;
  return res;
}

// --- momentum ansatz -------------------------------------------------------------

TangentAnsatz momentum_ansatz(ChainModel, int sites, double k, AnsatzLevel level) {
  TangentAnsatz ansatz;
  auto add_pair = [&](const OperatorSum& t) {
    OperatorSum tdag = opalg::adjoint(t);
    OperatorSum sym = opalg::canonicalize(t + tdag);
    OperatorSum antisym = opalg::canonicalize(Complex(0, 1) * t + Complex(0, -1) * tdag);
    if (!sym.paulis.empty()) ansatz.generators.push_back(sym);
    if (!antisym.paulis.empty()) ansatz.generators.push_back(antisym);
  };

  add_pair(opalg::sigma_k_plus(sites, k));
  if (level == AnsatzLevel::OneParticle) return ansatz;

  std::vector<double> momenta;
  for (int m = 0; m < sites; ++m) momenta.push_back(2.0 * kPi * m / sites);
  for (double kp : momenta)
    add_pair(opalg::spin_product(opalg::sigma_k_z(sites, kp),
                                 opalg::sigma_k_plus(sites, k - kp)));
  if (level == AnsatzLevel::UpToTwoParticle) return ansatz;

  for (std::size_t i = 0; i < momenta.size(); ++i)
    for (std::size_t j = i; j < momenta.size(); ++j) {
      OperatorSum zz = opalg::spin_product(opalg::sigma_k_z(sites, momenta[i]),
                                           opalg::sigma_k_z(sites, momenta[j]));
      add_pair(opalg::spin_product(zz, opalg::sigma_k_plus(sites, k - momenta[i] - momenta[j])));
    }
  return ansatz;
}

// --- worked models ------------------------------------------------------------------

OperatorSum two_spin_model(double b_z, double j_i, double j_h) {
  std::vector<PauliString> t;
  t.push_back(pauli_from_sites(2, {{0, 'Z'}}, b_z));
  t.push_back(pauli_from_sites(2, {{1, 'Z'}}, b_z));
  t.push_back(pauli_from_sites(2, {{0, 'Z'}, {1, 'Z'}}, -j_i));
  for (char c : {'X', 'Y', 'Z'}) t.push_back(pauli_from_sites(2, {{0, c}, {1, c}}, -j_h));
  return opalg::spin_operator(2, std::move(t));
}

OperatorSum ring_exchange_model(double b_z, double j_h, double j_re) {
  std::vector<PauliString> t;
  for (int i = 0; i < 3; ++i) t.push_back(pauli_from_sites(3, {{i, 'Z'}}, b_z));
  for (auto [i, j] : {std::pair{0, 1}, {1, 2}, {0, 2}})
    for (char c : {'X', 'Y', 'Z'}) t.push_back(pauli_from_sites(3, {{i, c}, {j, c}}, -j_h));
  // scalar chirality: sum over permutations with Levi-Civita signs
  const char axes[3] = {'X', 'Y', 'Z'};
  const int perms[6][3] = {{0, 1, 2}, {1, 2, 0}, {2, 0, 1}, {0, 2, 1}, {2, 1, 0}, {1, 0, 2}};
  for (int p = 0; p < 6; ++p) {
    const double sign = p < 3 ? 1.0 : -1.0;
    t.push_back(pauli_from_sites(
        3, {{0, axes[perms[p][0]]}, {1, axes[perms[p][1]]}, {2, axes[perms[p][2]]}},
        sign * j_re));
  }
  return opalg::spin_operator(3, std::move(t));
}

OperatorSum heisenberg_chain(int sites, double b_z, double j) {
  std::vector<PauliString> t;
  for (int i = 0; i < sites; ++i) t.push_back(pauli_from_sites(sites, {{i, 'Z'}}, b_z));
  for (int i = 0; i < sites; ++i)
    for (char c : {'X', 'Y', 'Z'})
      t.push_back(pauli_from_sites(sites, {{i, c}, {(i + 1) % sites, c}}, -j));
  return opalg::spin_operator(sites, std::move(t));
}

TangentAnsatz three_spin_tangent_ansatz() {
  TangentAnsatz ansatz;
  for (int i = 0; i < 3; ++i)
    for (char c : {'X', 'Y', 'Z'})
      ansatz.generators.push_back(opalg::spin_operator(3, {pauli_from_sites(3, {{i, c}})}));
  for (auto [i, j] : {std::pair{0, 1}, {0, 2}, {1, 2}})
    for (char a : {'X', 'Y', 'Z'})
      for (char b : {'X', 'Y', 'Z'})
        ansatz.generators.push_back(
            opalg::spin_operator(3, {pauli_from_sites(3, {{i, a}, {j, b}})}));
  return ansatz;
}

std::string to_csv(const ShlResult& result) {
  std::ostringstream os;
  os << "step,cost";
  for (Eigen::Index i = 0; i < result.params.size(); ++i) os << ",p" << i;
  os << "\n";
  char buf[64];
  for (std::size_t s = 0; s < result.trajectory.size(); ++s) {
    os << s;
    std::snprintf(buf, sizeof buf, ",%.17g", result.trajectory[s].second);
    os << buf;
    for (Eigen::Index i = 0; i < result.trajectory[s].first.size(); ++i) {
      std::snprintf(buf, sizeof buf, ",%.17g", result.trajectory[s].first[i]);
      os << buf;
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace iqs::shl
