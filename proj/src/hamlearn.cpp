#include "iqs/hamlearn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <json.hpp>

#include "iqs/optim.hpp"

namespace iqs::hamlearn {

namespace {

using opalg::Basis;

struct EigSplit {
  VectorXd values;
  MatrixXd vectors;
  MatrixXd kernel;  // columns with |lambda| below tol * max|lambda|
  std::vector<Eigen::Index> range_indices;
};

EigSplit split_spectrum(const MatrixXd& a, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  EigSplit out;
  out.values = es.eigenvalues();
  out.vectors = es.eigenvectors();
  const double scale = out.values.size()
                           ? std::max(std::abs(out.values[0]), std::abs(out.values[out.values.size() - 1]))
                           : 0.0;
  const double cut = rel_tol * std::max(scale, 1e-300);
  std::vector<Eigen::Index> kernel_idx;
  for (Eigen::Index i = 0; i < out.values.size(); ++i) {
    if (std::abs(out.values[i]) <= cut)
      kernel_idx.push_back(i);
    else
      out.range_indices.push_back(i);
  }
  out.kernel.resize(a.rows(), Eigen::Index(kernel_idx.size()));
  for (Eigen::Index j = 0; j < out.kernel.cols(); ++j)
    out.kernel.col(j) = out.vectors.col(kernel_idx[std::size_t(j)]);
  return out;
}

// minimum-norm solution of A x = b through the eigendecomposition
VectorXd pseudo_solve(const EigSplit& es, const VectorXd& b) {
  VectorXd x = VectorXd::Zero(b.size());
  for (Eigen::Index i : es.range_indices) {
    const VectorXd u = es.vectors.col(i);
    x += u * (u.dot(b) / es.values[i]);
  }
  return x;
}

const opalg::Sector& sector_of(const State& s) {
  if (std::holds_alternative<QuantumState>(s)) return std::get<QuantumState>(s).sector;
  return std::get<MixedState>(s).sector;
}

// Minimize c'Ac + 2 alpha m'c on the unit sphere via the secular equation in
// the Lagrange multiplier; reduces to the bottom eigenvector when the linear
// term vanishes.
VectorXd sphere_minimize(const MatrixXd& a, const VectorXd& m, double alpha) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(a);
  const VectorXd& lam = es.eigenvalues();
  const MatrixXd& u = es.eigenvectors();
  VectorXd mt = u.transpose() * (alpha * m);
  auto pick_bottom = [&]() {
    VectorXd c = u.col(0);
    const double bias = m.dot(c);
    if (bias > 0.0) c = -c;
    if (std::abs(bias) < 1e-14) {
      Eigen::Index imax;
      c.cwiseAbs().maxCoeff(&imax);
      if (c[imax] < 0) c = -c;
    }
    return c;
  };
  if (mt.norm() < 1e-14) return pick_bottom();

  auto norm2_at = [&](double mu) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const double d = lam[i] - mu;
      if (std::abs(d) < 1e-300) return 1e60;
      s += (mt[i] / d) * (mt[i] / d);
    }
    return s;
  };
  const double lam0 = lam[0];
  const double hi = lam0 - 1e-12 * std::max(1.0, std::abs(lam0));
  if (norm2_at(hi) < 1.0) {
    // hard case: no weight on the bottom eigenvector; pad with it
    VectorXd part = VectorXd::Zero(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
      const double d = lam[i] - lam0;
      part[i] = d > 1e-12 ? -mt[i] / d : 0.0;
    }
    const double pad = std::sqrt(std::max(0.0, 1.0 - part.squaredNorm()));
    part[0] += (mt[0] <= 0.0 ? pad : -pad);
    return u * part;
  }
  double lo = lam0 - std::max(1.0, mt.norm());
  while (norm2_at(lo) > 1.0) lo -= std::max(1.0, mt.norm());
  double top = hi;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + top);
    (norm2_at(mid) < 1.0 ? lo : top) = mid;
  }
  const double mu = 0.5 * (lo + top);
  VectorXd c(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) c[i] = -mt[i] / (lam[i] - mu);
  c /= c.norm();
  return u * c;
}

}  // namespace

LinearConstraint LinearConstraint::non_negative(Eigen::Index index, Eigen::Index n) {
  LinearConstraint c;
  c.kind = Kind::GreaterEqual;
  c.coefficients = VectorXd::Zero(n);
  c.coefficients[index] = 1.0;
  c.rhs = 0.0;
  return c;
}

CorrelationSystem correlation_system(const State& state, const LearnProblem& problem) {
  const auto n = Eigen::Index(problem.ansatz_terms.size());
  Basis basis(sector_of(state));
  const bool has_h0 = problem.reference_h0.term_count() > 0;

  CorrelationSystem cs;
  cs.means = VectorXd::Zero(n);

  MatrixXd sym = MatrixXd::Zero(n, n);  // <{h_i, h_j}>/2 accumulated
  VectorXd h0h = VectorXd::Zero(n);     // <{H0, h_i}>/2
  double e0 = 0.0, e0sq = 0.0;

  auto accumulate = [&](const VectorXcd& psi, double p) {
    MatrixXcd y(psi.size(), n);
    for (Eigen::Index i = 0; i < n; ++i)
      y.col(i) = opalg::apply_operator(problem.ansatz_terms[std::size_t(i)], basis, psi);
    sym += p * (y.adjoint() * y).real();
    for (Eigen::Index i = 0; i < n; ++i) cs.means[i] += p * psi.dot(y.col(i)).real();
    if (has_h0) {
      VectorXcd h0psi = opalg::apply_operator(problem.reference_h0, basis, psi);
      e0 += p * psi.dot(h0psi).real();
      e0sq += p * h0psi.squaredNorm();
      h0h += p * (y.adjoint() * h0psi).real();
    }
  };

  if (std::holds_alternative<QuantumState>(state)) {
    accumulate(std::get<QuantumState>(state).amplitudes, 1.0);
  } else {
    const MixedState& rho = std::get<MixedState>(state);
    for (Eigen::Index a = 0; a < rho.rank(); ++a) accumulate(rho.vectors.col(a), rho.weights[a]);
  }

  cs.g = sym - cs.means * cs.means.transpose();
  cs.g = 0.5 * (cs.g + cs.g.transpose()).eval();
  cs.e0 = e0;
  cs.var0 = has_h0 ? e0sq - e0 * e0 : 0.0;
  cs.v = e0 * cs.means - h0h;
  return cs;
}

double variance(const State& state, const OperatorSum& h) {
  if (std::holds_alternative<QuantumState>(state))
    return opalg::variance(std::get<QuantumState>(state), h);
  return opalg::variance(std::get<MixedState>(state), h);
}

OperatorSum assemble(const OperatorSum& h0, const std::vector<OperatorSum>& terms,
                     const VectorXd& coefficients) {
  OperatorSum acc = h0;
  for (Eigen::Index i = 0; i < coefficients.size(); ++i) {
    if (coefficients[i] == 0.0) continue;
    acc = acc + Complex(coefficients[i], 0.0) * terms[std::size_t(i)];
  }
  return opalg::canonicalize(acc);
}

LearnResult learn(const State& state, const LearnProblem& problem) {
  const auto n = Eigen::Index(problem.ansatz_terms.size());
  if (problem.weights.size() && problem.weights.size() != n)
    throw DimensionMismatch("weights length != ansatz size");
  for (const auto& c : problem.constraints)
    if (c.coefficients.size() != n) throw DimensionMismatch("constraint length != ansatz size");

  CorrelationSystem cs = correlation_system(state, problem);
  const bool has_h0 = problem.reference_h0.term_count() > 0;
  VectorXd w = problem.weights.size() ? problem.weights : VectorXd(VectorXd::Zero(n));

  EigSplit gsplit = split_spectrum(cs.g, problem.kernel_tolerance);
  LearnResult out;
  out.kernel_dimension = int(gsplit.kernel.cols());
  out.kernel_basis = gsplit.kernel;
  out.kernel_overlap = out.kernel_dimension ? (gsplit.kernel.transpose() * cs.v).norm() : 0.0;
  if (out.kernel_overlap > problem.consistency_tolerance * std::max(1.0, cs.v.norm()))
    throw NoSolution("v has a component in ker(G); state and ansatz are inconsistent");

  // energy bias restricted to ker(G) when a reference term is present
  VectorXd bias_dir = cs.means;
  if (has_h0 && problem.alpha != 0.0)
    bias_dir = out.kernel_dimension
                   ? VectorXd(gsplit.kernel * (gsplit.kernel.transpose() * cs.means))
                   : VectorXd(VectorXd::Zero(n));
  const VectorXd b = cs.v - problem.alpha * bias_dir;

  MatrixXd a_mat = cs.g;
  a_mat.diagonal() += w;

  if (problem.normalize) {
    if (has_h0) throw Error("normalization requires an empty reference Hamiltonian");
    if (!problem.constraints.empty())
      throw InfeasibleConstraints("normalization cannot be combined with linear constraints");
    EigSplit asplit = split_spectrum(a_mat, problem.kernel_tolerance);
    if (asplit.kernel.cols() > 0) {
      VectorXd mk = asplit.kernel.transpose() * cs.means;
      if (mk.norm() > 1e-12) {
        out.coefficients = -asplit.kernel * (mk / mk.norm());
      } else {
        VectorXd c = asplit.kernel.col(0);
        Eigen::Index imax;
        c.cwiseAbs().maxCoeff(&imax);
        out.coefficients = c[imax] < 0 ? VectorXd(-c) : c;
      }
    } else {
      out.coefficients = sphere_minimize(a_mat, cs.means, problem.alpha);
    }
  } else if (!problem.constraints.empty()) {
    QpProblem qp;
    qp.q = 2.0 * a_mat;
    qp.b = 2.0 * b;
    qp.constraints = problem.constraints;
    QpResult sol = solve_qp(qp);
    out.coefficients = sol.x;
    out.kkt_residual = sol.kkt_residual;
  } else {
    EigSplit asplit = split_spectrum(a_mat, problem.kernel_tolerance);
    out.coefficients = pseudo_solve(asplit, b);
  }

  out.residual = (a_mat * out.coefficients - b).norm();
  out.variance =
      variance(state, assemble(problem.reference_h0, problem.ansatz_terms, out.coefficients));
  return out;
}

// --- active-set QP -----------------------------------------------------------

QpResult solve_qp(const QpProblem& problem) {
  const Eigen::Index n = problem.q.rows();
  const auto total = Eigen::Index(problem.constraints.size());
  const double tol = 1e-10;

  // feasible start by cyclic projection; constraint sets here are small
  VectorXd x = VectorXd::Zero(n);
  for (int it = 0;; ++it) {
    double worst = 0.0;
    Eigen::Index worst_i = -1;
    for (Eigen::Index i = 0; i < total; ++i) {
      const auto& c = problem.constraints[std::size_t(i)];
      const double slack = c.coefficients.dot(x) - c.rhs;
      const double viol = c.kind == LinearConstraint::Kind::Equality ? std::abs(slack)
                                                                     : std::max(0.0, -slack);
      if (viol > worst) { worst = viol; worst_i = i; }
    }
    if (worst <= 1e-12) break;
    if (it >= 5000) throw InfeasibleConstraints("no feasible point found");
    const auto& c = problem.constraints[std::size_t(worst_i)];
    const double shift = (c.rhs - c.coefficients.dot(x)) / c.coefficients.squaredNorm();
    x += shift * c.coefficients;
  }

  std::vector<bool> active(std::size_t(total), false);
  for (Eigen::Index i = 0; i < total; ++i) {
    const auto& c = problem.constraints[std::size_t(i)];
    if (c.kind == LinearConstraint::Kind::Equality ||
        std::abs(c.coefficients.dot(x) - c.rhs) <= 1e-12)
      active[std::size_t(i)] = true;
  }

  QpResult res;
  res.multipliers = VectorXd::Zero(total);
  const int cap = 200 + 20 * int(n + total);
  for (int it = 0; it < cap; ++it) {
    res.iterations = it + 1;
    std::vector<Eigen::Index> work;
    for (Eigen::Index i = 0; i < total; ++i)
      if (active[std::size_t(i)]) work.push_back(i);

    MatrixXd c_mat(Eigen::Index(work.size()), n);
    for (std::size_t r = 0; r < work.size(); ++r)
      c_mat.row(Eigen::Index(r)) =
          problem.constraints[std::size_t(work[r])].coefficients.transpose();

    MatrixXd z;  // null space of the working constraints
    if (work.empty()) {
      z = MatrixXd::Identity(n, n);
    } else {
      Eigen::JacobiSVD<MatrixXd> svd(c_mat, Eigen::ComputeFullV);
      const double cut = std::max(1e-13, 1e-12 * svd.singularValues().maxCoeff());
      Eigen::Index rank = 0;
      for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > cut) ++rank;
      z = svd.matrixV().rightCols(n - rank);
    }

    const VectorXd g = problem.q * x - problem.b;
    VectorXd p = VectorXd::Zero(n);
    bool unbounded_direction = false;
    if (z.cols() > 0) {
      MatrixXd h_r = z.transpose() * problem.q * z;
      VectorXd g_r = z.transpose() * g;
      EigSplit es = split_spectrum(h_r, 1e-12);
      VectorXd kernel_grad = es.kernel.cols()
                                 ? VectorXd(es.kernel * (es.kernel.transpose() * g_r))
                                 : VectorXd(VectorXd::Zero(g_r.size()));
      if (kernel_grad.norm() > 1e-9 * std::max(1.0, g_r.norm())) {
        p = -z * kernel_grad.normalized();
        unbounded_direction = true;
      } else {
        p = -z * pseudo_solve(es, g_r);
      }
    }

    if (!unbounded_direction && p.norm() <= tol * std::max(1.0, x.norm())) {
      VectorXd lam;
      if (!work.empty()) lam = c_mat.transpose().colPivHouseholderQr().solve(g);
      double most_negative = 0.0;
      Eigen::Index drop = -1;
      for (std::size_t r = 0; r < work.size(); ++r) {
        const auto& c = problem.constraints[std::size_t(work[r])];
        if (c.kind == LinearConstraint::Kind::Equality) continue;
        if (lam[Eigen::Index(r)] < most_negative - 1e-11) {
          most_negative = lam[Eigen::Index(r)];
          drop = work[r];
        }
      }
      if (drop < 0) {
        res.x = x;
        res.multipliers.setZero();
        for (std::size_t r = 0; r < work.size(); ++r)
          res.multipliers[work[r]] = lam.size() ? lam[Eigen::Index(r)] : 0.0;
        VectorXd stat = g;
        for (Eigen::Index i = 0; i < total; ++i)
          stat -= res.multipliers[i] * problem.constraints[std::size_t(i)].coefficients;
        res.kkt_residual = stat.size() ? stat.lpNorm<Eigen::Infinity>() : 0.0;
        return res;
      }
      active[std::size_t(drop)] = false;
      continue;
    }

    // largest step along p before an inactive inequality blocks
    double step = unbounded_direction ? std::numeric_limits<double>::infinity() : 1.0;
    Eigen::Index blocker = -1;
    for (Eigen::Index i = 0; i < total; ++i) {
      if (active[std::size_t(i)]) continue;
      const auto& c = problem.constraints[std::size_t(i)];
      const double along = c.coefficients.dot(p);
      if (along >= -1e-13) continue;
      const double room = c.coefficients.dot(x) - c.rhs;
      const double s = room / (-along);
      if (s < step) { step = s; blocker = i; }
    }
    if (!std::isfinite(step))
      throw NoSolution("objective is unbounded below on the feasible set");
    x += step * p;
    if (blocker >= 0) active[std::size_t(blocker)] = true;
  }
  throw IterationCap("active-set iteration limit reached");
}

// --- Gibbs-state learning ----------------------------------------------------

GibbsLearnResult gibbs_learn(const MixedState& target, const std::vector<OperatorSum>& ansatz,
                             double beta, const VectorXd& c0, int max_iters) {
  const auto n = Eigen::Index(ansatz.size());
  Basis basis(target.sector);
  const Eigen::Index dim = basis.dimension();
  if (dim > 4096) throw DimensionCap("gibbs_learn needs a dense-representable sector");

  std::vector<MatrixXcd> term_mats;
  term_mats.reserve(std::size_t(n));
  for (const auto& t : ansatz) term_mats.emplace_back(MatrixXcd(build_matrix(t, basis)));

  MatrixXcd rho_t = MatrixXcd::Zero(dim, dim);
  for (Eigen::Index a = 0; a < target.rank(); ++a)
    rho_t += target.weights[a] * target.vectors.col(a) * target.vectors.col(a).adjoint();

  auto density = [&](const VectorXd& c) {
    MatrixXcd h = MatrixXcd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < n; ++i) h += Complex(c[i], 0.0) * term_mats[std::size_t(i)];
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(h);
    VectorXd p = (-beta * (es.eigenvalues().array() - es.eigenvalues().minCoeff())).exp();
    p /= p.sum();
    return MatrixXcd(es.eigenvectors() * p.asDiagonal() * es.eigenvectors().adjoint());
  };
  auto objective = [&](const VectorXd& c) { return (density(c) - rho_t).squaredNorm(); };

  optim::BfgsOptions opts;
  opts.max_iters = max_iters;
  opts.grad_tol = 1e-9;
  opts.fd_step = 1e-5;
  VectorXd start = c0.size() ? c0 : VectorXd(VectorXd::Zero(n));
  auto sol = optim::bfgs_minimize(objective, nullptr, start, opts);
  if (!sol.converged && sol.iterations >= max_iters)
    throw IterationCap("gibbs_learn did not converge");
  GibbsLearnResult out;
  out.coefficients = sol.x;
  out.distance = std::sqrt(std::max(0.0, sol.value));
  out.iterations = sol.iterations;
  return out;
}

std::string to_json(const LearnResult& result, const std::vector<std::string>& labels,
                    const VectorXd& weights, const std::vector<bool>& constrained) {
  nlohmann::json j;
  j["variance"] = result.variance;
  j["kernelDimension"] = result.kernel_dimension;
  j["kernelOverlap"] = result.kernel_overlap;
  j["terms"] = nlohmann::json::array();
  for (Eigen::Index i = 0; i < result.coefficients.size(); ++i) {
    nlohmann::json t;
    t["label"] = std::size_t(i) < labels.size() ? labels[std::size_t(i)] : std::to_string(i);
    t["coefficient"] = result.coefficients[i];
    t["weight"] = i < weights.size() ? weights[i] : 0.0;
    t["constrained"] =
        std::size_t(i) < constrained.size() ? bool(constrained[std::size_t(i)]) : false;
    j["terms"].push_back(t);
  }
  return j.dump();
}

}  // namespace iqs::hamlearn
