#include "iqs/exact.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace iqs::exact {

namespace {

void fix_phase(VectorXcd& v) {
  Eigen::Index best = 0;
  double mag = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > mag + 1e-15) { mag = std::abs(v[i]); best = i; }
  const Complex z = v[best];
  if (std::abs(z) > 0) v *= std::conj(z) / std::abs(z);
}

// Lanczos with full reorthogonalization, restarted on the best Ritz vector;
// smallest algebraic eigenpair of a Hermitian sparse matrix.
struct LanczosResult {
  double value = 0.0;
  VectorXcd vector;
  double next_value = 0.0;
};

LanczosResult lanczos_ground(const SparseXcd& h, double tol, int max_restarts) {
  const Eigen::Index dim = h.rows();
  const int m = int(std::min<Eigen::Index>(dim, 60));
  VectorXcd q = VectorXcd::Zero(dim);
  std::mt19937_64 rng(20240917ULL);
  std::normal_distribution<double> g;
  for (Eigen::Index i = 0; i < dim; ++i) q[i] = Complex(g(rng), g(rng));
  q /= q.norm();

  LanczosResult out;
  for (int restart = 0; restart < max_restarts; ++restart) {
    std::vector<VectorXcd> basis;
    basis.reserve(std::size_t(m));
    VectorXd alpha(m), beta(m);
    basis.push_back(q);
    int built = 0;
    for (int j = 0; j < m; ++j) {
      VectorXcd w = h * basis[std::size_t(j)];
      alpha[j] = basis[std::size_t(j)].dot(w).real();
      w -= alpha[j] * basis[std::size_t(j)];
      if (j > 0) w -= beta[j - 1] * basis[std::size_t(j - 1)];
      for (const auto& b : basis) w -= b.dot(w) * b;  // full reorthogonalization
      built = j + 1;
      beta[j] = w.norm();
      if (beta[j] < 1e-14 || j + 1 == m) break;
      basis.push_back(w / beta[j]);
    }
    MatrixXd tri = MatrixXd::Zero(built, built);
    for (int j = 0; j < built; ++j) {
      tri(j, j) = alpha[j];
      if (j + 1 < built) tri(j, j + 1) = tri(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(tri);
    VectorXcd ritz = VectorXcd::Zero(dim);
    for (int j = 0; j < built; ++j) ritz += es.eigenvectors()(j, 0) * basis[std::size_t(j)];
    ritz /= ritz.norm();
    const double scale = std::max(1.0, std::max(std::abs(es.eigenvalues()[0]),
                                                std::abs(es.eigenvalues()[built - 1])));
    out.value = es.eigenvalues()[0];
    out.vector = ritz;
    out.next_value = built > 1 ? es.eigenvalues()[1] : es.eigenvalues()[0];
    const double residual = (h * ritz - out.value * ritz).norm();
    if (residual <= tol * scale) return out;
    q = ritz;
  }
  throw ConvergenceFailure("Lanczos did not reach the requested residual");
}

nlohmann::json susceptibility_json(const Susceptibility& chi) {
  nlohmann::json j;
  j["broadening"] = chi.broadening;
  j["omega"] = std::vector<double>(chi.frequencies.data(),
                                   chi.frequencies.data() + chi.frequencies.size());
  std::vector<double> re, im;
  for (Eigen::Index i = 0; i < chi.values.size(); ++i) {
    re.push_back(chi.values[i].real());
    im.push_back(chi.values[i].imag());
  }
  j["re"] = re;
  j["im"] = im;
  return j;
}

}  // namespace

GroundResult ground_state(const SparseXcd& h, const Sector& sector, const GroundOptions& opts) {
  const Eigen::Index dim = h.rows();
  GroundResult out;
  out.state.sector = sector;
  if (dim <= opts.dense_threshold) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es{MatrixXcd(h)};
    out.energy = es.eigenvalues()[0];
    out.state.amplitudes = es.eigenvectors().col(0);
    out.degenerate = dim > 1 &&
                     es.eigenvalues()[1] - es.eigenvalues()[0] < opts.degeneracy_gap;
  } else {
    LanczosResult lr = lanczos_ground(h, opts.tolerance, opts.max_iterations);
    out.energy = lr.value;
    out.state.amplitudes = lr.vector;
    out.degenerate = lr.next_value - lr.value < opts.degeneracy_gap;
  }
  fix_phase(out.state.amplitudes);
  return out;
}

GroundResult ground_state(const OperatorSum& h, const Sector& sector, const GroundOptions& opts) {
  Basis basis(sector);
  return ground_state(build_matrix(h, basis), sector, opts);
}

SpectrumSlice full_spectrum(const SparseXcd& h, Eigen::Index cap) {
  if (h.rows() > cap)
    throw DimensionCap("dense diagonalization beyond configured cap");
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es{MatrixXcd(h)};
  SpectrumSlice s;
  s.energies = es.eigenvalues();
  s.states = es.eigenvectors();
  s.requested = int(h.rows());
  return s;
}

SpectrumSlice spectrum_slice(const OperatorSum& h, const Sector& sector, int count,
                             Eigen::Index cap) {
  Basis basis(sector);
  SpectrumSlice full = full_spectrum(build_matrix(h, basis), cap);
  const Eigen::Index k = std::min<Eigen::Index>(count, full.energies.size());
  SpectrumSlice s;
  s.energies = full.energies.head(k);
  s.states = full.states.leftCols(k);
  s.requested = count;
  return s;
}

MixedState gibbs_state(const OperatorSum& h, double temperature, const Sector& sector,
                       Eigen::Index cap) {
  if (temperature <= 0.0) throw Error("gibbs_state needs T > 0");
  Basis basis(sector);
  SpectrumSlice s = full_spectrum(build_matrix(h, basis), cap);
  VectorXd p = (-(s.energies.array() - s.energies[0]) / temperature).exp();
  p /= p.sum();
  MixedState rho;
  rho.sector = sector;
  rho.weights = p;
  rho.vectors = s.states;
  rho.purity = p.squaredNorm();
  return rho;
}

Susceptibility kubo_susceptibility(const SpectrumSlice& s, const QuantumState& ground,
                                   const OperatorSum& h, const OperatorSum& drive,
                                   const OperatorSum& probe, const VectorXd& grid,
                                   double delta) {
  if (delta <= 0.0) throw Error("broadening must be positive");
  Basis basis(ground.sector);
  const VectorXcd& psi = ground.amplitudes;
  const double e0 = psi.dot(opalg::apply_operator(h, basis, psi)).real();

  VectorXcd v_psi = opalg::apply_operator(drive, basis, psi);
  VectorXcd vdag_psi = opalg::apply_operator(opalg::adjoint(drive), basis, psi);
  VectorXcd o_psi = opalg::apply_operator(probe, basis, psi);
  VectorXcd odag_psi = opalg::apply_operator(opalg::adjoint(probe), basis, psi);

  VectorXcd a = s.states.adjoint() * v_psi;                   // <n|V|0>
  VectorXcd b = (s.states.adjoint() * odag_psi).conjugate();  // <0|O|n>
  VectorXcd c = (s.states.adjoint() * vdag_psi).conjugate();  // <0|V|n>
  VectorXcd d = s.states.adjoint() * o_psi;                   // <n|O|0>

  Susceptibility chi;
  chi.frequencies = grid;
  chi.broadening = delta;
  chi.values.resize(grid.size());
  const Complex id{0, 1};
  for (Eigen::Index w = 0; w < grid.size(); ++w) {
    Complex acc{0, 0};
    for (Eigen::Index n = 0; n < s.energies.size(); ++n) {
      const double wn = s.energies[n] - e0;
      acc += b[n] * a[n] / (grid[w] + id * delta - wn);
      acc -= c[n] * d[n] / (grid[w] + id * delta + wn);
    }
    chi.values[w] = acc;
  }
  return chi;
}

Susceptibility kubo_susceptibility(const OperatorSum& h, const QuantumState& ground,
                                   const OperatorSum& drive, const OperatorSum& probe,
                                   const VectorXd& grid, double delta, Eigen::Index cap) {
  Basis basis(ground.sector);
  SpectrumSlice s = full_spectrum(build_matrix(h, basis), cap);
  return kubo_susceptibility(s, ground, h, drive, probe, grid, delta);
}

PeakList kubo_peaks(const SpectrumSlice& s, const QuantumState& ground,
                    const OperatorSum& drive, double weight_floor) {
  Basis basis(ground.sector);
  const VectorXcd& psi = ground.amplitudes;
  VectorXcd a = s.states.adjoint() * opalg::apply_operator(drive, basis, psi);
  const double e0 = psi.dot(s.states * (s.energies.asDiagonal() * (s.states.adjoint() * psi)))
                        .real();
  const double total = a.squaredNorm();
  if (total <= 0.0) return {};
  PeakList merged;
  for (Eigen::Index n = 0; n < s.energies.size(); ++n) {
    const double w = std::norm(a[n]);
    if (w < weight_floor * total) continue;
    const double omega = s.energies[n] - e0;
    if (!merged.empty() && std::abs(merged.back().omega - omega) < 1e-9)
      merged.back().weight += w;
    else
      merged.push_back({omega, w});
  }
  return merged;
}

PeakList kubo_peaks(const OperatorSum& h, const QuantumState& ground, const OperatorSum& drive,
                    double weight_floor, Eigen::Index cap) {
  Basis basis(ground.sector);
  SpectrumSlice s = full_spectrum(build_matrix(h, basis), cap);
  return kubo_peaks(s, ground, drive, weight_floor);
}

StructureFactorResult structure_factor(const OperatorSum& h, const QuantumState& ground,
                                       const std::vector<double>& momenta, const VectorXd& grid,
                                       double delta, SfChannel channel, Eigen::Index cap) {
  StructureFactorResult out;
  const int n = h.site_count;
  Basis basis(ground.sector);
  SpectrumSlice s = full_spectrum(build_matrix(h, basis), cap);
  for (double k : momenta) {
    OperatorSum plus = opalg::sigma_k_plus(n, k);
    OperatorSum drive, probe;
    if (channel == SfChannel::SpinFlipSym) {
      drive = opalg::canonicalize(plus + opalg::sigma_k_minus(n, k));
      probe = drive;
    } else {
      drive = plus;
      probe = opalg::adjoint(plus);
    }
    out.by_momentum.emplace(k, kubo_susceptibility(s, ground, h, drive, probe, grid, delta));
    out.peaks.emplace(k, kubo_peaks(s, ground, drive, 1e-12));
  }
  return out;
}

VectorXcd krylov_propagate(const SparseXcd& h, const VectorXcd& v, double time) {
  const Eigen::Index dim = h.rows();
  if (dim == 0 || time == 0.0) return v;
  const double nv = v.norm();
  if (nv == 0.0) return v;

  const int m_max = int(std::min<Eigen::Index>(dim, 90));
  std::vector<VectorXcd> basis;
  basis.reserve(std::size_t(m_max));
  VectorXd alpha(m_max), beta(m_max);
  basis.push_back(v / nv);
  int built = 0;
  bool breakdown = false;
  for (int j = 0; j < m_max; ++j) {
    VectorXcd w = h * basis[std::size_t(j)];
    alpha[j] = basis[std::size_t(j)].dot(w).real();
    w -= alpha[j] * basis[std::size_t(j)];
    if (j > 0) w -= beta[j - 1] * basis[std::size_t(j - 1)];
    for (const auto& b : basis) w -= b.dot(w) * b;
    built = j + 1;
    beta[j] = w.norm();
    if (beta[j] < 1e-14) { breakdown = true; break; }
    if (j + 1 == m_max) break;
    basis.push_back(w / beta[j]);
  }
  auto evolve = [&](int m) {
    MatrixXd tri = MatrixXd::Zero(m, m);
    for (int j = 0; j < m; ++j) {
      tri(j, j) = alpha[j];
      if (j + 1 < m) tri(j, j + 1) = tri(j + 1, j) = beta[j];
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(tri);
    VectorXcd coeff = VectorXcd::Zero(m);
    for (int j = 0; j < m; ++j) {
      const Complex phase = std::exp(Complex(0, -time * es.eigenvalues()[j]));
      for (int i = 0; i < m; ++i)
        coeff[i] += es.eigenvectors()(i, j) * phase * es.eigenvectors()(0, j);
    }
    VectorXcd out = VectorXcd::Zero(dim);
    for (int j = 0; j < m; ++j) out += coeff[j] * basis[std::size_t(j)];
    return out;
  };
  if (breakdown || built == int(dim)) return nv * evolve(built);
  VectorXcd full = evolve(built);
  VectorXcd reduced = evolve(std::max(1, built - 8));
  if ((full - reduced).norm() < 1e-12) return nv * full;
  // Krylov space too small for this step; halve the interval
  VectorXcd half = krylov_propagate(h, v, time / 2.0);
  return krylov_propagate(h, half, time / 2.0);
}

SweepResult adiabatic_unprepare(const OperatorSum& h_start, const OperatorSum& h_end,
                                const QuantumState& state, double total_time, int steps,
                                const std::optional<QuantumState>& target) {
  if (total_time <= 0.0 || steps < 1) throw Error("sweep needs positive time and steps");
  Basis basis(state.sector);
  SparseXcd a = build_matrix(h_start, basis);
  SparseXcd b = build_matrix(h_end, basis);
  const double dt = total_time / steps;
  VectorXcd psi = state.amplitudes;
  for (int s = 0; s < steps; ++s) {
    const double tau = (s + 0.5) / steps;  // midpoint generator per step
    SparseXcd h = (1.0 - tau) * a + tau * b;
    psi = krylov_propagate(h, psi, dt);
  }
  SweepResult out;
  out.final_state = QuantumState{state.sector, psi};
  const VectorXcd& ref = target ? target->amplitudes : state.amplitudes;
  out.return_probability = std::norm(ref.dot(psi));
  return out;
}

std::string to_csv(const Susceptibility& chi) {
  std::ostringstream os;
  os << "omega,re,im\n";
  char buf[96];
  for (Eigen::Index i = 0; i < chi.frequencies.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", chi.frequencies[i],
                  chi.values[i].real(), chi.values[i].imag());
    os << buf;
  }
  return os.str();
}

std::string to_json(const Susceptibility& chi) { return susceptibility_json(chi).dump(); }

std::string to_json(const PeakList& peaks) {
  nlohmann::json j;
  j["peaks"] = nlohmann::json::array();
  for (const auto& p : peaks) j["peaks"].push_back({{"omega", p.omega}, {"weight", p.weight}});
  return j.dump();
}

PeakList peaks_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  PeakList out;
  for (const auto& p : j.at("peaks"))
    out.push_back({p.at("omega").get<double>(), p.at("weight").get<double>()});
  return out;
}

std::string to_csv(const SpectrumSlice& slice) {
  std::ostringstream os;
  os << "index,energy\n";
  char buf[64];
  for (Eigen::Index i = 0; i < slice.energies.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n", static_cast<long long>(i), slice.energies[i]);
    os << buf;
  }
  return os.str();
}

}  // namespace iqs::exact
