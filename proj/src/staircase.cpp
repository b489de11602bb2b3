#include "iqs/staircase.hpp"

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "iqs/optim.hpp"

namespace iqs::staircase {

namespace {

Matrix2 pauli2(char c) {
  Matrix2 m;
  switch (c) {
    case 'I': m << 1, 0, 0, 1; break;
    case 'X': m << 0, 1, 1, 0; break;
    case 'Y': m << 0, Complex(0, -1), Complex(0, 1), 0; break;
    case 'Z': m << 1, 0, 0, -1; break;
    default: throw Error("bad Pauli letter");
  }
  return m;
}

Matrix4 kron2(const Matrix2& a, const Matrix2& b) {
  Matrix4 out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

const std::array<Matrix4, 15>& generator_basis() {
  static const std::array<Matrix4, 15> basis = [] {
    std::array<Matrix4, 15> b;
    const char axes[3] = {'X', 'Y', 'Z'};
    int idx = 0;
    for (char a : axes)
      for (char c : axes) b[std::size_t(idx++)] = kron2(pauli2(a), pauli2(c));
    for (char a : axes) b[std::size_t(idx++)] = kron2(pauli2(a), pauli2('I'));
    for (char a : axes) b[std::size_t(idx++)] = kron2(pauli2('I'), pauli2(a));
    return b;
  }();
  return basis;
}

Matrix2 hadamard() {
  Matrix2 h;
  h << 1, 1, 1, -1;
  return h / std::sqrt(2.0);
}

// rho_1 = H|0><0|H; every later site enters as |0><0|
Matrix2 first_site_density() {
  Matrix2 h = hadamard();
  Matrix2 rho = Matrix2::Zero();
  rho(0, 0) = 1.0;
  return h * rho * h.adjoint();
}

// Tr_right[ A (1 x |0><0|) ]: select the right-site (0,0) block
Matrix2 trace_right_vacuum(const Matrix4& a) {
  Matrix2 out;
  out(0, 0) = a(0, 0);
  out(0, 1) = a(0, 2);
  out(1, 0) = a(2, 0);
  out(1, 1) = a(2, 2);
  return out;
}

}  // namespace

Matrix4 gate_matrix(const TwoQubitGate& gate) {
  Matrix4 gen = Matrix4::Zero();
  const auto& basis = generator_basis();
  for (int k = 0; k < 15; ++k) gen += gate.thetas[std::size_t(k)] * basis[std::size_t(k)];
  Eigen::SelfAdjointEigenSolver<Matrix4> es(gen);
  Eigen::Vector4cd phases;
  for (int i = 0; i < 4; ++i) phases[i] = std::exp(Complex(0, -es.eigenvalues()[i]));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

TwoQubitGate gate_from_unitary(const Matrix4& u) {
  Eigen::ComplexSchur<Matrix4> schur(u);
  const Matrix4& t = schur.matrixT();
  if (t.cwiseAbs().sum() - t.diagonal().cwiseAbs().sum() > 1e-10)
    throw Error("gate_from_unitary expects a unitary (normal) matrix");
  Eigen::Vector4d angles;
  for (int i = 0; i < 4; ++i) angles[i] = -std::arg(t(i, i));
  Matrix4 gen = schur.matrixU() * angles.cast<Complex>().asDiagonal() *
                schur.matrixU().adjoint();
  gen -= (gen.trace() / 4.0) * Matrix4::Identity();  // drop the global phase
  TwoQubitGate gate;
  const auto& basis = generator_basis();
  for (int k = 0; k < 15; ++k)
    gate.thetas[std::size_t(k)] = (gen * basis[std::size_t(k)]).trace().real() / 4.0;
  return gate;
}

TwoQubitGate cluster_gate() {
  Matrix4 cz = Matrix4::Identity();
  cz(3, 3) = -1.0;
  Matrix4 u = cz * kron2(Matrix2::Identity(), hadamard());
  return gate_from_unitary(u);
}

TwoQubitGate ghz_gate() {
  Matrix4 cnot = Matrix4::Zero();
  cnot(0, 0) = cnot(1, 1) = cnot(2, 3) = cnot(3, 2) = 1.0;
  return gate_from_unitary(cnot);
}

QuantumState statevector(const StaircaseCircuit& circuit, int max_sites) {
  const int n = circuit.length;
  if (n < 2 || n > max_sites) throw DimensionCap("statevector limited to oracle scale");
  const Eigen::Index dim = Eigen::Index(1) << n;
  VectorXcd psi = VectorXcd::Zero(dim);
  psi[0] = 1.0;
  // Hadamard on site 0 (most significant bit)
  {
    const Eigen::Index half = dim / 2;
    const double s = 1.0 / std::sqrt(2.0);
    for (Eigen::Index i = 0; i < half; ++i) {
      const Complex a = psi[i], b = psi[i + half];
      psi[i] = s * (a + b);
      psi[i + half] = s * (a - b);
    }
  }
  Matrix4 u = gate_matrix(circuit.gate);
  for (int site = 0; site + 1 < n; ++site) {
    const int pa = n - 1 - site;      // bit of the left qubit
    const int pb = n - 2 - site;      // bit of the right qubit
    const Eigen::Index ba = Eigen::Index(1) << pa;
    const Eigen::Index bb = Eigen::Index(1) << pb;
    for (Eigen::Index i = 0; i < dim; ++i) {
      if (i & ba || i & bb) continue;  // visit each 4-group once
      Eigen::Vector4cd v;
      v << psi[i], psi[i | bb], psi[i | ba], psi[i | ba | bb];
      v = u * v;
      psi[i] = v[0];
      psi[i | bb] = v[1];
      psi[i | ba] = v[2];
      psi[i | ba | bb] = v[3];
    }
  }
  return QuantumState{opalg::Sector::spin_full(n), std::move(psi)};
}

double pauli_expectation(const StaircaseCircuit& circuit, const PauliString& p) {
  const int n = circuit.length;
  if (p.sites() != n) throw DimensionMismatch("Pauli string length != chain length");
  if (std::abs(p.coeff.imag()) > 1e-12 * std::max(1.0, std::abs(p.coeff)))
    throw Error("pauli_expectation needs a real coefficient");
  const Matrix4 u = gate_matrix(circuit.gate);
  const Matrix4 udag = u.adjoint();
  Matrix2 carry = pauli2(p.letters[std::size_t(n - 1)]);
  for (int site = n - 2; site >= 0; --site) {
    Matrix4 a = kron2(pauli2(p.letters[std::size_t(site)]), carry);
    a = udag * a * u;
    carry = trace_right_vacuum(a);
  }
  return p.coeff.real() * (carry * first_site_density()).trace().real();
}

Mpo cim_mpo(double g) {
  const double cluster = -(1.0 - g) / 2.0;
  const double ising = -(1.0 + g) / 2.0;
  const Matrix2 id = pauli2('I'), x = pauli2('X'), z = pauli2('Z'), zero = Matrix2::Zero();
  Mpo w;
  w.chi = 4;
  w.first = {id, z, cluster * x, zero};
  w.last = {zero, ising * z + cluster * x, z, id};
  w.bulk.assign(16, zero);
  auto set = [&](int r, int c, const Matrix2& m) { w.bulk[std::size_t(r * 4 + c)] = m; };
  set(0, 0, id);
  set(0, 1, z);
  set(1, 2, cluster * x);
  set(1, 3, ising * z);
  set(2, 3, z);
  set(3, 3, id);
  return w;
}

double mpo_expectation(const StaircaseCircuit& circuit, const Mpo& mpo) {
  const int n = circuit.length;
  if (n < 2) throw DimensionMismatch("MPO sweep needs at least two sites");
  const Matrix4 u = gate_matrix(circuit.gate);
  const Matrix4 udag = u.adjoint();
  const int chi = mpo.chi;

  auto channel = [&](const Matrix4& a) { return trace_right_vacuum(udag * a * u); };

  std::vector<Matrix2> carry = mpo.last;  // indexed by the bond left of the last site
  for (int site = n - 2; site >= 1; --site) {
    std::vector<Matrix2> next(static_cast<std::size_t>(chi));
    for (int a = 0; a < chi; ++a) {
      Matrix4 acc = Matrix4::Zero();
      for (int b = 0; b < chi; ++b) {
        const Matrix2& w = mpo.at(a, b);
        if (w.cwiseAbs().sum() == 0.0) continue;
        acc += kron2(w, carry[std::size_t(b)]);
      }
      next[std::size_t(a)] = channel(acc);
    }
    carry = std::move(next);
  }
  Matrix4 acc = Matrix4::Zero();
  for (int b = 0; b < chi; ++b) {
    if (mpo.first[std::size_t(b)].cwiseAbs().sum() == 0.0) continue;
    acc += kron2(mpo.first[std::size_t(b)], carry[std::size_t(b)]);
  }
  return (channel(acc) * first_site_density()).trace().real();
}

std::array<Matrix4, 2> kraus_operators(const TwoQubitGate& gate) {
  const Matrix4 u = gate_matrix(gate);
  std::array<Matrix4, 2> ks;
  for (int m = 0; m < 2; ++m) {
    Matrix4 proj = Matrix4::Zero();
    // |0><m| on the measured qubit, identity on the carried qubit
    proj.block<2, 2>(0, 2 * m) = Matrix2::Identity();
    ks[std::size_t(m)] = proj * u;
  }
  return ks;
}

std::vector<FidelityResult> fidelity_optimize(const std::vector<QuantumState>& targets,
                                              int length, const FidelityOptions& opts) {
  std::vector<FidelityResult> out;
  std::mt19937_64 rng(stream_seed(opts.seed, 0x737463));
  std::uniform_real_distribution<double> init(-1.5, 1.5);
  for (const auto& target : targets) {
    if (target.amplitudes.size() != (Eigen::Index(1) << length))
      throw DimensionMismatch("target dimension != 2^length");
    auto objective = [&](const VectorXd& x) {
      StaircaseCircuit c;
      c.length = length;
      for (int k = 0; k < 15; ++k) c.gate.thetas[std::size_t(k)] = x[k];
      QuantumState psi = statevector(c);
      return -std::norm(target.amplitudes.dot(psi.amplitudes));
    };
    FidelityResult best;
    best.fidelity = -1.0;
    for (int s = 0; s < opts.starts; ++s) {
      VectorXd x0(15);
      if (s == 0)
        x0.setZero();
      else
        for (int k = 0; k < 15; ++k) x0[k] = init(rng);
      optim::BfgsOptions bopts;
      bopts.max_iters = opts.max_iters;
      bopts.grad_tol = 1e-10;
      bopts.fd_step = 1e-6;
      auto sol = optim::bfgs_minimize(objective, nullptr, x0, bopts);
      if (-sol.value > best.fidelity) {
        best.fidelity = -sol.value;
        for (int k = 0; k < 15; ++k) best.gate.thetas[std::size_t(k)] = sol.x[k];
      }
    }
    out.push_back(best);
  }
  return out;
}

std::string to_json(const TwoQubitGate& gate) {
  nlohmann::json j = nlohmann::json::array();
  for (double t : gate.thetas) j.push_back(t);
  return j.dump();
}

TwoQubitGate gate_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (!j.is_array() || j.size() != 15) throw ConfigInvalid("gate JSON must be 15 floats");
  TwoQubitGate g;
  for (int k = 0; k < 15; ++k) g.thetas[std::size_t(k)] = j[std::size_t(k)].get<double>();
  return g;
}

}  // namespace iqs::staircase
