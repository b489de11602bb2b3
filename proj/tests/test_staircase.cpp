#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <random>

#include "iqs/cphl.hpp"
#include "iqs/exact.hpp"
#include "iqs/staircase.hpp"
#include "oracles.hpp"

using namespace iqs;
using namespace iqs::opalg;
using namespace iqs::staircase;

namespace {

TwoQubitGate random_gate(std::uint64_t seed, double scale = 0.7) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-scale, scale);
  TwoQubitGate g;
  for (double& t : g.thetas) t = d(rng);
  return g;
}

PauliString random_string(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> letter(0, 3);
  const char letters[] = {'I', 'X', 'Y', 'Z'};
  std::string s;
  for (int i = 0; i < n; ++i) s.push_back(letters[letter(rng)]);
  return PauliString{s, {1.0, 0.0}};
}

// dense operator from an MPO by explicit bond contraction (oracle)
MatrixXcd mpo_to_dense(const Mpo& w, int n) {
  std::vector<MatrixXcd> carry;  // indexed by the bond entering the last site
  for (int b = 0; b < w.chi; ++b) carry.push_back(w.last[std::size_t(b)]);
  for (int site = n - 2; site >= 1; --site) {
    std::vector<MatrixXcd> next;
    for (int a = 0; a < w.chi; ++a) {
      MatrixXcd acc = MatrixXcd::Zero(carry[0].rows() * 2, carry[0].cols() * 2);
      for (int b = 0; b < w.chi; ++b)
        acc += oracle::kron(w.at(a, b), carry[std::size_t(b)]);
      next.push_back(std::move(acc));
    }
    carry = std::move(next);
  }
  MatrixXcd total = MatrixXcd::Zero(carry[0].rows() * 2, carry[0].cols() * 2);
  for (int b = 0; b < w.chi; ++b)
    total += oracle::kron(w.first[std::size_t(b)], carry[std::size_t(b)]);
  return total;
}

}  // namespace

TEST_CASE("gate matrix") {
  SUBCASE("zero parameters give the identity") {
    CHECK((gate_matrix(TwoQubitGate{}) - Matrix4::Identity()).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("pure ZZ rotation has the closed diagonal form") {
    TwoQubitGate g;
    g.thetas[8] = kPi / 4.0;  // zz entry
    Matrix4 u = gate_matrix(g);
    const Complex minus = std::exp(Complex(0, -kPi / 4));
    const Complex plus = std::exp(Complex(0, kPi / 4));
    CHECK(std::abs(u(0, 0) - minus) < 1e-14);
    CHECK(std::abs(u(1, 1) - plus) < 1e-14);
    CHECK(std::abs(u(2, 2) - plus) < 1e-14);
    CHECK(std::abs(u(3, 3) - minus) < 1e-14);
    Matrix4 off = u;
    off.diagonal().setZero();
    CHECK(off.cwiseAbs().maxCoeff() < 1e-14);
  }
  SUBCASE("random parameters: unitary and equal to a Taylor-series oracle") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      TwoQubitGate g = random_gate(seed);
      Matrix4 u = gate_matrix(g);
      CHECK((u.adjoint() * u - Matrix4::Identity()).cwiseAbs().maxCoeff() < 1e-12);
      MatrixXcd gen = MatrixXcd::Zero(4, 4);
      {
        // rebuild the generator from the documented order via round trip
        TwoQubitGate back = gate_from_unitary(u);
        for (int k = 0; k < 15; ++k)
          CHECK(back.thetas[std::size_t(k)] ==
                doctest::Approx(g.thetas[std::size_t(k)]).epsilon(1e-9));
      }
      // Taylor oracle on a random vector
      MatrixXcd dense = MatrixXcd::Zero(4, 4);
      // reconstruct generator in the oracle: same basis order
      const char axes[3] = {'X', 'Y', 'Z'};
      int idx = 0;
      auto p2 = [](char c) { return oracle::pauli_matrix(c); };
      for (char a : axes)
        for (char b : axes) dense += g.thetas[std::size_t(idx++)] * oracle::kron(p2(a), p2(b));
      for (char a : axes) dense += g.thetas[std::size_t(idx++)] * oracle::kron(p2(a), p2('I'));
      for (char a : axes) dense += g.thetas[std::size_t(idx++)] * oracle::kron(p2('I'), p2(a));
      for (int col = 0; col < 4; ++col) {
        VectorXcd e = VectorXcd::Zero(4);
        e[col] = 1.0;
        VectorXcd want = oracle::taylor_expm_multiply(MatrixXcd(Complex(0, -1) * dense), e);
        CHECK((u.col(col) - want).norm() < 1e-12);
      }
    }
  }
}

TEST_CASE("statevector") {
  SUBCASE("identity gate keeps the plus state on site one") {
    StaircaseCircuit c{TwoQubitGate{}, 4};
    auto psi = statevector(c);
    const double s = 1.0 / std::sqrt(2.0);
    CHECK(std::abs(psi.amplitudes[0] - Complex(s, 0)) < 1e-14);
    CHECK(std::abs(psi.amplitudes[8] - Complex(s, 0)) < 1e-14);  // |1000>
    CHECK(psi.amplitudes.norm() == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("cluster gate generates the path-graph cluster state") {
    const int n = 4;
    StaircaseCircuit c{cluster_gate(), n};
    auto psi = statevector(c);
    // all stabilizers of the g=-1 cluster Hamiltonian are satisfied
    auto h = iqs::cphl::cim_hamiltonian(n, -1.0);
    CHECK(expectation(psi, h).real() == doctest::Approx(-double(n)).epsilon(1e-12));
  }
  SUBCASE("norm stays one for a deep random chain") {
    StaircaseCircuit c{random_gate(9), 10};
    CHECK(statevector(c).amplitudes.norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("channel contraction equals the statevector oracle") {
  SUBCASE("all-identity string is exactly one") {
    for (int n : {2, 5, 9}) {
      StaircaseCircuit c{random_gate(31 + n), n};
      CHECK(pauli_expectation(c, PauliString{std::string(std::size_t(n), 'I'), {1, 0}}) ==
            doctest::Approx(1.0).epsilon(1e-13));
    }
  }
  SUBCASE("random gates and strings up to N = 12") {
    std::mt19937_64 rng(123);
    for (int trial = 0; trial < 40; ++trial) {
      const int n = 2 + int(rng() % 11);
      StaircaseCircuit c{random_gate(rng()), n};
      PauliString p = random_string(n, rng());
      auto psi = statevector(c);
      auto op = spin_operator(n, {p});
      const double want = expectation(psi, op).real();
      CHECK(pauli_expectation(c, p) == doctest::Approx(want).epsilon(1e-11));
    }
  }
  SUBCASE("cluster parameters maximize the string operator at N = 8") {
    const int n = 8;
    StaircaseCircuit c{cluster_gate(), n};
    const PauliString str = iqs::cphl::string_operator(n).paulis.front();
    CHECK(pauli_expectation(c, str) == doctest::Approx(1.0).epsilon(1e-10));
  }
}

TEST_CASE("Kraus form of the measure-and-reset channel is trace preserving") {
  for (std::uint64_t seed : {5u, 6u, 7u}) {
    auto ks = kraus_operators(random_gate(seed));
    Matrix4 sum = ks[0].adjoint() * ks[0] + ks[1].adjoint() * ks[1];
    CHECK((sum - Matrix4::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("cluster Ising MPO") {
  SUBCASE("contraction equals the dense Hamiltonian for N <= 8") {
    for (int n : {4, 6, 8}) {
      for (double g : {-1.0, -0.3, 0.5, 1.0}) {
        MatrixXcd dense = mpo_to_dense(cim_mpo(g), n);
        MatrixXcd want = oracle::dense_spin(iqs::cphl::cim_hamiltonian(n, g));
        CHECK((dense - want).cwiseAbs().maxCoeff() < 1e-12);
      }
    }
  }
  SUBCASE("Ising endpoint on the GHZ chain gives the classical energy") {
    const int n = 9;
    StaircaseCircuit c{ghz_gate(), n};
    CHECK(mpo_expectation(c, cim_mpo(1.0)) == doctest::Approx(-(n - 1.0)).epsilon(1e-11));
  }
  SUBCASE("cluster endpoint on the cluster chain gives the stabilizer energy") {
    const int n = 10;
    StaircaseCircuit c{cluster_gate(), n};
    CHECK(mpo_expectation(c, cim_mpo(-1.0)) == doctest::Approx(-double(n)).epsilon(1e-11));
  }
  SUBCASE("sweep equals the term-by-term Pauli sum") {
    const int n = 10;
    StaircaseCircuit c{random_gate(77), n};
    for (double g : {0.0, -0.4}) {
      double term_sum = 0.0;
      for (const auto& t : iqs::cphl::cim_hamiltonian(n, g).paulis)
        term_sum += pauli_expectation(c, t);
      CHECK(mpo_expectation(c, cim_mpo(g)) == doctest::Approx(term_sum).epsilon(1e-11));
    }
  }
  SUBCASE("sweep is linear in the MPO") {
    const int n = 8;
    StaircaseCircuit c{random_gate(78), n};
    const double a = mpo_expectation(c, cim_mpo(-0.5));
    const double b = mpo_expectation(c, cim_mpo(0.5));
    // (H[-0.5] + H[0.5])/2 = H[0]: the family is affine in g
    CHECK(0.5 * (a + b) == doctest::Approx(mpo_expectation(c, cim_mpo(0.0))).epsilon(1e-11));
  }
  SUBCASE("large-N evaluation stays fast") {
    StaircaseCircuit c{random_gate(79), 10000};
    auto start = std::chrono::steady_clock::now();
    const double value = mpo_expectation(c, cim_mpo(-0.2));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(std::isfinite(value));
    CHECK(secs < 1.0);
  }
}

TEST_CASE("fidelity optimization") {
  SUBCASE("self-consistency on a circuit-generated target") {
    const int n = 4;
    StaircaseCircuit truth{random_gate(55, 0.5), n};
    auto target = statevector(truth);
    FidelityOptions opts;
    opts.starts = 12;
    auto res = fidelity_optimize({target}, n, opts);
    CHECK(res[0].fidelity > 1.0 - 1e-8);
  }
  SUBCASE("cluster ground state at N = 5 is represented above 0.85") {
    const int n = 5;
    auto gr = exact::ground_state(iqs::cphl::cim_hamiltonian(n, -1.0), Sector::spin_full(n));
    FidelityOptions opts;
    opts.starts = 16;
    auto res = fidelity_optimize({gr.state}, n, opts);
    CHECK(res[0].fidelity >= 0.85);
  }
}

TEST_CASE("gate serialization round trip") {
  TwoQubitGate g = random_gate(91);
  TwoQubitGate back = gate_from_json(to_json(g));
  for (int k = 0; k < 15; ++k)
    CHECK(back.thetas[std::size_t(k)] == g.thetas[std::size_t(k)]);
}
