#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "iqs/exact.hpp"
#include "iqs/varcirc.hpp"
#include "oracles.hpp"

using namespace iqs;
using namespace iqs::opalg;
using namespace iqs::varcirc;

namespace {

QuantumState basis_state(int sites, Eigen::Index index) {
  VectorXcd v = VectorXcd::Zero(Eigen::Index(1) << sites);
  v[index] = 1.0;
  return QuantumState{Sector::spin_full(sites), v};
}

VariationalCircuit random_spin_circuit(int sites, int depth, std::uint64_t seed,
                                       Reference reference) {
  VariationalCircuit c;
  c.reference = std::move(reference);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> angle(-0.8, 0.8);
  for (int k = 0; k < depth; ++k)
    c.layers.push_back(Layer{oracle::random_pauli_sum(sites, 4, seed * 31 + k), angle(rng)});
  return c;
}

double mixed_purity(const MixedState& rho) {
  double p = 0.0;
  for (Eigen::Index a = 0; a < rho.rank(); ++a)
    for (Eigen::Index b = 0; b < rho.rank(); ++b)
      p += rho.weights[a] * rho.weights[b] * std::norm(rho.vectors.col(a).dot(rho.vectors.col(b)));
  return p;
}

}  // namespace

TEST_CASE("circuit application") {
  SUBCASE("zero angles leave the reference unchanged") {
    auto circ = random_spin_circuit(3, 4, 11, basis_state(3, 5));
    for (auto& l : circ.layers) l.angle = 0.0;
    auto out = std::get<QuantumState>(apply(circ));
    CHECK((out.amplitudes - std::get<QuantumState>(circ.reference).amplitudes).norm() < 1e-14);
  }
  SUBCASE("single-qubit X rotation closed form") {
    VariationalCircuit c;
    c.reference = basis_state(1, 0);
    c.layers.push_back(Layer{spin_operator(1, {pauli_from_sites(1, {{0, 'X'}})}), kPi / 4.0});
    auto out = std::get<QuantumState>(apply(c));
    CHECK(std::abs(out.amplitudes[0] - Complex(std::cos(kPi / 4), 0)) < 1e-14);
    CHECK(std::abs(out.amplitudes[1] - Complex(0, -std::sin(kPi / 4))) < 1e-14);
  }
  SUBCASE("depth-5 Hubbard quench against a Taylor propagation oracle") {
    const int rungs = 2;
    auto h0 = hubbard_ladder(rungs, -1.0, -1.0, 4.0);
    Sector sec = Sector::fermion(4, 1, 1);
    auto gs = exact::ground_state(h0, sec);
    auto circ = hubbard_cycle_circuit(rungs, 5, gs.state);
    VectorXd theta(5);
    theta << 0.3, -0.2, 0.15, 0.4, -0.35;
    circ.set_angles(theta);
    auto out = std::get<QuantumState>(apply(circ));
    CHECK(out.amplitudes.norm() == doctest::Approx(1.0).epsilon(1e-12));

    Basis basis(sec);
    VectorXcd ref = gs.state.amplitudes;
    for (std::size_t k = 0; k < circ.layers.size(); ++k) {
      MatrixXcd g = MatrixXcd(build_matrix(circ.layers[k].generator, basis));
      ref = oracle::taylor_expm_multiply(MatrixXcd(Complex(0, -theta[Eigen::Index(k)]) * g), ref);
    }
    CHECK((out.amplitudes - ref).norm() < 1e-10);
  }
}

TEST_CASE("reverse-sweep gradient matches central finite differences") {
  CostSpec cost;
  cost.energy_part = oracle::random_pauli_sum(3, 6, 202);
  cost.bonus_part = oracle::random_pauli_sum(3, 4, 203);
  cost.lambda = 0.7;

  auto check_gradient = [&](VariationalCircuit circ) {
    auto cg = cost_and_gradient(circ, cost);
    const double h = 1e-5;
    VectorXd theta = circ.angles();
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      VectorXd tp = theta, tm = theta;
      tp[i] += h;
      tm[i] -= h;
      circ.set_angles(tp);
      const double fp = cost_and_gradient(circ, cost).value;
      circ.set_angles(tm);
      const double fm = cost_and_gradient(circ, cost).value;
      circ.set_angles(theta);
      CHECK(std::abs(cg.gradient[i] - (fp - fm) / (2 * h)) < 1e-6);
    }
  };

  SUBCASE("pure reference") {
    check_gradient(random_spin_circuit(3, 4, 17, QuantumState{Sector::spin_full(3),
                                                              oracle::random_state(8, 18)}));
  }
  SUBCASE("Gibbs reference") {
    auto rho = exact::gibbs_state(oracle::random_pauli_sum(3, 5, 19), 1.5, Sector::spin_full(3));
    check_gradient(random_spin_circuit(3, 3, 20, truncate_reference(rho)));
  }
  SUBCASE("zero-depth circuit returns the bare expectation") {
    VariationalCircuit c;
    c.reference = QuantumState{Sector::spin_full(3), oracle::random_state(8, 21)};
    auto cg = cost_and_gradient(c, cost);
    CHECK(cg.gradient.size() == 0);
    const auto& q = std::get<QuantumState>(c.reference);
    CHECK(cg.value == doctest::Approx(expectation(q, cost.cost_operator()).real()).epsilon(1e-12));
  }
}

TEST_CASE("ADAPT gradient") {
  SUBCASE("commutator with itself vanishes exactly") {
    auto h = oracle::random_pauli_sum(2, 5, 31);
    QuantumState psi{Sector::spin_full(2), oracle::random_state(4, 32)};
    OperatorPool pool{{h}};
    CHECK(std::abs(adapt_gradient(pool, psi, h)[0]) < 1e-13);
  }
  SUBCASE("random complex instances against the dense commutator oracle") {
    for (std::uint64_t seed : {41u, 42u, 43u}) {
      auto h = oracle::random_pauli_sum(2, 5, seed);
      OperatorPool pool;
      for (int i = 0; i < 3; ++i) pool.candidates.push_back(oracle::random_pauli_sum(2, 3, seed + 10 * i + 1));
      QuantumState psi{Sector::spin_full(2), oracle::random_state(4, seed + 5)};
      VectorXd g = adapt_gradient(pool, psi, h);
      MatrixXcd hd = oracle::dense_spin(h);
      for (int i = 0; i < 3; ++i) {
        MatrixXcd ad = oracle::dense_spin(pool.candidates[std::size_t(i)]);
        const Complex want = Complex(0, 1) * psi.amplitudes.dot((ad * hd - hd * ad) * psi.amplitudes);
        CHECK(std::abs(want.imag()) < 1e-12);
        CHECK(g[i] == doctest::Approx(want.real()).epsilon(1e-12));
      }
    }
  }
  SUBCASE("real states, real pool, real Hamiltonian: the gradient vanishes") {
    std::mt19937_64 rng(77);
    for (int trial = 0; trial < 6; ++trial) {
      auto h = oracle::random_pauli_sum(3, 6, 100 + trial);  // real coefficients
      // a real state: ground state of a real Hamiltonian
      auto gr = exact::ground_state(h, Sector::spin_full(3));
      OperatorPool pool;
      for (int i = 0; i < 4; ++i) pool.candidates.push_back(oracle::random_pauli_sum(3, 3, 200 + 10 * trial + i));
      bool all_real = true;
      for (const auto& c : pool.candidates)
        for (const auto& t : c.paulis)
          if (std::count(t.letters.begin(), t.letters.end(), 'Y') % 2) all_real = false;
      if (!all_real) continue;  // random_pauli_sum generates real sums only for even-Y strings
      VectorXd g = adapt_gradient(pool, gr.state, h);
      CHECK(g.cwiseAbs().maxCoeff() < 1e-12);
    }
  }
  SUBCASE("non-Hermitian pool operators are rejected") {
    OperatorPool pool{{spin_operator(1, {pauli_from_sites(1, {{0, 'X'}}, {0, 1})})}};
    QuantumState psi = basis_state(1, 0);
    CHECK_THROWS_AS(adapt_gradient(pool, psi, spin_operator(1, {pauli_from_sites(1, {{0, 'Z'}})})),
                    NonHermitianPool);
  }
}

TEST_CASE("ADAPT Hessian") {
  SUBCASE("pool containing only H at its ground state") {
    auto h = oracle::random_pauli_sum(2, 5, 51);
    auto gr = exact::ground_state(h, Sector::spin_full(2));
    auto hess = adapt_hessian(OperatorPool{{h}}, gr.state, h);
    CHECK(std::abs(hess.matrix(0, 0)) < 1e-11);
  }
  SUBCASE("random instances against the dense nested-commutator oracle") {
    auto h = oracle::random_pauli_sum(2, 5, 61);
    OperatorPool pool;
    for (int i = 0; i < 3; ++i) pool.candidates.push_back(oracle::random_pauli_sum(2, 3, 62 + i));
    QuantumState psi{Sector::spin_full(2), oracle::random_state(4, 65)};
    auto hess = adapt_hessian(pool, psi, h);
    CHECK((hess.matrix - hess.matrix.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    MatrixXcd hd = oracle::dense_spin(h);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        MatrixXcd ai = oracle::dense_spin(pool.candidates[std::size_t(i)]);
        MatrixXcd aj = oracle::dense_spin(pool.candidates[std::size_t(j)]);
        auto nested = [&](const MatrixXcd& a, const MatrixXcd& b) {
          MatrixXcd inner = b * hd - hd * b;
          return MatrixXcd(a * inner - inner * a);
        };
        const Complex want = -0.5 * psi.amplitudes.dot((nested(ai, aj) + nested(aj, ai)) * psi.amplitudes);
        CHECK(hess.matrix(i, j) == doctest::Approx(want.real()).epsilon(1e-10));
      }
  }
}

TEST_CASE("saddle of the Hubbard quench pool") {
  // reference: U=4 ground state; target energy: U=8 ladder
  const int rungs = 2;
  auto h4 = hubbard_ladder(rungs, -1.0, -1.0, 4.0);
  auto h8 = hubbard_ladder(rungs, -1.0, -1.0, 8.0);
  Sector sec = Sector::fermion(4, 1, 1);
  auto gs = exact::ground_state(h4, sec);
  OperatorPool pool{{hubbard_hop_x(rungs), hubbard_hop_y(rungs), hubbard_onsite(rungs)}};

  VectorXd g = adapt_gradient(pool, gs.state, h8);
  CHECK(g.cwiseAbs().maxCoeff() < 1e-10);

  auto hess = adapt_hessian(pool, gs.state, h8);
  CHECK(hess.eigenvalues[0] < -1e-3);  // unstable direction exists

  // quadratic model along the unstable direction tracks the exact curve
  OperatorSum dir = Complex(hess.eigenvectors(0, 0), 0) * pool.candidates[0];
  for (int i = 1; i < 3; ++i)
    dir = dir + Complex(hess.eigenvectors(i, 0), 0) * pool.candidates[std::size_t(i)];
  VariationalCircuit c;
  c.reference = gs.state;
  c.layers.push_back(Layer{canonicalize(dir), 0.0});
  CostSpec cost;
  cost.energy_part = h8;
  const double e0 = cost_and_gradient(c, cost).value;
  for (double th : {-0.05, -0.025, 0.025, 0.05}) {
    c.layers[0].angle = th;
    const double exact_e = cost_and_gradient(c, cost).value;
    const double quad = e0 + 0.5 * th * th * hess.eigenvalues[0];
    CHECK(std::abs(quad - exact_e) < 0.05 * std::abs(exact_e - e0));
  }
}

TEST_CASE("optimization") {
  SUBCASE("ground-state reference with the reference energy terminates at once") {
    const int rungs = 2;
    auto h0 = hubbard_ladder(rungs, -1.0, -1.0, 4.0);
    auto gs = exact::ground_state(h0, Sector::fermion(4, 1, 1));
    VariationalCircuit c;
    c.reference = gs.state;
    CostSpec cost;
    cost.energy_part = h0;
    OptimizeOptions opts;
    opts.adapt_growth = true;
    opts.pool = OperatorPool{{hubbard_hop_x(rungs), hubbard_hop_y(rungs), hubbard_onsite(rungs)}};
    auto res = optimize(c, cost, opts);
    CHECK(res.converged);
    CHECK(res.circuit.layers.empty());
    CHECK(res.final_cost == doctest::Approx(gs.energy).epsilon(1e-10));
  }
  SUBCASE("pair correlations grow with circuit depth at lambda = 2") {
    const int rungs = 2;
    auto h0 = hubbard_ladder(rungs, -1.0, -1.0, 4.0);
    auto gs = exact::ground_state(h0, Sector::fermion(4, 1, 1));
    CostSpec cost;
    cost.energy_part = h0;
    cost.bonus_part = dwave_sum(rungs);
    cost.lambda = 2.0;
    double prev = -1.0;
    for (int d : {1, 2, 3}) {
      auto res = optimize(hubbard_cycle_circuit(rungs, d, gs.state), cost, {});
      auto state = std::get<QuantumState>(apply(res.circuit));
      const double corr = expectation(state, *cost.bonus_part).real();
      CHECK(corr >= prev - 1e-9);
      prev = corr;
    }
    CHECK(prev > expectation(gs.state, *cost.bonus_part).real());
  }
  SUBCASE("finite-temperature optimization preserves purity") {
    const int rungs = 2;
    auto h0 = hubbard_ladder(rungs, -1.0, -1.0, 4.0);
    auto rho = truncate_reference(exact::gibbs_state(h0, 0.8, Sector::fermion(4, 1, 1)));
    const double purity_before = mixed_purity(rho);
    CostSpec cost;
    cost.energy_part = h0;
    cost.bonus_part = dwave_sum(rungs);
    cost.lambda = 2.0;
    auto res = optimize(hubbard_cycle_circuit(rungs, 2, rho), cost, {});
    auto out = std::get<MixedState>(apply(res.circuit));
    CHECK(std::abs(mixed_purity(out) - purity_before) < 1e-12);
  }
}

TEST_CASE("shot-sampled cost") {
  const int rungs = 2;
  auto h0 = hubbard_ladder(rungs, -1.0, -1.0, 4.0);
  auto gs = exact::ground_state(h0, Sector::fermion(4, 1, 1));
  auto circ = hubbard_cycle_circuit(rungs, 2, gs.state);
  VectorXd theta(2);
  theta << 0.2, -0.3;
  circ.set_angles(theta);
  CostSpec cost;
  cost.energy_part = spin_operator(0, {});
  cost.energy_part = OperatorSum{opalg::OpKind::Fermion, 2 * rungs, {}, {}};
  cost.bonus_part = dwave_sum(rungs);
  cost.lambda = 1.0;

  SUBCASE("large-shot estimate lands within three standard errors") {
    ShotModel model{1000000, 99};
    auto v = sampled_cost(circ, cost, model);
    const double exact_value = cost_and_gradient(circ, cost).value;
    CHECK(std::abs(v.estimate - exact_value) < 3.0 * v.stderr_estimate + 1e-9);
    CHECK(v.stderr_estimate < 1e-2);
  }
  SUBCASE("estimator is unbiased across seeds") {
    ShotModel model{25, 0};
    const double exact_value = cost_and_gradient(circ, cost).value;
    double mean = 0.0;
    const int runs = 400;
    double var = 0.0;
    for (int r = 0; r < runs; ++r) {
      model.rng_seed = r;
      auto v = sampled_cost(circ, cost, model);
      mean += v.estimate;
      var += v.estimate * v.estimate;
    }
    mean /= runs;
    var = var / runs - mean * mean;
    CHECK(std::abs(mean - exact_value) < 5.0 * std::sqrt(var / runs));
  }
  SUBCASE("deterministic per (seed, eval index)") {
    ShotModel model{15, 7};
    auto a = sampled_cost(circ, cost, model, 3);
    auto b = sampled_cost(circ, cost, model, 3);
    auto c = sampled_cost(circ, cost, model, 4);
    CHECK(a.estimate == b.estimate);
    CHECK(a.stderr_estimate == b.stderr_estimate);
    CHECK(a.estimate != c.estimate);
  }
  SUBCASE("eigenstate of every measured term gives zero variance") {
    // all-identity-free diagonal operator on a computational basis state
    VariationalCircuit diag;
    diag.reference = basis_state(2, 1);
    CostSpec zz;
    zz.energy_part = spin_operator(2, {pauli_from_sites(2, {{0, 'Z'}, {1, 'Z'}}, 0.7)});
    auto v = sampled_cost(diag, zz, ShotModel{40, 5});
    CHECK(v.stderr_estimate == 0.0);
    CHECK(v.estimate == doctest::Approx(-0.7).epsilon(1e-14));
  }
}

TEST_CASE("pattern search") {
  SUBCASE("zero budget returns the input unchanged") {
    VariationalCircuit c;
    c.reference = basis_state(1, 0);
    c.layers.push_back(Layer{spin_operator(1, {pauli_from_sites(1, {{0, 'X'}})}), 0.4});
    CostSpec cost;
    cost.energy_part = spin_operator(1, {pauli_from_sites(1, {{0, 'Z'}})});
    auto res = pattern_search(c, cost, ShotModel{15, 1}, 0);
    CHECK(res.shots_used == 0);
    CHECK(res.circuit.angles()[0] == 0.4);
    CHECK(res.trajectory.empty());
  }
  SUBCASE("near-noiseless quadratic toy converges to the minimizer") {
    VariationalCircuit c;
    c.reference = basis_state(1, 0);
    c.layers.push_back(Layer{spin_operator(1, {pauli_from_sites(1, {{0, 'X'}})}), 0.9});
    CostSpec cost;
    cost.energy_part = spin_operator(1, {pauli_from_sites(1, {{0, 'Z'}})});
    ShotModel model{1000000, 3};
    auto res = pattern_search(c, cost, model, 200000000L);
    const double theta = res.circuit.angles()[0];
    CHECK(std::abs(theta - kPi / 2.0) < 0.05);
    CHECK(res.trajectory.back().exact_cost < -0.995);
    CHECK(res.shots_used <= 200000000L);
  }
  SUBCASE("budget accounting and logging") {
    VariationalCircuit c;
    c.reference = basis_state(1, 0);
    c.layers.push_back(Layer{spin_operator(1, {pauli_from_sites(1, {{0, 'X'}})}), 0.9});
    CostSpec cost;
    cost.energy_part = spin_operator(1, {pauli_from_sites(1, {{0, 'Z'}})});
    ShotModel model{15, 12};
    auto res = pattern_search(c, cost, model, 600);
    CHECK(res.shots_used <= 600);
    CHECK(res.shots_used % 15 == 0);
    REQUIRE(!res.trajectory.empty());
    CHECK(res.trajectory.front().shots_cumulative == 15);
    auto text = trajectory_to_json(res.trajectory);
    CHECK(text.find("shots_cumulative") != std::string::npos);
  }
}
