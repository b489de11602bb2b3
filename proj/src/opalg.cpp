#include "iqs/opalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

namespace iqs::opalg {

namespace {

using nlohmann::json;

int popcount(std::uint64_t x) { return std::popcount(x); }

char pauli_check(char c) {
  if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z')
    throw Error("invalid Pauli letter '" + std::string(1, c) + "'");
  return c;
}

// Single-site product a*b -> (letter, phase).
std::pair<char, Complex> letter_product(char a, char b) {
  if (a == 'I') return {b, {1, 0}};
  if (b == 'I') return {a, {1, 0}};
  if (a == b) return {'I', {1, 0}};
  static const Complex i{0, 1};
  if (a == 'X' && b == 'Y') return {'Z', i};
  if (a == 'Y' && b == 'X') return {'Z', -i};
  if (a == 'Y' && b == 'Z') return {'X', i};
  if (a == 'Z' && b == 'Y') return {'X', -i};
  if (a == 'Z' && b == 'X') return {'Y', i};
  return {'Y', -i};  // X*Z
}

double max_coeff(const OperatorSum& a) {
  double m = 0.0;
  if (a.kind == OpKind::Spin)
    for (const auto& t : a.paulis) m = std::max(m, std::abs(t.coeff));
  else
    for (const auto& t : a.fermions) m = std::max(m, std::abs(t.coeff));
  return m;
}

// Canonical ordering key for fermionic factors: site-major, up before down.
std::pair<int, int> factor_key(const FermionOp& f) {
  return {f.site, f.spin == Spin::Up ? 0 : 1};
}

bool same_mode(const FermionOp& a, const FermionOp& b) {
  return a.site == b.site && a.spin == b.spin;
}

std::vector<FermionTerm> normal_order_term(const FermionTerm& input) {
  std::vector<FermionTerm> done;
  std::vector<FermionTerm> work{input};
  while (!work.empty()) {
    FermionTerm t = std::move(work.back());
    work.pop_back();
    bool changed = true;
    bool zero = false;
    while (changed && !zero) {
      changed = false;
      auto& f = t.factors;
      for (std::size_t i = 0; i + 1 < f.size(); ++i) {
        const bool dl = f[i].dagger, dr = f[i + 1].dagger;
        if (dl == dr) {
          if (same_mode(f[i], f[i + 1])) { zero = true; break; }
          if (factor_key(f[i]) > factor_key(f[i + 1])) {
            std::swap(f[i], f[i + 1]);
            t.coeff = -t.coeff;
            changed = true;
            break;
          }
        } else if (!dl && dr) {  // c c^dag: anticommute
          if (same_mode(f[i], f[i + 1])) {
            FermionTerm contracted;
            contracted.coeff = t.coeff;
            contracted.factors.assign(f.begin(), f.begin() + i);
            contracted.factors.insert(contracted.factors.end(), f.begin() + i + 2, f.end());
            work.push_back(std::move(contracted));
          }
          std::swap(f[i], f[i + 1]);
          t.coeff = -t.coeff;
          changed = true;
          break;
        }
      }
    }
    if (!zero) done.push_back(std::move(t));
  }
  return done;
}

std::string factor_signature(const FermionTerm& t) {
  std::ostringstream os;
  for (const auto& f : t.factors)
    os << (f.dagger ? 'D' : 'a') << f.site << (f.spin == Spin::Up ? 'u' : 'd') << ';';
  return os.str();
}

// Fermionic factor applied to an occupation mask; false when annihilated.
bool apply_factor(const FermionOp& f, int site_count, std::uint64_t& mask, int& sign) {
  const int mu = mode_index(f.site, f.spin, site_count);
  const std::uint64_t bit = 1ULL << mu;
  const bool occupied = mask & bit;
  if (f.dagger == occupied) return false;
  if (popcount(mask & (bit - 1)) & 1) sign = -sign;
  mask ^= bit;
  return true;
}

// Pauli string applied to a spin basis mask (site i at bit N-1-i).
Complex apply_pauli_mask(const PauliString& p, std::uint64_t& mask) {
  Complex phase{1, 0};
  const int n = p.sites();
  for (int i = 0; i < n; ++i) {
    const char c = p.letters[static_cast<std::size_t>(i)];
    if (c == 'I') continue;
    const std::uint64_t bit = 1ULL << (n - 1 - i);
    const bool one = mask & bit;
    switch (c) {
      case 'Z': if (one) phase = -phase; break;
      case 'X': mask ^= bit; break;
      case 'Y': phase *= one ? Complex(0, -1) : Complex(0, 1); mask ^= bit; break;
      default: break;
    }
  }
  return phase;
}

void check_kind_match(const OperatorSum& op, const Sector& sec) {
  if (op.kind != sec.kind || op.site_count != sec.site_count)
    throw DimensionMismatch("operator and sector disagree on kind or site count");
}

// Particle numbers created minus annihilated, per spin species.
std::pair<int, int> term_charge(const FermionTerm& t) {
  int du = 0, dd = 0;
  for (const auto& f : t.factors) {
    int s = f.dagger ? 1 : -1;
    (f.spin == Spin::Up ? du : dd) += s;
  }
  return {du, dd};
}

OperatorSum total_sz(int sites) {
  std::vector<PauliString> terms;
  for (int i = 0; i < sites; ++i)
    terms.push_back(pauli_from_sites(sites, {{i, 'Z'}}));
  return spin_operator(sites, std::move(terms));
}

void check_sector_conservation(const OperatorSum& op, const Sector& sec) {
  if (sec.kind == OpKind::Fermion) {
    if (!sec.n_up && !sec.n_down) return;
    for (const auto& t : op.fermions) {
      auto [du, dd] = term_charge(t);
      if ((sec.n_up && du != 0) || (sec.n_down && dd != 0))
        throw SectorViolation("fermion term changes conserved particle numbers");
    }
  } else if (sec.magnetization) {
    OperatorSum sz = total_sz(sec.site_count);
    OperatorSum comm = spin_product(op, sz) + Complex(-1, 0) * spin_product(sz, op);
    if (!canonicalize(comm).paulis.empty())
      throw SectorViolation("spin operator does not commute with total magnetization");
  }
}

}  // namespace

bool PauliString::is_identity() const {
  return letters.find_first_not_of('I') == std::string::npos;
}

OperatorSum spin_operator(int sites, std::vector<PauliString> terms) {
  OperatorSum op;
  op.kind = OpKind::Spin;
  op.site_count = sites;
  for (auto& t : terms) {
    if (t.sites() != sites) throw DimensionMismatch("Pauli string length != site count");
    for (char c : t.letters) pauli_check(c);
  }
  op.paulis = std::move(terms);
  return op;
}

OperatorSum fermion_operator(int sites, std::vector<FermionTerm> terms) {
  OperatorSum op;
  op.kind = OpKind::Fermion;
  op.site_count = sites;
  for (const auto& t : terms)
    for (const auto& f : t.factors)
      if (f.site < 0 || f.site >= sites) throw IndexOutOfRange("fermion factor site");
  op.fermions = std::move(terms);
  return op;
}

PauliString pauli_from_sites(int sites, const std::vector<std::pair<int, char>>& ops,
                             Complex coeff) {
  PauliString p;
  p.letters.assign(static_cast<std::size_t>(sites), 'I');
  p.coeff = coeff;
  for (auto [site, c] : ops) {
    if (site < 0 || site >= sites) throw IndexOutOfRange("Pauli site index");
    p.letters[static_cast<std::size_t>(site)] = pauli_check(c);
  }
  return p;
}

OperatorSum operator+(const OperatorSum& a, const OperatorSum& b) {
  if (a.kind != b.kind || a.site_count != b.site_count)
    throw DimensionMismatch("operator sum of mismatched operators");
  OperatorSum r = a;
  r.paulis.insert(r.paulis.end(), b.paulis.begin(), b.paulis.end());
  r.fermions.insert(r.fermions.end(), b.fermions.begin(), b.fermions.end());
  return r;
}

OperatorSum operator*(Complex s, const OperatorSum& a) {
  OperatorSum r = a;
  for (auto& t : r.paulis) t.coeff *= s;
  for (auto& t : r.fermions) t.coeff *= s;
  return r;
}

OperatorSum adjoint(const OperatorSum& a) {
  OperatorSum r = a;
  for (auto& t : r.paulis) t.coeff = std::conj(t.coeff);
  for (auto& t : r.fermions) {
    std::reverse(t.factors.begin(), t.factors.end());
    for (auto& f : t.factors) f.dagger = !f.dagger;
    t.coeff = std::conj(t.coeff);
  }
  return r;
}

OperatorSum canonicalize(const OperatorSum& a, double drop_tol) {
  OperatorSum r;
  r.kind = a.kind;
  r.site_count = a.site_count;
  const double floor = drop_tol * std::max(1.0, max_coeff(a));
  if (a.kind == OpKind::Spin) {
    std::map<std::string, Complex> merged;
    for (const auto& t : a.paulis) merged[t.letters] += t.coeff;
    for (const auto& [letters, c] : merged)
      if (std::abs(c) > floor) r.paulis.push_back(PauliString{letters, c});
  } else {
    std::map<std::string, FermionTerm> merged;
    for (const auto& t : a.fermions) {
      for (auto& nt : normal_order_term(t)) {
        const std::string key = factor_signature(nt);
        auto it = merged.find(key);
        if (it == merged.end())
          merged.emplace(key, std::move(nt));
        else
          it->second.coeff += nt.coeff;
      }
    }
    for (auto& [key, t] : merged)
      if (std::abs(t.coeff) > floor) r.fermions.push_back(std::move(t));
  }
  return r;
}

OperatorSum spin_product(const OperatorSum& a, const OperatorSum& b) {
  if (a.kind != OpKind::Spin || b.kind != OpKind::Spin)
    throw DimensionMismatch("spin_product needs spin operators");
  if (a.site_count != b.site_count) throw DimensionMismatch("site counts differ");
  std::map<std::string, Complex> merged;
  for (const auto& ta : a.paulis) {
    for (const auto& tb : b.paulis) {
      Complex c = ta.coeff * tb.coeff;
      std::string letters(static_cast<std::size_t>(a.site_count), 'I');
      for (int i = 0; i < a.site_count; ++i) {
        auto [l, ph] = letter_product(ta.letters[static_cast<std::size_t>(i)],
                                      tb.letters[static_cast<std::size_t>(i)]);
        letters[static_cast<std::size_t>(i)] = l;
        c *= ph;
      }
      merged[letters] += c;
    }
  }
  OperatorSum r;
  r.kind = OpKind::Spin;
  r.site_count = a.site_count;
  for (const auto& [letters, c] : merged)
    if (std::abs(c) > 0.0) r.paulis.push_back(PauliString{letters, c});
  return r;
}

bool is_hermitian(const OperatorSum& a, double tol) {
  OperatorSum diff = canonicalize(a + Complex(-1, 0) * adjoint(a), 0.0);
  const double scale = std::max(1.0, max_coeff(a));
  return max_coeff(diff) <= tol * scale;
}

OperatorSum jw_transform(const OperatorSum& fermionic) {
  if (fermionic.kind != OpKind::Fermion)
    throw DimensionMismatch("jw_transform expects a fermionic operator");
  const int modes = 2 * fermionic.site_count;
  auto factor_image = [&](const FermionOp& f) {
    const int mu = mode_index(f.site, f.spin, fermionic.site_count);
    // qubit mu of the JW register maps to letter position mu here
    std::string zx(static_cast<std::size_t>(modes), 'I');
    std::string zy = zx;
    for (int nu = 0; nu < mu; ++nu) {
      zx[static_cast<std::size_t>(nu)] = 'Z';
      zy[static_cast<std::size_t>(nu)] = 'Z';
    }
    zx[static_cast<std::size_t>(mu)] = 'X';
    zy[static_cast<std::size_t>(mu)] = 'Y';
    const Complex iy = f.dagger ? Complex(0, -0.5) : Complex(0, 0.5);
    std::vector<PauliString> out;
    out.push_back(PauliString{zx, {0.5, 0.0}});
    out.push_back(PauliString{zy, iy});
    return spin_operator(modes, std::move(out));
  };
  OperatorSum result;
  result.kind = OpKind::Spin;
  result.site_count = modes;
  for (const auto& t : fermionic.fermions) {
    OperatorSum acc = spin_operator(modes, {PauliString{std::string(static_cast<std::size_t>(modes), 'I'), t.coeff}});
    for (const auto& f : t.factors) acc = spin_product(acc, factor_image(f));
    result = result + acc;
  }
  return canonicalize(result);
}

// ---------------------------------------------------------------------------

Sector Sector::spin_full(int sites) {
  Sector s;
  s.kind = OpKind::Spin;
  s.site_count = sites;
  return s;
}

Sector Sector::spin_magnetization(int sites, int two_sz) {
  Sector s = spin_full(sites);
  if ((sites - two_sz) % 2 != 0 || std::abs(two_sz) > sites)
    throw SectorViolation("magnetization incompatible with site count");
  s.magnetization = two_sz;
  return s;
}

Sector Sector::fermion(int sites, int n_up, int n_down) {
  Sector s;
  s.kind = OpKind::Fermion;
  s.site_count = sites;
  if (n_up < 0 || n_up > sites || n_down < 0 || n_down > sites)
    throw SectorViolation("particle numbers exceed site count");
  s.n_up = n_up;
  s.n_down = n_down;
  return s;
}

Sector Sector::fermion_full(int sites) {
  Sector s;
  s.kind = OpKind::Fermion;
  s.site_count = sites;
  return s;
}

Basis::Basis(const Sector& sector) : sector_(sector) {
  const int m = sector.modes();
  if (m > 26) throw DimensionCap("sector enumeration beyond 2^26 states");
  const std::uint64_t total = 1ULL << m;
  if (sector.kind == OpKind::Spin) {
    if (!sector.magnetization) {
      masks_.resize(total);
      for (std::uint64_t x = 0; x < total; ++x) masks_[x] = x;
    } else {
      const int downs = (sector.site_count - *sector.magnetization) / 2;
      for (std::uint64_t x = 0; x < total; ++x)
        if (popcount(x) == downs) masks_.push_back(x);
    }
  } else {
    const std::uint64_t up_mask = (1ULL << sector.site_count) - 1;
    for (std::uint64_t x = 0; x < total; ++x) {
      if (sector.n_up && popcount(x & up_mask) != *sector.n_up) continue;
      if (sector.n_down && popcount(x >> sector.site_count) != *sector.n_down) continue;
      masks_.push_back(x);
    }
  }
}

Eigen::Index Basis::index_of(std::uint64_t mask) const {
  if (sector_.kind == OpKind::Spin && !sector_.magnetization)
    return mask < masks_.size() ? static_cast<Eigen::Index>(mask) : -1;
  auto it = std::lower_bound(masks_.begin(), masks_.end(), mask);
  if (it == masks_.end() || *it != mask) return -1;
  return static_cast<Eigen::Index>(it - masks_.begin());
}

QuantumState normalized(QuantumState s) {
  const double n = s.amplitudes.norm();
  if (n <= 0.0) throw Error("cannot normalize zero state");
  s.amplitudes /= n;
  return s;
}

MixedState mixed_from_pure(const QuantumState& s) {
  MixedState m;
  m.sector = s.sector;
  m.weights = VectorXd::Ones(1);
  m.vectors = s.amplitudes;
  m.purity = 1.0;
  return m;
}

QuantumState embed_state(const QuantumState& s, const Sector& target) {
  if (s.sector.kind != target.kind || s.sector.site_count != target.site_count)
    throw DimensionMismatch("embedding into a different kind or size");
  Basis small(s.sector);
  Basis big(target);
  QuantumState out;
  out.sector = target;
  out.amplitudes = VectorXcd::Zero(big.dimension());
  for (Eigen::Index i = 0; i < small.dimension(); ++i) {
    const Eigen::Index j = big.index_of(small.mask(i));
    if (j < 0) throw SectorViolation("source sector not contained in the target");
    out.amplitudes[j] = s.amplitudes[i];
  }
  return out;
}

// ---------------------------------------------------------------------------

SparseXcd build_matrix(const OperatorSum& op, const Basis& basis) {
  check_kind_match(op, basis.sector());
  check_sector_conservation(op, basis.sector());
  const Eigen::Index dim = basis.dimension();
  std::vector<Eigen::Triplet<Complex>> trips;
  if (op.kind == OpKind::Spin) {
    for (const auto& term : op.paulis) {
      if (term.sites() != op.site_count) throw DimensionMismatch("Pauli length");
      for (Eigen::Index col = 0; col < dim; ++col) {
        std::uint64_t m = basis.mask(col);
        Complex phase = apply_pauli_mask(term, m);
        const Eigen::Index row = basis.index_of(m);
        if (row >= 0) trips.emplace_back(row, col, term.coeff * phase);
      }
    }
  } else {
    for (const auto& term : op.fermions) {
      for (Eigen::Index col = 0; col < dim; ++col) {
        std::uint64_t m = basis.mask(col);
        int sign = 1;
        bool alive = true;
        for (auto it = term.factors.rbegin(); it != term.factors.rend() && alive; ++it)
          alive = apply_factor(*it, op.site_count, m, sign);
        if (!alive) continue;
        const Eigen::Index row = basis.index_of(m);
        if (row >= 0) trips.emplace_back(row, col, term.coeff * double(sign));
      }
    }
  }
  SparseXcd mat(dim, dim);
  mat.setFromTriplets(trips.begin(), trips.end());
  mat.makeCompressed();
  return mat;
}

VectorXcd apply_operator(const OperatorSum& op, const Basis& basis, const VectorXcd& x) {
  check_kind_match(op, basis.sector());
  check_sector_conservation(op, basis.sector());
  const Eigen::Index dim = basis.dimension();
  if (x.size() != dim) throw DimensionMismatch("state dimension != sector dimension");
  VectorXcd y = VectorXcd::Zero(dim);
  if (op.kind == OpKind::Spin) {
    for (const auto& term : op.paulis) {
      for (Eigen::Index col = 0; col < dim; ++col) {
        if (x[col] == Complex(0, 0)) continue;
        std::uint64_t m = basis.mask(col);
        Complex phase = apply_pauli_mask(term, m);
        const Eigen::Index row = basis.index_of(m);
        if (row >= 0) y[row] += term.coeff * phase * x[col];
      }
    }
  } else {
    for (const auto& term : op.fermions) {
      for (Eigen::Index col = 0; col < dim; ++col) {
        if (x[col] == Complex(0, 0)) continue;
        std::uint64_t m = basis.mask(col);
        int sign = 1;
        bool alive = true;
        for (auto it = term.factors.rbegin(); it != term.factors.rend() && alive; ++it)
          alive = apply_factor(*it, op.site_count, m, sign);
        if (!alive) continue;
        const Eigen::Index row = basis.index_of(m);
        if (row >= 0) y[row] += term.coeff * double(sign) * x[col];
      }
    }
  }
  return y;
}

Complex expectation(const QuantumState& state, const OperatorSum& op) {
  Basis basis(state.sector);
  VectorXcd y = apply_operator(op, basis, state.amplitudes);
  return state.amplitudes.dot(y);
}

Complex expectation(const MixedState& state, const OperatorSum& op) {
  Basis basis(state.sector);
  Complex acc{0, 0};
  for (Eigen::Index a = 0; a < state.rank(); ++a) {
    VectorXcd v = state.vectors.col(a);
    acc += state.weights[a] * v.dot(apply_operator(op, basis, v));
  }
  return acc;
}

Complex expectation(const QuantumState& state, const SparseXcd& op_matrix) {
  if (op_matrix.rows() != state.amplitudes.size())
    throw DimensionMismatch("matrix dimension != state dimension");
  return state.amplitudes.dot(op_matrix * state.amplitudes);
}

Complex jw_pauli_expectation(const PauliString& p, const Basis& basis, const VectorXcd& x) {
  if (basis.sector().kind != OpKind::Fermion)
    throw DimensionMismatch("jw_pauli_expectation needs a fermionic basis");
  if (p.sites() != 2 * basis.sector().site_count)
    throw DimensionMismatch("JW string length != mode count");
  Complex acc{0, 0};
  const int modes = p.sites();
  for (Eigen::Index col = 0; col < basis.dimension(); ++col) {
    if (x[col] == Complex(0, 0)) continue;
    std::uint64_t m = basis.mask(col);
    Complex phase{1, 0};
    for (int mu = 0; mu < modes; ++mu) {
      const char c = p.letters[std::size_t(mu)];
      if (c == 'I') continue;
      const std::uint64_t bit = 1ULL << mu;
      const bool one = m & bit;
      switch (c) {
        case 'Z': if (one) phase = -phase; break;
        case 'X': m ^= bit; break;
        case 'Y': phase *= one ? Complex(0, -1) : Complex(0, 1); m ^= bit; break;
        default: break;
      }
    }
    const Eigen::Index row = basis.index_of(m);
    if (row >= 0) acc += std::conj(x[row]) * p.coeff * phase * x[col];
  }
  return acc;
}

double variance(const QuantumState& state, const OperatorSum& op) {
  Basis basis(state.sector);
  VectorXcd y = apply_operator(op, basis, state.amplitudes);
  const double mean = state.amplitudes.dot(y).real();
  return y.squaredNorm() - mean * mean;
}

double variance(const MixedState& state, const OperatorSum& op) {
  Basis basis(state.sector);
  double second = 0.0, first = 0.0;
  for (Eigen::Index a = 0; a < state.rank(); ++a) {
    VectorXcd v = state.vectors.col(a);
    VectorXcd y = apply_operator(op, basis, v);
    second += state.weights[a] * y.squaredNorm();
    first += state.weights[a] * v.dot(y).real();
  }
  return second - first * first;
}

// ---------------------------------------------------------------------------

namespace {

FermionTerm hop(int s1, int s2, Spin sp, double amp) {
  FermionTerm t;
  t.coeff = amp;
  t.factors = {FermionOp{s1, sp, true}, FermionOp{s2, sp, false}};
  return t;
}

FermionTerm fermion_product(const FermionTerm& a, const FermionTerm& b) {
  FermionTerm t;
  t.coeff = a.coeff * b.coeff;
  t.factors = a.factors;
  t.factors.insert(t.factors.end(), b.factors.begin(), b.factors.end());
  return t;
}

}  // namespace

OperatorSum hubbard_ladder(int rungs, double t_x, double t_y, double u) {
  if (rungs < 1) throw IndexOutOfRange("ladder needs at least one rung");
  const int sites = 2 * rungs;
  std::vector<FermionTerm> terms;
  auto site = [](int rung, int leg) { return 2 * rung + leg; };
  for (int r = 0; r + 1 < rungs; ++r)
    for (int leg = 0; leg < 2; ++leg)
      for (Spin sp : {Spin::Up, Spin::Down}) {
        terms.push_back(hop(site(r, leg), site(r + 1, leg), sp, -t_x));
        terms.push_back(hop(site(r + 1, leg), site(r, leg), sp, -t_x));
      }
  for (int r = 0; r < rungs; ++r)
    for (Spin sp : {Spin::Up, Spin::Down}) {
      terms.push_back(hop(site(r, 0), site(r, 1), sp, -t_y));
      terms.push_back(hop(site(r, 1), site(r, 0), sp, -t_y));
    }
  for (int s = 0; s < sites; ++s) {
    FermionTerm t;
    t.coeff = u;
    t.factors = {FermionOp{s, Spin::Up, true}, FermionOp{s, Spin::Up, false},
                 FermionOp{s, Spin::Down, true}, FermionOp{s, Spin::Down, false}};
    terms.push_back(t);
  }
  return canonicalize(fermion_operator(sites, std::move(terms)));
}

OperatorSum hubbard_hop_x(int rungs) { return hubbard_ladder(rungs, 1.0, 0.0, 0.0); }
OperatorSum hubbard_hop_y(int rungs) { return hubbard_ladder(rungs, 0.0, 1.0, 0.0); }
OperatorSum hubbard_onsite(int rungs) { return hubbard_ladder(rungs, 0.0, 0.0, 1.0); }

OperatorSum rung_singlet_annihilator(int rungs, int rung) {
  if (rung < 0 || rung >= rungs) throw IndexOutOfRange("rung index");
  const int a = 2 * rung, b = 2 * rung + 1;
  FermionTerm t1;
  t1.coeff = 1.0;
  t1.factors = {FermionOp{a, Spin::Up, false}, FermionOp{b, Spin::Down, false}};
  FermionTerm t2;
  t2.coeff = -1.0;
  t2.factors = {FermionOp{a, Spin::Down, false}, FermionOp{b, Spin::Up, false}};
  return fermion_operator(2 * rungs, {t1, t2});
}

OperatorSum dwave_correlator(int rungs, int rung_i, int rung_j) {
  OperatorSum di = rung_singlet_annihilator(rungs, rung_i);
  OperatorSum dj = rung_singlet_annihilator(rungs, rung_j);
  auto prod = [](const OperatorSum& a, const OperatorSum& b) {
    std::vector<FermionTerm> terms;
    for (const auto& ta : a.fermions)
      for (const auto& tb : b.fermions) terms.push_back(fermion_product(ta, tb));
    return fermion_operator(a.site_count, std::move(terms));
  };
  OperatorSum corr = prod(adjoint(di), dj);
  if (rung_i != rung_j) corr = corr + prod(adjoint(dj), di);
  return canonicalize(corr);
}

OperatorSum dwave_sum(int rungs) {
  OperatorSum acc = dwave_correlator(rungs, 0, 0);
  for (int r = 1; r < rungs; ++r)
    acc = acc + Complex(0.5, 0.0) * dwave_correlator(rungs, 0, r);
  return canonicalize(acc);
}

OperatorSum sigma_k_plus(int sites, double k) {
  std::vector<PauliString> terms;
  const double norm = 1.0 / std::sqrt(double(sites));
  for (int j = 0; j < sites; ++j) {
    const Complex phase = std::polar(norm, k * j);
    terms.push_back(pauli_from_sites(sites, {{j, 'X'}}, 0.5 * phase));
    terms.push_back(pauli_from_sites(sites, {{j, 'Y'}}, Complex(0, 0.5) * phase));
  }
  return spin_operator(sites, std::move(terms));
}

OperatorSum sigma_k_minus(int sites, double k) { return adjoint(sigma_k_plus(sites, k)); }

OperatorSum sigma_k_z(int sites, double k) {
  std::vector<PauliString> terms;
  const double norm = 1.0 / std::sqrt(double(sites));
  for (int j = 0; j < sites; ++j)
    terms.push_back(pauli_from_sites(sites, {{j, 'Z'}}, std::polar(norm, k * j)));
  return spin_operator(sites, std::move(terms));
}

// ---------------------------------------------------------------------------

std::string to_json(const OperatorSum& op) {
  json j;
  j["kind"] = op.kind == OpKind::Spin ? "spin" : "fermion";
  j["siteCount"] = op.site_count;
  j["terms"] = json::array();
  if (op.kind == OpKind::Spin) {
    for (const auto& t : op.paulis)
      j["terms"].push_back({{"letters", t.letters}, {"re", t.coeff.real()}, {"im", t.coeff.imag()}});
  } else {
    for (const auto& t : op.fermions) {
      json fac = json::array();
      for (const auto& f : t.factors)
        fac.push_back({f.site, f.spin == Spin::Up ? "up" : "dn", f.dagger ? 1 : 0});
      j["terms"].push_back({{"factors", fac}, {"re", t.coeff.real()}, {"im", t.coeff.imag()}});
    }
  }
  return j.dump();
}

OperatorSum operator_from_json(const std::string& text) {
  json j = json::parse(text);
  const std::string kind = j.at("kind").get<std::string>();
  const int sites = j.at("siteCount").get<int>();
  if (kind == "spin") {
    std::vector<PauliString> terms;
    for (const auto& t : j.at("terms")) {
      PauliString p;
      p.letters = t.at("letters").get<std::string>();
      p.coeff = {t.at("re").get<double>(), t.at("im").get<double>()};
      terms.push_back(std::move(p));
    }
    return spin_operator(sites, std::move(terms));
  }
  if (kind != "fermion") throw ConfigInvalid("operator kind must be spin or fermion");
  std::vector<FermionTerm> terms;
  for (const auto& t : j.at("terms")) {
    FermionTerm ft;
    ft.coeff = {t.at("re").get<double>(), t.at("im").get<double>()};
    for (const auto& f : t.at("factors")) {
      FermionOp op;
      op.site = f.at(0).get<int>();
      op.spin = f.at(1).get<std::string>() == "up" ? Spin::Up : Spin::Down;
      op.dagger = f.at(2).get<int>() != 0;
      ft.factors.push_back(op);
    }
    terms.push_back(std::move(ft));
  }
  return fermion_operator(sites, std::move(terms));
}

}  // namespace iqs::opalg
