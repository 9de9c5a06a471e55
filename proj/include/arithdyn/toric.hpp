#pragma once

// Toric geometry of complete simplicial fans: class groups, nef cones by
// double description, pullbacks of divisors along fan endomorphisms, the
// permutation of extremal rays, semi-ample fibrations and the maps they
// induce on the base.
//
// Sign convention: the support function of D = sum a_rho D_rho takes the
// value psi_D(u_rho) = -a_rho on each ray generator and is linear on cones.

#include <numeric>

#include "arithdyn/self_maps.hpp"

namespace arithdyn {

namespace detail {

inline std::vector<Integer> primitive(const std::vector<Rat>& v) {
  Integer den = 1;
  for (const auto& q : v) den = lcm(den, Integer(q.get_den()));
  std::vector<Integer> out;
  Integer g = 0;
  for (const auto& q : v) {
    out.push_back(Integer(q.get_num()) * (den / q.get_den()));
    g = gcd(g, out.back());
  }
  if (g > 1)
    for (auto& c : out) mpz_divexact(c.get_mpz_t(), c.get_mpz_t(), g.get_mpz_t());
  return out;
}

inline std::vector<Rat> to_rats(const std::vector<Integer>& v) { return std::vector<Rat>(v.begin(), v.end()); }

inline Rat dot(const std::vector<Rat>& a, const std::vector<Rat>& b) {
  Rat s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Class lattice

/// Z^rays modulo the principal divisors div(chi^m) = sum <m, u_rho> D_rho,
/// torsion dropped. `G` maps ray coefficients to class coordinates and
/// `section` is an integral right inverse of it.
struct ClassLattice {
  IntMatrix G;
  IntMatrix section;

  std::size_t rank() const { return G.rows(); }

  std::vector<Rat> classes(const TDivisor& d) const { return to_rat(G).apply(d.coefficients); }

  TDivisor representative(const std::vector<Rat>& y) const { return {to_rat(section).apply(y)}; }

  bool equivalent(const TDivisor& a, const TDivisor& b) const { return classes(a) == classes(b); }
};

inline ClassLattice class_lattice(const Fan& fan) {
  ClassLattice L;
  L.G = integer_left_kernel(fan.ray_matrix());
  const std::size_t k = L.G.rows(), r = fan.num_rays();
  L.section = IntMatrix(r, k);
  if (k == 0) return L;
  auto hf = hermite_normal_form(L.G.transpose());
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      if (hf.h(i, j) != (i == j ? 1 : 0)) fail(ErrorKind::InvalidFan, "class map is not surjective");
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < k; ++j) L.section(i, j) = hf.transform(j, i);
  return L;
}

// ---------------------------------------------------------------------------
// Wall inequalities and the nef cone

struct WallInequality {
  Fan::Wall wall;
  std::vector<Integer> relation;  // per ray: sum relation_rho u_rho = 0
  std::vector<Rat> on_classes;    // the same functional in class coordinates
};

/// One inequality per wall: D is nef iff sum relation_rho a_rho >= 0 for
/// every wall, where the relation is the linear dependency among the rays
/// of the two adjacent cones, positive on the two rays off the wall.
inline std::vector<WallInequality> wall_inequalities(const Fan& fan, const ClassLattice& L) {
  std::vector<WallInequality> out;
  const std::size_t n = fan.rank();
  for (const auto& w : fan.walls()) {
    std::vector<Rat> ub(n);
    for (std::size_t i = 0; i < n; ++i) ub[i] = Rat(fan.ray(w.ray_b)[i]);
    auto coords = fan.cone_coordinates(w.cone_a, ub);
    std::vector<Rat> rel(fan.num_rays(), Rat(0));
    rel[w.ray_b] = 1;
    const auto& cone = fan.cones()[w.cone_a];
    for (std::size_t j = 0; j < n; ++j) rel[cone[j]] -= coords[j];
    WallInequality wi{w, detail::primitive(rel), {}};
    if (L.rank() > 0) {
      auto c = solve(to_rat(L.G.transpose()), detail::to_rats(wi.relation));
      if (!c) fail(ErrorKind::InvalidFan, "wall relation does not descend to classes");
      wi.on_classes = *c;
    }
    out.push_back(std::move(wi));
  }
  return out;
}

inline bool is_nef(const Fan& fan, const TDivisor& d) {
  if (d.coefficients.size() != fan.num_rays()) fail(ErrorKind::InvalidInput, "divisor has wrong length");
  for (const auto& w : wall_inequalities(fan, class_lattice(fan)))
    if (sgn(detail::dot(detail::to_rats(w.relation), d.coefficients)) < 0) return false;
  return true;
}

/// Extreme rays of the pointed cone {y : c . y >= 0 for every row c}, by the
/// double description method. Rows are processed in order; output rays are
/// primitive integral and sorted in decreasing lexicographic order.
inline std::vector<std::vector<Integer>> extreme_rays(const std::vector<std::vector<Rat>>& rows, std::size_t dim) {
  if (dim == 0) return {};
  if (dim > 12) fail(ErrorKind::InvalidInput, "cone dimension above 12");
  struct Ray {
    std::vector<Rat> v;
    std::set<std::size_t> tight;
  };
  // Initial simplicial cone on the first independent rows.
  std::vector<std::size_t> basis;
  for (std::size_t i = 0; i < rows.size() && basis.size() < dim; ++i) {
    std::vector<std::vector<Rat>> trial;
    for (auto b : basis) trial.push_back(rows[b]);
    trial.push_back(rows[i]);
    if (rank(RatMatrix::from_rows(trial)) == trial.size()) basis.push_back(i);
  }
  if (basis.size() < dim) fail(ErrorKind::NotProjective, "inequalities do not cut out a pointed cone");
  std::vector<std::vector<Rat>> brows;
  for (auto b : basis) brows.push_back(rows[b]);
  auto inv = inverse(RatMatrix::from_rows(brows));
  std::vector<Ray> rays;
  for (std::size_t j = 0; j < dim; ++j) {
    Ray r{detail::to_rats(detail::primitive(inv->col(j))), {}};
    for (std::size_t i = 0; i < dim; ++i)
      if (i != j) r.tight.insert(basis[i]);
    rays.push_back(std::move(r));
  }
  auto tight_rank = [&](const std::set<std::size_t>& t) {
    if (t.empty()) return std::size_t(0);
    std::vector<std::vector<Rat>> m;
    for (auto i : t) m.push_back(rows[i]);
    return rank(RatMatrix::from_rows(m));
  };
  std::set<std::size_t> done(basis.begin(), basis.end());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (done.count(i)) continue;
    std::vector<Rat> val;
    for (const auto& r : rays) val.push_back(detail::dot(rows[i], r.v));
    std::vector<Ray> next;
    for (std::size_t a = 0; a < rays.size(); ++a) {
      if (sgn(val[a]) >= 0) {
        Ray r = rays[a];
        if (sgn(val[a]) == 0) r.tight.insert(i);
        next.push_back(std::move(r));
      }
    }
    for (std::size_t p = 0; p < rays.size(); ++p) {
      if (sgn(val[p]) <= 0) continue;
      for (std::size_t q = 0; q < rays.size(); ++q) {
        if (sgn(val[q]) >= 0) continue;
        std::set<std::size_t> common;
        std::set_intersection(rays[p].tight.begin(), rays[p].tight.end(), rays[q].tight.begin(),
                              rays[q].tight.end(), std::inserter(common, common.begin()));
        if (dim >= 2 && tight_rank(common) != dim - 2) continue;
        std::vector<Rat> v(dim);
        for (std::size_t k = 0; k < dim; ++k) v[k] = val[p] * rays[q].v[k] - val[q] * rays[p].v[k];
        if (std::all_of(v.begin(), v.end(), [](const Rat& x) { return sgn(x) == 0; })) continue;
        common.insert(i);
        next.push_back({detail::to_rats(detail::primitive(v)), std::move(common)});
      }
    }
    rays = std::move(next);
    done.insert(i);
  }
  std::set<std::vector<Integer>> uniq;
  for (const auto& r : rays) uniq.insert(detail::primitive(r.v));
  return std::vector<std::vector<Integer>>(uniq.rbegin(), uniq.rend());
}

struct NefData {
  std::vector<std::vector<Integer>> extremal_classes;  // class coordinates, primitive
  std::vector<TDivisor> extremal_divisors;             // integral representatives
  std::size_t class_dim = 0;
};

inline NefData nef_cone(const Fan& fan) {
  const auto L = class_lattice(fan);
  std::vector<std::vector<Rat>> rows;
  std::set<std::vector<Integer>> seen;
  for (const auto& w : wall_inequalities(fan, L)) {
    auto p = detail::primitive(w.on_classes);
    if (seen.insert(p).second) rows.push_back(detail::to_rats(p));
  }
  NefData nd;
  nd.class_dim = L.rank();
  nd.extremal_classes = extreme_rays(rows, L.rank());
  std::vector<std::vector<Rat>> gens;
  for (const auto& c : nd.extremal_classes) gens.push_back(detail::to_rats(c));
  if (gens.empty() || rank(RatMatrix::from_rows(gens)) != L.rank())
    fail(ErrorKind::NotProjective, "nef cone is not full-dimensional");
  for (const auto& c : nd.extremal_classes) nd.extremal_divisors.push_back(L.representative(detail::to_rats(c)));
  return nd;
}

// ---------------------------------------------------------------------------
// Pullback

/// (f^* D)_{rho'} = sum_k c_k a_k where phi(u_{rho'}) = sum_k c_k u_k over
/// the rays of a cone containing it. Rows index rho', columns k.
inline RatMatrix divisor_pullback(const ToricEndo& f) {
  const Fan& fan = *f.fan;
  const std::size_t n = fan.rank(), r = fan.num_rays();
  RatMatrix P(r, r);
  const RatMatrix phq = to_rat(f.phi);
  for (std::size_t rho = 0; rho < r; ++rho) {
    std::size_t src = 0;
    while (std::find(fan.cones()[src].begin(), fan.cones()[src].end(), rho) == fan.cones()[src].end()) ++src;
    const std::size_t tgt = f.cone_map[src];
    std::vector<Rat> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = Rat(fan.ray(rho)[i]);
    auto c = fan.cone_coordinates(tgt, phq.apply(u));
    for (std::size_t j = 0; j < n; ++j) P(rho, fan.cones()[tgt][j]) = c[j];
  }
  return P;
}

inline TDivisor pullback(const ToricEndo& f, const TDivisor& d) {
  return {divisor_pullback(f).apply(d.coefficients)};
}

/// f^* on class coordinates.
inline IntMatrix pullback_matrix(const ToricEndo& f) {
  const auto L = class_lattice(*f.fan);
  const RatMatrix P = divisor_pullback(f);
  const RatMatrix G = to_rat(L.G);
  const RatMatrix principal = G * P * to_rat(f.fan->ray_matrix());
  for (std::size_t i = 0; i < principal.rows(); ++i)
    for (std::size_t j = 0; j < principal.cols(); ++j)
      if (sgn(principal(i, j)) != 0) fail(ErrorKind::IncompatibleEndo, "pullback does not preserve principal divisors");
  auto M = to_integer(G * P * to_rat(L.section));
  if (!M) fail(ErrorKind::IncompatibleEndo, "pullback is not integral on class coordinates");
  return *M;
}

// ---------------------------------------------------------------------------
// Extremal rays under pullback

struct RayFixing {
  std::size_t period = 1;                 // order of the permutation
  std::vector<std::size_t> permutation;   // f^* e_i is a positive multiple of e_{permutation[i]}
  std::vector<Rat> multipliers;           // those multiples
  std::vector<Integer> lambdas;           // (f^period)^* e_i = lambdas[i] e_i
};

inline RayFixing ray_fixing_iterate(const NefData& nef, const IntMatrix& pull) {
  const std::size_t s = nef.extremal_classes.size();
  RayFixing out;
  auto multiple_of = [&](const std::vector<Integer>& v, std::size_t j) -> std::optional<Rat> {
    const auto& e = nef.extremal_classes[j];
    std::optional<Rat> mu;
    for (std::size_t k = 0; k < e.size(); ++k) {
      if (sgn(e[k]) == 0) {
        if (sgn(v[k]) != 0) return std::nullopt;
        continue;
      }
      Rat q(v[k], e[k]);
      q.canonicalize();
      if (mu && *mu != q) return std::nullopt;
      mu = q;
    }
    if (!mu || sgn(*mu) <= 0) return std::nullopt;
    return mu;
  };
  std::vector<bool> hit(s, false);
  for (std::size_t i = 0; i < s; ++i) {
    auto v = pull.apply(nef.extremal_classes[i]);
    bool found = false;
    for (std::size_t j = 0; j < s && !found; ++j) {
      if (auto mu = multiple_of(v, j)) {
        out.permutation.push_back(j);
        out.multipliers.push_back(*mu);
        hit[j] = found = true;
      }
    }
    if (!found) fail(ErrorKind::NotPermutation, "image of an extremal class is not extremal");
  }
  if (!std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }))
    fail(ErrorKind::NotPermutation, "pullback does not permute the extremal classes");
  std::vector<bool> seen(s, false);
  for (std::size_t i = 0; i < s; ++i) {
    if (seen[i]) continue;
    std::size_t len = 0;
    for (std::size_t j = i; !seen[j]; j = out.permutation[j]) {
      seen[j] = true;
      ++len;
    }
    out.period = std::lcm(out.period, len);
  }
  const IntMatrix Pn = matrix_power(pull, static_cast<unsigned>(out.period));
  for (std::size_t i = 0; i < s; ++i) {
    auto mu = multiple_of(Pn.apply(nef.extremal_classes[i]), i);
    if (!mu || mu->get_den() != 1) fail(ErrorKind::NotPermutation, "multiplier is not a positive integer");
    out.lambdas.push_back(mu->get_num());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Semi-ample fibrations

/// The map x -> (x^m)_{m in P_D} for a nef divisor D, with P_D the lattice
/// polytope {m : <m, u_rho> >= -a_rho}. With m_0 the first lattice point and
/// b_1..b_d a basis of the lattice spanned by the m_i - m_0, the base torus
/// has coordinates z_k = x^{b_k}.
struct Fibration {
  TDivisor divisor;
  std::vector<std::vector<Integer>> lattice_points;  // lexicographic
  IntMatrix basis;         // d x n, rows b_k
  IntMatrix point_coords;  // (s+1) x d: m_i - m_0 = sum_k point_coords(i,k) b_k
  IntMatrix basis_coords;  // d x s: b_k = sum_i basis_coords(k,i) (m_{i+1} - m_0)

  std::size_t base_dim() const { return basis.rows(); }
  std::size_t ambient_dim() const { return lattice_points.size() - 1; }

  /// Base torus coordinates of x; boundary points of (P^1)^n follow the
  /// monomial extension rules.
  State to_base(const State& x) const {
    if (base_dim() == 0) return normalize_integers({Integer(1)});
    return monomial_apply(basis, x.as<CompactTorusPoint>());
  }

  /// Image in P^s of a base point.
  ProjPoint base_point(const State& z) const {
    if (base_dim() == 0) return normalize_integers({Integer(1)});
    const auto& zt = z.as<CompactTorusPoint>();
    const std::size_t d = base_dim();
    std::vector<long> lo(d, 0), hi(d, 0);
    for (std::size_t i = 0; i < point_coords.rows(); ++i)
      for (std::size_t k = 0; k < d; ++k) {
        lo[k] = std::min(lo[k], point_coords(i, k).get_si());
        hi[k] = std::max(hi[k], point_coords(i, k).get_si());
      }
    std::vector<Integer> out;
    for (std::size_t i = 0; i < point_coords.rows(); ++i) {
      Integer c = 1;
      for (std::size_t k = 0; k < d; ++k) {
        const long e = point_coords(i, k).get_si();
        c *= pow_int(zt[k][1], static_cast<unsigned long>(e - lo[k]));
        c *= pow_int(zt[k][0], static_cast<unsigned long>(hi[k] - e));
      }
      out.push_back(c);
    }
    try {
      return normalize_integers(std::move(out));
    } catch (const Error&) {
      fail(ErrorKind::DomainViolation, "base point outside the domain of the embedding");
    }
  }

  ProjPoint project(const State& x) const { return base_point(to_base(x)); }

  /// h_D(x) = h(pi_D(x)).
  double height(const State& x) const { return weil_height(project(x)); }

  double base_height(const State& z) const { return weil_height(base_point(z)); }

  /// Inverse of base_point on the torus of the base.
  TorusPoint base_coordinates(const ProjPoint& y) const {
    std::vector<Rat> z;
    for (std::size_t k = 0; k < base_dim(); ++k) {
      Rat acc = 1;
      for (std::size_t i = 0; i < basis_coords.cols(); ++i) {
        const long e = basis_coords(k, i).get_si();
        if (e == 0) continue;
        if (sgn(y[0]) == 0 || sgn(y[i + 1]) == 0) fail(ErrorKind::DomainViolation, "point off the base torus");
        Rat ratio(y[i + 1], y[0]);
        ratio.canonicalize();
        acc *= pow_rat(ratio, e);
      }
      z.push_back(acc);
    }
    return TorusPoint(std::move(z));
  }
};

inline Fibration semiample_fibration(const Fan& fan, const TDivisor& D) {
  if (D.coefficients.size() != fan.num_rays()) fail(ErrorKind::InvalidInput, "divisor has wrong length");
  if (!is_nef(fan, D)) fail(ErrorKind::NotNef, "divisor fails a wall inequality");
  const std::size_t n = fan.rank();
  const auto& a = D.coefficients;
  // Vertices m_sigma: <m, u_rho> = -a_rho on the rays of sigma.
  std::vector<Rat> lo(n), hi(n);
  bool first = true;
  for (const auto& cone : fan.cones()) {
    RatMatrix B(n, n);
    std::vector<Rat> rhs(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) B(j, i) = Rat(fan.ray(cone[j])[i]);
      rhs[j] = -a[cone[j]];
    }
    auto m = solve(B, rhs);
    for (std::size_t i = 0; i < n; ++i) {
      if (first || (*m)[i] < lo[i]) lo[i] = (*m)[i];
      if (first || (*m)[i] > hi[i]) hi[i] = (*m)[i];
    }
    first = false;
  }
  std::vector<long> blo(n), bhi(n);
  double candidates = 1;
  for (std::size_t i = 0; i < n; ++i) {
    Integer f, c;
    mpz_fdiv_q(f.get_mpz_t(), lo[i].get_num_mpz_t(), lo[i].get_den_mpz_t());
    mpz_cdiv_q(c.get_mpz_t(), hi[i].get_num_mpz_t(), hi[i].get_den_mpz_t());
    blo[i] = f.get_si();
    bhi[i] = c.get_si();
    candidates *= double(bhi[i] - blo[i] + 1);
  }
  if (candidates > 1e6) fail(ErrorKind::BoundTooLarge, "polytope bounding box too large");
  Fibration fib;
  fib.divisor = D;
  std::vector<long> m(blo);
  while (true) {
    bool inside = true;
    for (std::size_t r = 0; r < fan.num_rays() && inside; ++r) {
      Rat s = 0;
      for (std::size_t i = 0; i < n; ++i) s += Rat(fan.ray(r)[i] * m[i]);
      inside = s >= -a[r];
    }
    if (inside) fib.lattice_points.emplace_back(m.begin(), m.end());
    std::size_t i = n;
    while (i-- > 0) {
      if (m[i] < bhi[i]) {
        ++m[i];
        break;
      }
      m[i] = blo[i];
    }
    if (i == std::size_t(-1)) break;
  }
  if (fib.lattice_points.empty()) fail(ErrorKind::EmptyPolytope, "no lattice points in the polytope of D");
  std::sort(fib.lattice_points.begin(), fib.lattice_points.end());
  const std::size_t s = fib.lattice_points.size() - 1;
  if (s == 0) {
    fib.basis = IntMatrix(0, n);
    fib.point_coords = IntMatrix(1, 0);
    fib.basis_coords = IntMatrix(0, 0);
    return fib;
  }
  IntMatrix diffs(s, n);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < n; ++j) diffs(i, j) = fib.lattice_points[i + 1][j] - fib.lattice_points[0][j];
  auto hf = hermite_normal_form(diffs);
  const std::size_t d = hf.rank;
  fib.basis = IntMatrix(d, n);
  fib.basis_coords = IntMatrix(d, s);
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t j = 0; j < n; ++j) fib.basis(k, j) = hf.h(k, j);
    for (std::size_t i = 0; i < s; ++i) fib.basis_coords(k, i) = hf.transform(k, i);
  }
  // Coordinates of each m_i - m_0 in the basis.
  fib.point_coords = IntMatrix(s + 1, d);
  const RatMatrix BT = to_rat(fib.basis.transpose());
  for (std::size_t i = 1; i <= s; ++i) {
    std::vector<Rat> v(n);
    for (std::size_t j = 0; j < n; ++j) v[j] = Rat(diffs(i - 1, j));
    auto c = solve(BT, v);
    for (std::size_t k = 0; k < d; ++k) {
      if ((*c)[k].get_den() != 1) fail(ErrorKind::InvalidInput, "lattice basis does not span the polytope");
      fib.point_coords(i, k) = (*c)[k].get_num();
    }
  }
  return fib;
}

// ---------------------------------------------------------------------------
// Induced map on the base

/// The monomial map g with g(z)_k = prod_l z_l^{G_kl} on the base torus,
/// determined by phi^T b_k = sum_l G_kl b_l. Checks f^* D ~ lambda D first
/// and pi o f = g o pi exactly on `samples` random torus points afterwards.
inline MonomialMap induced_base_map(const ToricEndo& f, const Fibration& fib, const Integer& lambda,
                                    std::size_t samples = 100, std::uint64_t seed = 7) {
  const auto L = class_lattice(*f.fan);
  auto lhs = L.classes(pullback(f, fib.divisor));
  auto rhs = L.classes(fib.divisor);
  for (auto& c : rhs) c *= lambda;
  if (lhs != rhs) fail(ErrorKind::InvalidInput, "divisor is not an eigendivisor for this multiplier");
  const std::size_t d = fib.base_dim();
  if (d == 0) return MonomialMap{IntMatrix(0, 0)};
  const RatMatrix BT = to_rat(fib.basis.transpose());
  const RatMatrix phiT = to_rat(f.phi.transpose());
  IntMatrix G(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    std::vector<Rat> b(fib.basis.cols());
    for (std::size_t j = 0; j < b.size(); ++j) b[j] = Rat(fib.basis(k, j));
    auto c = solve(BT, phiT.apply(b));
    if (!c) fail(ErrorKind::ConjugacyFailure, "phi^T leaves the span of the polytope");
    for (std::size_t l = 0; l < d; ++l) {
      if ((*c)[l].get_den() != 1) fail(ErrorKind::ConjugacyFailure, "induced base map is not integral");
      G(k, l) = (*c)[l].get_num();
    }
  }
  MonomialMap g{G};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> num(1, 30);
  std::bernoulli_distribution neg;
  for (std::size_t t = 0; t < samples; ++t) {
    std::vector<Rat> c(f.fan->rank());
    for (auto& q : c) {
      q = Rat(num(rng) * (neg(rng) ? -1 : 1), num(rng));
      q.canonicalize();
    }
    State x = TorusPoint(c);
    ProjPoint left = fib.project(monomial_apply(f.phi, x.as<CompactTorusPoint>()));
    State z = fib.base_coordinates(fib.project(x));
    ProjPoint right = fib.base_point(monomial_apply(g.A, z.as<CompactTorusPoint>()));
    if (!(left == right))
      fail(ErrorKind::ConjugacyFailure, "pi(f(x)) != g(pi(x)) at x = " + state_to_string(x));
  }
  return g;
}

}  // namespace arithdyn
