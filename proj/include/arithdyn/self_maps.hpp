#pragma once

// The self-map families: morphisms of P^N given by homogeneous forms,
// monomial maps of the torus, linear maps of affine space, toric
// endomorphisms, and products of these. Evaluation is exact.

#include <map>
#include <variant>

#include "arithdyn/fan.hpp"
#include "arithdyn/linalg.hpp"

namespace arithdyn {

// ---------------------------------------------------------------------------
// States

struct AffinePoint {
  std::vector<Rat> coords;
  friend bool operator==(const AffinePoint&, const AffinePoint&) = default;
};

struct State;

struct ProductState {
  std::vector<State> parts;
};

struct State {
  std::variant<ProjPoint, CompactTorusPoint, AffinePoint, ProductState> value;

  State() = default;
  State(ProjPoint p) : value(std::move(p)) {}
  State(CompactTorusPoint p) : value(std::move(p)) {}
  State(const TorusPoint& p) : value(CompactTorusPoint(p)) {}
  State(AffinePoint p) : value(std::move(p)) {}
  State(ProductState p) : value(std::move(p)) {}

  template <class T>
  const T& as() const {
    if (auto* p = std::get_if<T>(&value)) return *p;
    fail(ErrorKind::DomainViolation, "state has the wrong shape for this map");
  }
};

inline bool operator==(const ProductState& a, const ProductState& b);
inline bool operator==(const State& a, const State& b) { return a.value == b.value; }
inline bool operator==(const ProductState& a, const ProductState& b) { return a.parts == b.parts; }

inline std::size_t state_bits(const State& s) {
  return std::visit(
      [](const auto& v) -> std::size_t {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, AffinePoint>) {
          std::size_t b = 0;
          for (const auto& c : v.coords) b += bit_size(c);
          return b;
        } else if constexpr (std::is_same_v<T, ProductState>) {
          std::size_t b = 0;
          for (const auto& p : v.parts) b += state_bits(p);
          return b;
        } else {
          return v.bits();
        }
      },
      s.value);
}

inline std::string state_to_string(const State& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ProjPoint>) {
          return v.to_string();
        } else if constexpr (std::is_same_v<T, CompactTorusPoint>) {
          std::string out = "(";
          for (std::size_t i = 0; i < v.rank(); ++i) {
            if (i) out += ", ";
            auto c = v.coordinate(i);
            out += c ? c->get_str() : (sgn(v[i][0]) == 0 ? "inf" : "0");
          }
          return out + ")";
        } else if constexpr (std::is_same_v<T, AffinePoint>) {
          std::string out = "(";
          for (std::size_t i = 0; i < v.coords.size(); ++i) out += (i ? ", " : "") + v.coords[i].get_str();
          return out + ")";
        } else {
          std::string out = "[";
          for (std::size_t i = 0; i < v.parts.size(); ++i) out += (i ? ", " : "") + state_to_string(v.parts[i]);
          return out + "]";
        }
      },
      s.value);
}

// ---------------------------------------------------------------------------
// Sparse homogeneous polynomials

using Exponent = std::vector<unsigned>;

/// Sparse polynomial as exponent -> nonzero coefficient.
using SparsePoly = std::map<Exponent, Rat>;

inline SparsePoly poly_mul(const SparsePoly& a, const SparsePoly& b) {
  SparsePoly out;
  for (const auto& [ea, ca] : a)
    for (const auto& [eb, cb] : b) {
      Exponent e(ea.size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      out[e] += ca * cb;
    }
  std::erase_if(out, [](const auto& kv) { return sgn(kv.second) == 0; });
  return out;
}

inline void poly_add_scaled(SparsePoly& acc, const SparsePoly& p, const Rat& s) {
  for (const auto& [e, c] : p) {
    Rat& slot = acc[e];
    slot += s * c;
    if (sgn(slot) == 0) acc.erase(e);
  }
}

// ---------------------------------------------------------------------------
// Map families

struct ProjectiveMorphism {
  std::size_t N = 0;
  unsigned degree = 1;
  std::vector<SparsePoly> polys;  // integer coefficients with overall content 1
};

struct MonomialMap {
  IntMatrix A;
};

struct LinearUnipotentMap {
  RatMatrix L;
};

struct SelfMap;

struct ProductMap {
  std::vector<SelfMap> components;
};

struct SelfMap {
  std::variant<ProjectiveMorphism, MonomialMap, LinearUnipotentMap, ProductMap, ToricEndo> value;

  SelfMap() = default;
  SelfMap(ProjectiveMorphism f) : value(std::move(f)) {}
  SelfMap(MonomialMap f) : value(std::move(f)) {}
  SelfMap(LinearUnipotentMap f) : value(std::move(f)) {}
  SelfMap(ProductMap f) : value(std::move(f)) {}
  SelfMap(ToricEndo f) : value(std::move(f)) {}

  template <class T>
  const T* get_if() const { return std::get_if<T>(&value); }
};

/// Validates homogeneity and rescales to coprime integer coefficients.
inline ProjectiveMorphism make_projective_morphism(std::size_t N, std::vector<SparsePoly> polys) {
  if (polys.size() != N + 1) fail(ErrorKind::InvalidInput, "need N+1 polynomials");
  std::optional<unsigned> degree;
  Integer den = 1, content = 0;
  for (auto& p : polys) {
    std::erase_if(p, [](const auto& kv) { return sgn(kv.second) == 0; });
    if (p.empty()) fail(ErrorKind::InvalidInput, "zero polynomial");
    for (const auto& [e, c] : p) {
      if (e.size() != N + 1) fail(ErrorKind::InvalidInput, "exponent vector has wrong length");
      unsigned d = 0;
      for (auto k : e) d += k;
      if (degree && *degree != d) fail(ErrorKind::InvalidInput, "polynomials are not homogeneous of one degree");
      degree = d;
      den = lcm(den, Integer(c.get_den()));
    }
  }
  if (*degree == 0) fail(ErrorKind::InvalidInput, "degree must be at least 1");
  for (auto& p : polys)
    for (auto& [e, c] : p) {
      c *= den;
      content = gcd(content, Integer(c.get_num()));
    }
  for (auto& p : polys)
    for (auto& [e, c] : p) {
      c /= content;
      c.canonicalize();
    }
  return {N, *degree, std::move(polys)};
}

inline ProjectiveMorphism identity_projective(std::size_t N) {
  std::vector<SparsePoly> polys(N + 1);
  for (std::size_t i = 0; i <= N; ++i) {
    Exponent e(N + 1, 0);
    e[i] = 1;
    polys[i][e] = 1;
  }
  return make_projective_morphism(N, std::move(polys));
}

/// (x_0^d : ... : x_N^d)
inline ProjectiveMorphism power_map(std::size_t N, unsigned d) {
  std::vector<SparsePoly> polys(N + 1);
  for (std::size_t i = 0; i <= N; ++i) {
    Exponent e(N + 1, 0);
    e[i] = d;
    polys[i][e] = 1;
  }
  return make_projective_morphism(N, std::move(polys));
}

inline MonomialMap make_monomial_map(IntMatrix A) {
  if (!A.square() || A.rows() == 0) fail(ErrorKind::InvalidInput, "monomial matrix must be square");
  if (determinant(A) == 0) fail(ErrorKind::InvalidInput, "monomial matrix is singular");
  return {std::move(A)};
}

inline LinearUnipotentMap make_linear_map(RatMatrix L) {
  if (!L.square() || L.rows() == 0) fail(ErrorKind::InvalidInput, "linear map must be square");
  if (determinant(L) == 0) fail(ErrorKind::InvalidInput, "linear map is singular");
  return {std::move(L)};
}

// ---------------------------------------------------------------------------
// Evaluation

/// Applies the monomial matrix rows to a point of (P^1)^n. Rows with a
/// single exponent sign extend to 0 and infinity; rows mixing signs require
/// every involved coordinate to lie in the torus.
inline CompactTorusPoint monomial_apply(const IntMatrix& A, const CompactTorusPoint& x) {
  if (A.cols() != x.rank()) fail(ErrorKind::DomainViolation, "point rank does not match map");
  std::vector<ProjPoint> out;
  out.reserve(A.rows());
  for (std::size_t i = 0; i < A.rows(); ++i) {
    bool pos = false, neg = false;
    for (std::size_t j = 0; j < A.cols(); ++j) {
      pos |= sgn(A(i, j)) > 0;
      neg |= sgn(A(i, j)) < 0;
    }
    Integer num = 1, den = 1;
    for (std::size_t j = 0; j < A.cols(); ++j) {
      const long a = A(i, j).get_si();
      if (a == 0) continue;
      const Integer& u = x[j][0];
      const Integer& v = x[j][1];
      if (pos && neg && (sgn(u) == 0 || sgn(v) == 0))
        fail(ErrorKind::DomainViolation, "boundary point under a mixed-sign monomial");
      const unsigned long k = static_cast<unsigned long>(a > 0 ? a : -a);
      if (a > 0) {
        num *= pow_int(v, k);
        den *= pow_int(u, k);
      } else {
        num *= pow_int(u, k);
        den *= pow_int(v, k);
      }
    }
    if (sgn(num) == 0 && sgn(den) == 0) fail(ErrorKind::DomainViolation, "monomial undefined at boundary point");
    out.push_back(normalize_integers({den, num}));
  }
  return CompactTorusPoint(std::move(out));
}

inline Integer eval_poly(const SparsePoly& p, const std::vector<Integer>& x) {
  Integer acc = 0;
  for (const auto& [e, c] : p) {
    Integer t = c.get_num();
    for (std::size_t j = 0; j < e.size(); ++j)
      if (e[j]) t *= pow_int(x[j], e[j]);
    acc += t;
  }
  return acc;
}

State evaluate(const SelfMap& f, const State& x);

namespace detail {

inline State evaluate_projective(const ProjectiveMorphism& f, const ProjPoint& x) {
  if (x.dimension() != f.N) fail(ErrorKind::DomainViolation, "point dimension does not match map");
  std::vector<Integer> img;
  img.reserve(f.N + 1);
  for (const auto& p : f.polys) img.push_back(eval_poly(p, x.coords()));
  try {
    return normalize_integers(std::move(img));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::AllZero) throw;
    fail(ErrorKind::DegenerateImage, "all forms vanish at " + x.to_string());
  }
}

inline State evaluate_linear(const LinearUnipotentMap& f, const AffinePoint& x) {
  if (x.coords.size() != f.L.cols()) fail(ErrorKind::DomainViolation, "point dimension does not match map");
  return AffinePoint{f.L.apply(x.coords)};
}

}  // namespace detail

inline State evaluate(const SelfMap& f, const State& x) {
  return std::visit(
      [&](const auto& g) -> State {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ProjectiveMorphism>) {
          return detail::evaluate_projective(g, x.as<ProjPoint>());
        } else if constexpr (std::is_same_v<T, MonomialMap>) {
          return monomial_apply(g.A, x.as<CompactTorusPoint>());
        } else if constexpr (std::is_same_v<T, ToricEndo>) {
          return monomial_apply(g.phi, x.as<CompactTorusPoint>());
        } else if constexpr (std::is_same_v<T, LinearUnipotentMap>) {
          return detail::evaluate_linear(g, x.as<AffinePoint>());
        } else {
          const auto& parts = x.as<ProductState>().parts;
          if (parts.size() != g.components.size())
            fail(ErrorKind::DomainViolation, "product state has wrong number of parts");
          ProductState out;
          for (std::size_t i = 0; i < parts.size(); ++i) out.parts.push_back(evaluate(g.components[i], parts[i]));
          return out;
        }
      },
      f.value);
}

/// The height each family is measured in: Weil height on P^N, the
/// (P^1)^n height on tori, the height of (1 : x) for affine points, and the
/// maximum over the factors of a product.
inline double state_height(const State& x) {
  return std::visit(
      [](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ProjPoint>) {
          return weil_height(v);
        } else if constexpr (std::is_same_v<T, CompactTorusPoint>) {
          return torus_height(v);
        } else if constexpr (std::is_same_v<T, AffinePoint>) {
          std::vector<Rat> h{Rat(1)};
          h.insert(h.end(), v.coords.begin(), v.coords.end());
          return weil_height(normalize(h));
        } else {
          double m = 0.0;
          for (const auto& p : v.parts) m = std::max(m, state_height(p));
          return m;
        }
      },
      x.value);
}

/// Throws DomainViolation unless x is a valid state for f.
inline void check_domain(const SelfMap& f, const State& x) {
  std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ProjectiveMorphism>) {
          if (x.as<ProjPoint>().dimension() != g.N) fail(ErrorKind::DomainViolation, "dimension mismatch");
        } else if constexpr (std::is_same_v<T, MonomialMap>) {
          if (x.as<CompactTorusPoint>().rank() != g.A.rows()) fail(ErrorKind::DomainViolation, "rank mismatch");
        } else if constexpr (std::is_same_v<T, ToricEndo>) {
          if (x.as<CompactTorusPoint>().rank() != g.phi.rows()) fail(ErrorKind::DomainViolation, "rank mismatch");
        } else if constexpr (std::is_same_v<T, LinearUnipotentMap>) {
          if (x.as<AffinePoint>().coords.size() != g.L.rows()) fail(ErrorKind::DomainViolation, "dimension mismatch");
        } else {
          const auto& parts = x.as<ProductState>().parts;
          if (parts.size() != g.components.size()) fail(ErrorKind::DomainViolation, "part count mismatch");
          for (std::size_t i = 0; i < parts.size(); ++i) check_domain(g.components[i], parts[i]);
        }
      },
      f.value);
}

// ---------------------------------------------------------------------------
// Orbits

struct OrbitTrace {
  std::vector<State> points;
  std::vector<double> heights;
  std::vector<std::size_t> bit_sizes;
  bool truncated = false;

  std::size_t iterates() const { return points.empty() ? 0 : points.size() - 1; }
};

inline constexpr std::size_t kDefaultBitBudget = 10'000'000;

inline OrbitTrace iterate_orbit(const SelfMap& f, const State& x, std::size_t max_iters,
                                std::size_t bit_budget = kDefaultBitBudget) {
  if (max_iters < 1) fail(ErrorKind::InvalidInput, "max_iters must be >= 1");
  check_domain(f, x);
  OrbitTrace t;
  std::size_t total = state_bits(x);
  t.points.push_back(x);
  t.heights.push_back(state_height(x));
  t.bit_sizes.push_back(total);
  for (std::size_t k = 1; k <= max_iters; ++k) {
    State y;
    try {
      y = evaluate(f, t.points.back());
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(e.what()) + " (at iterate " + std::to_string(k) + ")");
    }
    const std::size_t b = state_bits(y);
    if (total + b > bit_budget) {
      t.truncated = true;
      break;
    }
    total += b;
    t.heights.push_back(state_height(y));
    t.bit_sizes.push_back(b);
    t.points.push_back(std::move(y));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Iterates

struct ComposeLimits {
  unsigned max_degree = 4096;
  std::size_t max_terms = 200'000;
};

namespace detail {

inline ProjectiveMorphism compose_projective(const ProjectiveMorphism& f, const ProjectiveMorphism& g,
                                             const ComposeLimits& lim) {
  // f o g: substitute g's forms into f.
  const unsigned long deg = static_cast<unsigned long>(f.degree) * g.degree;
  if (deg > lim.max_degree) fail(ErrorKind::DegreeOverflow, "degree " + std::to_string(deg) + " exceeds cap");
  std::vector<std::vector<SparsePoly>> powers(g.N + 1);  // powers[j][k] = g_j^k
  auto power = [&](std::size_t j, unsigned k) -> const SparsePoly& {
    auto& cache = powers[j];
    if (cache.empty()) cache.push_back(SparsePoly{{Exponent(g.N + 1, 0), Rat(1)}});
    while (cache.size() <= k) {
      cache.push_back(poly_mul(cache.back(), g.polys[j]));
      if (cache.back().size() > lim.max_terms) fail(ErrorKind::DegreeOverflow, "term count exceeds cap");
    }
    return cache[k];
  };
  std::vector<SparsePoly> out;
  for (const auto& fi : f.polys) {
    SparsePoly acc;
    for (const auto& [e, c] : fi) {
      SparsePoly term{{Exponent(g.N + 1, 0), Rat(1)}};
      for (std::size_t j = 0; j < e.size(); ++j)
        if (e[j]) term = poly_mul(term, power(j, e[j]));
      poly_add_scaled(acc, term, c);
      if (acc.size() > lim.max_terms) fail(ErrorKind::DegreeOverflow, "term count exceeds cap");
    }
    out.push_back(std::move(acc));
  }
  for (const auto& p : out)
    if (p.empty()) fail(ErrorKind::DegenerateImage, "composition produced a zero form");
  return make_projective_morphism(f.N, std::move(out));
}

}  // namespace detail

inline SelfMap compose_power(const SelfMap& f, unsigned n, const ComposeLimits& lim = {}) {
  if (n < 1) fail(ErrorKind::InvalidInput, "power must be >= 1");
  return std::visit(
      [&](const auto& g) -> SelfMap {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ProjectiveMorphism>) {
          unsigned long deg = 1;
          for (unsigned i = 0; i < n; ++i) {
            deg *= g.degree;
            if (deg > lim.max_degree) fail(ErrorKind::DegreeOverflow, "degree d^n exceeds cap");
          }
          ProjectiveMorphism acc = g;
          for (unsigned i = 1; i < n; ++i) acc = detail::compose_projective(g, acc, lim);
          return acc;
        } else if constexpr (std::is_same_v<T, MonomialMap>) {
          return MonomialMap{matrix_power(g.A, n)};
        } else if constexpr (std::is_same_v<T, ToricEndo>) {
          return make_toric_endo(g.fan, matrix_power(g.phi, n));
        } else if constexpr (std::is_same_v<T, LinearUnipotentMap>) {
          return LinearUnipotentMap{matrix_power(g.L, n)};
        } else {
          ProductMap p;
          for (const auto& c : g.components) p.components.push_back(compose_power(c, n, lim));
          return p;
        }
      },
      f.value);
}

// ---------------------------------------------------------------------------
// Morphism certificates

enum class CertificateStatus { Certified, HeuristicPass, Fail };

constexpr std::string_view to_string(CertificateStatus s) {
  switch (s) {
    case CertificateStatus::Certified: return "Certified";
    case CertificateStatus::HeuristicPass: return "HeuristicPass";
    case CertificateStatus::Fail: return "Fail";
  }
  return "?";
}

struct MorphismCertificate {
  CertificateStatus status;
  std::optional<Integer> resultant;   // N = 1 only
  std::optional<ProjPoint> witness;   // a common zero when one was found
  std::string method;
};

/// Coefficient of x^{d-k} y^k in a binary form.
inline std::vector<Integer> binary_coefficients(const SparsePoly& p, unsigned d) {
  std::vector<Integer> c(d + 1, Integer(0));
  for (const auto& [e, q] : p) c[e[1]] = q.get_num();
  return c;
}

inline Integer binary_resultant(const SparsePoly& f, const SparsePoly& g, unsigned d) {
  auto a = binary_coefficients(f, d), b = binary_coefficients(g, d);
  IntMatrix s(2 * d, 2 * d);
  for (unsigned r = 0; r < d; ++r)
    for (unsigned k = 0; k <= d; ++k) {
      s(r, r + k) = a[k];
      s(d + r, r + k) = b[k];
    }
  return determinant(s);
}

inline MorphismCertificate check_morphism(const ProjectiveMorphism& f, double search_bound = std::log(3.0),
                                          std::size_t random_points = 200, std::uint64_t seed = 1) {
  auto find_zero = [&](const ProjPoint& p) {
    return std::all_of(f.polys.begin(), f.polys.end(), [&](const SparsePoly& q) { return eval_poly(q, p.coords()) == 0; });
  };
  auto search = [&]() -> std::optional<ProjPoint> {
    for (const auto& p : enumerate_points(f.N, search_bound))
      if (find_zero(p)) return p;
    return std::nullopt;
  };
  if (f.N == 0) return {CertificateStatus::Certified, std::nullopt, std::nullopt, "P^0"};
  if (f.N == 1) {
    Integer res = binary_resultant(f.polys[0], f.polys[1], f.degree);
    if (res != 0) return {CertificateStatus::Certified, res, std::nullopt, "resultant"};
    return {CertificateStatus::Fail, res, search(), "resultant"};
  }
  if (auto w = search()) return {CertificateStatus::Fail, std::nullopt, w, "point search"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<long> dist(-1'000'000, 1'000'000);
  for (std::size_t i = 0; i < random_points; ++i) {
    std::vector<Integer> c(f.N + 1);
    for (auto& v : c) v = dist(rng);
    try {
      auto p = normalize_integers(c);
      if (find_zero(p)) return {CertificateStatus::Fail, std::nullopt, p, "random points"};
    } catch (const Error&) {
    }
  }
  return {CertificateStatus::HeuristicPass, std::nullopt, std::nullopt,
          "heuristic: small-height and random point search"};
}

// ---------------------------------------------------------------------------
// Height growth bounds

/// log(max number of terms * max |coefficient|) for the integer forms; then
/// h(f(x)) <= d h(x) + constant.
inline double height_upper_constant(const ProjectiveMorphism& f) {
  std::size_t terms = 0;
  Integer maxc = 1;
  for (const auto& p : f.polys) {
    terms = std::max(terms, p.size());
    for (const auto& [e, c] : p) maxc = std::max(maxc, Integer(abs(c.get_num())));
  }
  return log_abs(Integer(Integer(static_cast<unsigned long>(terms)) * maxc));
}

/// sum_i sum_j |A_ij| h(x_j): upper bound for the torus height of A(x).
inline double monomial_height_bound(const IntMatrix& A, const CompactTorusPoint& x) {
  double b = 0.0;
  for (std::size_t i = 0; i < A.rows(); ++i)
    for (std::size_t j = 0; j < A.cols(); ++j)
      b += std::fabs(A(i, j).get_d()) * weil_height(x[j]);
  return b;
}

}  // namespace arithdyn
