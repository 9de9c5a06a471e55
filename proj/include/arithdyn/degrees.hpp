#pragma once

// Dynamical degrees as certified spectral radii of integer matrices, and
// arithmetic degrees estimated from orbit heights.

#include <Eigen/Dense>

#include <complex>
#include <numeric>

#include "arithdyn/self_maps.hpp"
#include "arithdyn/toric.hpp"

namespace arithdyn {

// ---------------------------------------------------------------------------
// Polynomials over Q, coefficients in ascending order.

using QPoly = std::vector<Rat>;

namespace poly {

inline void trim(QPoly& p) {
  while (!p.empty() && sgn(p.back()) == 0) p.pop_back();
}

inline long degree(const QPoly& p) { return static_cast<long>(p.size()) - 1; }

inline Rat eval(const QPoly& p, const Rat& x) {
  Rat acc = 0;
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
  return acc;
}

inline QPoly derivative(const QPoly& p) {
  QPoly d;
  for (std::size_t i = 1; i < p.size(); ++i) d.push_back(p[i] * static_cast<unsigned long>(i));
  trim(d);
  return d;
}

inline QPoly reflect(const QPoly& p) {
  QPoly q = p;
  for (std::size_t i = 1; i < q.size(); i += 2) q[i] = -q[i];
  return q;
}

inline QPoly monic(QPoly p) {
  trim(p);
  if (p.empty()) return p;
  Rat lead = p.back();
  for (auto& c : p) c /= lead;
  return p;
}

// Quotient and remainder of a by b (b nonzero).
inline std::pair<QPoly, QPoly> divmod(QPoly a, const QPoly& b) {
  trim(a);
  const long db = degree(b);
  QPoly q(std::max<long>(0, degree(a) - db + 1), Rat(0));
  while (degree(a) >= db && !a.empty()) {
    const long shift = degree(a) - db;
    Rat c = a.back() / b.back();
    q[shift] = c;
    for (long i = 0; i <= db; ++i) a[i + shift] -= c * b[i];
    a.pop_back();
    trim(a);
  }
  trim(q);
  return {q, a};
}

inline QPoly gcd(QPoly a, QPoly b) {
  trim(a);
  trim(b);
  while (!b.empty()) {
    auto r = divmod(a, b).second;
    a = std::move(b);
    b = std::move(r);
  }
  return monic(a);
}

/// Product of the distinct monic irreducible factors.
inline QPoly squarefree(const QPoly& p) {
  QPoly g = gcd(p, derivative(p));
  return monic(divmod(p, g).first);
}

inline std::vector<QPoly> sturm_sequence(const QPoly& p) {
  std::vector<QPoly> seq{p, derivative(p)};
  while (!seq.back().empty()) {
    auto r = divmod(seq[seq.size() - 2], seq.back()).second;
    if (r.empty()) break;
    for (auto& c : r) c = -c;
    seq.push_back(std::move(r));
  }
  if (seq.back().empty()) seq.pop_back();
  return seq;
}

/// Sign changes of the sequence at x, zeros dropped.
inline int variations(const std::vector<QPoly>& seq, const Rat& x) {
  int changes = 0, last = 0;
  for (const auto& p : seq) {
    int s = sgn(eval(p, x));
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

inline Rat cauchy_bound(const QPoly& p) {
  Rat m = 0;
  for (std::size_t i = 0; i + 1 < p.size(); ++i) m = std::max(m, Rat(abs(p[i] / p.back())));
  return m + 1;
}

inline std::string to_string(const QPoly& p, const std::string& var = "t") {
  std::string out;
  for (long i = degree(p); i >= 0; --i) {
    const Rat& c = p[i];
    if (sgn(c) == 0) continue;
    Rat a = abs(c);
    if (out.empty()) {
      if (sgn(c) < 0) out += "-";
    } else {
      out += sgn(c) < 0 ? " - " : " + ";
    }
    if (a != 1 || i == 0) out += a.get_str();
    if (i >= 1) out += var;
    if (i >= 2) out += "^" + std::to_string(i);
  }
  return out.empty() ? "0" : out;
}

}  // namespace poly

// ---------------------------------------------------------------------------
// Characteristic polynomials

struct CharPoly {
  std::vector<Integer> coefficients;  // ascending; coefficients.back() == 1

  std::size_t degree() const { return coefficients.size() - 1; }
  QPoly as_qpoly() const { return QPoly(coefficients.begin(), coefficients.end()); }
  std::string to_string() const { return poly::to_string(as_qpoly()); }
  friend bool operator==(const CharPoly&, const CharPoly&) = default;
};

/// det(t I - A) by Faddeev-LeVerrier; every division is exact over Z.
inline CharPoly char_poly(const IntMatrix& A) {
  if (!A.square()) fail(ErrorKind::InvalidInput, "characteristic polynomial of a non-square matrix");
  const std::size_t n = A.rows();
  if (n > 64) fail(ErrorKind::InvalidInput, "matrix larger than 64x64");
  std::vector<Integer> c(n + 1, Integer(0));
  c[n] = 1;
  IntMatrix M(n, n);
  for (std::size_t k = 1; k <= n; ++k) {
    IntMatrix AM = A * M;
    for (std::size_t i = 0; i < n; ++i) AM(i, i) += c[n - k + 1];
    M = std::move(AM);
    IntMatrix AMk = A * M;
    Integer tr = 0;
    for (std::size_t i = 0; i < n; ++i) tr += AMk(i, i);
    Integer q;
    mpz_divexact_ui(q.get_mpz_t(), tr.get_mpz_t(), k);
    c[n - k] = -q;
  }
  return {std::move(c)};
}

// ---------------------------------------------------------------------------
// Certified spectral radius

struct Interval {
  double lower = 0.0, upper = 0.0;

  double width() const { return upper - lower; }
  double midpoint() const { return 0.5 * (lower + upper); }
  bool contains(double x) const { return lower <= x && x <= upper; }
  bool exact() const { return lower == upper; }
};

/// [lo^n, hi^n] rounded outward, for nonnegative intervals.
inline Interval interval_pow(const Interval& x, unsigned n) {
  double lo = 1.0, hi = 1.0;
  for (unsigned i = 0; i < n; ++i) {
    lo *= x.lower;
    hi *= x.upper;
  }
  if (x.exact() && std::pow(x.lower, double(n)) == lo && lo < 9007199254740992.0) return {lo, hi};
  return {std::nextafter(lo, 0.0), std::nextafter(hi, INFINITY)};
}

struct SpectralRadius {
  Interval interval;
  bool exact = false;
  bool dominant_real = true;  // false when the radius came from a non-real pair
  std::string witness;
};

namespace detail {

inline double round_down(const Rat& q) {
  double d = q.get_d();
  while (Rat(d) > q) d = std::nextafter(d, -INFINITY);
  return d;
}

inline double round_up(const Rat& q) {
  double d = q.get_d();
  while (Rat(d) < q) d = std::nextafter(d, INFINITY);
  return d;
}

inline double sqrt_down(const Rat& q) {
  double d = std::sqrt(round_down(q));
  while (d > 0 && Rat(d) * Rat(d) > q) d = std::nextafter(d, 0.0);
  return d;
}

inline double sqrt_up(const Rat& q) {
  double d = std::sqrt(round_up(q));
  while (Rat(d) * Rat(d) < q) d = std::nextafter(d, INFINITY);
  return d;
}

// Largest positive root of a squarefree polynomial, kept in (lo, hi].
struct RootBracket {
  QPoly p;
  std::vector<QPoly> seq;
  Rat lo, hi;
  bool exact = false;
  std::size_t steps = 0;

  int count(const Rat& a, const Rat& b) const { return poly::variations(seq, a) - poly::variations(seq, b); }

  void bisect() {
    if (exact) return;
    Rat mid = (lo + hi) / 2;
    if (count(mid, hi) >= 1)
      lo = mid;
    else
      hi = mid;
    ++steps;
    if (sgn(poly::eval(p, hi)) == 0) {
      exact = true;
      lo = hi;
      return;
    }
    if (hi - lo < 1) {
      Integer k;
      mpz_fdiv_q(k.get_mpz_t(), hi.get_num_mpz_t(), hi.get_den_mpz_t());
      if (Rat(k) > lo && sgn(poly::eval(p, Rat(k))) == 0 && count(Rat(k), hi) == 0) {
        hi = lo = Rat(k);
        exact = true;
      }
    }
  }
};

inline std::optional<RootBracket> largest_positive_root(const QPoly& squarefree_p) {
  RootBracket b;
  b.p = squarefree_p;
  b.seq = poly::sturm_sequence(b.p);
  b.lo = 0;
  b.hi = poly::cauchy_bound(b.p);
  if (b.count(b.lo, b.hi) == 0) return std::nullopt;
  return b;
}

// Monic polynomial whose roots are lambda_i lambda_j (i <= j) over the roots
// lambda_i of p, built from Newton power sums.
inline QPoly pairwise_product_poly(const QPoly& p) {
  const std::size_t d = p.size() - 1;
  const std::size_t m = d * (d + 1) / 2;
  std::vector<Rat> s(2 * m + 1, Rat(0));
  for (std::size_t k = 1; k <= 2 * m; ++k) {
    Rat acc = 0;
    for (std::size_t i = 1; i <= std::min(k - 1, d); ++i) acc += p[d - i] * s[k - i];
    if (k <= d) acc += Rat(static_cast<unsigned long>(k)) * p[d - k];
    s[k] = -acc;
  }
  std::vector<Rat> S(m + 1, Rat(0));
  for (std::size_t k = 1; k <= m; ++k) S[k] = (s[k] * s[k] + s[2 * k]) / 2;
  std::vector<Rat> e(m + 1, Rat(0));
  e[0] = 1;
  for (std::size_t k = 1; k <= m; ++k) {
    Rat acc = 0;
    for (std::size_t i = 1; i <= k; ++i) acc += (i % 2 ? 1 : -1) * e[k - i] * S[i];
    e[k] = acc / static_cast<unsigned long>(k);
  }
  QPoly q(m + 1);
  for (std::size_t k = 0; k <= m; ++k) q[m - k] = (k % 2 ? -e[k] : e[k]);
  return q;
}

}  // namespace detail

inline constexpr std::size_t kMaxBisections = 400;

/// Encloses max |lambda| over the roots of p in an interval of width at most
/// `precision`. Real roots are isolated with Sturm sequences; when non-real
/// roots are present the radius squared is taken as the largest real root of
/// the pairwise-product polynomial. Integer radii are detected exactly.
inline SpectralRadius spectral_radius(const CharPoly& cp, double precision, std::size_t max_bisections = kMaxBisections) {
  if (!(precision > 0)) fail(ErrorKind::InvalidInput, "precision must be positive");
  QPoly p = cp.as_qpoly();
  std::size_t zeros = 0;
  while (p.size() > 1 && sgn(p[0]) == 0) {
    p.erase(p.begin());
    ++zeros;
  }
  SpectralRadius out;
  if (p.size() <= 1) {
    out.exact = true;
    out.witness = cp.to_string() + "; nilpotent";
    return out;
  }
  QPoly sf = poly::squarefree(p);
  const auto full = poly::sturm_sequence(sf);
  const Rat C = poly::cauchy_bound(sf);
  const int real_roots = poly::variations(full, -C) - poly::variations(full, C);
  const bool all_real = real_roots == poly::degree(sf);

  auto refine = [&](std::vector<detail::RootBracket*> bs, auto enclose) {
    std::size_t steps = 0;
    while (true) {
      Interval iv = enclose();
      if (iv.width() <= precision) return iv;
      if (steps++ >= max_bisections)
        fail(ErrorKind::PrecisionUnreachable, "spectral radius not enclosed to " + std::to_string(precision));
      for (auto* b : bs) b->bisect();
    }
  };

  if (all_real) {
    auto pos = detail::largest_positive_root(sf);
    auto neg = detail::largest_positive_root(poly::reflect(sf));
    std::vector<detail::RootBracket*> bs;
    if (pos) bs.push_back(&*pos);
    if (neg) bs.push_back(&*neg);
    if (bs.empty()) {
      // The only real root is 0 after stripping; cannot happen for p(0) != 0.
      fail(ErrorKind::InvalidInput, "no nonzero real root found");
    }
    out.interval = refine(bs, [&] {
      Rat lo = 0, hi = 0;
      for (auto* b : bs) {
        lo = std::max(lo, b->lo);
        hi = std::max(hi, b->hi);
      }
      return Interval{detail::round_down(lo), detail::round_up(hi)};
    });
    out.exact = out.interval.exact();
    out.dominant_real = true;
    out.witness = cp.to_string() + "; all roots real; largest modulus isolated by Sturm bisection";
  } else {
    QPoly q = poly::squarefree(detail::pairwise_product_poly(sf));
    auto r = detail::largest_positive_root(q);
    if (!r) fail(ErrorKind::InvalidInput, "pairwise-product polynomial has no positive root");
    out.interval = refine({&*r}, [&] {
      if (r->exact && sgn(r->hi.get_den() - 1) == 0 && mpz_perfect_square_p(r->hi.get_num_mpz_t())) {
        Integer root;
        mpz_sqrt(root.get_mpz_t(), r->hi.get_num_mpz_t());
        return Interval{root.get_d(), root.get_d()};
      }
      return Interval{detail::sqrt_down(r->lo), detail::sqrt_up(r->hi)};
    });
    out.exact = out.interval.exact();
    out.dominant_real = false;
    out.witness = cp.to_string() + "; " + std::to_string(poly::degree(sf) - real_roots) +
                  " non-real roots; radius squared isolated on the pairwise-product polynomial";
  }
  if (zeros) out.witness += "; zero root of multiplicity " + std::to_string(zeros);
  return out;
}

// ---------------------------------------------------------------------------
// Dynamical degree

enum class DegreeMethod { ExactDegree, SpectralRadius, ProductMax, ToricPullback };

constexpr std::string_view to_string(DegreeMethod m) {
  switch (m) {
    case DegreeMethod::ExactDegree: return "exact-degree";
    case DegreeMethod::SpectralRadius: return "spectral-radius";
    case DegreeMethod::ProductMax: return "product-max";
    case DegreeMethod::ToricPullback: return "toric-pullback";
  }
  return "?";
}

struct DegreeReport {
  double delta_lower = 1.0, delta_upper = 1.0;
  DegreeMethod method = DegreeMethod::ExactDegree;
  std::string witness;

  Interval interval() const { return {delta_lower, delta_upper}; }
  double midpoint() const { return 0.5 * (delta_lower + delta_upper); }
};

inline DegreeReport dynamical_degree(const SelfMap& f, double precision = 1e-9) {
  return std::visit(
      [&](const auto& g) -> DegreeReport {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ProjectiveMorphism>) {
          const double d = g.degree;
          return {d, d, DegreeMethod::ExactDegree, "f^* H = " + std::to_string(g.degree) + " H on N^1(P^" + std::to_string(g.N) + ")"};
        } else if constexpr (std::is_same_v<T, MonomialMap>) {
          auto r = spectral_radius(char_poly(g.A), precision);
          return {r.interval.lower, r.interval.upper, DegreeMethod::SpectralRadius, r.witness};
        } else if constexpr (std::is_same_v<T, ToricEndo>) {
          auto P = pullback_matrix(g);
          auto r = spectral_radius(char_poly(P), precision);
          return {r.interval.lower, r.interval.upper, DegreeMethod::ToricPullback, "pullback " + P.to_string() + "; " + r.witness};
        } else if constexpr (std::is_same_v<T, LinearUnipotentMap>) {
          return {1.0, 1.0, DegreeMethod::ExactDegree, "linear automorphism; f^* H = H"};
        } else {
          DegreeReport out{0.0, 0.0, DegreeMethod::ProductMax, "max of"};
          for (std::size_t i = 0; i < g.components.size(); ++i) {
            auto c = dynamical_degree(g.components[i], precision);
            out.delta_lower = std::max(out.delta_lower, c.delta_lower);
            out.delta_upper = std::max(out.delta_upper, c.delta_upper);
            out.witness += (i ? ", [" : " [") + c.witness + "]";
          }
          return out;
        }
      },
      f.value);
}

/// Moduli of the eigenvalues of f^*, in floating point.
inline std::vector<double> spectrum_moduli(const SelfMap& f) {
  auto moduli_of = [](const IntMatrix& A) {
    Eigen::MatrixXd M(A.rows(), A.cols());
    for (std::size_t i = 0; i < A.rows(); ++i)
      for (std::size_t j = 0; j < A.cols(); ++j) M(i, j) = A(i, j).get_d();
    Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
    std::vector<double> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(std::abs(es.eigenvalues()[i]));
    return out;
  };
  std::vector<double> out = std::visit(
      [&](const auto& g) -> std::vector<double> {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ProjectiveMorphism>) {
          return {double(g.degree)};
        } else if constexpr (std::is_same_v<T, MonomialMap>) {
          return moduli_of(g.A);
        } else if constexpr (std::is_same_v<T, ToricEndo>) {
          return moduli_of(pullback_matrix(g));
        } else if constexpr (std::is_same_v<T, LinearUnipotentMap>) {
          return {1.0};
        } else {
          std::vector<double> all;
          for (const auto& c : g.components) {
            auto s = spectrum_moduli(c);
            all.insert(all.end(), s.begin(), s.end());
          }
          return all;
        }
      },
      f.value);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::fabs(a - b) < 1e-12; }), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// Arithmetic degree

struct AlphaEstimate {
  std::vector<double> root_sequence;   // entry n-1 is max(1, h_n)^(1/n), n >= 1
  std::vector<double> ratio_sequence;  // entry n is max(1, h_{n+1}) / max(1, h_n)
  std::optional<double> point_value;   // empty when the ratios have not settled
  bool converged = false;
  std::optional<std::size_t> converged_at;  // first iterate closing a settled window
  std::size_t window = 5;
  double tolerance = 1e-3;
  bool truncated = false;
};

inline AlphaEstimate arithmetic_degree(const OrbitTrace& t, double tolerance = 1e-3, std::size_t window = 5) {
  if (window < 1) fail(ErrorKind::InvalidInput, "window must be positive");
  if (t.heights.size() < window + 2)
    fail(ErrorKind::InsufficientTrace, "trace of length " + std::to_string(t.heights.size()) + " needs at least " +
                                           std::to_string(window + 2) + " points");
  AlphaEstimate a;
  a.window = window;
  a.tolerance = tolerance;
  a.truncated = t.truncated;
  const auto& h = t.heights;
  for (std::size_t n = 1; n < h.size(); ++n) a.root_sequence.push_back(std::pow(std::max(1.0, h[n]), 1.0 / double(n)));
  for (std::size_t n = 0; n + 1 < h.size(); ++n) a.ratio_sequence.push_back(std::max(1.0, h[n + 1]) / std::max(1.0, h[n]));
  auto settled = [&](std::size_t end) {
    auto [lo, hi] = std::minmax_element(a.ratio_sequence.begin() + (end - window), a.ratio_sequence.begin() + end);
    return *hi - *lo <= tolerance;
  };
  const std::size_t R = a.ratio_sequence.size();
  for (std::size_t end = window; end <= R; ++end)
    if (settled(end)) {
      a.converged_at = end;
      break;
    }
  a.converged = settled(R);
  if (a.converged) {
    double s = 0.0;
    for (std::size_t i = R - window; i < R; ++i) s += a.ratio_sequence[i];
    a.point_value = s / double(window);
  }
  return a;
}

struct EigenMatch {
  double nearest = 0.0;
  double gap = 0.0;
  bool violation = false;
  bool within_delta = true;  // point_value <= delta_upper + tolerance
};

/// Nearest admissible growth rate to the estimate. The trivial rate 1 (the
/// orbits of height-bounded points) is always admissible.
inline EigenMatch eigenvalue_match(const AlphaEstimate& alpha, const DegreeReport& report,
                                   const std::vector<double>& spectrum) {
  if (!alpha.converged || !alpha.point_value) fail(ErrorKind::InvalidInput, "arithmetic degree did not converge");
  const double v = *alpha.point_value;
  EigenMatch m;
  m.nearest = 1.0;
  m.gap = std::fabs(v - 1.0);
  for (double s : spectrum)
    if (std::fabs(v - s) < m.gap) {
      m.gap = std::fabs(v - s);
      m.nearest = s;
    }
  m.violation = m.gap > 10 * alpha.tolerance;
  m.within_delta = v <= report.delta_upper + alpha.tolerance;
  return m;
}

// ---------------------------------------------------------------------------
// Orbit density heuristic for monomial maps

enum class DensityHeuristic { DenseHeuristic, Inconclusive };

constexpr std::string_view to_string(DensityHeuristic d) {
  return d == DensityHeuristic::DenseHeuristic ? "dense-heuristic" : "inconclusive";
}

/// For every character chi_m with 0 < |m|_inf <= 3, the values chi_m(f^k x)
/// for k = 0..steps must be neither constant nor periodic with period <= 6.
/// Exponent vectors over the prime support of x evolve linearly under A, so
/// no orbit point is ever factored.
inline DensityHeuristic density_heuristic(const IntMatrix& A, const TorusPoint& x, std::size_t steps = 12,
                                          const FactorBudget& budget = {}) {
  const std::size_t n = A.rows();
  if (x.rank() != n) fail(ErrorKind::DomainViolation, "rank mismatch");
  PrimeSupport ps;
  try {
    ps = prime_support(x, budget);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::FactorizationBudgetExceeded) return DensityHeuristic::Inconclusive;
    throw;
  }
  const std::size_t P = ps.primes.size();
  // E[k]: n x P exponents of f^k(x); S[k]: sign parities.
  std::vector<IntMatrix> E;
  std::vector<std::vector<long>> S;
  IntMatrix e0(n, P);
  std::vector<long> s0(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = 0; p < P; ++p) e0(i, p) = ps.exponents[i][p];
    s0[i] = ps.signs[i] < 0 ? 1 : 0;
  }
  E.push_back(e0);
  S.push_back(s0);
  for (std::size_t k = 1; k <= steps; ++k) {
    E.push_back(A * E.back());
    std::vector<long> s(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      long acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += (A(i, j).get_si() & 1) * S.back()[j];
      s[i] = acc & 1;
    }
    S.push_back(s);
  }
  std::vector<long> m(n, -3);
  while (true) {
    if (std::any_of(m.begin(), m.end(), [](long v) { return v != 0; })) {
      std::vector<std::pair<std::vector<Integer>, long>> vals;
      for (std::size_t k = 0; k <= steps; ++k) {
        std::vector<Integer> ex(P, Integer(0));
        long sign = 0;
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t p = 0; p < P; ++p) ex[p] += m[i] * E[k](i, p);
          sign += (m[i] & 1) * S[k][i];
        }
        vals.emplace_back(std::move(ex), sign & 1);
      }
      for (std::size_t period = 1; period <= 6 && period <= steps; ++period) {
        bool periodic = true;
        for (std::size_t k = 0; k + period <= steps && periodic; ++k) periodic = vals[k] == vals[k + period];
        if (periodic) return DensityHeuristic::Inconclusive;
      }
    }
    std::size_t i = n;
    while (i-- > 0) {
      if (m[i] < 3) {
        ++m[i];
        break;
      }
      m[i] = -3;
    }
    if (i == std::size_t(-1)) break;
  }
  return DensityHeuristic::DenseHeuristic;
}

}  // namespace arithdyn
