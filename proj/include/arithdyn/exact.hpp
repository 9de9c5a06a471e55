#pragma once

// Exact rational arithmetic over Q: canonical projective points, Weil heights
// (direct and place-by-place), torus heights, factorization and
// bounded-height enumeration.

#include <gmpxx.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arithdyn/error.hpp"

namespace arithdyn {

using Integer = mpz_class;
using Rat = mpq_class;

// ---------------------------------------------------------------------------
// Scalars

/// Natural log of |z| for z != 0. Mantissa is taken in [1, 2) so that exact
/// powers of two come out as k * ln 2 with a single rounding.
inline double log_abs(const Integer& z) {
  if (sgn(z) == 0) fail(ErrorKind::DomainViolation, "log of zero");
  long exp2 = 0;
  double mant = std::fabs(mpz_get_d_2exp(&exp2, z.get_mpz_t()));
  mant *= 2.0;
  exp2 -= 1;
  return std::log(mant) + static_cast<double>(exp2) * std::numbers::ln2;
}

inline double log_abs(const Rat& q) {
  return log_abs(Integer(q.get_num())) - log_abs(Integer(q.get_den()));
}

inline std::size_t bit_size(const Integer& z) {
  return sgn(z) == 0 ? 1 : mpz_sizeinbase(z.get_mpz_t(), 2);
}

inline std::size_t bit_size(const Rat& q) {
  return bit_size(Integer(q.get_num())) + bit_size(Integer(q.get_den()));
}

inline Rat parse_rat(const std::string& s) {
  Rat q;
  if (s.empty() || q.set_str(s, 10) != 0) fail(ErrorKind::InvalidInput, "not a rational: '" + s + "'");
  if (sgn(q.get_den()) == 0) fail(ErrorKind::InvalidInput, "zero denominator: '" + s + "'");
  q.canonicalize();
  return q;
}

inline Integer parse_integer(const std::string& s) {
  Integer z;
  if (s.empty() || z.set_str(s, 10) != 0) fail(ErrorKind::InvalidInput, "not an integer: '" + s + "'");
  return z;
}

inline Integer pow_int(const Integer& base, unsigned long e) {
  Integer r;
  mpz_pow_ui(r.get_mpz_t(), base.get_mpz_t(), e);
  return r;
}

inline Rat pow_rat(const Rat& base, long e) {
  Rat b = base;
  if (e < 0) {
    if (sgn(b) == 0) fail(ErrorKind::DomainViolation, "negative power of zero");
    b = 1 / b;
    e = -e;
  }
  Rat r(pow_int(b.get_num(), static_cast<unsigned long>(e)),
        pow_int(b.get_den(), static_cast<unsigned long>(e)));
  r.canonicalize();
  return r;
}

// ---------------------------------------------------------------------------
// Projective points

/// A point of P^N(Q) in canonical form: coprime integer coordinates, not all
/// zero, first nonzero coordinate positive. Equal points compare equal.
class ProjPoint {
 public:
  ProjPoint() = default;

  /// Accepts coordinates that are already canonical; throws otherwise.
  static ProjPoint from_canonical(std::vector<Integer> coords) {
    ProjPoint p;
    p.coords_ = std::move(coords);
    if (!p.is_canonical()) fail(ErrorKind::InvalidInput, "coordinates are not canonical");
    return p;
  }

  std::size_t dimension() const { return coords_.size() - 1; }
  const std::vector<Integer>& coords() const { return coords_; }
  const Integer& operator[](std::size_t i) const { return coords_[i]; }

  bool is_canonical() const {
    if (coords_.empty()) return false;
    Integer g = 0;
    const Integer* first = nullptr;
    for (const auto& c : coords_) {
      if (sgn(c) != 0 && first == nullptr) first = &c;
      g = gcd(g, c);
    }
    return first != nullptr && sgn(*first) > 0 && g == 1;
  }

  std::size_t bits() const {
    std::size_t b = 0;
    for (const auto& c : coords_) b += bit_size(c);
    return b;
  }

  friend bool operator==(const ProjPoint& a, const ProjPoint& b) { return a.coords_ == b.coords_; }
  friend bool operator<(const ProjPoint& a, const ProjPoint& b) {
    return std::lexicographical_compare(a.coords_.begin(), a.coords_.end(), b.coords_.begin(),
                                        b.coords_.end());
  }

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < coords_.size(); ++i) {
      if (i) s += " : ";
      s += coords_[i].get_str();
    }
    return s + ")";
  }

 private:
  friend ProjPoint normalize_integers(std::vector<Integer> raw);
  std::vector<Integer> coords_;
};

inline ProjPoint normalize_integers(std::vector<Integer> raw) {
  Integer g = 0;
  for (const auto& c : raw) g = gcd(g, c);
  if (g == 0) fail(ErrorKind::AllZero, "every coordinate is zero");
  auto first = std::find_if(raw.begin(), raw.end(), [](const Integer& c) { return sgn(c) != 0; });
  if (sgn(*first) < 0) g = -g;
  for (auto& c : raw) mpz_divexact(c.get_mpz_t(), c.get_mpz_t(), g.get_mpz_t());
  ProjPoint p;
  p.coords_ = std::move(raw);
  return p;
}

/// Canonical representative of (raw_0 : ... : raw_N).
inline ProjPoint normalize(std::span<const Rat> raw) {
  Integer den = 1;
  for (const auto& q : raw) den = lcm(den, Integer(q.get_den()));
  std::vector<Integer> ints;
  ints.reserve(raw.size());
  for (const auto& q : raw) ints.push_back(Integer(q.get_num()) * (den / q.get_den()));
  return normalize_integers(std::move(ints));
}

inline ProjPoint normalize(std::initializer_list<Rat> raw) {
  return normalize(std::span<const Rat>(raw.begin(), raw.size()));
}

/// log max_i |x_i| on canonical coordinates.
inline double weil_height(const ProjPoint& p) {
  Integer m = 0;
  for (const auto& c : p.coords()) {
    Integer a = abs(c);
    if (a > m) m = a;
  }
  return log_abs(m);
}

// ---------------------------------------------------------------------------
// Factorization

struct FactorBudget {
  std::uint32_t trial_limit = 1'000'000;
  std::uint64_t rho_iterations = 1u << 20;
};

namespace detail {

inline const std::vector<std::uint32_t>& small_primes() {
  static const std::vector<std::uint32_t> primes = [] {
    constexpr std::uint32_t kLimit = 1'000'000;
    std::vector<bool> composite(kLimit + 1, false);
    std::vector<std::uint32_t> out;
    for (std::uint32_t i = 2; i <= kLimit; ++i) {
      if (composite[i]) continue;
      out.push_back(i);
      for (std::uint64_t j = std::uint64_t(i) * i; j <= kLimit; j += i) composite[j] = true;
    }
    return out;
  }();
  return primes;
}

inline bool is_probable_prime(const Integer& n) {
  return mpz_probab_prime_p(n.get_mpz_t(), 30) > 0;
}

// Brent's variant of Pollard rho; returns a nontrivial factor or nullopt.
inline std::optional<Integer> pollard_brent(const Integer& n, std::uint64_t max_iters) {
  if (mpz_even_p(n.get_mpz_t())) return Integer(2);
  for (unsigned long c = 1; c < 20; ++c) {
    Integer y = 2, x, q = 1, g = 1, ys;
    std::uint64_t r = 1, iters = 0;
    auto step = [&](const Integer& v) {
      Integer t = v * v + c;
      mpz_mod(t.get_mpz_t(), t.get_mpz_t(), n.get_mpz_t());
      return t;
    };
    while (g == 1 && iters < max_iters) {
      x = y;
      for (std::uint64_t i = 0; i < r; ++i) y = step(y);
      std::uint64_t k = 0;
      while (k < r && g == 1) {
        ys = y;
        const std::uint64_t m = std::min<std::uint64_t>(128, r - k);
        for (std::uint64_t i = 0; i < m; ++i) {
          y = step(y);
          Integer d = abs(x - y);
          q = q * d;
          mpz_mod(q.get_mpz_t(), q.get_mpz_t(), n.get_mpz_t());
        }
        g = gcd(q, n);
        k += m;
        iters += m;
      }
      r *= 2;
    }
    if (g == n) {
      do {
        ys = step(ys);
        g = gcd(Integer(abs(x - ys)), n);
      } while (g == 1);
    }
    if (g != n && g != 1) return g;
  }
  return std::nullopt;
}

inline void factor_into(Integer n, std::map<Integer, long>& out, const FactorBudget& budget) {
  if (n == 1) return;
  if (is_probable_prime(n)) {
    out[n] += 1;
    return;
  }
  auto d = pollard_brent(n, budget.rho_iterations);
  if (!d) fail(ErrorKind::FactorizationBudgetExceeded, "Pollard rho gave up on " + n.get_str());
  Integer rest = n / *d;
  factor_into(*d, out, budget);
  factor_into(rest, out, budget);
}

}  // namespace detail

/// Prime factorization of |n| (n != 0) as prime -> multiplicity.
inline std::map<Integer, long> factor_integer(const Integer& n, const FactorBudget& budget = {}) {
  if (sgn(n) == 0) fail(ErrorKind::DomainViolation, "factoring zero");
  Integer m = abs(n);
  std::map<Integer, long> out;
  for (std::uint32_t p : detail::small_primes()) {
    if (p > budget.trial_limit) break;
    if (Integer(p) * p > m) break;
    if (mpz_divisible_ui_p(m.get_mpz_t(), p)) {
      long e = 0;
      while (mpz_divisible_ui_p(m.get_mpz_t(), p)) {
        mpz_divexact_ui(m.get_mpz_t(), m.get_mpz_t(), p);
        ++e;
      }
      out[Integer(p)] = e;
    }
  }
  detail::factor_into(m, out, budget);
  return out;
}

/// Sum over all places of Q of log max_i |x_i|_v, evaluated literally: the
/// archimedean term plus one term per prime dividing some coordinate. The
/// total is accumulated as an exact rational before taking a single log.
inline double height_via_places(const ProjPoint& p, const FactorBudget& budget = {}) {
  Integer arch = 0;
  for (const auto& c : p.coords()) arch = std::max(arch, Integer(abs(c)));

  std::map<Integer, long> primes;
  bool literal = true;
  try {
    for (const auto& c : p.coords()) {
      if (sgn(c) == 0) continue;
      for (const auto& [q, e] : factor_integer(c, budget)) primes.emplace(q, 0);
    }
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::FactorizationBudgetExceeded) throw;
    literal = false;
  }

  Rat total = arch;
  if (literal) {
    for (const auto& [q, unused] : primes) {
      // max_i |x_i|_q = q^{-min_i ord_q(x_i)}
      long min_ord = -1;
      for (const auto& c : p.coords()) {
        if (sgn(c) == 0) continue;
        long ord = 0;
        Integer t = c;
        while (mpz_divisible_p(t.get_mpz_t(), q.get_mpz_t())) {
          mpz_divexact(t.get_mpz_t(), t.get_mpz_t(), q.get_mpz_t());
          ++ord;
        }
        min_ord = (min_ord < 0) ? ord : std::min(min_ord, ord);
      }
      total /= pow_int(q, static_cast<unsigned long>(min_ord));
    }
  } else {
    // Same product without the factorization: prod_q q^{min ord} = gcd.
    Integer g = 0;
    for (const auto& c : p.coords()) g = gcd(g, c);
    total /= g;
  }
  total.canonicalize();
  return log_abs(total);
}

// ---------------------------------------------------------------------------
// Torus points

/// A point of G_m^n(Q): every coordinate a nonzero rational.
class TorusPoint {
 public:
  TorusPoint() = default;
  explicit TorusPoint(std::vector<Rat> coords) : coords_(std::move(coords)) {
    if (coords_.empty()) fail(ErrorKind::InvalidInput, "torus point of rank 0");
    for (const auto& c : coords_)
      if (sgn(c) == 0) fail(ErrorKind::DomainViolation, "zero torus coordinate");
  }
  std::size_t rank() const { return coords_.size(); }
  const std::vector<Rat>& coords() const { return coords_; }
  const Rat& operator[](std::size_t i) const { return coords_[i]; }
  friend bool operator==(const TorusPoint&, const TorusPoint&) = default;

 private:
  std::vector<Rat> coords_;
};

/// h(x) = sum_i h(1 : x_i), the height from the (P^1)^n compactification.
inline double torus_height(const TorusPoint& x) {
  double h = 0.0;
  for (const auto& c : x.coords()) h += weil_height(normalize({Rat(1), c}));
  return h;
}

/// A point of (P^1)^n. Factor i is (u : v) and stands for the torus
/// coordinate v/u, so (1 : 0) is 0 and (0 : 1) is infinity.
class CompactTorusPoint {
 public:
  CompactTorusPoint() = default;
  explicit CompactTorusPoint(std::vector<ProjPoint> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) fail(ErrorKind::InvalidInput, "compact torus point of rank 0");
    for (const auto& f : factors_)
      if (f.dimension() != 1) fail(ErrorKind::InvalidInput, "factor is not a point of P^1");
  }
  explicit CompactTorusPoint(const TorusPoint& x) {
    factors_.reserve(x.rank());
    for (const auto& c : x.coords()) factors_.push_back(normalize({Rat(1), c}));
  }

  std::size_t rank() const { return factors_.size(); }
  const std::vector<ProjPoint>& factors() const { return factors_; }
  const ProjPoint& operator[](std::size_t i) const { return factors_[i]; }

  bool in_torus() const {
    return std::all_of(factors_.begin(), factors_.end(),
                       [](const ProjPoint& p) { return sgn(p[0]) != 0 && sgn(p[1]) != 0; });
  }
  /// Torus coordinate of factor i, or nullopt at 0 or infinity.
  std::optional<Rat> coordinate(std::size_t i) const {
    const auto& p = factors_[i];
    if (sgn(p[0]) == 0 || sgn(p[1]) == 0) return std::nullopt;
    Rat q(p[1], p[0]);
    q.canonicalize();
    return q;
  }
  TorusPoint to_torus() const {
    std::vector<Rat> c;
    for (std::size_t i = 0; i < rank(); ++i) {
      auto v = coordinate(i);
      if (!v) fail(ErrorKind::DomainViolation, "point lies on the toric boundary");
      c.push_back(*v);
    }
    return TorusPoint(std::move(c));
  }
  std::size_t bits() const {
    std::size_t b = 0;
    for (const auto& f : factors_) b += f.bits();
    return b;
  }

  friend bool operator==(const CompactTorusPoint& a, const CompactTorusPoint& b) {
    return a.factors_ == b.factors_;
  }
  friend bool operator<(const CompactTorusPoint& a, const CompactTorusPoint& b) {
    return a.factors_ < b.factors_;
  }

 private:
  std::vector<ProjPoint> factors_;
};

inline double torus_height(const CompactTorusPoint& x) {
  double h = 0.0;
  for (const auto& f : x.factors()) h += weil_height(f);
  return h;
}

// ---------------------------------------------------------------------------
// Prime support

struct PrimeSupport {
  std::vector<Integer> primes;                // sorted, distinct
  std::vector<std::vector<long>> exponents;   // exponents[coord][prime]
  std::vector<int> signs;                     // +1 / -1 per coordinate

  Rat reconstruct(std::size_t coord) const {
    Rat r = signs[coord];
    for (std::size_t k = 0; k < primes.size(); ++k) r *= pow_rat(Rat(primes[k]), exponents[coord][k]);
    return r;
  }
};

inline PrimeSupport prime_support(const TorusPoint& x, const FactorBudget& budget = {}) {
  std::vector<std::map<Integer, long>> per_coord;
  std::map<Integer, int> all;
  for (const auto& c : x.coords()) {
    auto num = factor_integer(Integer(c.get_num()), budget);
    for (const auto& [p, e] : factor_integer(Integer(c.get_den()), budget)) num[p] -= e;
    for (const auto& [p, e] : num) all.emplace(p, 0);
    per_coord.push_back(std::move(num));
  }
  PrimeSupport s;
  for (const auto& [p, unused] : all) s.primes.push_back(p);
  for (std::size_t i = 0; i < x.rank(); ++i) {
    std::vector<long> e;
    for (const auto& p : s.primes) {
      auto it = per_coord[i].find(p);
      e.push_back(it == per_coord[i].end() ? 0 : it->second);
    }
    s.exponents.push_back(std::move(e));
    s.signs.push_back(sgn(x[i]) > 0 ? 1 : -1);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Bounded-height enumeration

/// Largest integer B with log(B) <= bound, using the same log as weil_height;
/// so h(p) <= bound iff max|p_i| <= B.
inline std::uint64_t multiplicative_bound(double bound) {
  if (!(bound >= 0.0)) fail(ErrorKind::InvalidInput, "height bound must be >= 0");
  if (bound > 43.0) fail(ErrorKind::BoundTooLarge, "height bound beyond 64-bit coordinates");
  auto b = static_cast<std::uint64_t>(std::floor(std::exp(bound)));
  b = std::max<std::uint64_t>(b, 1);
  while (b > 1 && log_abs(Integer(static_cast<unsigned long>(b))) > bound) --b;
  while (log_abs(Integer(static_cast<unsigned long>(b + 1))) <= bound) ++b;
  return b;
}

/// Streams the canonical points of P^N(Q) with max|x_i| <= B in
/// lexicographic order of coordinates.
class PointEnumerator {
 public:
  PointEnumerator(std::size_t dimension, std::uint64_t max_coord, std::uint64_t cap = 10'000'000)
      : box_(static_cast<std::int64_t>(max_coord)), cap_(cap), cur_(dimension + 1, 0) {
    // At least (2B+1)^{N+1} / 8 canonical points in the box for N >= 1.
    long double box = std::pow(2.0L * box_ + 1.0L, static_cast<long double>(dimension + 1));
    if (dimension > 0 && box / 8.0L > static_cast<long double>(cap_))
      fail(ErrorKind::BoundTooLarge, "point count would exceed cap " + std::to_string(cap_));
    cur_[0] = 0;
    for (std::size_t i = 1; i < cur_.size(); ++i) cur_[i] = -box_;
    started_ = false;
  }

  std::optional<ProjPoint> next() {
    while (true) {
      if (started_ && !advance()) return std::nullopt;
      started_ = true;
      if (canonical()) {
        if (++emitted_ > cap_) fail(ErrorKind::BoundTooLarge, "point count exceeded cap");
        std::vector<Integer> c;
        c.reserve(cur_.size());
        for (auto v : cur_) c.emplace_back(static_cast<long>(v));
        return ProjPoint::from_canonical(std::move(c));
      }
    }
  }

 private:
  bool advance() {
    for (std::size_t i = cur_.size(); i-- > 0;) {
      if (cur_[i] < box_) {
        ++cur_[i];
        for (std::size_t j = i + 1; j < cur_.size(); ++j) cur_[j] = -box_;
        return true;
      }
    }
    return false;
  }
  bool canonical() const {
    std::int64_t g = 0;
    for (auto v : cur_) g = std::gcd(g, v < 0 ? -v : v);
    if (g != 1) return false;
    for (auto v : cur_) {
      if (v != 0) return v > 0;
    }
    return false;
  }

  std::int64_t box_;
  std::uint64_t cap_;
  std::uint64_t emitted_ = 0;
  std::vector<std::int64_t> cur_;
  bool started_;
};

inline std::vector<ProjPoint> enumerate_points(std::size_t dimension, double bound,
                                               std::uint64_t cap = 10'000'000) {
  PointEnumerator e(dimension, multiplicative_bound(bound), cap);
  std::vector<ProjPoint> out;
  while (auto p = e.next()) out.push_back(std::move(*p));
  return out;
}

}  // namespace arithdyn
