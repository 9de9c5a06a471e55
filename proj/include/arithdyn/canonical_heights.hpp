#pragma once

// Canonical heights of eigendivisors by telescoping, the ample canonical
// height assembled from an eigendivisor decomposition, and the search for
// points where it vanishes.

#include <atomic>
#include <exception>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>

#include "arithdyn/degrees.hpp"
#include "arithdyn/toric.hpp"

namespace arithdyn {

struct HeightBudget {
  std::size_t max_iters = 64;
  std::size_t bit_budget = kDefaultBitBudget;
  std::size_t min_iters = 2;
};

/// A height h_D together with f and the multiplier in f^* D ~ lambda D.
struct EigenDivisorHeight {
  std::function<double(const State&)> height_fn;
  Rat lambda;
  SelfMap map;
  std::string label;
};

enum class BarRigor { HeuristicBar };

constexpr std::string_view to_string(BarRigor) { return "heuristic-bar"; }

struct CanonicalHeightEstimate {
  double value = 0.0;
  double error_bar = std::numeric_limits<double>::infinity();
  std::size_t n_used = 0;
  double discrepancy_max = 0.0;
  BarRigor rigor = BarRigor::HeuristicBar;
  bool budget_exceeded = false;
};

inline constexpr double kBarSafety = 2.0;

/// h_D(f^n x) / lambda^n, iterated until the bar
/// discrepancy_max * 2 / (lambda - 1) / lambda^n drops to `target`.
/// Running out of budget returns the last estimate with budget_exceeded set.
inline CanonicalHeightEstimate canonical_height(const EigenDivisorHeight& E, const State& x, double target,
                                                const HeightBudget& budget = {}) {
  if (E.lambda <= 1) fail(ErrorKind::InvalidInput, "canonical height needs lambda > 1");
  check_domain(E.map, x);
  const double lambda = E.lambda.get_d();
  CanonicalHeightEstimate est;
  State cur = x;
  double h = E.height_fn(x);
  est.value = h;
  double scale = 1.0;
  std::size_t bits = state_bits(x);
  for (std::size_t n = 1; n <= budget.max_iters; ++n) {
    State next;
    try {
      next = evaluate(E.map, cur);
    } catch (const Error& e) {
      fail(e.kind(), std::string(e.what()) + " (iterate " + std::to_string(n) + ")");
    }
    bits += state_bits(next);
    if (bits > budget.bit_budget) break;
    const double hn = E.height_fn(next);
    est.discrepancy_max = std::max(est.discrepancy_max, std::fabs(hn - lambda * h));
    scale *= lambda;
    est.value = hn / scale;
    est.n_used = n;
    est.error_bar = est.discrepancy_max * kBarSafety / (lambda - 1.0) / scale;
    if (n >= budget.min_iters && est.error_bar <= target) return est;
    cur = std::move(next);
    h = hn;
  }
  est.budget_exceeded = true;
  return est;
}

struct FunctionalEquationReport {
  double max_residual = 0.0;
  double worst_allowance = 0.0;  // allowance at the step with the largest residual excess
  bool within = true;
  std::vector<double> residuals;
};

/// Floor on the residual contract for double rounding of exact height ratios.
inline constexpr double kRoundingSlack = 1e-12;

/// Residuals |h^(f^{k+1} x) - lambda h^(f^k x)| for k < n_steps, each held
/// to 2 * (bar_{k+1} + lambda * bar_k).
inline FunctionalEquationReport functional_equation_check(const EigenDivisorHeight& E, const State& x,
                                                          std::size_t n_steps, double target = 1e-9,
                                                          const HeightBudget& budget = {}) {
  FunctionalEquationReport rep;
  const double lambda = E.lambda.get_d();
  State cur = x;
  auto prev = canonical_height(E, cur, target, budget);
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n_steps; ++k) {
    cur = evaluate(E.map, cur);
    auto next = canonical_height(E, cur, target, budget);
    const double r = std::fabs(next.value - lambda * prev.value);
    const double allowed =
        kBarSafety * (next.error_bar + lambda * prev.error_bar) + kRoundingSlack * std::max(1.0, std::fabs(next.value));
    rep.residuals.push_back(r);
    rep.max_residual = std::max(rep.max_residual, r);
    if (r - allowed > worst) {
      worst = r - allowed;
      rep.worst_allowance = allowed;
    }
    if (!(r <= allowed)) rep.within = false;
    prev = next;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Eigendivisor decompositions

/// One eigendivisor D_i of f^period with its multiplier. `key` sends x to
/// the point pi_i(x) of the base on which h^_{D_i} = h^_{H_i} o pi_i.
struct EigenComponent {
  EigenDivisorHeight height;
  Integer lambda;
  bool dominant = false;
  std::function<ProjPoint(const State&)> key;
  std::optional<Fibration> fibration;
  std::optional<MonomialMap> base_map;
};

struct Decomposition {
  SelfMap map;
  SelfMap iterate;  // map^period
  std::size_t period = 1;
  Integer top;      // largest multiplier, delta^period
  double delta = 1.0;
  std::vector<EigenComponent> components;
};

namespace detail {

inline void finish_decomposition(Decomposition& d) {
  if (d.components.empty()) fail(ErrorKind::MissingDecomposition, "no eigendivisors");
  d.top = d.components.front().lambda;
  for (const auto& c : d.components) d.top = std::max(d.top, c.lambda);
  if (d.top <= 1) fail(ErrorKind::MissingDecomposition, "dynamical degree is 1");
  for (auto& c : d.components) c.dominant = c.lambda == d.top;
  d.delta = std::pow(d.top.get_d(), 1.0 / static_cast<double>(d.period));
}

inline Decomposition toric_decomposition(const SelfMap& f, const ToricEndo& te) {
  Decomposition d;
  d.map = f;
  const auto& fan = *te.fan;
  NefData nd;
  RayFixing rf;
  try {
    nd = nef_cone(fan);
    rf = ray_fixing_iterate(nd, pullback_matrix(te));
  } catch (const Error& e) {
    fail(ErrorKind::MissingDecomposition, e.what());
  }
  d.period = rf.period;
  const ToricEndo FN = make_toric_endo(te.fan, matrix_power(te.phi, static_cast<unsigned>(rf.period)));
  d.iterate = FN;
  for (std::size_t i = 0; i < nd.extremal_divisors.size(); ++i) {
    auto fib = semiample_fibration(fan, nd.extremal_divisors[i]);
    EigenComponent c;
    c.lambda = rf.lambdas[i];
    c.base_map = induced_base_map(FN, fib, c.lambda);
    c.fibration = fib;
    c.height = EigenDivisorHeight{[fib](const State& x) { return fib.height(x); }, Rat(c.lambda), d.iterate,
                                  "D" + std::to_string(i)};
    c.key = [fib](const State& x) { return fib.project(x); };
    d.components.push_back(std::move(c));
  }
  return d;
}

}  // namespace detail

/// Eigendivisor data for the families that carry it: projective morphisms
/// of degree >= 2, toric endomorphisms with simplicial projective fans,
/// monomial maps compatible with the (P^1)^n fan, and products of these.
inline Decomposition decompose(const SelfMap& f) {
  Decomposition d = std::visit(
      [&](const auto& g) -> Decomposition {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ProjectiveMorphism>) {
          if (g.degree < 2) fail(ErrorKind::MissingDecomposition, "degree 1 map has no expanding eigendivisor");
          Decomposition d;
          d.map = f;
          d.iterate = f;
          EigenComponent c;
          c.lambda = g.degree;
          c.height = EigenDivisorHeight{[](const State& x) { return weil_height(x.as<ProjPoint>()); }, Rat(g.degree), f, "H"};
          c.key = [](const State& x) { return x.as<ProjPoint>(); };
          d.components.push_back(std::move(c));
          return d;
        } else if constexpr (std::is_same_v<T, MonomialMap>) {
          std::optional<ToricEndo> te;
          try {
            te = make_toric_endo(product_of_lines_fan(g.A.rows()), g.A);
          } catch (const Error& e) {
            fail(ErrorKind::MissingDecomposition, std::string("monomial map does not preserve the (P^1)^n fan: ") + e.what());
          }
          return detail::toric_decomposition(f, *te);
        } else if constexpr (std::is_same_v<T, ToricEndo>) {
          return detail::toric_decomposition(f, g);
        } else if constexpr (std::is_same_v<T, LinearUnipotentMap>) {
          fail(ErrorKind::MissingDecomposition, "linear maps have dynamical degree 1");
        } else {
          std::vector<Decomposition> parts;
          std::size_t period = 1;
          for (const auto& c : g.components) {
            parts.push_back(decompose(c));
            period = std::lcm(period, parts.back().period);
          }
          Decomposition d;
          d.map = f;
          d.period = period;
          d.iterate = compose_power(f, static_cast<unsigned>(period));
          for (std::size_t j = 0; j < parts.size(); ++j) {
            const unsigned e = static_cast<unsigned>(period / parts[j].period);
            for (const auto& pc : parts[j].components) {
              EigenComponent c;
              c.lambda = pow_int(pc.lambda, e);
              auto h = pc.height.height_fn;
              auto k = pc.key;
              c.height = EigenDivisorHeight{[h, j](const State& x) { return h(x.as<ProductState>().parts[j]); },
                                            Rat(c.lambda), d.iterate, "p" + std::to_string(j) + "." + pc.height.label};
              c.key = [k, j](const State& x) { return k(x.as<ProductState>().parts[j]); };
              c.fibration = pc.fibration;
              c.base_map = pc.base_map;
              d.components.push_back(std::move(c));
            }
          }
          return d;
        }
      },
      f.value);
  detail::finish_decomposition(d);
  return d;
}

// ---------------------------------------------------------------------------
// Ample canonical height

struct AmpleHeightEstimate {
  double value = 0.0;
  double error_bar = 0.0;
  std::size_t shift = 0;  // r attaining the minimum over f^r x
  bool budget_exceeded = false;
  std::vector<CanonicalHeightEstimate> terms;  // dominant components at that shift
};

/// liminf h_H(f^n x) / delta^n, as the minimum over r < period of
/// delta^{-r} sum over dominant i of h^_{D_i}(f^r x).
inline AmpleHeightEstimate ample_canonical_height(const Decomposition& d, const State& x, double target = 1e-9,
                                                  const HeightBudget& budget = {}) {
  check_domain(d.map, x);
  AmpleHeightEstimate best;
  best.value = std::numeric_limits<double>::infinity();
  State y = x;
  double scale = 1.0;
  for (std::size_t r = 0; r < d.period; ++r) {
    if (r > 0) {
      y = evaluate(d.map, y);
      scale *= d.delta;
    }
    AmpleHeightEstimate cand;
    cand.shift = r;
    for (const auto& c : d.components) {
      if (!c.dominant) continue;
      auto e = canonical_height(c.height, y, target * scale, budget);
      cand.value += e.value / scale;
      cand.error_bar += e.error_bar / scale;
      cand.budget_exceeded = cand.budget_exceeded || e.budget_exceeded;
      cand.terms.push_back(e);
    }
    if (cand.value < best.value) best = std::move(cand);
  }
  return best;
}

inline AmpleHeightEstimate ample_canonical_height(const SelfMap& f, const State& x, double target = 1e-9,
                                                  const HeightBudget& budget = {}) {
  return ample_canonical_height(decompose(f), x, target, budget);
}

// ---------------------------------------------------------------------------
// Vanishing locus

struct MembershipLimits {
  std::size_t max_steps = 64;
  std::size_t key_bits = 1 << 12;
  std::size_t state_bits = 1 << 22;
};

/// Whether pi_i(x) is preperiodic for the induced base map, for every
/// dominant i: the orbit of x under f^period is followed until its images
/// repeat. A limit hit counts as not preperiodic.
inline bool predicted_member(const Decomposition& d, const State& x, const MembershipLimits& lim = {}) {
  for (const auto& c : d.components) {
    if (!c.dominant) continue;
    std::set<ProjPoint> seen;
    State y = x;
    bool repeat = false;
    for (std::size_t k = 0; k <= lim.max_steps; ++k) {
      ProjPoint p = c.key(y);
      if (!seen.insert(p).second) {
        repeat = true;
        break;
      }
      if (p.bits() > lim.key_bits || state_bits(y) > lim.state_bits) break;
      y = evaluate(d.iterate, y);
    }
    if (!repeat) return false;
  }
  return true;
}

namespace detail {

inline void product_points(const std::vector<std::vector<State>>& factor_points,
                           const std::vector<std::vector<double>>& factor_heights, bool sum, double bound,
                           std::size_t cap, const std::function<State(std::vector<State>)>& assemble,
                           std::vector<State>& out) {
  std::vector<State> cur;
  std::function<void(std::size_t, double)> rec = [&](std::size_t i, double acc) {
    if (i == factor_points.size()) {
      if (out.size() >= cap) fail(ErrorKind::BoundTooLarge, "more than " + std::to_string(cap) + " points");
      out.push_back(assemble(cur));
      return;
    }
    for (std::size_t k = 0; k < factor_points[i].size(); ++k) {
      const double h = factor_heights[i][k];
      const double next = sum ? acc + h : std::max(acc, h);
      if (next > bound) continue;
      cur.push_back(factor_points[i][k]);
      rec(i + 1, next);
      cur.pop_back();
    }
  };
  rec(0, 0.0);
}

}  // namespace detail

inline constexpr std::size_t kMaxSearchPoints = 2'000'000;

/// The points of X(Q) with state_height <= bound, in a fixed order. Toric
/// systems off the (P^1)^n fan are restricted to the torus.
inline std::vector<State> enumerate_states(const SelfMap& f, double bound, std::size_t cap = kMaxSearchPoints) {
  return std::visit(
      [&](const auto& g) -> std::vector<State> {
        using T = std::decay_t<decltype(g)>;
        std::vector<State> out;
        if constexpr (std::is_same_v<T, ProjectiveMorphism>) {
          for (auto& p : enumerate_points(g.N, bound, cap)) out.emplace_back(std::move(p));
        } else if constexpr (std::is_same_v<T, MonomialMap> || std::is_same_v<T, ToricEndo>) {
          std::size_t n;
          bool torus_only = false;
          if constexpr (std::is_same_v<T, MonomialMap>) {
            n = g.A.rows();
          } else {
            n = g.phi.rows();
            torus_only = !g.fan->is_product_of_lines();
          }
          std::vector<State> line;
          std::vector<double> hs;
          for (auto& p : enumerate_points(1, bound, cap)) {
            if (torus_only && (sgn(p[0]) == 0 || sgn(p[1]) == 0)) continue;
            hs.push_back(weil_height(p));
            line.emplace_back(std::move(p));
          }
          detail::product_points(std::vector<std::vector<State>>(n, line), std::vector<std::vector<double>>(n, hs), true,
                                 bound, cap,
                                 [](std::vector<State> parts) {
                                   std::vector<ProjPoint> fs;
                                   for (auto& s : parts) fs.push_back(s.as<ProjPoint>());
                                   return State(CompactTorusPoint(std::move(fs)));
                                 },
                                 out);
        } else if constexpr (std::is_same_v<T, LinearUnipotentMap>) {
          fail(ErrorKind::MissingDecomposition, "no enumeration for affine systems");
        } else {
          std::vector<std::vector<State>> pts;
          std::vector<std::vector<double>> hs;
          for (const auto& c : g.components) {
            pts.push_back(enumerate_states(c, bound, cap));
            hs.emplace_back();
            for (const auto& s : pts.back()) hs.back().push_back(state_height(s));
          }
          detail::product_points(pts, hs, false, bound, cap,
                                 [](std::vector<State> parts) { return State(ProductState{std::move(parts)}); }, out);
        }
        return out;
      },
      f.value);
}

struct ZfOptions {
  double height_bound = std::log(100.0);
  double tol = 1e-6;
  std::size_t jobs = 1;
  HeightBudget budget{};
  MembershipLimits membership{};
};

struct ZfEntry {
  State point;
  double hhat = 0.0;
  double error_bar = 0.0;
  bool predicted_member = false;
  bool budget_exceeded = false;
};

struct ZfReport {
  double height_bound = 0.0;
  double tol = 0.0;
  std::size_t enumerated = 0;
  std::vector<ZfEntry> points;       // ample canonical height below tol
  std::vector<ZfEntry> violations;   // survivors off the predicted set, or predicted points that did not survive
};

/// Runs fn(i) for i < count on `jobs` threads; the first failure by index
/// is rethrown.
inline void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex m;
  std::size_t err_index = count;
  std::exception_ptr err;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (i < err_index) {
          err_index = i;
          err = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

inline ZfReport zf_search(const SelfMap& f, const ZfOptions& opt = {}) {
  if (!(opt.tol > 0.0)) fail(ErrorKind::InvalidInput, "tol must be positive");
  const Decomposition d = decompose(f);
  auto states = enumerate_states(f, opt.height_bound);
  std::vector<ZfEntry> all(states.size());
  std::vector<char> survive(states.size(), 0);
  parallel_for(states.size(), opt.jobs, [&](std::size_t i) {
    const State& x = states[i];
    auto a = ample_canonical_height(d, x, opt.tol * 0.1, opt.budget);
    ZfEntry e{x, a.value, a.error_bar, predicted_member(d, x, opt.membership), a.budget_exceeded};
    survive[i] = a.value < opt.tol;
    all[i] = std::move(e);
  });
  ZfReport rep;
  rep.height_bound = opt.height_bound;
  rep.tol = opt.tol;
  rep.enumerated = states.size();
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (survive[i]) rep.points.push_back(all[i]);
    if (bool(survive[i]) != all[i].predicted_member) rep.violations.push_back(all[i]);
  }
  return rep;
}

}  // namespace arithdyn
