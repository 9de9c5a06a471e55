#include <gtest/gtest.h>

#include <random>

#include "arithdyn/canonical_heights.hpp"

using namespace arithdyn;

namespace {

ProjPoint pp(std::initializer_list<long> c) {
  std::vector<Integer> v;
  for (long x : c) v.emplace_back(x);
  return normalize_integers(v);
}

State torus(std::initializer_list<long> c) {
  std::vector<Rat> v;
  for (long x : c) v.emplace_back(x);
  return CompactTorusPoint(TorusPoint(v));
}

SelfMap sq_cube() { return make_monomial_map(IntMatrix{{2, 0}, {0, 3}}); }

EigenDivisorHeight squaring_height() {
  SelfMap f = power_map(1, 2);
  return {[](const State& x) { return weil_height(x.as<ProjPoint>()); }, Rat(2), f, "H"};
}

// Height of the first factor of (P^1)^2.
EigenDivisorHeight first_factor_height() {
  return {[](const State& x) { return weil_height(x.as<CompactTorusPoint>()[0]); }, Rat(2), sq_cube(), "D1"};
}

std::shared_ptr<const Fan> p1xp1() {
  return std::make_shared<const Fan>(2, std::vector<std::vector<Integer>>{{1, 0}, {-1, 0}, {0, 1}, {0, -1}},
                                     std::vector<std::vector<std::size_t>>{{0, 2}, {2, 1}, {1, 3}, {3, 0}});
}

std::shared_ptr<const Fan> hirzebruch1() {
  return std::make_shared<const Fan>(2, std::vector<std::vector<Integer>>{{1, 0}, {0, 1}, {-1, 1}, {0, -1}},
                                     std::vector<std::vector<std::size_t>>{{0, 1}, {1, 2}, {2, 3}, {3, 0}});
}

std::vector<std::pair<SelfMap, std::vector<State>>> eigen_systems() {
  return {
      {power_map(1, 2), {pp({2, 1}), pp({1, 1}), pp({-7, 3})}},
      {sq_cube(), {torus({2, 5}), torus({2, 1}), torus({-3, 7})}},
      {make_toric_endo(p1xp1(), IntMatrix{{0, 2}, {2, 0}}), {torus({2, 5}), torus({-1, 3})}},
      {make_toric_endo(hirzebruch1(), IntMatrix{{3, 0}, {0, 3}}), {torus({2, 5}), torus({-1, 2})}},
      {power_map(2, 2), {pp({1, 2, 3})}},
  };
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::InvalidInput;
}

}  // namespace

TEST(CanonicalHeight, SquaringMapAtTwo) {
  auto e = canonical_height(squaring_height(), pp({2, 1}), 1e-12);
  EXPECT_NEAR(e.value, std::numbers::ln2, 1e-12);
  EXPECT_LE(e.discrepancy_max, 1e-12);
  EXPECT_FALSE(e.budget_exceeded);
  EXPECT_EQ(to_string(e.rigor), "heuristic-bar");
}

TEST(CanonicalHeight, FixedPointHasZeroHeight) {
  auto e = canonical_height(squaring_height(), pp({1, 1}), 1e-12);
  EXPECT_EQ(e.value, 0.0);
  EXPECT_EQ(e.error_bar, 0.0);
}

TEST(CanonicalHeight, TorusFactorHeight) {
  auto e = canonical_height(first_factor_height(), torus({2, 5}), 1e-12);
  EXPECT_NEAR(e.value, std::numbers::ln2, 1e-12);
}

TEST(CanonicalHeight, ErrorBarFormula) {
  // A degree-2 map with a nonzero discrepancy: (x^2 + y^2 : y^2 + xy).
  SelfMap f = make_projective_morphism(
      1, {SparsePoly{{Exponent{2, 0}, Rat(1)}, {Exponent{0, 2}, Rat(1)}},
          SparsePoly{{Exponent{0, 2}, Rat(1)}, {Exponent{1, 1}, Rat(1)}}});
  EigenDivisorHeight E{[](const State& x) { return weil_height(x.as<ProjPoint>()); }, Rat(2), f, "H"};
  auto e = canonical_height(E, pp({3, 2}), 1e-3);
  ASSERT_GT(e.n_used, 0u);
  EXPECT_DOUBLE_EQ(e.error_bar, e.discrepancy_max * 2.0 / (2.0 - 1.0) / std::ldexp(1.0, int(e.n_used)));
}

TEST(CanonicalHeight, BudgetExceededReturnsBestSoFar) {
  SelfMap f = make_projective_morphism(
      1, {SparsePoly{{Exponent{2, 0}, Rat(1)}, {Exponent{0, 2}, Rat(1)}},
          SparsePoly{{Exponent{0, 2}, Rat(1)}, {Exponent{1, 1}, Rat(1)}}});
  EigenDivisorHeight E{[](const State& x) { return weil_height(x.as<ProjPoint>()); }, Rat(2), f, "H"};
  auto e = canonical_height(E, pp({3, 2}), 0.0, HeightBudget{64, 20'000, 2});
  EXPECT_TRUE(e.budget_exceeded);
  EXPECT_GT(e.n_used, 0u);
  EXPECT_GT(e.value, 0.0);
}

TEST(CanonicalHeight, RejectsNonExpandingMultiplier) {
  EigenDivisorHeight E{[](const State& x) { return weil_height(x.as<ProjPoint>()); }, Rat(1), identity_projective(1), "H"};
  EXPECT_EQ(kind_of([&] { canonical_height(E, pp({2, 1}), 1e-9); }), ErrorKind::InvalidInput);
}

TEST(CanonicalHeight, CloseToNaiveHeight) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<long> d(-500, 500);
  SelfMap f = make_projective_morphism(
      1, {SparsePoly{{Exponent{2, 0}, Rat(1)}, {Exponent{0, 2}, Rat(-3)}},
          SparsePoly{{Exponent{0, 2}, Rat(2)}, {Exponent{1, 1}, Rat(1)}}});
  EigenDivisorHeight E{[](const State& x) { return weil_height(x.as<ProjPoint>()); }, Rat(2), f, "H"};
  for (int s = 0; s < 30; ++s) {
    ProjPoint x;
    try {
      x = normalize_integers({Integer(d(rng)), Integer(d(rng))});
    } catch (const Error&) {
      continue;
    }
    auto e = canonical_height(E, x, 1e-3);
    EXPECT_LE(std::fabs(e.value - weil_height(x)), e.discrepancy_max / (2.0 - 1.0) + 1.0);
    EXPECT_GE(e.value + e.error_bar, 0.0);
  }
}

TEST(FunctionalEquation, SquaringMap) {
  auto r = functional_equation_check(squaring_height(), pp({2, 1}), 5, 1e-12);
  EXPECT_LE(r.max_residual, 1e-12);
  EXPECT_TRUE(r.within);
  EXPECT_EQ(functional_equation_check(squaring_height(), pp({1, 1}), 5).max_residual, 0.0);
}

TEST(FunctionalEquation, TorusFactor) {
  auto r = functional_equation_check(first_factor_height(), torus({2, 5}), 4, 1e-9);
  EXPECT_TRUE(r.within) << r.max_residual << " vs " << r.worst_allowance;
}

TEST(FunctionalEquation, AllEigendivisorSystems) {
  for (const auto& [f, points] : eigen_systems()) {
    auto d = decompose(f);
    for (const auto& c : d.components) {
      if (c.lambda <= 1) continue;
      for (const auto& x : points) {
        auto r = functional_equation_check(c.height, x, 3, 1e-9);
        EXPECT_TRUE(r.within) << c.height.label << " at " << state_to_string(x) << ": " << r.max_residual;
      }
    }
  }
}

TEST(CanonicalHeight, NonNegativeOnToricSystems) {
  for (const auto& [f, points] : eigen_systems()) {
    auto d = decompose(f);
    for (const auto& c : d.components) {
      for (const auto& x : points) {
        auto e = canonical_height(c.height, x, 1e-9);
        EXPECT_GE(e.value + e.error_bar, 0.0);
        EXPECT_GE(e.value, -1e-12);
      }
    }
  }
}

TEST(Decompose, SqCube) {
  auto d = decompose(sq_cube());
  EXPECT_EQ(d.period, 1u);
  EXPECT_EQ(d.top, 3);
  ASSERT_EQ(d.components.size(), 2u);
  std::vector<Integer> lambdas;
  for (const auto& c : d.components) lambdas.push_back(c.lambda);
  std::sort(lambdas.begin(), lambdas.end());
  EXPECT_EQ(lambdas, (std::vector<Integer>{2, 3}));
  for (const auto& c : d.components) EXPECT_EQ(c.dominant, c.lambda == 3);
}

TEST(Decompose, SwapDoubleHasPeriodTwo) {
  auto d = decompose(make_toric_endo(p1xp1(), IntMatrix{{0, 2}, {2, 0}}));
  EXPECT_EQ(d.period, 2u);
  EXPECT_EQ(d.top, 4);
  EXPECT_DOUBLE_EQ(d.delta, 2.0);
  for (const auto& c : d.components) EXPECT_TRUE(c.dominant);
}

TEST(Decompose, Missing) {
  EXPECT_EQ(kind_of([] { decompose(identity_projective(1)); }), ErrorKind::MissingDecomposition);
  EXPECT_EQ(kind_of([] { decompose(make_monomial_map(IntMatrix{{1, 1}, {1, 0}})); }), ErrorKind::MissingDecomposition);
  EXPECT_EQ(kind_of([] { decompose(make_linear_map(RatMatrix{{1, 1}, {0, 1}})); }), ErrorKind::MissingDecomposition);
  EXPECT_EQ(kind_of([] { decompose(make_monomial_map(IntMatrix::identity(2))); }), ErrorKind::MissingDecomposition);
}

TEST(AmpleCanonicalHeight, SqCubeExamples) {
  auto d = decompose(sq_cube());
  EXPECT_NEAR(ample_canonical_height(d, torus({2, 5})).value, std::log(5.0), 1e-12);
  EXPECT_NEAR(ample_canonical_height(d, torus({2, 1})).value, 0.0, 1e-12);
  EXPECT_NEAR(ample_canonical_height(d, torus({1, 1})).value, 0.0, 1e-12);
}

TEST(AmpleCanonicalHeight, SwapDoubleUsesBothFactors) {
  // f^2 = (x^4, y^4) and delta = 2, so the height is h(x) + h(y).
  auto d = decompose(make_toric_endo(p1xp1(), IntMatrix{{0, 2}, {2, 0}}));
  EXPECT_NEAR(ample_canonical_height(d, torus({2, 5})).value, std::log(10.0), 1e-12);
}

TEST(AmpleCanonicalHeight, ProductLiftsComponents) {
  SelfMap f = ProductMap{{power_map(1, 2), sq_cube()}};
  auto d = decompose(f);
  EXPECT_EQ(d.top, 3);
  ProductState x{{pp({2, 1}), torus({2, 5})}};
  EXPECT_NEAR(ample_canonical_height(d, x).value, std::log(5.0), 1e-12);
}

TEST(AmpleCanonicalHeight, IdentityHasNoDecomposition) {
  EXPECT_EQ(kind_of([] { ample_canonical_height(identity_projective(1), pp({2, 1})); }), ErrorKind::MissingDecomposition);
}

TEST(Zf, SquaringMapOnLine) {
  auto rep = zf_search(power_map(1, 2));
  std::set<std::string> got;
  for (const auto& e : rep.points) got.insert(state_to_string(e.point));
  std::set<std::string> expect;
  for (auto p : {pp({1, 0}), pp({0, 1}), pp({1, 1}), pp({1, -1})}) expect.insert(state_to_string(p));
  EXPECT_EQ(got, expect);
  EXPECT_TRUE(rep.violations.empty());
  EXPECT_GT(rep.enumerated, 1000u);
}

TEST(Zf, SqCubeSurvivorsHaveRootOfUnityOrBoundarySecondCoordinate) {
  ZfOptions opt;
  opt.height_bound = std::log(10.0);
  auto rep = zf_search(sq_cube(), opt);
  EXPECT_TRUE(rep.violations.empty());
  std::set<ProjPoint> second;
  for (const auto& e : rep.points) second.insert(e.point.as<CompactTorusPoint>()[1]);
  EXPECT_EQ(second, (std::set<ProjPoint>{pp({1, 0}), pp({0, 1}), pp({1, 1}), pp({1, -1})}));
  // The first coordinate is unconstrained: every point of height <= ln 10
  // on the first factor appears.
  EXPECT_EQ(rep.points.size(), 4 * enumerate_points(1, std::log(10.0)).size());
}

TEST(Zf, StableUnderRaisingBound) {
  ZfOptions small, big;
  small.height_bound = std::log(5.0);
  big.height_bound = std::log(12.0);
  auto a = zf_search(power_map(1, 2), small);
  auto b = zf_search(power_map(1, 2), big);
  for (const auto& e : a.points) {
    bool found = false;
    for (const auto& g : b.points) found = found || g.point == e.point;
    EXPECT_TRUE(found);
  }
  auto c = zf_search(sq_cube(), small);
  auto dd = zf_search(sq_cube(), big);
  std::set<std::string> bigset;
  for (const auto& e : dd.points) bigset.insert(state_to_string(e.point));
  for (const auto& e : c.points) EXPECT_TRUE(bigset.count(state_to_string(e.point)));
}

TEST(Zf, JobsDoNotChangeResult) {
  ZfOptions one, four;
  one.height_bound = four.height_bound = std::log(8.0);
  four.jobs = 4;
  auto a = zf_search(sq_cube(), one);
  auto b = zf_search(sq_cube(), four);
  ASSERT_EQ(a.points.size(), b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    EXPECT_EQ(a.points[i].point, b.points[i].point);
    EXPECT_EQ(a.points[i].hhat, b.points[i].hhat);
  }
}

TEST(Zf, IdentityRejected) {
  EXPECT_EQ(kind_of([] { zf_search(identity_projective(1)); }), ErrorKind::MissingDecomposition);
}

TEST(Zf, BoundTooLarge) {
  ZfOptions opt;
  opt.height_bound = 30.0;
  EXPECT_EQ(kind_of([&] { zf_search(sq_cube(), opt); }), ErrorKind::BoundTooLarge);
}

TEST(Positivity, DenseOrbitSamples) {
  // Orbits of (2,5) and (3,-7) are dense for (x^2, y^3); the ample height is positive.
  auto d = decompose(sq_cube());
  for (auto x : {torus({2, 5}), torus({3, -7})}) {
    auto a = ample_canonical_height(d, x);
    EXPECT_GT(a.value, 10 * a.error_bar);
    EXPECT_GT(a.value, 0.5);
  }
}
