#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "arithdyn/self_maps.hpp"

using namespace arithdyn;

namespace {

ProjPoint pp(std::initializer_list<long> c) {
  std::vector<Integer> v;
  for (long x : c) v.emplace_back(x);
  return ProjPoint::from_canonical(v);
}

State torus(std::initializer_list<long> c) {
  std::vector<Rat> v;
  for (long x : c) v.emplace_back(x);
  return TorusPoint(v);
}

SelfMap fib() { return make_monomial_map(IntMatrix{{1, 1}, {1, 0}}); }

SparsePoly mono(unsigned a, unsigned b, long c = 1) { return SparsePoly{{Exponent{a, b}, Rat(c)}}; }

ProjectiveMorphism binary(std::vector<SparsePoly> polys) { return make_projective_morphism(1, std::move(polys)); }

}  // namespace

TEST(Evaluate, MonomialExample) {
  EXPECT_EQ(evaluate(fib(), torus({2, 3})), torus({6, 2}));
}

TEST(Evaluate, SquaringMap) {
  EXPECT_EQ(evaluate(power_map(1, 2), pp({2, 1})), State(pp({4, 1})));
}

TEST(Evaluate, Identity) {
  EXPECT_EQ(evaluate(identity_projective(2), pp({3, -4, 5})), State(pp({3, -4, 5})));
}

TEST(Evaluate, DegenerateImage) {
  SelfMap f = binary({mono(1, 1), mono(0, 2)});
  try {
    evaluate(f, pp({1, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateImage);
  }
}

TEST(Evaluate, MonomialBoundary) {
  // (x^2, y^3) extends to 0 and infinity factorwise.
  SelfMap f = make_monomial_map(IntMatrix{{2, 0}, {0, 3}});
  CompactTorusPoint x({pp({1, 0}), pp({0, 1})});
  EXPECT_EQ(evaluate(f, x), State(x));
  // x*y mixes a zero and an infinity.
  SelfMap g = make_monomial_map(IntMatrix{{1, 1}, {1, -1}});
  try {
    evaluate(g, CompactTorusPoint({pp({1, 0}), pp({1, 2})}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DomainViolation);
  }
}

TEST(Iterate, SquaringHeights) {
  auto t = iterate_orbit(power_map(1, 2), pp({2, 1}), 5);
  ASSERT_EQ(t.heights.size(), 6u);
  for (std::size_t n = 0; n <= 5; ++n) EXPECT_EQ(t.heights[n], std::ldexp(1.0, int(n)) * std::numbers::ln2);
  EXPECT_FALSE(t.truncated);
}

TEST(Iterate, FibonacciPoints) {
  auto t = iterate_orbit(fib(), torus({2, 3}), 3);
  ASSERT_EQ(t.points.size(), 4u);
  EXPECT_EQ(t.points[1], torus({6, 2}));
  EXPECT_EQ(t.points[2], torus({12, 6}));
  EXPECT_EQ(t.points[3], torus({72, 12}));
}

TEST(Iterate, IdentityIsConstant) {
  auto t = iterate_orbit(identity_projective(1), pp({1, 1}), 10);
  for (const auto& h : t.heights) EXPECT_EQ(h, 0.0);
  for (const auto& p : t.points) EXPECT_EQ(p, State(pp({1, 1})));
}

TEST(Iterate, BitBudgetTruncates) {
  auto t = iterate_orbit(power_map(1, 2), pp({3, 1}), 40, 10'000);
  EXPECT_TRUE(t.truncated);
  std::size_t total = 0;
  for (auto b : t.bit_sizes) total += b;
  EXPECT_LE(total, 10'000u);
  EXPECT_EQ(t.points.size(), t.heights.size());
}

TEST(Iterate, ErrorsCarryIterateIndex) {
  // (x^2 - y^2 : xy - y^2) sends (2:1) to (3:1) and onward; (1:1) goes to the common zero.
  SelfMap f = binary({SparsePoly{{Exponent{2, 0}, Rat(1)}, {Exponent{0, 2}, Rat(-1)}},
                      SparsePoly{{Exponent{1, 1}, Rat(1)}, {Exponent{0, 2}, Rat(-1)}}});
  try {
    iterate_orbit(f, pp({1, 1}), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateImage);
    EXPECT_NE(std::string(e.what()).find("iterate 1"), std::string::npos);
  }
}

TEST(ComposePower, MonomialSquare) {
  auto g = compose_power(fib(), 2);
  EXPECT_EQ(g.get_if<MonomialMap>()->A, (IntMatrix{{2, 1}, {1, 1}}));
}

TEST(ComposePower, SquaringMapSquared) {
  auto g = compose_power(power_map(1, 2), 2);
  const auto* p = g.get_if<ProjectiveMorphism>();
  ASSERT_NE(p, nullptr);
  EXPECT_EQ(p->degree, 4u);
  EXPECT_EQ(p->polys[0], mono(4, 0));
  EXPECT_EQ(p->polys[1], mono(0, 4));
}

TEST(ComposePower, FirstPowerIsItself) {
  auto f = binary({SparsePoly{{Exponent{2, 0}, Rat(1)}, {Exponent{0, 2}, Rat(1)}}, mono(1, 1, 3)});
  auto g = compose_power(f, 1);
  EXPECT_EQ(g.get_if<ProjectiveMorphism>()->polys, f.polys);
}

TEST(ComposePower, DegreeOverflow) {
  try {
    compose_power(power_map(1, 2), 13);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegreeOverflow);
  }
}

TEST(ComposePower, AgreesWithIteration) {
  std::vector<std::pair<SelfMap, State>> samples;
  // x^2 - y^2 + xy : y^2 + 2xy
  samples.emplace_back(binary({SparsePoly{{Exponent{2, 0}, Rat(1)}, {Exponent{0, 2}, Rat(-1)}, {Exponent{1, 1}, Rat(1)}},
                               SparsePoly{{Exponent{0, 2}, Rat(1)}, {Exponent{1, 1}, Rat(2)}}}),
                       pp({3, -2}));
  samples.emplace_back(power_map(2, 2), pp({1, 2, 3}));
  samples.emplace_back(fib(), torus({2, 3}));
  samples.emplace_back(make_monomial_map(IntMatrix{{2, 1}, {-1, 1}}), torus({-2, 5}));
  samples.emplace_back(make_linear_map(RatMatrix{{1, 1}, {0, 1}}), AffinePoint{{Rat(1, 2), Rat(3)}});
  samples.emplace_back(ProductMap{{power_map(1, 2), fib()}}, ProductState{{pp({2, 1}), torus({2, 3})}});
  for (const auto& [f, x] : samples) {
    for (unsigned n = 1; n <= 5; ++n) {
      auto t = iterate_orbit(f, x, n);
      EXPECT_EQ(evaluate(compose_power(f, n), x), t.points.back()) << "n=" << n << " x=" << state_to_string(x);
    }
  }
}

TEST(CheckMorphism, SquaringMapCertified) {
  auto c = check_morphism(power_map(1, 2));
  EXPECT_EQ(c.status, CertificateStatus::Certified);
  ASSERT_TRUE(c.resultant);
  EXPECT_EQ(*c.resultant, 1);
}

TEST(CheckMorphism, CommonZeroFails) {
  auto c = check_morphism(binary({mono(1, 1), mono(0, 2)}));
  EXPECT_EQ(c.status, CertificateStatus::Fail);
  EXPECT_EQ(*c.resultant, 0);
  ASSERT_TRUE(c.witness);
  EXPECT_EQ(*c.witness, pp({1, 0}));
}

TEST(CheckMorphism, IdentityCertified) {
  EXPECT_EQ(check_morphism(identity_projective(1)).status, CertificateStatus::Certified);
}

TEST(CheckMorphism, HigherDimensionIsHeuristic) {
  EXPECT_EQ(check_morphism(power_map(2, 2)).status, CertificateStatus::HeuristicPass);
  // (xz : yz : z^2) vanishes at (1:0:0).
  auto bad = make_projective_morphism(2, {SparsePoly{{Exponent{1, 0, 1}, Rat(1)}}, SparsePoly{{Exponent{0, 1, 1}, Rat(1)}},
                                          SparsePoly{{Exponent{0, 0, 2}, Rat(1)}}});
  auto c = check_morphism(bad);
  EXPECT_EQ(c.status, CertificateStatus::Fail);
  ASSERT_TRUE(c.witness);
}

TEST(HeightBounds, ProjectiveUpperBoundOnEveryStep) {
  std::vector<ProjectiveMorphism> maps{
      binary({SparsePoly{{Exponent{2, 0}, Rat(1)}, {Exponent{0, 2}, Rat(-1)}, {Exponent{1, 1}, Rat(1)}},
              SparsePoly{{Exponent{0, 2}, Rat(1)}, {Exponent{1, 1}, Rat(2)}}}),
      binary({SparsePoly{{Exponent{3, 0}, Rat(5)}, {Exponent{0, 3}, Rat(-7)}}, mono(1, 2, 3)}),
      power_map(2, 2)};
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<long> d(-30, 30);
  for (const auto& f : maps) {
    const double c = height_upper_constant(f);
    for (int s = 0; s < 10; ++s) {
      std::vector<Integer> raw(f.N + 1);
      for (auto& v : raw) v = d(rng);
      ProjPoint x;
      try {
        x = normalize_integers(raw);
      } catch (const Error&) {
        continue;
      }
      auto t = iterate_orbit(f, x, 6, 200'000);
      for (std::size_t k = 0; k + 1 < t.heights.size(); ++k)
        EXPECT_LE(t.heights[k + 1], f.degree * t.heights[k] + c + 1e-9);
    }
  }
}

TEST(HeightBounds, MonomialBoundOnEveryStep) {
  std::vector<IntMatrix> mats{IntMatrix{{1, 1}, {1, 0}}, IntMatrix{{2, -1}, {1, 3}}, IntMatrix{{0, -1}, {1, 0}}};
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<long> d(1, 50);
  for (const auto& A : mats) {
    SelfMap f = make_monomial_map(A);
    for (int s = 0; s < 10; ++s) {
      Rat a(d(rng), d(rng)), b(-d(rng), d(rng));
      a.canonicalize();
      b.canonicalize();
      auto t = iterate_orbit(f, TorusPoint({a, b}), 8);
      for (std::size_t k = 0; k + 1 < t.points.size(); ++k)
        EXPECT_LE(t.heights[k + 1], monomial_height_bound(A, t.points[k].as<CompactTorusPoint>()) + 1e-9);
    }
  }
}

TEST(HeightBounds, UnipotentRootEstimatorApproachesOne) {
  SelfMap f = make_linear_map(RatMatrix{{1, 1, 0}, {0, 1, 1}, {0, 0, 1}});
  for (auto x : {AffinePoint{{Rat(1), Rat(2), Rat(3)}}, AffinePoint{{Rat(-5, 7), Rat(2, 3), Rat(11)}}}) {
    auto t = iterate_orbit(f, x, 60);
    double root = std::pow(std::max(1.0, t.heights[60]), 1.0 / 60);
    EXPECT_LT(root, 1.05);
  }
}
