#include <gtest/gtest.h>

#include <random>

#include "arithdyn/degrees.hpp"
#include "arithdyn/toric.hpp"

using namespace arithdyn;

namespace {

using Rays = std::vector<std::vector<Integer>>;
using Cones = std::vector<std::vector<std::size_t>>;

std::shared_ptr<const Fan> p2() {
  return std::make_shared<const Fan>(2, Rays{{1, 0}, {0, 1}, {-1, -1}}, Cones{{0, 1}, {1, 2}, {2, 0}});
}

// Fan in the file layout: rays e1, -e1, e2, -e2.
std::shared_ptr<const Fan> p1xp1() {
  return std::make_shared<const Fan>(2, Rays{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, Cones{{0, 2}, {2, 1}, {1, 3}, {3, 0}});
}

std::shared_ptr<const Fan> hirzebruch1() {
  return std::make_shared<const Fan>(2, Rays{{1, 0}, {0, 1}, {-1, 1}, {0, -1}}, Cones{{0, 1}, {1, 2}, {2, 3}, {3, 0}});
}

std::shared_ptr<const Fan> p1() { return std::make_shared<const Fan>(1, Rays{{1}, {-1}}, Cones{{0}, {1}}); }

TDivisor div(std::initializer_list<long> a) {
  TDivisor d;
  for (long x : a) d.coefficients.emplace_back(x);
  return d;
}

std::vector<Integer> iv(std::initializer_list<long> a) { return std::vector<Integer>(a.begin(), a.end()); }

TorusPoint random_torus_point(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<long> d(1, 40);
  std::vector<Rat> c(n);
  for (auto& q : c) {
    q = Rat(d(rng) * (d(rng) % 2 ? 1 : -1), d(rng));
    q.canonicalize();
  }
  return TorusPoint(c);
}

}  // namespace

TEST(Fan, InvalidInputs) {
  auto kind = [](auto make) {
    try {
      make();
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::InvalidInput;
  };
  // Missing the cone between -e1 and -e2.
  EXPECT_EQ(kind([] { Fan(2, Rays{{1, 0}, {-1, 0}, {0, 1}, {0, -1}}, Cones{{0, 2}, {2, 1}, {3, 0}}); }),
            ErrorKind::NotComplete);
  EXPECT_EQ(kind([] { Fan(2, Rays{{2, 0}, {0, 1}, {-1, -1}}, Cones{{0, 1}, {1, 2}, {2, 0}}); }), ErrorKind::InvalidFan);
  EXPECT_EQ(kind([] { Fan(1, Rays{{1}}, Cones{{0}}); }), ErrorKind::NotComplete);
}

TEST(ClassLattice, ProjectivePlane) {
  auto L = class_lattice(*p2());
  EXPECT_EQ(L.rank(), 1u);
  EXPECT_TRUE(L.equivalent(div({1, 0, 0}), div({0, 1, 0})));
  EXPECT_TRUE(L.equivalent(div({1, 0, 0}), div({0, 0, 1})));
}

TEST(ClassLattice, ProductOfLines) {
  auto L = class_lattice(*p1xp1());
  EXPECT_EQ(L.rank(), 2u);
  EXPECT_TRUE(L.equivalent(div({1, 0, 0, 0}), div({0, 1, 0, 0})));
  EXPECT_TRUE(L.equivalent(div({0, 0, 1, 0}), div({0, 0, 0, 1})));
  EXPECT_FALSE(L.equivalent(div({1, 0, 0, 0}), div({0, 0, 1, 0})));
  EXPECT_EQ(class_lattice(*p1()).rank(), 1u);
}

TEST(ClassLattice, SectionIsRightInverse) {
  for (auto fan : {p2(), p1xp1(), hirzebruch1()}) {
    auto L = class_lattice(*fan);
    EXPECT_EQ(L.G * L.section, IntMatrix::identity(L.rank()));
  }
}

TEST(NefCone, ProjectivePlane) {
  auto nd = nef_cone(*p2());
  ASSERT_EQ(nd.extremal_classes.size(), 1u);
  EXPECT_EQ(nd.extremal_classes[0], iv({1}));
  EXPECT_TRUE(class_lattice(*p2()).equivalent(nd.extremal_divisors[0], div({0, 0, 1})));
}

TEST(NefCone, ProductOfLinesHasTheTwoRulings) {
  auto fan = p1xp1();
  auto nd = nef_cone(*fan);
  auto L = class_lattice(*fan);
  ASSERT_EQ(nd.extremal_divisors.size(), 2u);
  EXPECT_TRUE(L.equivalent(nd.extremal_divisors[0], div({1, 0, 0, 0})));
  EXPECT_TRUE(L.equivalent(nd.extremal_divisors[1], div({0, 0, 1, 0})));
}

TEST(NefCone, HirzebruchSurface) {
  // Rays u0=(1,0), u1=(0,1), u2=(-1,1), u3=(0,-1): u0 + u2 = u1 and u1 + u3 = 0.
  // Nef cone generated by the fibre class [D0] and the class [D3] of the
  // positive section.
  auto fan = hirzebruch1();
  auto nd = nef_cone(*fan);
  auto L = class_lattice(*fan);
  ASSERT_EQ(nd.extremal_divisors.size(), 2u);
  std::set<std::vector<Rat>> got, expect;
  for (const auto& d : nd.extremal_divisors) got.insert(L.classes(d));
  expect.insert(L.classes(div({1, 0, 0, 0})));
  expect.insert(L.classes(div({0, 0, 0, 1})));
  EXPECT_EQ(got, expect);
  // The exceptional curve class D1 is not nef.
  EXPECT_FALSE(is_nef(*fan, div({0, 1, 0, 0})));
  for (const auto& d : nd.extremal_divisors) EXPECT_TRUE(is_nef(*fan, d));
}

TEST(ExtremeRays, SquareCone) {
  // y1 >= 0, y2 >= 0, y1 + y2 >= 0, 2 y1 - y2 + y3 >= 0 ... a 3d cone check.
  std::vector<std::vector<Rat>> rows{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, -1}};
  auto rays = extreme_rays(rows, 3);
  std::set<std::vector<Integer>> got(rays.begin(), rays.end());
  std::set<std::vector<Integer>> expect{iv({1, 0, 0}), iv({0, 1, 0}), iv({1, 0, 1}), iv({0, 1, 1})};
  EXPECT_EQ(got, expect);
}

TEST(Pullback, Examples) {
  EXPECT_EQ(pullback_matrix(make_toric_endo(p1xp1(), IntMatrix{{2, 0}, {0, 3}})), (IntMatrix{{2, 0}, {0, 3}}));
  EXPECT_EQ(pullback_matrix(make_toric_endo(p2(), IntMatrix{{2, 0}, {0, 2}})), (IntMatrix{{2}}));
  for (auto fan : {p2(), p1xp1(), hirzebruch1(), p1()}) {
    auto id = IntMatrix::identity(fan->rank());
    auto P = pullback_matrix(make_toric_endo(fan, id));
    EXPECT_EQ(P, IntMatrix::identity(P.rows()));
  }
}

TEST(Pullback, SquareOfMapIsSquareOfPullback) {
  std::vector<ToricEndo> endos{make_toric_endo(p1xp1(), IntMatrix{{2, 0}, {0, 3}}),
                               make_toric_endo(p1xp1(), IntMatrix{{0, 2}, {2, 0}}),
                               make_toric_endo(p1xp1(), IntMatrix{{0, -1}, {1, 0}}),
                               make_toric_endo(p2(), IntMatrix{{3, 0}, {0, 3}}),
                               make_toric_endo(hirzebruch1(), IntMatrix{{2, 0}, {0, 2}})};
  for (const auto& f : endos) {
    auto P = pullback_matrix(f);
    auto f2 = make_toric_endo(f.fan, f.phi * f.phi);
    EXPECT_EQ(pullback_matrix(f2), P * P);
  }
}

TEST(Pullback, IncompatibleEndo) {
  try {
    make_toric_endo(p2(), IntMatrix{{1, 1}, {0, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::IncompatibleEndo);
  }
}

TEST(RayFixing, Examples) {
  auto fan = p1xp1();
  auto nd = nef_cone(*fan);
  auto a = ray_fixing_iterate(nd, pullback_matrix(make_toric_endo(fan, IntMatrix{{2, 0}, {0, 3}})));
  EXPECT_EQ(a.period, 1u);
  EXPECT_EQ(a.lambdas, iv({2, 3}));

  auto b = ray_fixing_iterate(nd, pullback_matrix(make_toric_endo(fan, IntMatrix{{0, 2}, {2, 0}})));
  EXPECT_EQ(b.period, 2u);
  EXPECT_EQ(b.lambdas, iv({4, 4}));
  EXPECT_EQ(b.permutation, (std::vector<std::size_t>{1, 0}));

  auto c = ray_fixing_iterate(nd, pullback_matrix(make_toric_endo(fan, IntMatrix::identity(2))));
  EXPECT_EQ(c.period, 1u);
  EXPECT_EQ(c.lambdas, iv({1, 1}));
}

TEST(RayFixing, NotPermutation) {
  NefData nd = nef_cone(*p1xp1());
  try {
    ray_fixing_iterate(nd, IntMatrix{{1, 1}, {0, 1}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotPermutation);
  }
}

TEST(Fibration, ProductOfLinesRuling) {
  auto fan = p1xp1();
  auto fib = semiample_fibration(*fan, div({0, 0, 1, 0}));
  EXPECT_EQ(fib.base_dim(), 1u);
  EXPECT_EQ(fib.lattice_points, (std::vector<std::vector<Integer>>{iv({0, -1}), iv({0, 0})}));
  TorusPoint x({Rat(7, 2), Rat(5, 3)});
  EXPECT_EQ(fib.project(x), normalize({Rat(1), Rat(5, 3)}));
  EXPECT_DOUBLE_EQ(fib.height(x), std::log(5.0));
}

TEST(Fibration, ProjectivePlaneHyperplane) {
  auto fib = semiample_fibration(*p2(), div({0, 0, 1}));
  EXPECT_EQ(fib.lattice_points.size(), 3u);
  EXPECT_EQ(fib.base_dim(), 2u);
  TorusPoint x({Rat(2), Rat(-3, 5)});
  // Lattice points (0,0), (0,1), (1,0) in lexicographic order.
  EXPECT_EQ(fib.project(x), normalize({Rat(1), Rat(-3, 5), Rat(2)}));
}

TEST(Fibration, ZeroDivisor) {
  auto fib = semiample_fibration(*p1xp1(), div({0, 0, 0, 0}));
  EXPECT_EQ(fib.lattice_points.size(), 1u);
  EXPECT_EQ(fib.base_dim(), 0u);
  EXPECT_EQ(fib.height(TorusPoint({Rat(9), Rat(11)})), 0.0);
}

TEST(Fibration, Errors) {
  try {
    semiample_fibration(*hirzebruch1(), div({0, 1, 0, 0}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotNef);
  }
}

TEST(Fibration, HeightTransformsWithEigenvalue) {
  // For f^* D ~ lambda D: |h_D(f(x)) - lambda h_D(x)| stays bounded.
  auto fan = p1xp1();
  auto f = make_toric_endo(fan, IntMatrix{{2, 0}, {0, 3}});
  auto nd = nef_cone(*fan);
  auto rf = ray_fixing_iterate(nd, pullback_matrix(f));
  std::mt19937_64 rng(17);
  for (std::size_t i = 0; i < nd.extremal_divisors.size(); ++i) {
    auto fib = semiample_fibration(*fan, nd.extremal_divisors[i]);
    const double lambda = rf.lambdas[i].get_d();
    double observed = 0.0;
    for (int s = 0; s < 50; ++s) {
      auto x = random_torus_point(rng, 2);
      auto fx = monomial_apply(f.phi, CompactTorusPoint(x));
      double d = std::fabs(fib.height(fx) - lambda * fib.height(x));
      observed = std::max(observed, d);
    }
    EXPECT_LE(observed, 1e-9);  // coordinate projections are exact here
  }
}

TEST(InducedBaseMap, ProductOfLines) {
  auto fan = p1xp1();
  auto f = make_toric_endo(fan, IntMatrix{{2, 0}, {0, 3}});
  auto g2 = induced_base_map(f, semiample_fibration(*fan, div({0, 0, 1, 0})), Integer(3));
  EXPECT_EQ(g2.A, (IntMatrix{{3}}));
  auto g1 = induced_base_map(f, semiample_fibration(*fan, div({1, 0, 0, 0})), Integer(2));
  EXPECT_EQ(g1.A, (IntMatrix{{2}}));
  auto id = make_toric_endo(fan, IntMatrix::identity(2));
  EXPECT_EQ(induced_base_map(id, semiample_fibration(*fan, div({1, 0, 0, 0})), Integer(1)).A, (IntMatrix{{1}}));
}

TEST(InducedBaseMap, ProjectivePlaneAndHirzebruch) {
  auto f = make_toric_endo(p2(), IntMatrix{{2, 0}, {0, 2}});
  auto g = induced_base_map(f, semiample_fibration(*p2(), div({0, 0, 1})), Integer(2));
  EXPECT_EQ(g.A, (IntMatrix{{2, 0}, {0, 2}}));
  auto h = make_toric_endo(hirzebruch1(), IntMatrix{{3, 0}, {0, 3}});
  auto nd = nef_cone(*hirzebruch1());
  for (const auto& D : nd.extremal_divisors) {
    auto fib = semiample_fibration(*hirzebruch1(), D);
    EXPECT_NO_THROW(induced_base_map(h, fib, Integer(3)));
  }
}

TEST(InducedBaseMap, WrongEigenvalueRejected) {
  auto fan = p1xp1();
  auto f = make_toric_endo(fan, IntMatrix{{2, 0}, {0, 3}});
  EXPECT_THROW(induced_base_map(f, semiample_fibration(*fan, div({0, 0, 1, 0})), Integer(2)), Error);
}

TEST(ToricDegree, ContainsLargestMultiplier) {
  auto fan = p1xp1();
  for (auto phi : {IntMatrix{{2, 0}, {0, 3}}, IntMatrix{{0, 2}, {2, 0}}, IntMatrix{{5, 0}, {0, 2}}}) {
    auto f = make_toric_endo(fan, phi);
    auto rf = ray_fixing_iterate(nef_cone(*fan), pullback_matrix(f));
    Integer lmax = *std::max_element(rf.lambdas.begin(), rf.lambdas.end());
    auto d = dynamical_degree(f, 1e-9).interval();
    auto dn = interval_pow(d, static_cast<unsigned>(rf.period));
    EXPECT_LE(dn.lower, lmax.get_d() + 1e-9);
    EXPECT_GE(dn.upper, lmax.get_d() - 1e-9);
  }
}
