#pragma once

// Complete simplicial fans and fan-compatible lattice endomorphisms.

#include <memory>
#include <random>
#include <set>

#include "arithdyn/linalg.hpp"

namespace arithdyn {

/// Divisor sum_rho a_rho D_rho, one rational coefficient per ray.
struct TDivisor {
  std::vector<Rat> coefficients;
  friend bool operator==(const TDivisor&, const TDivisor&) = default;
};

class Fan {
 public:
  /// Validates and builds. Throws InvalidFan for malformed data and
  /// NotComplete when the cones do not cover R^n.
  Fan(std::size_t rank, std::vector<std::vector<Integer>> rays, std::vector<std::vector<std::size_t>> cones)
      : rank_(rank), rays_(std::move(rays)), cones_(std::move(cones)) {
    validate();
  }

  std::size_t rank() const { return rank_; }
  std::size_t num_rays() const { return rays_.size(); }
  const std::vector<std::vector<Integer>>& rays() const { return rays_; }
  const std::vector<Integer>& ray(std::size_t i) const { return rays_[i]; }
  const std::vector<std::vector<std::size_t>>& cones() const { return cones_; }

  /// Rays as rows (num_rays x rank).
  IntMatrix ray_matrix() const { return IntMatrix::from_rows(rays_); }

  /// Coordinates of v in the ray basis of cone c (may be negative).
  std::vector<Rat> cone_coordinates(std::size_t c, const std::vector<Rat>& v) const {
    return inverses_[c].apply(v);
  }

  /// Index of the first max cone containing v, with v's ray coordinates.
  std::optional<std::pair<std::size_t, std::vector<Rat>>> locate(const std::vector<Rat>& v) const {
    for (std::size_t c = 0; c < cones_.size(); ++c) {
      auto coords = cone_coordinates(c, v);
      if (std::all_of(coords.begin(), coords.end(), [](const Rat& q) { return sgn(q) >= 0; }))
        return std::make_pair(c, std::move(coords));
    }
    return std::nullopt;
  }

  /// Codimension-one cones: (shared rays, cone a, cone b, the ray of a not in
  /// b, the ray of b not in a).
  struct Wall {
    std::vector<std::size_t> face;
    std::size_t cone_a, cone_b, ray_a, ray_b;
  };
  const std::vector<Wall>& walls() const { return walls_; }

  /// The (P^1)^n fan: rays +e_i, -e_i for every i, in that order.
  bool is_product_of_lines() const {
    if (rays_.size() != 2 * rank_) return false;
    for (std::size_t i = 0; i < rank_; ++i)
      for (std::size_t j = 0; j < rank_; ++j) {
        Integer e = (i == j) ? 1 : 0;
        if (rays_[2 * i][j] != e || rays_[2 * i + 1][j] != -e) return false;
      }
    return true;
  }

 private:
  void validate() {
    if (rank_ == 0) fail(ErrorKind::InvalidFan, "rank must be positive");
    if (rays_.size() < rank_ + 1) fail(ErrorKind::NotComplete, "too few rays to be complete");
    for (const auto& r : rays_) {
      if (r.size() != rank_) fail(ErrorKind::InvalidFan, "ray of wrong length");
      Integer g = 0;
      for (const auto& c : r) g = gcd(g, c);
      if (g != 1) fail(ErrorKind::InvalidFan, "ray is not primitive");
    }
    if (cones_.empty()) fail(ErrorKind::NotComplete, "no cones");
    for (const auto& cone : cones_) {
      std::set<std::size_t> uniq(cone.begin(), cone.end());
      if (uniq.size() != cone.size()) fail(ErrorKind::InvalidFan, "repeated ray in cone");
      for (auto r : cone)
        if (r >= rays_.size()) fail(ErrorKind::InvalidFan, "cone references unknown ray");
      if (cone.size() != rank_)
        fail(ErrorKind::NotComplete, "maximal cone is not full-dimensional");
      RatMatrix b(rank_, rank_);
      for (std::size_t j = 0; j < rank_; ++j)
        for (std::size_t i = 0; i < rank_; ++i) b(i, j) = Rat(rays_[cone[j]][i]);
      auto inv = inverse(b);
      if (!inv) fail(ErrorKind::InvalidFan, "cone is not simplicial");
      inverses_.push_back(*inv);
    }
    for (std::size_t r = 0; r < rays_.size(); ++r) {
      bool used = std::any_of(cones_.begin(), cones_.end(), [&](const auto& c) {
        return std::find(c.begin(), c.end(), r) != c.end();
      });
      if (!used) fail(ErrorKind::InvalidFan, "ray not used by any cone");
    }

    // Facet pairing: every facet of a maximal cone is shared by exactly two
    // maximal cones lying on opposite sides of it.
    std::map<std::vector<std::size_t>, std::vector<std::size_t>> facets;
    for (std::size_t c = 0; c < cones_.size(); ++c) {
      for (std::size_t drop = 0; drop < rank_; ++drop) {
        std::vector<std::size_t> f;
        for (std::size_t j = 0; j < rank_; ++j)
          if (j != drop) f.push_back(cones_[c][j]);
        std::sort(f.begin(), f.end());
        facets[f].push_back(c);
      }
    }
    for (const auto& [face, owners] : facets) {
      if (owners.size() == 1) fail(ErrorKind::NotComplete, "facet bounded by a single cone");
      if (owners.size() > 2) fail(ErrorKind::InvalidFan, "facet shared by more than two cones");
      auto other_ray = [&](std::size_t c) {
        for (auto r : cones_[c])
          if (!std::binary_search(face.begin(), face.end(), r)) return r;
        return cones_[c][0];
      };
      std::size_t ra = other_ray(owners[0]), rb = other_ray(owners[1]);
      // rb must sit strictly on the far side of the facet seen from cone a.
      std::vector<Rat> v(rank_);
      for (std::size_t i = 0; i < rank_; ++i) v[i] = Rat(rays_[rb][i]);
      auto coords = cone_coordinates(owners[0], v);
      std::size_t pos = std::find(cones_[owners[0]].begin(), cones_[owners[0]].end(), ra) -
                        cones_[owners[0]].begin();
      if (sgn(coords[pos]) >= 0) fail(ErrorKind::InvalidFan, "adjacent cones overlap");
      walls_.push_back({face, owners[0], owners[1], ra, rb});
    }

    // Random directions: each lies in some cone, and in the interior of at
    // most one.
    std::mt19937_64 rng(0x5eed);
    std::uniform_int_distribution<long> dist(-1000, 1000);
    for (int trial = 0; trial < 64; ++trial) {
      std::vector<Rat> v(rank_);
      for (auto& x : v) x = Rat(dist(rng));
      std::size_t containing = 0, interior = 0;
      for (std::size_t c = 0; c < cones_.size(); ++c) {
        auto coords = cone_coordinates(c, v);
        bool in = std::all_of(coords.begin(), coords.end(), [](const Rat& q) { return sgn(q) >= 0; });
        bool strict = std::all_of(coords.begin(), coords.end(), [](const Rat& q) { return sgn(q) > 0; });
        containing += in;
        interior += strict;
      }
      if (containing == 0) fail(ErrorKind::NotComplete, "a direction is not covered by any cone");
      if (interior > 1) fail(ErrorKind::InvalidFan, "cone interiors overlap");
    }
  }

  std::size_t rank_;
  std::vector<std::vector<Integer>> rays_;
  std::vector<std::vector<std::size_t>> cones_;
  std::vector<RatMatrix> inverses_;
  std::vector<Wall> walls_;
};

inline std::shared_ptr<const Fan> product_of_lines_fan(std::size_t n) {
  std::vector<std::vector<Integer>> rays;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Integer> e(n, Integer(0));
    e[i] = 1;
    rays.push_back(e);
    e[i] = -1;
    rays.push_back(e);
  }
  std::vector<std::vector<std::size_t>> cones;
  for (std::size_t mask = 0; mask < (std::size_t(1) << n); ++mask) {
    std::vector<std::size_t> c;
    for (std::size_t i = 0; i < n; ++i) c.push_back(2 * i + ((mask >> i) & 1));
    cones.push_back(c);
  }
  return std::make_shared<const Fan>(n, std::move(rays), std::move(cones));
}

/// Lattice endomorphism phi of N mapping every maximal cone into a maximal
/// cone. On the torus it acts as x -> (prod_j x_j^{phi_ij})_i.
struct ToricEndo {
  std::shared_ptr<const Fan> fan;
  IntMatrix phi;
  std::vector<std::size_t> cone_map;
};

inline ToricEndo make_toric_endo(std::shared_ptr<const Fan> fan, IntMatrix phi) {
  const std::size_t n = fan->rank();
  if (phi.rows() != n || phi.cols() != n) fail(ErrorKind::IncompatibleEndo, "phi has wrong shape");
  if (determinant(phi) == 0) fail(ErrorKind::IncompatibleEndo, "phi is singular");
  RatMatrix phq = to_rat(phi);
  std::vector<std::size_t> cone_map;
  for (const auto& cone : fan->cones()) {
    bool found = false;
    for (std::size_t t = 0; t < fan->cones().size() && !found; ++t) {
      bool all_in = true;
      for (auto r : cone) {
        std::vector<Rat> u(n);
        for (std::size_t i = 0; i < n; ++i) u[i] = Rat(fan->ray(r)[i]);
        auto coords = fan->cone_coordinates(t, phq.apply(u));
        if (!std::all_of(coords.begin(), coords.end(), [](const Rat& q) { return sgn(q) >= 0; })) {
          all_in = false;
          break;
        }
      }
      if (all_in) {
        cone_map.push_back(t);
        found = true;
      }
    }
    if (!found) fail(ErrorKind::IncompatibleEndo, "some cone has no image cone");
  }
  return {std::move(fan), std::move(phi), std::move(cone_map)};
}

}  // namespace arithdyn
