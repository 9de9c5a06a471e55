#pragma once

// JSON forms of systems, states, fans and estimator outputs. Exact values
// travel as decimal strings; reals as shortest round-trip decimal strings.

#include <charconv>

#include <json.hpp>

#include "arithdyn/canonical_heights.hpp"

namespace arithdyn {

using Json = nlohmann::ordered_json;

/// Shortest decimal string that reads back to the same double.
inline std::string real_string(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

namespace detail {

[[noreturn]] inline void bad(const std::string& what) { fail(ErrorKind::InvalidInput, what); }

inline const Json& field(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) bad(std::string("missing field \"") + key + "\"");
  return j.at(key);
}

inline Integer json_integer(const Json& j) {
  if (j.is_number_integer()) return Integer(j.get<long>());
  if (j.is_string()) return parse_integer(j.get<std::string>());
  bad("expected an integer, got " + j.dump());
}

inline Rat json_rat(const Json& j) {
  if (j.is_number_integer()) return Rat(j.get<long>());
  if (j.is_string()) return parse_rat(j.get<std::string>());
  bad("expected a rational, got " + j.dump());
}

template <class T, class F>
Matrix<T> json_matrix(const Json& j, F entry) {
  if (!j.is_array() || j.empty()) bad("expected a non-empty matrix");
  std::vector<std::vector<T>> rows;
  for (const auto& r : j) {
    if (!r.is_array() || r.size() != j.front().size()) bad("ragged matrix");
    rows.emplace_back();
    for (const auto& e : r) rows.back().push_back(entry(e));
  }
  return Matrix<T>::from_rows(rows);
}

inline Json integers_json(const std::vector<Integer>& v) {
  Json a = Json::array();
  for (const auto& x : v) a.push_back(x.get_str());
  return a;
}

inline Json matrix_json(const IntMatrix& m) {
  Json a = Json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) r.push_back(m(i, j).get_si());
    a.push_back(r);
  }
  return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Fans and systems

inline std::shared_ptr<const Fan> fan_from_json(const Json& j) {
  const std::size_t rank = detail::field(j, "rank").get<std::size_t>();
  std::vector<std::vector<Integer>> rays;
  for (const auto& r : detail::field(j, "rays")) {
    rays.emplace_back();
    for (const auto& e : r) rays.back().push_back(detail::json_integer(e));
  }
  auto cones = detail::field(j, "cones").get<std::vector<std::vector<std::size_t>>>();
  return std::make_shared<const Fan>(rank, std::move(rays), std::move(cones));
}

inline Json fan_to_json(const Fan& fan) {
  Json rays = Json::array();
  for (const auto& r : fan.rays()) {
    Json a = Json::array();
    for (const auto& x : r) a.push_back(x.get_si());
    rays.push_back(a);
  }
  return Json{{"rank", fan.rank()}, {"rays", rays}, {"cones", fan.cones()}};
}

/// Descriptors: {"kind":"projective","N":1,"degree":2,"polys":[[["1",[2,0]]],...]},
/// {"kind":"monomial","A":[[1,1],[1,0]]}, {"kind":"linear","L":[["1","1"],["0","1"]]},
/// {"kind":"toric","fan":{...},"phi":[[2,0],[0,3]]}, {"kind":"product","components":[...]}.
inline SelfMap system_from_json(const Json& j) {
  const std::string kind = detail::field(j, "kind").get<std::string>();
  if (kind == "projective") {
    const std::size_t N = detail::field(j, "N").get<std::size_t>();
    std::vector<SparsePoly> polys;
    for (const auto& p : detail::field(j, "polys")) {
      SparsePoly poly;
      for (const auto& term : p) {
        if (!term.is_array() || term.size() != 2) detail::bad("polynomial term must be [coefficient, exponents]");
        auto e = term[1].get<Exponent>();
        if (e.size() != N + 1) detail::bad("exponent vector has wrong length");
        poly[e] += detail::json_rat(term[0]);
      }
      polys.push_back(std::move(poly));
    }
    auto f = make_projective_morphism(N, std::move(polys));
    if (j.contains("degree") && j.at("degree").get<unsigned>() != f.degree)
      detail::bad("declared degree " + j.at("degree").dump() + " differs from the polynomials' degree");
    return f;
  }
  if (kind == "monomial")
    return make_monomial_map(detail::json_matrix<Integer>(detail::field(j, "A"), detail::json_integer));
  if (kind == "linear") return make_linear_map(detail::json_matrix<Rat>(detail::field(j, "L"), detail::json_rat));
  if (kind == "toric") {
    auto fan = fan_from_json(detail::field(j, "fan"));
    return make_toric_endo(fan, detail::json_matrix<Integer>(detail::field(j, "phi"), detail::json_integer));
  }
  if (kind == "product") {
    ProductMap p;
    for (const auto& c : detail::field(j, "components")) p.components.push_back(system_from_json(c));
    if (p.components.empty()) detail::bad("product with no components");
    return p;
  }
  detail::bad("unknown system kind \"" + kind + "\"");
}

inline std::string system_kind(const SelfMap& f) {
  return std::visit(
      [](const auto& g) -> std::string {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ProjectiveMorphism>) return "projective";
        else if constexpr (std::is_same_v<T, MonomialMap>) return "monomial";
        else if constexpr (std::is_same_v<T, LinearUnipotentMap>) return "linear";
        else if constexpr (std::is_same_v<T, ToricEndo>) return "toric";
        else return "product";
      },
      f.value);
}

// ---------------------------------------------------------------------------
// States
//
// P^N points: ["3","4","5"]. Torus systems: one entry per coordinate, a
// rational string or "0" / "inf" for the boundary. Affine: rational strings.
// Products: one nested state per component.

inline State state_from_json(const SelfMap& f, const Json& j) {
  if (!j.is_array()) detail::bad("a point must be a JSON array");
  State s = std::visit(
      [&](const auto& g) -> State {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, ProjectiveMorphism>) {
          std::vector<Rat> c;
          for (const auto& e : j) c.push_back(detail::json_rat(e));
          return normalize(c);
        } else if constexpr (std::is_same_v<T, MonomialMap> || std::is_same_v<T, ToricEndo>) {
          std::vector<ProjPoint> fs;
          for (const auto& e : j) {
            if (e.is_string() && e.get<std::string>() == "inf") {
              fs.push_back(normalize_integers({Integer(0), Integer(1)}));
            } else {
              fs.push_back(normalize({Rat(1), detail::json_rat(e)}));
            }
          }
          return CompactTorusPoint(std::move(fs));
        } else if constexpr (std::is_same_v<T, LinearUnipotentMap>) {
          AffinePoint a;
          for (const auto& e : j) a.coords.push_back(detail::json_rat(e));
          return a;
        } else {
          if (j.size() != g.components.size()) detail::bad("product point needs one part per component");
          ProductState p;
          for (std::size_t i = 0; i < j.size(); ++i) p.parts.push_back(state_from_json(g.components[i], j[i]));
          return p;
        }
      },
      f.value);
  check_domain(f, s);
  return s;
}

inline Json state_to_json(const State& s) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        Json a = Json::array();
        if constexpr (std::is_same_v<T, ProjPoint>) {
          for (const auto& c : v.coords()) a.push_back(c.get_str());
        } else if constexpr (std::is_same_v<T, CompactTorusPoint>) {
          for (std::size_t i = 0; i < v.rank(); ++i) {
            auto c = v.coordinate(i);
            a.push_back(c ? c->get_str() : (sgn(v[i][0]) == 0 ? "inf" : "0"));
          }
        } else if constexpr (std::is_same_v<T, AffinePoint>) {
          for (const auto& c : v.coords) a.push_back(c.get_str());
        } else {
          for (const auto& p : v.parts) a.push_back(state_to_json(p));
        }
        return a;
      },
      s.value);
}

// ---------------------------------------------------------------------------
// Reports

inline Json to_json(const DegreeReport& r) {
  return Json{{"interval", {real_string(r.delta_lower), real_string(r.delta_upper)}},
              {"method", std::string(to_string(r.method))},
              {"witness", r.witness}};
}

inline Json to_json(const AlphaEstimate& a) {
  Json ratios = Json::array(), roots = Json::array();
  for (double x : a.ratio_sequence) ratios.push_back(real_string(x));
  for (double x : a.root_sequence) roots.push_back(real_string(x));
  return Json{{"point_value", a.point_value ? Json(real_string(*a.point_value)) : Json(nullptr)},
              {"converged", a.converged},
              {"converged_at", a.converged_at ? Json(*a.converged_at) : Json(nullptr)},
              {"window", a.window},
              {"tolerance", real_string(a.tolerance)},
              {"truncated", a.truncated},
              {"ratio_sequence", ratios},
              {"root_sequence", roots}};
}

inline Json to_json(const EigenMatch& m) {
  return Json{{"nearest", real_string(m.nearest)},
              {"gap", real_string(m.gap)},
              {"violation", m.violation},
              {"within_delta", m.within_delta}};
}

inline Json to_json(const CanonicalHeightEstimate& e) {
  return Json{{"value", real_string(e.value)},
              {"error_bar", real_string(e.error_bar)},
              {"n_used", e.n_used},
              {"discrepancy_max", real_string(e.discrepancy_max)},
              {"rigor", std::string(to_string(e.rigor))},
              {"budget_exceeded", e.budget_exceeded}};
}

inline Json to_json(const AmpleHeightEstimate& a) {
  Json terms = Json::array();
  for (const auto& t : a.terms) terms.push_back(to_json(t));
  return Json{{"value", real_string(a.value)},
              {"error_bar", real_string(a.error_bar)},
              {"shift", a.shift},
              {"budget_exceeded", a.budget_exceeded},
              {"terms", terms}};
}

inline Json to_json(const ZfEntry& e) {
  return Json{{"point", state_to_json(e.point)},
              {"hhat", real_string(e.hhat)},
              {"error_bar", real_string(e.error_bar)},
              {"predicted_member", e.predicted_member}};
}

inline Json to_json(const ZfReport& r) {
  Json pts = Json::array(), bad = Json::array();
  for (const auto& e : r.points) pts.push_back(to_json(e));
  for (const auto& e : r.violations) bad.push_back(to_json(e));
  return Json{{"height_bound", real_string(r.height_bound)},
              {"tol", real_string(r.tol)},
              {"enumerated", r.enumerated},
              {"count", r.points.size()},
              {"violation_count", r.violations.size()},
              {"points", pts},
              {"violations", bad}};
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180)

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) out += (i ? "," : "") + csv_field(fields[i]);
  return out + "\r\n";
}

inline std::string zf_csv(const ZfReport& r) {
  std::string out = csv_row({"point", "hhat", "error_bar", "predicted_member"});
  for (const auto& e : r.points)
    out += csv_row({state_to_string(e.point), real_string(e.hhat), real_string(e.error_bar), e.predicted_member ? "true" : "false"});
  return out;
}

}  // namespace arithdyn
