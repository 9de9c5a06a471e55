#pragma once

// Campaign files, verdict reports and the verify pipeline behind the CLI.

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "arithdyn/serialize.hpp"

namespace arithdyn {

inline constexpr std::string_view kToolName = "arithdyn";
inline constexpr std::string_view kToolVersion = "0.1.0";

struct Budgets {
  std::size_t max_iters = 25;
  std::size_t bit_budget = kDefaultBitBudget;
  double precision = 1e-9;
  double tolerance = 1e-3;
  std::size_t window = 5;
};

enum class DensityTag { None, DenseVerified, DenseHeuristic, NotDense };

inline std::string_view to_string(DensityTag t) {
  switch (t) {
    case DensityTag::None: return "none";
    case DensityTag::DenseVerified: return "dense-verified";
    case DensityTag::DenseHeuristic: return "dense-heuristic";
    case DensityTag::NotDense: return "not-dense";
  }
  return "?";
}

inline DensityTag parse_density_tag(const std::string& s) {
  if (s == "dense-verified") return DensityTag::DenseVerified;
  if (s == "dense-heuristic") return DensityTag::DenseHeuristic;
  if (s == "not-dense") return DensityTag::NotDense;
  if (s == "none" || s.empty()) return DensityTag::None;
  fail(ErrorKind::InvalidInput, "unknown density tag \"" + s + "\"");
}

struct SpecPoint {
  State state;
  Json raw;
  DensityTag tag = DensityTag::None;
};

struct SystemSpec {
  std::string name;
  Json system_json;
  SelfMap system;
  std::vector<SpecPoint> points;
  Budgets budgets;
};

/// Flag and environment overrides; unset fields keep the values from the system file.
struct Overrides {
  std::optional<std::size_t> max_iters, bit_budget, jobs;
  std::optional<double> precision, tolerance;
  std::optional<std::uint64_t> seed;
};

namespace detail {

template <class T>
std::optional<T> parse_env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  std::istringstream in(v);
  T x;
  if (!(in >> x) || !in.eof()) fail(ErrorKind::InvalidInput, std::string("bad value for ") + name + ": " + v);
  return x;
}

}  // namespace detail

/// ARITHDYN_MAX_ITERS, ARITHDYN_BIT_BUDGET, ARITHDYN_PRECISION,
/// ARITHDYN_TOLERANCE, ARITHDYN_JOBS, ARITHDYN_SEED.
inline Overrides env_overrides() {
  Overrides o;
  o.max_iters = detail::parse_env<std::size_t>("ARITHDYN_MAX_ITERS");
  o.bit_budget = detail::parse_env<std::size_t>("ARITHDYN_BIT_BUDGET");
  o.precision = detail::parse_env<double>("ARITHDYN_PRECISION");
  o.tolerance = detail::parse_env<double>("ARITHDYN_TOLERANCE");
  o.jobs = detail::parse_env<std::size_t>("ARITHDYN_JOBS");
  o.seed = detail::parse_env<std::uint64_t>("ARITHDYN_SEED");
  return o;
}

/// Fields set in `top` win.
inline Overrides merge(const Overrides& base, const Overrides& top) {
  Overrides o = base;
  if (top.max_iters) o.max_iters = top.max_iters;
  if (top.bit_budget) o.bit_budget = top.bit_budget;
  if (top.precision) o.precision = top.precision;
  if (top.tolerance) o.tolerance = top.tolerance;
  if (top.jobs) o.jobs = top.jobs;
  if (top.seed) o.seed = top.seed;
  return o;
}

inline void apply(Budgets& b, const Overrides& o) {
  if (o.max_iters) b.max_iters = *o.max_iters;
  if (o.bit_budget) b.bit_budget = *o.bit_budget;
  if (o.precision) b.precision = *o.precision;
  if (o.tolerance) b.tolerance = *o.tolerance;
}

inline Json to_json(const Budgets& b) {
  return Json{{"max_iters", b.max_iters},
              {"bit_budget", b.bit_budget},
              {"precision", real_string(b.precision)},
              {"tolerance", real_string(b.tolerance)},
              {"window", b.window}};
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::InvalidInput, "cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, path + ": " + e.what());
  }
}

inline SystemSpec parse_spec(const Json& j) {
  SystemSpec s;
  s.name = j.value("name", std::string("unnamed"));
  s.system_json = detail::field(j, "system");
  s.system = system_from_json(s.system_json);
  if (j.contains("budgets")) {
    const auto& b = j.at("budgets");
    s.budgets.max_iters = b.value("max_iters", s.budgets.max_iters);
    s.budgets.bit_budget = b.value("bit_budget", s.budgets.bit_budget);
    s.budgets.precision = b.value("precision", s.budgets.precision);
    s.budgets.tolerance = b.value("tolerance", s.budgets.tolerance);
    s.budgets.window = b.value("window", s.budgets.window);
  }
  if (j.contains("points")) {
    for (const auto& p : j.at("points")) {
      SpecPoint sp;
      sp.raw = p.is_object() ? detail::field(p, "point") : p;
      if (p.is_object() && p.contains("density")) sp.tag = parse_density_tag(p.at("density").get<std::string>());
      try {
        sp.state = state_from_json(s.system, sp.raw);
      } catch (const Error& e) {
        fail(e.kind(), std::string(e.what()) + " (point " + sp.raw.dump() + ")");
      }
      if (const auto* te = s.system.get_if<ToricEndo>(); te && !te->fan->is_product_of_lines() &&
                                                         !sp.state.as<CompactTorusPoint>().in_torus())
        fail(ErrorKind::DomainViolation, "toric orbit points must lie in the torus: " + sp.raw.dump());
      s.points.push_back(std::move(sp));
    }
  }
  return s;
}

inline SystemSpec load_spec(const std::string& path) { return parse_spec(read_json_file(path)); }

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t x) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string config_hash(const SystemSpec& s) {
  Json j{{"system", s.system_json}, {"budgets", to_json(s.budgets)}};
  Json pts = Json::array();
  for (const auto& p : s.points) pts.push_back(Json{{"point", p.raw}, {"density", std::string(to_string(p.tag))}});
  j["points"] = pts;
  return hex64(fnv1a(j.dump()));
}

// ---------------------------------------------------------------------------
// Verdicts

enum class KscVerdict { Consistent, Inconsistent, Inconclusive };

constexpr std::string_view to_string(KscVerdict v) {
  switch (v) {
    case KscVerdict::Consistent: return "consistent";
    case KscVerdict::Inconsistent: return "inconsistent";
    case KscVerdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

/// Consistent iff alpha converged and |alpha - midpoint(delta)| is within
/// the alpha tolerance plus the half-width of the delta enclosure.
inline KscVerdict ksc_verdict(const AlphaEstimate& a, const DegreeReport& d) {
  if (!a.converged || !a.point_value) return KscVerdict::Inconclusive;
  const double combined = a.tolerance + 0.5 * (d.delta_upper - d.delta_lower);
  return std::fabs(*a.point_value - d.midpoint()) <= combined ? KscVerdict::Consistent : KscVerdict::Inconsistent;
}

struct PointResult {
  Json json;
  std::optional<KscVerdict> verdict;
};

inline PointResult evaluate_point(const SystemSpec& s, const SpecPoint& p, const DegreeReport& delta,
                                  const std::vector<double>& spectrum, const std::optional<Decomposition>& dec) {
  PointResult r;
  const auto& b = s.budgets;
  auto orbit = iterate_orbit(s.system, p.state, b.max_iters, b.bit_budget);
  auto alpha = arithmetic_degree(orbit, b.tolerance, b.window);
  Json j{{"point", state_to_json(p.state)}, {"density_tag", std::string(to_string(p.tag))}};
  if (const auto* m = s.system.get_if<MonomialMap>()) {
    const auto& x = p.state.as<CompactTorusPoint>();
    std::string h = "not-applicable";
    if (x.in_torus()) {
      try {
        h = std::string(to_string(density_heuristic(m->A, x.to_torus())));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::FactorizationBudgetExceeded) throw;
        h = "inconclusive";
      }
    }
    j["density_heuristic"] = h;
  } else {
    j["density_heuristic"] = "not-applicable";
  }
  Json heights = Json::array();
  for (double h : orbit.heights) heights.push_back(real_string(h));
  j["orbit_heights"] = heights;
  j["alpha"] = to_json(alpha);
  j["eigen_match"] = alpha.converged ? to_json(eigenvalue_match(alpha, delta, spectrum)) : Json(nullptr);
  j["hhat"] = dec ? to_json(ample_canonical_height(*dec, p.state)) : Json(nullptr);
  if (p.tag == DensityTag::DenseVerified || p.tag == DensityTag::DenseHeuristic) {
    r.verdict = ksc_verdict(alpha, delta);
    j["ksc_verdict"] = std::string(to_string(*r.verdict));
  } else {
    j["ksc_verdict"] = nullptr;
  }
  r.json = std::move(j);
  return r;
}

struct CampaignResult {
  Json report;
  std::string csv;
  int exit_code = 0;
};

inline std::string utc_timestamp() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Full campaign; points run on `jobs` threads and are reported in input order.
inline CampaignResult run_campaign(const SystemSpec& s, std::size_t jobs = 1) {
  CampaignResult out;
  const auto delta = dynamical_degree(s.system, s.budgets.precision);
  const auto spectrum = spectrum_moduli(s.system);
  std::optional<Decomposition> dec;
  try {
    dec = decompose(s.system);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::MissingDecomposition) throw;
  }
  std::vector<PointResult> results(s.points.size());
  parallel_for(s.points.size(), jobs, [&](std::size_t i) {
    try {
      results[i] = evaluate_point(s, s.points[i], delta, spectrum, dec);
    } catch (const Error& e) {
      fail(e.kind(), std::string(e.what()) + " (point " + s.points[i].raw.dump() + ")");
    }
  });
  std::size_t counts[3] = {0, 0, 0};
  Json pts = Json::array();
  out.csv = csv_row({"point", "density_tag", "alpha", "converged", "delta_lower", "delta_upper", "ksc_verdict", "hhat"});
  for (auto& r : results) {
    if (r.verdict) ++counts[static_cast<int>(*r.verdict)];
    const auto& j = r.json;
    out.csv += csv_row({state_to_string(s.points[&r - results.data()].state), j["density_tag"].get<std::string>(),
                        j["alpha"]["point_value"].is_null() ? "" : j["alpha"]["point_value"].get<std::string>(),
                        j["alpha"]["converged"].get<bool>() ? "true" : "false", real_string(delta.delta_lower),
                        real_string(delta.delta_upper),
                        j["ksc_verdict"].is_null() ? "" : j["ksc_verdict"].get<std::string>(),
                        j["hhat"].is_null() ? "" : j["hhat"]["value"].get<std::string>()});
    pts.push_back(std::move(r.json));
  }
  out.exit_code = counts[static_cast<int>(KscVerdict::Inconsistent)] > 0 ? 1 : 0;
  out.report = Json{{"provenance",
                     {{"tool", kToolName}, {"version", kToolVersion}, {"config_hash", config_hash(s)},
                      {"timestamp", utc_timestamp()}}},
                    {"name", s.name},
                    {"system", {{"kind", system_kind(s.system)}, {"descriptor", s.system_json}}},
                    {"budgets", to_json(s.budgets)},
                    {"delta", to_json(delta)},
                    {"spectrum_moduli", [&] {
                       Json a = Json::array();
                       for (double x : spectrum) a.push_back(real_string(x));
                       return a;
                     }()},
                    {"decomposition", dec ? Json{{"period", dec->period}, {"top_multiplier", dec->top.get_str()}}
                                          : Json(nullptr)},
                    {"points", pts},
                    {"summary",
                     {{"consistent", counts[0]}, {"inconsistent", counts[1]}, {"inconclusive", counts[2]}}},
                    {"exit_code", out.exit_code}};
  return out;
}

/// Error report written in place of a campaign report.
inline Json error_report(const std::string& kind, const std::string& message) {
  return Json{{"provenance", {{"tool", kToolName}, {"version", kToolVersion}, {"timestamp", utc_timestamp()}}},
              {"error", {{"kind", kind}, {"message", message}}},
              {"exit_code", 2}};
}

/// The report with the timestamp removed, for comparing runs.
inline std::string without_timestamp(const std::string& report) {
  Json j = Json::parse(report);
  if (j.contains("provenance")) j["provenance"].erase("timestamp");
  return j.dump();
}

}  // namespace arithdyn
