// arithdyn: command-line front end for degree, height and toric computations.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "arithdyn/harness.hpp"

using namespace arithdyn;

namespace {

struct Common {
  std::string spec;
  std::string out;
  std::string csv;
  Overrides flags;
  std::size_t max_iters = 0, bit_budget = 0, jobs = 0;
  double precision = 0, tolerance = 0;
  std::uint64_t seed = 0;
};

void add_budget_flags(CLI::App* cmd, Common& c) {
  cmd->add_option("--max-iters", c.max_iters, "Orbit length");
  cmd->add_option("--bit-budget", c.bit_budget, "Total bits per orbit");
  cmd->add_option("--precision", c.precision, "Width of the dynamical degree enclosure");
  cmd->add_option("--tolerance", c.tolerance, "Arithmetic degree convergence tolerance");
  cmd->add_option("--jobs", c.jobs, "Worker threads");
  cmd->add_option("--seed", c.seed, "Seed for random sampling");
  cmd->add_option("--out", c.out, "Write the JSON report here instead of stdout");
  cmd->add_option("--csv", c.csv, "Also write a CSV summary");
}

Overrides collect(CLI::App* cmd, const Common& c) {
  Overrides o;
  if (cmd->count("--max-iters")) o.max_iters = c.max_iters;
  if (cmd->count("--bit-budget")) o.bit_budget = c.bit_budget;
  if (cmd->count("--precision")) o.precision = c.precision;
  if (cmd->count("--tolerance")) o.tolerance = c.tolerance;
  if (cmd->count("--jobs")) o.jobs = c.jobs;
  if (cmd->count("--seed")) o.seed = c.seed;
  return merge(env_overrides(), o);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::InvalidInput, "cannot write " + path);
  f << text;
}

void emit(const Common& c, const Json& j) {
  const std::string text = j.dump(2) + "\n";
  if (c.out.empty()) {
    std::cout << text;
  } else {
    write_text(c.out, text);
  }
}

SystemSpec load(const Common& c, const Overrides& o) {
  SystemSpec s = load_spec(c.spec);
  apply(s.budgets, o);
  return s;
}

std::vector<SpecPoint> selected_points(const SystemSpec& s, const std::string& point) {
  if (point.empty()) return s.points;
  SpecPoint p;
  try {
    p.raw = Json::parse(point);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidInput, "--point is not JSON: " + std::string(e.what()));
  }
  p.state = state_from_json(s.system, p.raw);
  return {p};
}

Json toric_info(const Fan& fan, std::uint64_t seed, const std::optional<IntMatrix>& phi) {
  auto L = class_lattice(fan);
  auto nd = nef_cone(fan);
  Json classes = Json::array(), fibs = Json::array();
  for (std::size_t i = 0; i < nd.extremal_classes.size(); ++i) {
    auto fib = semiample_fibration(fan, nd.extremal_divisors[i]);
    Json lp = Json::array();
    for (const auto& m : fib.lattice_points) lp.push_back(detail::integers_json(m));
    Json divisor = Json::array();
    for (const auto& a : nd.extremal_divisors[i].coefficients) divisor.push_back(a.get_str());
    classes.push_back(detail::integers_json(nd.extremal_classes[i]));
    fibs.push_back(Json{{"divisor", divisor}, {"base_dim", fib.base_dim()}, {"lattice_points", lp}});
  }
  Json j{{"fan", fan_to_json(fan)},
         {"class_rank", L.rank()},
         {"class_map", detail::matrix_json(L.G)},
         {"extremal_classes", classes},
         {"fibrations", fibs}};
  if (phi) {
    auto f = make_toric_endo(std::make_shared<const Fan>(fan), *phi);
    auto P = pullback_matrix(f);
    auto rf = ray_fixing_iterate(nd, P);
    Json maps = Json::array();
    const ToricEndo FN = make_toric_endo(f.fan, matrix_power(f.phi, static_cast<unsigned>(rf.period)));
    for (std::size_t i = 0; i < nd.extremal_divisors.size(); ++i) {
      auto fib = semiample_fibration(fan, nd.extremal_divisors[i]);
      maps.push_back(detail::matrix_json(induced_base_map(FN, fib, rf.lambdas[i], 100, seed).A));
    }
    Json perm = Json::array(), lambdas = Json::array();
    for (auto p : rf.permutation) perm.push_back(p);
    for (const auto& l : rf.lambdas) lambdas.push_back(l.get_str());
    j["endomorphism"] = Json{{"phi", detail::matrix_json(*phi)},
                             {"pullback", detail::matrix_json(P)},
                             {"period", rf.period},
                             {"permutation", perm},
                             {"lambdas", lambdas},
                             {"base_maps", maps}};
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamical and arithmetic degrees, canonical heights and toric data over Q"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  Common c;
  std::string point;
  double bound = std::log(100.0), tol = 1e-6, target = 1e-9;
  std::string phi_text;

  auto* delta = app.add_subcommand("delta", "Dynamical degree enclosure");
  delta->add_option("spec", c.spec, "System file (JSON)")->required();
  add_budget_flags(delta, c);

  auto* alpha = app.add_subcommand("alpha", "Orbit heights and arithmetic degree");
  alpha->add_option("spec", c.spec)->required();
  alpha->add_option("--point", point, "Point as JSON, e.g. '[\"2\",\"1\"]'");
  add_budget_flags(alpha, c);

  auto* canht = app.add_subcommand("canht", "Canonical heights");
  canht->add_option("spec", c.spec)->required();
  canht->add_option("--point", point, "Point as JSON");
  canht->add_option("--target", target, "Error bar to reach");
  add_budget_flags(canht, c);

  auto* zf = app.add_subcommand("zf", "Points of small height with vanishing ample canonical height");
  zf->add_option("spec", c.spec)->required();
  zf->add_option("--bound", bound, "Height bound");
  zf->add_option("--tol", tol, "Vanishing threshold");
  add_budget_flags(zf, c);

  auto* info = app.add_subcommand("toric-info", "Class lattice, nef cone and fibrations of a fan");
  info->add_option("fan", c.spec, "Fan (JSON), or a system file with a toric system")->required();
  info->add_option("--phi", phi_text, "Lattice map as JSON, e.g. '[[0,2],[2,0]]'");
  add_budget_flags(info, c);

  auto* verify = app.add_subcommand("verify", "Full campaign with verdicts");
  verify->add_option("spec", c.spec)->required();
  add_budget_flags(verify, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  CLI::App* cmd = app.get_subcommands().front();
  try {
    const Overrides o = collect(cmd, c);
    const std::size_t jobs = o.jobs.value_or(1);
    if (cmd == delta) {
      auto s = load(c, o);
      Json j = to_json(dynamical_degree(s.system, s.budgets.precision));
      Json sp = Json::array();
      for (double x : spectrum_moduli(s.system)) sp.push_back(real_string(x));
      j["spectrum_moduli"] = sp;
      emit(c, j);
    } else if (cmd == alpha) {
      auto s = load(c, o);
      Json out = Json::array();
      for (const auto& p : selected_points(s, point)) {
        auto t = iterate_orbit(s.system, p.state, s.budgets.max_iters, s.budgets.bit_budget);
        Json hs = Json::array();
        for (double h : t.heights) hs.push_back(real_string(h));
        out.push_back(Json{{"point", state_to_json(p.state)},
                           {"heights", hs},
                           {"truncated", t.truncated},
                           {"alpha", to_json(arithmetic_degree(t, s.budgets.tolerance, s.budgets.window))}});
      }
      emit(c, out);
    } else if (cmd == canht) {
      auto s = load(c, o);
      auto dec = decompose(s.system);
      Json out = Json::array();
      for (const auto& p : selected_points(s, point)) {
        HeightBudget hb;
        hb.bit_budget = s.budgets.bit_budget;
        Json comps = Json::array();
        for (const auto& comp : dec.components) {
          Json cj{{"label", comp.height.label}, {"lambda", comp.lambda.get_str()}, {"dominant", comp.dominant}};
          cj["estimate"] = comp.lambda > 1 ? to_json(canonical_height(comp.height, p.state, target, hb)) : Json(nullptr);
          comps.push_back(cj);
        }
        out.push_back(Json{{"point", state_to_json(p.state)},
                           {"period", dec.period},
                           {"components", comps},
                           {"ample", to_json(ample_canonical_height(dec, p.state, target, hb))}});
      }
      emit(c, out);
    } else if (cmd == zf) {
      auto s = load(c, o);
      ZfOptions opt;
      opt.height_bound = bound;
      opt.tol = tol;
      opt.jobs = jobs;
      opt.budget.bit_budget = s.budgets.bit_budget;
      auto rep = zf_search(s.system, opt);
      if (!c.csv.empty()) write_text(c.csv, zf_csv(rep));
      emit(c, to_json(rep));
    } else if (cmd == info) {
      Json j = read_json_file(c.spec);
      std::optional<IntMatrix> phi;
      std::shared_ptr<const Fan> fan;
      if (j.contains("system")) {
        auto f = system_from_json(j.at("system"));
        const auto* te = f.get_if<ToricEndo>();
        if (!te) fail(ErrorKind::InvalidInput, "file does not hold a toric system");
        fan = te->fan;
        phi = te->phi;
      } else {
        fan = fan_from_json(j);
      }
      if (!phi_text.empty()) {
        try {
          phi = detail::json_matrix<Integer>(Json::parse(phi_text), detail::json_integer);
        } catch (const nlohmann::json::exception& e) {
          fail(ErrorKind::InvalidInput, "--phi is not JSON: " + std::string(e.what()));
        }
      }
      emit(c, toric_info(*fan, o.seed.value_or(7), phi));
    } else if (cmd == verify) {
      auto s = load(c, o);
      auto r = run_campaign(s, jobs);
      if (!c.csv.empty()) write_text(c.csv, r.csv);
      emit(c, r.report);
      return r.exit_code;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (cmd == verify) {
      try {
        emit(c, error_report(std::string(to_string(e.kind())), e.what()));
      } catch (const Error&) {
      }
    }
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
