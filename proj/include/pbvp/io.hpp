#pragma once
/*
 * io.hpp: problem documents, trajectory CSV, and report serialization
 *
 * Problems travel as JSON documents (schema_version "1") and results come
 * back as JSON reports plus CSV trajectories. CSV cells carry 17 significant
 * digits, enough to reproduce every double bit-for-bit, so identical inputs
 * and seeds give byte-identical files.
 */

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pbvp/linear_bvp.hpp"
#include "pbvp/lyapunov_schmidt.hpp"
#include "pbvp/spectral.hpp"
#include "pbvp/vdp.hpp"

namespace pbvp {

using nlohmann::json;

// ── Solver settings ─────────────────────────────────────────────────────────

struct SolverSettings {
  std::size_t grid_size = 512;
  double tol = 1e-8;            // solvability / convergence tolerance
  double mu = 1.5;              // series evaluation point
  int series_terms = 200;       // K = L for the series form
  double eps = 0.0;
  int max_iter = 200;
  double resonance_tol = 1e-9;
  double rank_tol = 1e-10;
  double defect_tol = 2e-4;
  std::uint64_t seed = 0;
};

// ── Polynomial right-hand sides ─────────────────────────────────────────────

// One monomial: coeff · ε^eps_power · Π flat[coord]^power, with flat
// coordinates numbered x₁=0, y₁=1, x₂=2, …
struct PolyTerm {
  double coeff = 0.0;
  int eps_power = 0;
  std::vector<std::pair<std::size_t, int>> factors;
};

struct PolynomialRHS {
  std::size_t n_modes = 0;
  std::vector<std::vector<PolyTerm>> components;  // one list per flat coordinate
};

namespace detail {

inline double ipow(double base, int e) {
  double out = 1.0;
  for (int i = 0; i < e; ++i) out *= base;
  return out;
}

}  // namespace detail

inline void validate_polynomial(const PolynomialRHS& p) {
  if (p.n_modes < 1) throw std::invalid_argument("polynomial rhs: n_modes must be >= 1");
  if (p.components.size() != 2 * p.n_modes)
    throw std::invalid_argument("polynomial rhs: expected one component per flat coordinate");
  for (const auto& comp : p.components)
    for (const PolyTerm& t : comp) {
      if (!std::isfinite(t.coeff))
        throw std::invalid_argument("polynomial rhs: coefficient must be finite");
      if (t.eps_power < 0)
        throw std::invalid_argument("polynomial rhs: eps_power must be >= 0");
      for (const auto& [coord, power] : t.factors) {
        if (coord >= 2 * p.n_modes)
          throw std::invalid_argument("polynomial rhs: factor coordinate out of range");
        if (power < 1) throw std::invalid_argument("polynomial rhs: factor power must be >= 1");
      }
    }
}

inline NonlinearRHS make_polynomial_rhs(const PolynomialRHS& poly) {
  validate_polynomial(poly);
  NonlinearRHS rhs;
  rhs.Z = [poly](const PhaseVector& state, double, double eps) {
    const Vector flat = detail::flatten(state);
    PhaseVector out = PhaseVector::zero(state.size());
    for (std::size_t i = 0; i < poly.components.size(); ++i) {
      double acc = 0.0;
      for (const PolyTerm& t : poly.components[i]) {
        double v = t.coeff * detail::ipow(eps, t.eps_power);
        for (const auto& [coord, power] : t.factors)
          v *= detail::ipow(flat(static_cast<Eigen::Index>(coord)), power);
        acc += v;
      }
      if (i % 2 == 0)
        out[i / 2].x = acc;
      else
        out[i / 2].y = acc;
    }
    return out;
  };
  rhs.state_jacobian = [poly](const PhaseVector& state, double) {
    const Vector flat = detail::flatten(state);
    const Eigen::Index n = flat.size();
    Matrix jac = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < poly.components.size(); ++i)
      for (const PolyTerm& t : poly.components[i]) {
        if (t.eps_power != 0) continue;
        for (std::size_t fi = 0; fi < t.factors.size(); ++fi) {
          const auto [coord, power] = t.factors[fi];
          double v = t.coeff * static_cast<double>(power) *
                     detail::ipow(flat(static_cast<Eigen::Index>(coord)), power - 1);
          for (std::size_t fj = 0; fj < t.factors.size(); ++fj) {
            if (fj == fi) continue;
            v *= detail::ipow(flat(static_cast<Eigen::Index>(t.factors[fj].first)),
                              t.factors[fj].second);
          }
          jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(coord)) += v;
        }
      }
    return jac;
  };
  return rhs;
}

// ── Problem documents ───────────────────────────────────────────────────────

struct ProblemDocument {
  std::string schema_version = "1";
  std::string kind = "linear";  // linear | nonlinear | vdp
  std::vector<double> eigenvalues;
  double w = two_pi;
  std::vector<Pair> alpha;
  std::optional<ForcingFunction> forcing;
  std::string nonlinear_name;  // "vdp" when the named system is requested
  std::optional<PolynomialRHS> polynomial;
  std::vector<Pair> start;  // Newton start amplitudes, one pair per mode
  SolverSettings settings;
  VdPConfig vdp;
  std::vector<Pair> vdp_start;  // per supported mode
  bool skip_newton = false;
};

namespace detail {

inline Pair parse_pair(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2)
    throw std::invalid_argument(where + ": expected a [x, y] pair");
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

inline std::vector<Pair> parse_pairs(const json& j, const std::string& where) {
  std::vector<Pair> out;
  out.reserve(j.size());
  for (const json& e : j) out.push_back(parse_pair(e, where));
  return out;
}

inline json pair_json(const Pair& p) { return json::array({p.x, p.y}); }

inline json pairs_json(const std::vector<Pair>& ps) {
  json out = json::array();
  for (const Pair& p : ps) out.push_back(pair_json(p));
  return out;
}

inline std::vector<TrigTerm> parse_trig_terms(const json& j) {
  std::vector<TrigTerm> out;
  for (const json& e : j)
    out.push_back({e.at("a").get<double>(), e.at("b").get<double>(),
                   e.at("omega").get<double>()});
  return out;
}

inline json trig_terms_json(const std::vector<TrigTerm>& terms) {
  json out = json::array();
  for (const TrigTerm& t : terms)
    out.push_back(json{{"a", t.a}, {"b", t.b}, {"omega", t.omega}});
  return out;
}

inline ForcingFunction parse_forcing(const json& j, std::size_t n_modes) {
  if (j.contains("trig")) {
    TrigForcing trig;
    for (const json& mode : j.at("trig")) {
      ModeForcing mf;
      if (mode.contains("x")) mf.x_terms = parse_trig_terms(mode.at("x"));
      if (mode.contains("y")) mf.y_terms = parse_trig_terms(mode.at("y"));
      trig.modes.push_back(std::move(mf));
    }
    if (trig.modes.size() != n_modes)
      throw std::invalid_argument("forcing: one trig entry per mode expected");
    return ForcingFunction(std::move(trig));
  }
  if (j.contains("samples")) {
    SampledForcing s;
    for (const json& row : j.at("samples")) {
      PhaseVector v(row.size());
      for (std::size_t k = 0; k < row.size(); ++k)
        v[k] = parse_pair(row.at(k), "forcing sample");
      if (v.size() != n_modes)
        throw std::invalid_argument("forcing: sample width must match mode count");
      s.values.push_back(std::move(v));
    }
    s.allow_interpolation = j.value("allow_interpolation", false);
    return ForcingFunction(std::move(s));
  }
  throw std::invalid_argument("forcing: expected a \"trig\" or \"samples\" member");
}

inline json forcing_json(const ForcingFunction& f) {
  json out;
  if (f.is_sampled()) {
    const SampledForcing& s = f.samples();
    json rows = json::array();
    for (const PhaseVector& v : s.values) {
      json row = json::array();
      for (std::size_t k = 0; k < v.size(); ++k) row.push_back(pair_json(v[k]));
      rows.push_back(std::move(row));
    }
    out["samples"] = std::move(rows);
    out["allow_interpolation"] = s.allow_interpolation;
    return out;
  }
  json modes = json::array();
  for (const ModeForcing& m : f.trig().modes)
    modes.push_back(json{{"x", trig_terms_json(m.x_terms)}, {"y", trig_terms_json(m.y_terms)}});
  out["trig"] = std::move(modes);
  return out;
}

inline PolynomialRHS parse_polynomial(const json& j) {
  PolynomialRHS p;
  p.n_modes = j.at("n_modes").get<std::size_t>();
  for (const json& comp : j.at("components")) {
    std::vector<PolyTerm> terms;
    for (const json& t : comp) {
      PolyTerm term;
      term.coeff = t.at("coeff").get<double>();
      term.eps_power = t.value("eps_power", 0);
      if (t.contains("factors"))
        for (const json& f : t.at("factors"))
          term.factors.emplace_back(f.at(0).get<std::size_t>(), f.at(1).get<int>());
      terms.push_back(std::move(term));
    }
    p.components.push_back(std::move(terms));
  }
  validate_polynomial(p);
  return p;
}

inline json polynomial_json(const PolynomialRHS& p) {
  json comps = json::array();
  for (const auto& comp : p.components) {
    json terms = json::array();
    for (const PolyTerm& t : comp) {
      json factors = json::array();
      for (const auto& [coord, power] : t.factors)
        factors.push_back(json::array({coord, power}));
      terms.push_back(json{{"coeff", t.coeff},
                           {"eps_power", t.eps_power},
                           {"factors", std::move(factors)}});
    }
    comps.push_back(std::move(terms));
  }
  return json{{"n_modes", p.n_modes}, {"components", std::move(comps)}};
}

inline void parse_settings(const json& j, SolverSettings& s) {
  s.grid_size = j.value("grid_size", s.grid_size);
  s.tol = j.value("tol", s.tol);
  s.mu = j.value("mu", s.mu);
  s.series_terms = j.value("series_terms", s.series_terms);
  s.eps = j.value("eps", s.eps);
  s.max_iter = j.value("max_iter", s.max_iter);
  s.resonance_tol = j.value("resonance_tol", s.resonance_tol);
  s.rank_tol = j.value("rank_tol", s.rank_tol);
  s.defect_tol = j.value("defect_tol", s.defect_tol);
  s.seed = j.value("seed", s.seed);
}

inline json settings_json(const SolverSettings& s) {
  return json{{"grid_size", s.grid_size},
              {"tol", s.tol},
              {"mu", s.mu},
              {"series_terms", s.series_terms},
              {"eps", s.eps},
              {"max_iter", s.max_iter},
              {"resonance_tol", s.resonance_tol},
              {"rank_tol", s.rank_tol},
              {"defect_tol", s.defect_tol},
              {"seed", s.seed}};
}

inline std::vector<double> resolve_eigenvalues(const json& op) {
  if (op.contains("eigenvalues")) return op.at("eigenvalues").get<std::vector<double>>();
  if (op.contains("rule")) {
    const std::string rule = op.at("rule").get<std::string>();
    if (rule != "k^2")
      throw std::invalid_argument("operator: unknown rule \"" + rule + "\"");
    const std::size_t n = op.at("n_modes").get<std::size_t>();
    std::vector<double> vals(n);
    for (std::size_t k = 0; k < n; ++k)
      vals[k] = static_cast<double>((k + 1) * (k + 1));
    return vals;
  }
  throw std::invalid_argument("operator: expected \"eigenvalues\" or \"rule\"");
}

}  // namespace detail

inline ProblemDocument parse_problem_document(const json& j) {
  ProblemDocument doc;
  doc.schema_version = j.at("schema_version").get<std::string>();
  if (doc.schema_version != "1")
    throw std::invalid_argument("unrecognized schema_version \"" + doc.schema_version + "\"");
  doc.kind = j.at("kind").get<std::string>();
  if (doc.kind != "linear" && doc.kind != "nonlinear" && doc.kind != "vdp")
    throw std::invalid_argument("kind must be one of linear, nonlinear, vdp");
  if (j.contains("settings")) detail::parse_settings(j.at("settings"), doc.settings);

  if (doc.kind == "vdp") {
    const json& v = j.at("vdp");
    doc.vdp.n_modes = v.at("n_modes").get<std::size_t>();
    doc.vdp.w = v.value("w", two_pi);
    doc.vdp.eps = v.value("eps", doc.settings.eps);
    if (v.contains("support")) doc.vdp.support = v.at("support").get<std::vector<std::size_t>>();
    if (v.contains("start")) doc.vdp_start = detail::parse_pairs(v.at("start"), "vdp start");
    doc.skip_newton = v.value("skip_newton", false);
    build_vdp_problem(doc.vdp);  // validates
    return doc;
  }

  doc.eigenvalues = detail::resolve_eigenvalues(j.at("operator"));
  doc.w = j.at("w").get<double>();
  doc.alpha = detail::parse_pairs(j.at("alpha"), "alpha");
  if (doc.alpha.size() != doc.eigenvalues.size())
    throw std::invalid_argument("alpha must list one pair per mode");
  if (j.contains("forcing"))
    doc.forcing = detail::parse_forcing(j.at("forcing"), doc.eigenvalues.size());

  if (doc.kind == "nonlinear") {
    const json& nl = j.at("nonlinear");
    if (nl.contains("name")) {
      doc.nonlinear_name = nl.at("name").get<std::string>();
      if (doc.nonlinear_name != "vdp")
        throw std::invalid_argument("nonlinear: unknown named system \"" +
                                    doc.nonlinear_name + "\"");
    } else if (nl.contains("polynomial")) {
      doc.polynomial = detail::parse_polynomial(nl.at("polynomial"));
      if (doc.polynomial->n_modes != doc.eigenvalues.size())
        throw std::invalid_argument("nonlinear: polynomial mode count must match operator");
    } else {
      throw std::invalid_argument("nonlinear: expected \"name\" or \"polynomial\"");
    }
    if (j.contains("start")) {
      doc.start = detail::parse_pairs(j.at("start"), "start");
      if (doc.start.size() != doc.eigenvalues.size())
        throw std::invalid_argument("start must list one pair per mode");
    }
    doc.skip_newton = j.value("skip_newton", false);
  }
  return doc;
}

inline json to_json(const ProblemDocument& doc) {
  json j{{"schema_version", doc.schema_version}, {"kind", doc.kind}};
  j["settings"] = detail::settings_json(doc.settings);
  if (doc.kind == "vdp") {
    json v{{"n_modes", doc.vdp.n_modes},
           {"w", doc.vdp.w},
           {"eps", doc.vdp.eps},
           {"support", doc.vdp.support},
           {"skip_newton", doc.skip_newton}};
    if (!doc.vdp_start.empty()) v["start"] = detail::pairs_json(doc.vdp_start);
    j["vdp"] = std::move(v);
    return j;
  }
  j["operator"] = json{{"eigenvalues", doc.eigenvalues}};
  j["w"] = doc.w;
  j["alpha"] = detail::pairs_json(doc.alpha);
  if (doc.forcing) j["forcing"] = detail::forcing_json(*doc.forcing);
  if (doc.kind == "nonlinear") {
    if (!doc.nonlinear_name.empty())
      j["nonlinear"] = json{{"name", doc.nonlinear_name}};
    else if (doc.polynomial)
      j["nonlinear"] = json{{"polynomial", detail::polynomial_json(*doc.polynomial)}};
    if (!doc.start.empty()) j["start"] = detail::pairs_json(doc.start);
    j["skip_newton"] = doc.skip_newton;
  }
  return j;
}

inline ProblemDocument load_problem_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open input file: " + path);
  json j = json::parse(in);  // propagates parse errors with byte positions
  return parse_problem_document(j);
}

// The assembled linear problem for a document of kind linear or nonlinear.
inline BVPProblem build_bvp_problem(const ProblemDocument& doc) {
  if (doc.kind == "vdp") return build_vdp_problem(doc.vdp).problem;
  SpectralOperator op(doc.eigenvalues);
  PhaseVector alpha(doc.alpha.size());
  for (std::size_t k = 0; k < doc.alpha.size(); ++k) alpha[k] = doc.alpha[k];
  ForcingFunction f = doc.forcing ? *doc.forcing : ForcingFunction::zero(op.n_modes());
  return BVPProblem(std::move(op), doc.w, std::move(alpha), std::move(f));
}

// The nonlinear right-hand side for a document of kind nonlinear or vdp.
inline NonlinearRHS build_nonlinear_rhs(const ProblemDocument& doc) {
  if (doc.kind == "vdp") return build_vdp_problem(doc.vdp).rhs;
  if (doc.nonlinear_name == "vdp") {
    std::vector<double> omegas(doc.eigenvalues.size());
    for (std::size_t k = 0; k < omegas.size(); ++k) omegas[k] = std::sqrt(doc.eigenvalues[k]);
    return make_vdp_rhs(std::move(omegas));
  }
  if (doc.polynomial) return make_polynomial_rhs(*doc.polynomial);
  throw std::invalid_argument("document carries no nonlinear right-hand side");
}

// ── CSV ─────────────────────────────────────────────────────────────────────

// 17 significant digits reproduce the double exactly; std::to_chars keeps the
// text independent of locale and stream state.
inline std::string format_cell(double v) {
  if (v == 0.0) v = 0.0;  // collapse negative zero
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out = "t";
  const std::size_t n = traj.n_modes();
  for (std::size_t k = 1; k <= n; ++k)
    out += ",x" + std::to_string(k) + ",y" + std::to_string(k);
  out += "\n";
  for (std::size_t j = 0; j < traj.times.size(); ++j) {
    out += format_cell(traj.times[j]);
    for (std::size_t k = 0; k < n; ++k) {
      out += "," + format_cell(traj.states[j][k].x);
      out += "," + format_cell(traj.states[j][k].y);
    }
    out += "\n";
  }
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ── Report serialization ────────────────────────────────────────────────────

inline json to_json(const SolvabilityReport& rep) {
  json flags = json::array();
  for (bool b : rep.resonant_modes) flags.push_back(b);
  json obstruction = json::array();
  for (std::size_t k = 0; k < rep.obstruction.size(); ++k)
    obstruction.push_back(detail::pair_json(rep.obstruction[k]));
  return json{{"solvable", rep.classification == Classification::solvable},
              {"pseudo_only", rep.classification == Classification::pseudo_only},
              {"obstruction", std::move(obstruction)},
              {"obstruction_norm", rep.obstruction_norm},
              {"resonant_modes", std::move(flags)},
              {"note", rep.note}};
}

inline json to_json(const VerificationReport& rep) {
  return json{{"ode_residual", rep.ode_residual},
              {"boundary_residual", rep.boundary_residual}};
}

inline json to_json(const SufficientConditionReport& rep) {
  return json{{"rank", rep.rank},
              {"dimension", rep.dimension},
              {"sigma_max", rep.sigma_max},
              {"sigma_min_kept", rep.sigma_min_kept},
              {"condition_number", rep.condition_number},
              {"pseudoinvertible", rep.pseudoinvertible},
              {"norm_null_proj_monodromy", rep.norm_null_proj_monodromy},
              {"norm_null_proj_projector", rep.norm_null_proj_projector},
              {"holds_with_monodromy", rep.holds_with_monodromy},
              {"holds_with_projector", rep.holds_with_projector},
              {"agree", rep.agree},
              {"satisfied", rep.satisfied},
              {"note", rep.note}};
}

inline json history_json(const std::vector<IterationState>& history) {
  json out = json::array();
  for (const IterationState& s : history)
    out.push_back(json{{"k", s.k},
                       {"increment_norm", s.increment_norm},
                       {"boundary_residual", s.boundary_residual},
                       {"obstruction_defect", s.obstruction_defect},
                       {"range_obstruction", s.range_obstruction},
                       {"correction_boundary_gap", s.correction_boundary_gap},
                       {"q_exceeded", s.q_exceeded}});
  return out;
}

inline json to_json(const TorusReport& rep) {
  return json{{"support", rep.support},
              {"radii", rep.radii},
              {"shared_radius", rep.shared_radius},
              {"expected_radius", rep.expected_radius},
              {"radius_spread", rep.radius_spread},
              {"system_residual", rep.system_residual},
              {"matches_formula", rep.matches_formula}};
}

inline json to_json(const CrossCheckReport& rep) {
  json modes = json::array();
  for (const ModeRatio& m : rep.modes)
    modes.push_back(json{{"mode", m.mode},
                         {"mean_ratio", m.mean_ratio},
                         {"rel_std", m.rel_std},
                         {"samples_used", m.samples_used}});
  return json{{"modes", std::move(modes)},
              {"worst_rel_std", rep.worst_rel_std},
              {"consistent", rep.consistent},
              {"note", rep.note}};
}

}  // namespace pbvp
