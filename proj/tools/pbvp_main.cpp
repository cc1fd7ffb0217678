// pbvp: command-line front end.
//
// Subcommands: solve-linear, solve-nonlinear, vdp-torus. Problems arrive as
// JSON documents, trajectories leave as CSV, reports as JSON. Exit codes are
// part of the contract: 0 success, 1 bad input, 3 pseudosolution only
// (output still written), 4 iteration non-convergence (history still
// written), 5 verification failure.

#include <chrono>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <pbvp/pbvp.hpp>

namespace fs = std::filesystem;
using pbvp::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitInternal = 2;
constexpr int kExitPseudoOnly = 3;
constexpr int kExitNonConvergence = 4;
constexpr int kExitVerification = 5;

struct CliOptions {
  std::string input;
  std::string out_dir = ".";
  std::optional<std::size_t> grid_size;
  std::optional<double> tol;
  std::optional<double> mu;
  std::optional<int> series_terms;
  std::optional<double> eps;
  std::optional<int> max_iter;
  std::optional<double> resonance_tol;
  std::optional<double> rank_tol;
  std::optional<std::uint64_t> seed;
  // vdp-torus only
  std::size_t n_modes = 1;
  std::vector<std::size_t> support;
  std::size_t cross_samples = 10;
};

void apply_overrides(pbvp::SolverSettings& s, const CliOptions& o) {
  if (o.grid_size) s.grid_size = *o.grid_size;
  if (o.tol) s.tol = *o.tol;
  if (o.mu) s.mu = *o.mu;
  if (o.series_terms) s.series_terms = *o.series_terms;
  if (o.eps) s.eps = *o.eps;
  if (o.max_iter) s.max_iter = *o.max_iter;
  if (o.resonance_tol) s.resonance_tol = *o.resonance_tol;
  if (o.rank_tol) s.rank_tol = *o.rank_tol;
  if (o.seed) s.seed = *o.seed;
}

void add_solver_flags(CLI::App* sub, CliOptions& o) {
  sub->add_option("--grid-size", o.grid_size, "Quadrature grid size (even)");
  sub->add_option("--tol", o.tol, "Primary tolerance of the subcommand");
  sub->add_option("--mu", o.mu, "Series evaluation point (> 1)");
  sub->add_option("--series-terms", o.series_terms, "Series truncation order");
  sub->add_option("--eps", o.eps, "Perturbation size");
  sub->add_option("--max-iter", o.max_iter, "Iteration cap");
  sub->add_option("--resonance-tol", o.resonance_tol, "Angle distance treated as resonant");
  sub->add_option("--rank-tol", o.rank_tol, "Relative singular-value cutoff");
  sub->add_option("--seed", o.seed, "Seed for sampled diagnostics");
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void write_report(const std::string& out_dir, const json& report) {
  pbvp::write_text_file(out_dir + "/report.json", report.dump(2) + "\n");
}

// ── solve-linear ────────────────────────────────────────────────────────────

int cmd_solve_linear(const CliOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  pbvp::ProblemDocument doc = pbvp::load_problem_document(o.input);
  if (doc.kind != "linear")
    throw std::invalid_argument("solve-linear expects a document of kind \"linear\"");
  apply_overrides(doc.settings, o);
  const pbvp::SolverSettings& s = doc.settings;

  const pbvp::BVPProblem problem = pbvp::build_bvp_problem(doc);
  const pbvp::SolvabilityReport rep =
      pbvp::solvability_condition(problem, s.grid_size, s.tol, s.resonance_tol);
  const bool pseudo = rep.classification == pbvp::Classification::pseudo_only;

  fs::create_directories(o.out_dir);
  const pbvp::PhaseVector cbar = pbvp::PhaseVector::zero(problem.op.n_modes());
  json report{{"schema_version", "1"}, {"command", "solve-linear"}};
  report["solvability"] = pbvp::to_json(rep);

  pbvp::Trajectory traj;
  if (pseudo) {
    pbvp::PseudoSolution ps =
        pbvp::pseudosolve(problem, cbar, s.grid_size, s.tol, s.resonance_tol);
    report["pseudo_residual"] = ps.residual;
    traj = std::move(ps.trajectory);
  } else {
    traj = pbvp::solve_linear(problem, cbar, s.grid_size, s.tol, s.resonance_tol);
  }
  pbvp::write_text_file(o.out_dir + "/trajectory.csv", pbvp::trajectory_csv(traj));
  report["files"] = json{{"trajectory_csv", "trajectory.csv"}};
  report["verification"] = pbvp::to_json(pbvp::verify_trajectory(problem, traj));

  // Both forms of the Green operator on the assembled data; their gap is a
  // cheap self-check and exercises --mu / --series-terms.
  const pbvp::PhaseVector g = pbvp::assemble_g(problem, s.grid_size);
  const pbvp::PhaseVector via_pinv =
      pbvp::green_pseudoinverse(problem.op, problem.w, g, s.resonance_tol);
  const pbvp::PhaseVector via_series =
      pbvp::green_series(problem.op, problem.w, g, s.mu, s.series_terms, s.series_terms,
                         s.resonance_tol);
  report["green_forms_gap"] = pbvp::max_mode_abs(via_series - via_pinv);

  report["elapsed_seconds"] = elapsed_seconds(t0);
  write_report(o.out_dir, report);
  return pseudo ? kExitPseudoOnly : kExitOk;
}

// ── solve-nonlinear ─────────────────────────────────────────────────────────

std::string roots_csv(const pbvp::PhaseVector& pairs) {
  std::string out = "k,c1,c2,r\n";
  const std::vector<double> radii = pbvp::mode_radii(pairs);
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    out += std::to_string(k + 1);
    out += "," + pbvp::format_cell(pairs[k].x);
    out += "," + pbvp::format_cell(pairs[k].y);
    out += "," + pbvp::format_cell(radii[k]);
    out += "\n";
  }
  return out;
}

json root_json(const pbvp::GeneratingRoot& root) {
  json b0 = json::array();
  for (Eigen::Index r = 0; r < root.B0.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < root.B0.cols(); ++c) row.push_back(root.B0(r, c));
    b0.push_back(std::move(row));
  }
  json pairs = json::array();
  for (std::size_t k = 0; k < root.c0.size(); ++k)
    pairs.push_back(json::array({root.c0[k].x, root.c0[k].y}));
  return json{{"amplitudes", std::move(pairs)},
              {"F_residual", root.F_residual},
              {"B0", std::move(b0)},
              {"B0_rank", root.B0_rank},
              {"condition2_norm", root.condition2_norm},
              {"conditions", pbvp::to_json(root.conditions)}};
}

int cmd_solve_nonlinear(const CliOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  pbvp::ProblemDocument doc = pbvp::load_problem_document(o.input);
  if (doc.kind != "nonlinear" && doc.kind != "vdp")
    throw std::invalid_argument(
        "solve-nonlinear expects a document of kind \"nonlinear\" or \"vdp\"");
  apply_overrides(doc.settings, o);
  const pbvp::SolverSettings& s = doc.settings;
  if (doc.kind == "vdp" && o.eps) doc.vdp.eps = *o.eps;

  const pbvp::BVPProblem problem = pbvp::build_bvp_problem(doc);
  const pbvp::NonlinearRHS rhs = pbvp::build_nonlinear_rhs(doc);
  const double eps = doc.kind == "vdp" ? doc.vdp.eps : s.eps;

  // Choose the generating amplitudes: Newton from the document's start (or
  // from (1, 0) per resonant mode), or the start itself when skip_newton asks
  // for the amplitudes to be taken literally.
  pbvp::PhaseVector c0 = pbvp::PhaseVector::zero(problem.op.n_modes());
  bool newton_ran = false;
  json newton_info;
  if (doc.kind == "vdp") {
    pbvp::VdPRootOptions ropts;
    ropts.grid_size = s.grid_size;
    ropts.rank_tol = s.rank_tol;
    if (!doc.vdp_start.empty()) ropts.start = doc.vdp_start;
    if (doc.skip_newton) {
      const std::vector<std::size_t> labels =
          doc.vdp.support.empty() ? std::vector<std::size_t>{} : doc.vdp.support;
      if (doc.vdp_start.empty())
        throw std::invalid_argument("skip_newton requires start amplitudes");
      std::vector<std::size_t> idx;
      if (labels.empty())
        for (std::size_t k = 1; k <= doc.vdp.n_modes; ++k) idx.push_back(k - 1);
      else
        for (std::size_t label : labels) idx.push_back(label - 1);
      if (idx.size() != doc.vdp_start.size())
        throw std::invalid_argument("start must list one pair per supported mode");
      for (std::size_t i = 0; i < idx.size(); ++i) c0[idx[i]] = doc.vdp_start[i];
    } else {
      const pbvp::VdPRoot root = pbvp::vdp_newton_root(doc.vdp, ropts);
      c0 = root.pairs;
      newton_ran = true;
      newton_info = json{{"iterations", root.newton.iterations},
                         {"residual", root.newton.residual}};
    }
  } else {
    const std::vector<std::size_t> idx = pbvp::resonant_indices(
        pbvp::resonance_flags(problem.op, problem.w, s.resonance_tol));
    if (!doc.start.empty())
      for (std::size_t k = 0; k < doc.start.size(); ++k) c0[k] = doc.start[k];
    else
      for (std::size_t k : idx) c0[k] = {1.0, 0.0};
    if (!doc.skip_newton && !idx.empty()) {
      const auto f = [&](const pbvp::Vector& c_res) {
        const pbvp::PhaseVector cbar =
            pbvp::embed_from_modes(c_res, idx, problem.op.n_modes());
        return pbvp::Vector(pbvp::restrict_to_modes(
            pbvp::generating_F(problem, rhs, cbar, s.grid_size, s.tol, s.resonance_tol),
            idx));
      };
      const pbvp::NewtonResult nres =
          pbvp::newton_roots(f, pbvp::restrict_to_modes(c0, idx), 1e-12, 50, s.rank_tol);
      c0 = pbvp::embed_from_modes(nres.c, idx, problem.op.n_modes());
      newton_ran = true;
      newton_info = json{{"iterations", nres.iterations}, {"residual", nres.residual}};
    }
  }

  pbvp::RootOptions root_opts;
  root_opts.grid_size = s.grid_size;
  root_opts.solve_tol = s.tol;
  root_opts.resonance_tol = s.resonance_tol;
  root_opts.rank_tol = s.rank_tol;
  const pbvp::GeneratingRoot root = pbvp::make_generating_root(problem, rhs, c0, root_opts);

  fs::create_directories(o.out_dir);
  json report{{"schema_version", "1"}, {"command", "solve-nonlinear"}};
  report["eps"] = eps;
  report["newton_ran"] = newton_ran;
  if (newton_ran) report["newton"] = newton_info;
  report["root"] = root_json(root);
  pbvp::write_text_file(o.out_dir + "/roots.csv", roots_csv(root.c0));
  json files{{"roots_csv", "roots.csv"}};

  pbvp::IterationOptions iopts;
  iopts.eps = eps;
  iopts.tol = 1e-10;
  iopts.max_iter = s.max_iter;
  iopts.grid_size = s.grid_size;
  iopts.defect_tol = s.defect_tol;
  iopts.solve_tol = s.tol;
  iopts.resonance_tol = s.resonance_tol;
  iopts.rank_tol = s.rank_tol;

  try {
    const pbvp::LSResult res = pbvp::ls_iterate(problem, rhs, root, iopts);
    pbvp::write_text_file(o.out_dir + "/trajectory.csv", pbvp::trajectory_csv(res.phi));
    files["trajectory_csv"] = "trajectory.csv";
    report["files"] = std::move(files);
    report["history"] = pbvp::history_json(res.history);
    report["converged"] = res.converged;
    if (!res.warning.empty()) report["warning"] = res.warning;
    report["verification"] = pbvp::to_json(pbvp::verify_trajectory(problem, rhs, eps, res.phi));
    report["elapsed_seconds"] = elapsed_seconds(t0);
    write_report(o.out_dir, report);
    return kExitOk;
  } catch (const pbvp::NonConvergenceError& e) {
    report["files"] = std::move(files);
    report["history"] = pbvp::history_json(e.history);
    report["converged"] = false;
    report["error"] = e.what();
    report["elapsed_seconds"] = elapsed_seconds(t0);
    write_report(o.out_dir, report);
    std::cerr << "solve-nonlinear: " << e.what() << "\n";
    return kExitNonConvergence;
  }
}

// ── vdp-torus ───────────────────────────────────────────────────────────────

int cmd_vdp_torus(const CliOptions& o) {
  const auto t0 = std::chrono::steady_clock::now();
  pbvp::VdPConfig cfg;
  cfg.n_modes = o.n_modes;
  cfg.support = o.support;
  if (o.eps) cfg.eps = *o.eps;

  pbvp::VdPRootOptions ropts;
  if (o.grid_size) ropts.grid_size = *o.grid_size;
  if (o.rank_tol) ropts.rank_tol = *o.rank_tol;
  const double verify_tol = o.tol.value_or(1e-8);

  const pbvp::VdPRoot root = pbvp::vdp_newton_root(cfg, ropts);
  const pbvp::TorusReport torus = pbvp::verify_torus(root.pairs, verify_tol);
  const std::vector<pbvp::PhaseVector> samples =
      pbvp::sample_amplitudes(cfg, o.cross_samples, o.seed.value_or(0));
  const pbvp::CrossCheckReport cross = pbvp::cross_check_F(cfg, samples, ropts.grid_size);

  fs::create_directories(o.out_dir);
  pbvp::write_text_file(o.out_dir + "/roots.csv", roots_csv(root.pairs));
  json report{{"schema_version", "1"},
              {"command", "vdp-torus"},
              {"files", json{{"roots_csv", "roots.csv"}}},
              {"newton", json{{"iterations", root.newton.iterations},
                              {"residual", root.newton.residual}}},
              {"torus", pbvp::to_json(torus)},
              {"cross_check", pbvp::to_json(cross)},
              {"elapsed_seconds", elapsed_seconds(t0)}};
  write_report(o.out_dir, report);

  if (!torus.matches_formula || !cross.consistent) {
    std::cerr << "vdp-torus: verification failed (torus "
              << (torus.matches_formula ? "ok" : "mismatch") << ", cross-check "
              << (cross.consistent ? "ok" : "inconsistent") << ")\n";
    return kExitVerification;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral solver for periodic boundary value problems"};
  app.require_subcommand(1);

  CliOptions lin, nl, vt;

  CLI::App* sub_lin = app.add_subcommand("solve-linear", "Solve a linear periodic problem");
  sub_lin->add_option("--input", lin.input, "Problem document (JSON)")->required();
  sub_lin->add_option("--out-dir", lin.out_dir, "Output directory");
  add_solver_flags(sub_lin, lin);

  CLI::App* sub_nl =
      app.add_subcommand("solve-nonlinear", "Solve a weakly nonlinear periodic problem");
  sub_nl->add_option("--input", nl.input, "Problem document (JSON)")->required();
  sub_nl->add_option("--out-dir", nl.out_dir, "Output directory");
  add_solver_flags(sub_nl, nl);

  CLI::App* sub_vt = app.add_subcommand("vdp-torus", "Locate and verify a van der Pol torus");
  sub_vt->add_option("--n-modes", vt.n_modes, "Number of modes")->required();
  sub_vt->add_option("--support", vt.support, "1-based labels of active modes");
  sub_vt->add_option("--out-dir", vt.out_dir, "Output directory");
  sub_vt->add_option("--samples", vt.cross_samples, "Cross-check sample count");
  add_solver_flags(sub_vt, vt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (sub_lin->parsed()) return cmd_solve_linear(lin);
    if (sub_nl->parsed()) return cmd_solve_nonlinear(nl);
    return cmd_vdp_torus(vt);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::domain_error& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::out_of_range& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}
