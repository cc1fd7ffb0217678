#include <catch2/catch_amalgamated.hpp>

#include <pbvp/vdp.hpp>

#include <cmath>
#include <vector>

using namespace pbvp;
using Catch::Matchers::WithinAbs;

namespace {

PhaseVector pairs_of(std::initializer_list<Pair> ps) {
  PhaseVector v(ps.size());
  std::size_t k = 0;
  for (const Pair& p : ps) v[k++] = p;
  return v;
}

}  // namespace

TEST_CASE("oscillator configuration is validated", "[vdp]") {
  VdPConfig cfg;
  cfg.n_modes = 0;
  REQUIRE_THROWS_AS(build_vdp_problem(cfg), std::invalid_argument);

  cfg.n_modes = 2;
  cfg.w = -1.0;
  REQUIRE_THROWS_AS(build_vdp_problem(cfg), std::invalid_argument);

  cfg.w = two_pi;
  cfg.support = {0};
  REQUIRE_THROWS_AS(build_vdp_problem(cfg), std::invalid_argument);
  cfg.support = {3};
  REQUIRE_THROWS_AS(build_vdp_problem(cfg), std::invalid_argument);
  cfg.support = {2, 1, 2};  // duplicates collapse, order is normalized
  REQUIRE_NOTHROW(build_vdp_problem(cfg));
}

TEST_CASE("oscillator problem has the squared-integer spectrum", "[vdp]") {
  VdPConfig cfg;
  cfg.n_modes = 3;
  const VdPSystem sys = build_vdp_problem(cfg);
  REQUIRE(sys.problem.w == two_pi);
  REQUIRE(sys.problem.op.eigenvalues() == std::vector<double>{1.0, 4.0, 9.0});
  REQUIRE(norm(sys.problem.alpha) == 0.0);
  REQUIRE(!sys.problem.forcing.is_sampled());

  // Every mode closes its rotation over the period.
  const std::vector<bool> flags = resonance_flags(sys.problem.op, sys.problem.w, 1e-9);
  REQUIRE(flags == std::vector<bool>(3, true));

  // The nonlinearity acts on the velocity slots only and vanishes at rest.
  PhaseVector at_rest = PhaseVector::zero(3);
  REQUIRE(norm(sys.rhs.Z(at_rest, 0.3, 0.0)) == 0.0);

  PhaseVector unit_velocity = PhaseVector::zero(3);
  unit_velocity[1] = {0.0, 1.0};
  const PhaseVector z = sys.rhs.Z(unit_velocity, 0.0, 0.0);
  REQUIRE(z[1].x == 0.0);
  REQUIRE_THAT(z[1].y, WithinAbs(2.0, 1e-15));  // omega_2 (1 - 0) * 1
  REQUIRE(std::hypot(z[0].x, z[0].y) == 0.0);
  REQUIRE(std::hypot(z[2].x, z[2].y) == 0.0);
}

TEST_CASE("generating solution is the rigid rotation of its amplitudes", "[vdp]") {
  VdPConfig cfg;
  cfg.n_modes = 2;
  const PhaseVector pairs = pairs_of({{1.0, 0.0}, {0.3, -0.4}});
  const Trajectory traj = generating_solution(cfg, pairs, 128);

  SECTION("single-mode slice is cos/-sin") {
    for (std::size_t j = 0; j < traj.times.size(); ++j) {
      const double t = traj.times[j];
      REQUIRE_THAT(traj.states[j][0].x, WithinAbs(std::cos(t), 1e-12));
      REQUIRE_THAT(traj.states[j][0].y, WithinAbs(-std::sin(t), 1e-12));
    }
  }

  SECTION("trajectory closes up over the period") {
    REQUIRE(norm(traj.states.front() - traj.states.back()) <= 1e-12);
  }

  SECTION("agrees with the linear solver on the same amplitudes") {
    const VdPSystem sys = build_vdp_problem(cfg);
    const Trajectory via_solver = solve_linear(sys.problem, pairs, 128);
    REQUIRE(max_state_distance(traj, via_solver) <= 1e-10);
  }
}

TEST_CASE("cubic amplitude system", "[vdp]") {
  SECTION("zero is a trivial root") {
    const std::vector<double> r = amplitude_system(PhaseVector::zero(3));
    for (double v : r) REQUIRE(v == 0.0);
  }

  SECTION("radius 2 balances the single-mode equation") {
    const std::vector<double> r = amplitude_system(pairs_of({{2.0, 0.0}}));
    REQUIRE_THAT(r[0], WithinAbs(0.0, 1e-14));
    REQUIRE_THAT(r[1], WithinAbs(0.0, 1e-14));
  }

  SECTION("two modes at radius 2/sqrt(3) balance each other") {
    const double r = 2.0 / std::sqrt(3.0);
    const std::vector<double> res = amplitude_system(pairs_of({{r, 0.0}, {0.0, r}}));
    for (double v : res) REQUIRE_THAT(v, WithinAbs(0.0, 1e-14));
  }

  SECTION("literal evaluation at a non-root") {
    // One mode, pair (1, 1): each slot reads 1 + 1 - 4 = -2.
    const std::vector<double> r = amplitude_system(pairs_of({{1.0, 1.0}}));
    REQUIRE_THAT(r[0], WithinAbs(-2.0, 1e-14));
    REQUIRE_THAT(r[1], WithinAbs(-2.0, 1e-14));
  }
}

TEST_CASE("shared torus radius", "[vdp]") {
  REQUIRE_THAT(torus_radius(1), WithinAbs(2.0, 1e-15));
  REQUIRE_THAT(torus_radius(2), WithinAbs(2.0 / std::sqrt(3.0), 1e-15));
  REQUIRE_THAT(torus_radius(5), WithinAbs(2.0 / 3.0, 1e-15));
  REQUIRE_THROWS_AS(torus_radius(0), std::domain_error);
}

TEST_CASE("pinned Newton search finds the torus", "[vdp]") {
  SECTION("full support on two modes") {
    VdPConfig cfg;
    cfg.n_modes = 2;
    const VdPRoot root = vdp_newton_root(cfg);
    REQUIRE(root.newton.residual <= 1e-12);
    const double expect = torus_radius(2);
    REQUIRE_THAT(root.radii[0], WithinAbs(expect, 1e-10));
    REQUIRE_THAT(root.radii[1], WithinAbs(expect, 1e-10));
  }

  SECTION("modes outside the requested support stay at zero") {
    VdPConfig cfg;
    cfg.n_modes = 3;
    cfg.support = {2};
    const VdPRoot root = vdp_newton_root(cfg);
    REQUIRE(root.support == std::vector<std::size_t>{2});
    REQUIRE(root.radii[0] == 0.0);
    REQUIRE(root.radii[2] == 0.0);
    REQUIRE_THAT(root.radii[1], WithinAbs(2.0, 1e-10));
  }

  SECTION("a start list of the wrong length is rejected") {
    VdPConfig cfg;
    cfg.n_modes = 2;
    VdPRootOptions opts;
    opts.start = {{1.0, 0.0}};
    REQUIRE_THROWS_AS(vdp_newton_root(cfg, opts), std::invalid_argument);
  }

  SECTION("root law on a larger support") {
    VdPConfig cfg;
    cfg.n_modes = 5;
    const VdPRoot root = vdp_newton_root(cfg);
    // r_k^2 + 2 sum_{j != k} r_j^2 = 4 for every supported mode.
    double sum_sq = 0.0;
    for (double r : root.radii) sum_sq += r * r;
    for (double r : root.radii)
      REQUIRE_THAT(2.0 * sum_sq - r * r, WithinAbs(4.0, 1e-10));
  }
}

TEST_CASE("torus verification report", "[vdp]") {
  SECTION("the single-mode root passes") {
    const TorusReport rep = verify_torus(pairs_of({{2.0, 0.0}}));
    REQUIRE(rep.support == std::vector<std::size_t>{1});
    REQUIRE_THAT(rep.shared_radius, WithinAbs(2.0, 1e-14));
    REQUIRE(rep.matches_formula);
  }

  SECTION("the all-zero root passes vacuously") {
    const TorusReport rep = verify_torus(PhaseVector::zero(4));
    REQUIRE(rep.support.empty());
    REQUIRE(rep.matches_formula);
    REQUIRE(rep.system_residual == 0.0);
  }

  SECTION("a Newton root on three modes lands on 2/sqrt(5)") {
    VdPConfig cfg;
    cfg.n_modes = 3;
    const VdPRoot root = vdp_newton_root(cfg);
    const TorusReport rep = verify_torus(root.pairs, 1e-8);
    REQUIRE(rep.support == std::vector<std::size_t>{1, 2, 3});
    REQUIRE_THAT(rep.shared_radius, WithinAbs(2.0 / std::sqrt(5.0), 1e-10));
    REQUIRE(rep.matches_formula);
  }

  SECTION("perturbing one pair breaks the verification") {
    VdPConfig cfg;
    cfg.n_modes = 2;
    PhaseVector pairs = vdp_newton_root(cfg).pairs;
    pairs[0] = pairs[0] + Pair{1e-3, 0.0};
    const TorusReport rep = verify_torus(pairs, 1e-8);
    REQUIRE(!rep.matches_formula);
  }
}

TEST_CASE("roots persist under a common phase rotation per mode", "[vdp]") {
  VdPConfig cfg;
  cfg.n_modes = 2;
  const PhaseVector root = vdp_newton_root(cfg).pairs;
  PhaseVector rotated(2);
  const double angles[2] = {0.8, -2.3};
  for (std::size_t k = 0; k < 2; ++k)
    rotated[k] = Block::rotation(angles[k]).apply(root[k]);
  for (double v : amplitude_system(rotated)) REQUIRE(std::abs(v) <= 1e-12);
}

TEST_CASE("slope kernel at a torus root has one direction per active mode", "[vdp]") {
  VdPConfig cfg;
  cfg.n_modes = 2;
  const VdPSystem sys = build_vdp_problem(cfg);
  const VdPRoot root = vdp_newton_root(cfg);
  const B0Result b0 = b0_matrix(sys.problem, sys.rhs, root.pairs, 1e-5, 512);
  const SvdPinv s = svd_pinv(b0.fd, 1e-8);
  REQUIRE(b0.fd.rows() == 4);
  REQUIRE(s.rank == 2);  // 4 coordinates minus one phase per active mode
}

TEST_CASE("averaged map agrees with the cubic system up to a per-mode factor", "[vdp]") {
  VdPConfig cfg;
  cfg.n_modes = 2;

  SECTION("both vanish at a root") {
    const PhaseVector root = vdp_newton_root(cfg).pairs;
    const VdPSystem sys = build_vdp_problem(cfg);
    REQUIRE(norm(generating_F(sys.problem, sys.rhs, root, 512)) <= 1e-10);
    for (double v : amplitude_system(root)) REQUIRE(std::abs(v) <= 1e-10);
  }

  SECTION("the ratio is constant across random amplitudes") {
    const std::vector<PhaseVector> samples = sample_amplitudes(cfg, 10, 42);
    REQUIRE(samples.size() == 10);
    const CrossCheckReport rep = cross_check_F(cfg, samples);
    REQUIRE(rep.consistent);
    REQUIRE(rep.worst_rel_std <= 1e-8);
    REQUIRE(rep.modes.size() == 2);

    // The factor is -k pi / 4 for mode k: the quadrature map carries the
    // prefactor omega_k/8 of the displayed polynomial family and the period.
    for (const ModeRatio& m : rep.modes) {
      const double expect = -static_cast<double>(m.mode) * std::numbers::pi / 4.0;
      REQUIRE_THAT(m.mean_ratio, WithinAbs(expect, 1e-9));
      REQUIRE(m.rel_std <= 1e-12);
      REQUIRE(m.samples_used > 0);
    }
  }

  SECTION("sampling is deterministic in the seed") {
    const std::vector<PhaseVector> a = sample_amplitudes(cfg, 5, 7);
    const std::vector<PhaseVector> b = sample_amplitudes(cfg, 5, 7);
    const std::vector<PhaseVector> c = sample_amplitudes(cfg, 5, 8);
    for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(norm(a[i] - b[i]) == 0.0);
    REQUIRE(norm(a[0] - c[0]) > 0.0);
  }
}
