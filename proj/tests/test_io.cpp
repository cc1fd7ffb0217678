#include <catch2/catch_amalgamated.hpp>

#include <pbvp/io.hpp>

#include <algorithm>
#include <cstdlib>
#include <string>

using namespace pbvp;
using Catch::Matchers::WithinAbs;

namespace {

json linear_doc() {
  return json::parse(R"({
    "schema_version": "1",
    "kind": "linear",
    "operator": {"eigenvalues": [1.0, 2.25]},
    "w": 6.283185307179586,
    "alpha": [[0.1, -0.2], [0.0, 0.3]],
    "forcing": {"trig": [
      {"x": [{"a": 1.0, "b": 0.0, "omega": -1.0}], "y": [{"a": 0.0, "b": -1.0, "omega": -1.0}]},
      {"x": [], "y": []}
    ]},
    "settings": {"grid_size": 256, "tol": 1e-9}
  })");
}

json vdp_doc() {
  return json::parse(R"({
    "schema_version": "1",
    "kind": "vdp",
    "vdp": {"n_modes": 2, "eps": 0.01, "support": [1, 2],
            "start": [[1.0, 0.0], [0.0, 1.0]], "skip_newton": false}
  })");
}

json polynomial_doc() {
  // Z on one mode: x-slot 0, y-slot 0.5*y - x^2*y + eps*x.
  return json::parse(R"({
    "schema_version": "1",
    "kind": "nonlinear",
    "operator": {"rule": "k^2", "n_modes": 1},
    "w": 6.283185307179586,
    "alpha": [[0.0, 0.0]],
    "nonlinear": {"polynomial": {"n_modes": 1, "components": [
      [],
      [{"coeff": 0.5, "factors": [[1, 1]]},
       {"coeff": -1.0, "factors": [[0, 2], [1, 1]]},
       {"coeff": 1.0, "eps_power": 1, "factors": [[0, 1]]}]
    ]}},
    "start": [[0.5, 0.0]],
    "skip_newton": true
  })");
}

}  // namespace

TEST_CASE("problem documents round-trip through their JSON form", "[io]") {
  SECTION("linear with trigonometric forcing") {
    const ProblemDocument doc = parse_problem_document(linear_doc());
    const ProblemDocument again = parse_problem_document(to_json(doc));
    REQUIRE(again.kind == "linear");
    REQUIRE(again.eigenvalues == doc.eigenvalues);
    REQUIRE(again.w == doc.w);
    REQUIRE(again.alpha.size() == 2);
    REQUIRE(again.alpha[0].y == -0.2);
    REQUIRE(again.settings.grid_size == 256);
    REQUIRE(again.settings.tol == 1e-9);
    REQUIRE(again.settings.mu == 1.5);  // untouched default
    REQUIRE(again.forcing.has_value());
    REQUIRE(again.forcing->trig().modes[0].x_terms[0].omega == -1.0);
    REQUIRE(to_json(doc) == to_json(again));
  }

  SECTION("linear with sampled forcing") {
    json j = linear_doc();
    j["forcing"] = json::parse(R"({"samples": [
      [[0.0, 0.0], [1.0, 0.0]],
      [[0.5, 0.5], [0.9, 0.1]],
      [[0.0, 1.0], [0.8, 0.2]]
    ], "allow_interpolation": true})");
    const ProblemDocument doc = parse_problem_document(j);
    REQUIRE(doc.forcing->is_sampled());
    REQUIRE(doc.forcing->samples().allow_interpolation);
    const ProblemDocument again = parse_problem_document(to_json(doc));
    REQUIRE(again.forcing->samples().values.size() == 3);
    REQUIRE(again.forcing->samples().values[1][0].x == 0.5);
    REQUIRE(to_json(doc) == to_json(again));
  }

  SECTION("oscillator shorthand") {
    const ProblemDocument doc = parse_problem_document(vdp_doc());
    REQUIRE(doc.kind == "vdp");
    REQUIRE(doc.vdp.n_modes == 2);
    REQUIRE(doc.vdp.eps == 0.01);
    REQUIRE(doc.vdp_start.size() == 2);
    const ProblemDocument again = parse_problem_document(to_json(doc));
    REQUIRE(again.vdp.support == doc.vdp.support);
    REQUIRE(again.vdp_start[1].y == 1.0);
    REQUIRE(to_json(doc) == to_json(again));
  }

  SECTION("named nonlinear system") {
    json j = linear_doc();
    j["kind"] = "nonlinear";
    j["nonlinear"] = json{{"name", "vdp"}};
    const ProblemDocument doc = parse_problem_document(j);
    REQUIRE(doc.nonlinear_name == "vdp");
    const ProblemDocument again = parse_problem_document(to_json(doc));
    REQUIRE(again.nonlinear_name == "vdp");
    REQUIRE(to_json(doc) == to_json(again));
  }

  SECTION("polynomial nonlinear system") {
    const ProblemDocument doc = parse_problem_document(polynomial_doc());
    REQUIRE(doc.polynomial.has_value());
    REQUIRE(doc.skip_newton);
    REQUIRE(doc.eigenvalues == std::vector<double>{1.0});  // rule expansion
    const ProblemDocument again = parse_problem_document(to_json(doc));
    REQUIRE(again.polynomial->components[1].size() == 3);
    REQUIRE(again.polynomial->components[1][2].eps_power == 1);
    REQUIRE(again.start.size() == 1);
    REQUIRE(to_json(doc) == to_json(again));
  }
}

TEST_CASE("malformed documents are rejected with specific errors", "[io]") {
  SECTION("unknown schema version") {
    json j = linear_doc();
    j["schema_version"] = "2";
    REQUIRE_THROWS_AS(parse_problem_document(j), std::invalid_argument);
  }

  SECTION("unknown kind") {
    json j = linear_doc();
    j["kind"] = "quadratic";
    REQUIRE_THROWS_AS(parse_problem_document(j), std::invalid_argument);
  }

  SECTION("alpha width must match the operator") {
    json j = linear_doc();
    j["alpha"] = json::parse("[[0.1, -0.2]]");
    REQUIRE_THROWS_AS(parse_problem_document(j), std::invalid_argument);
  }

  SECTION("unknown eigenvalue rule") {
    json j = linear_doc();
    j["operator"] = json{{"rule", "fibonacci"}, {"n_modes", 2}};
    REQUIRE_THROWS_AS(parse_problem_document(j), std::invalid_argument);
  }

  SECTION("missing required members surface as json errors") {
    json j = linear_doc();
    j.erase("w");
    REQUIRE_THROWS_AS(parse_problem_document(j), json::exception);
  }

  SECTION("nonlinear documents need a named system or a polynomial") {
    json j = linear_doc();
    j["kind"] = "nonlinear";
    j["nonlinear"] = json::object();
    REQUIRE_THROWS_AS(parse_problem_document(j), std::invalid_argument);
    j["nonlinear"] = json{{"name", "duffing"}};
    REQUIRE_THROWS_AS(parse_problem_document(j), std::invalid_argument);
  }
}

TEST_CASE("polynomial right-hand sides are validated and differentiable", "[io]") {
  SECTION("structural validation") {
    PolynomialRHS p;
    p.n_modes = 0;
    REQUIRE_THROWS_AS(validate_polynomial(p), std::invalid_argument);
    p.n_modes = 1;
    p.components.resize(1);
    REQUIRE_THROWS_AS(validate_polynomial(p), std::invalid_argument);
    p.components.resize(2);
    p.components[0].push_back(PolyTerm{1.0, 0, {{5, 1}}});
    REQUIRE_THROWS_AS(validate_polynomial(p), std::invalid_argument);
    p.components[0][0].factors = {{0, 0}};
    REQUIRE_THROWS_AS(validate_polynomial(p), std::invalid_argument);
    p.components[0][0].factors = {{0, 2}};
    p.components[0][0].eps_power = -1;
    REQUIRE_THROWS_AS(validate_polynomial(p), std::invalid_argument);
  }

  SECTION("evaluation matches the monomials") {
    const ProblemDocument doc = parse_problem_document(polynomial_doc());
    const NonlinearRHS rhs = make_polynomial_rhs(*doc.polynomial);
    PhaseVector state(1);
    state[0] = {0.3, -0.7};
    const double x = 0.3, y = -0.7, eps = 0.2;
    const PhaseVector z = rhs.Z(state, 0.0, eps);
    REQUIRE(z[0].x == 0.0);
    REQUIRE_THAT(z[0].y, WithinAbs(0.5 * y - x * x * y + eps * x, 1e-15));
  }

  SECTION("supplied derivative agrees with differences") {
    const ProblemDocument doc = parse_problem_document(polynomial_doc());
    const NonlinearRHS rhs = make_polynomial_rhs(*doc.polynomial);
    NonlinearRHS fd_only = rhs;
    fd_only.state_jacobian = nullptr;
    PhaseVector base(1), dir(1);
    base[0] = {0.4, 0.9};
    dir[0] = {-0.6, 0.25};
    const PhaseVector exact = detail::apply_state_derivative(rhs, base, 0.0, dir);
    const PhaseVector fd = detail::apply_state_derivative(fd_only, base, 0.0, dir);
    REQUIRE(norm(exact - fd) <= 1e-8);
  }
}

TEST_CASE("trajectory CSV cells reproduce their doubles", "[io]") {
  const double values[] = {0.1, -1.0 / 3.0, 1e-300, 6.283185307179586, 12345.678901234567};
  for (double v : values) {
    const std::string cell = format_cell(v);
    REQUIRE(std::strtod(cell.c_str(), nullptr) == v);
  }

  Trajectory traj;
  traj.times = {0.0, 0.5, 1.0};
  traj.states.assign(3, PhaseVector::zero(2));
  traj.states[1][0] = {0.25, -0.5};
  const std::string csv = trajectory_csv(traj);
  REQUIRE(csv.rfind("t,x1,y1,x2,y2\n", 0) == 0);
  REQUIRE(csv.find("\n0.5,0.25,-0.5,0,0\n") != std::string::npos);

  // Four lines: header plus one per grid point, each newline-terminated.
  REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("documents assemble into solvable problem objects", "[io]") {
  const ProblemDocument doc = parse_problem_document(linear_doc());
  const BVPProblem p = build_bvp_problem(doc);
  REQUIRE(p.op.n_modes() == 2);
  REQUIRE(p.alpha[1].y == 0.3);
  REQUIRE_THAT(p.w, WithinAbs(two_pi, 1e-15));

  const ProblemDocument vd = parse_problem_document(vdp_doc());
  const BVPProblem vp = build_bvp_problem(vd);
  REQUIRE(vp.op.eigenvalues() == std::vector<double>{1.0, 4.0});
  REQUIRE_NOTHROW(build_nonlinear_rhs(vd));

  REQUIRE_THROWS_AS(build_nonlinear_rhs(doc), std::invalid_argument);
}
