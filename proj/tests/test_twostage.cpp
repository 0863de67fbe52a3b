#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "ersaa/bench.hpp"
#include "ersaa/twostage.hpp"
#include "oracles.hpp"

using namespace ersaa;

namespace {

ResourceAllocInstance micro_instance() {
  ResourceAllocInstance inst;
  inst.n_resources = 1;
  inst.n_customers = 1;
  inst.c_z = Vector::Constant(1, 1.0);
  inst.rho = Vector::Constant(1, 1.0);
  inst.mu = Matrix::Constant(1, 1, 1.0);
  inst.q_w = Vector::Constant(1, 10.0);
  inst.z_max = 100.0;
  return inst;
}

ResourceAllocInstance small_instance(std::uint64_t seed, Index i, Index j) {
  return gen_instance(i, j, seed);
}

ScenarioSet gaussian_scenarios(std::uint64_t seed, Index m, Index dy, double mean, double sd) {
  Rng rng(seed);
  ScenarioSet s;
  s.points.resize(m, dy);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < dy; ++j) s.points(i, j) = mean + rng.normal(0.0, sd);
  s.weights = Vector::Constant(m, 1.0 / static_cast<double>(m));
  return s;
}

}  // namespace

TEST_CASE("micro-instance second stage reduces to q_w * max(0, y - mu rho z)") {
  TwoStageLp model = to_two_stage(micro_instance());
  Vector z = Vector::Constant(1, 1.0);
  auto r = second_stage_value(model, z, Vector::Constant(1, 2.0));
  CHECK_THAT(r.value, Catch::Matchers::WithinAbs(10.0, 1e-9));
  auto r0 = second_stage_value(model, z, Vector::Constant(1, -0.5));
  CHECK_THAT(r0.value, Catch::Matchers::WithinAbs(0.0, 1e-9));
  auto r1 = second_stage_value(model, z, Vector::Constant(1, 0.4));
  CHECK_THAT(r1.value, Catch::Matchers::WithinAbs(0.0, 1e-9));
}

TEST_CASE("second stage equals the dual-vertex maximum") {
  auto inst = small_instance(4242, 2, 2);
  TwoStageLp model = to_two_stage(inst);
  auto verts = oracle::dual_vertices(model.W, model.c_v);
  REQUIRE(!verts.empty());
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    Vector z(2);
    z << rng.uniform(0.0, 3.0), rng.uniform(0.0, 3.0);
    Vector y(2);
    y << rng.uniform(-1.0, 6.0), rng.uniform(-1.0, 6.0);
    auto r = second_stage_value(model, z, y);
    Vector rhs = model.recourse_rhs(z, y);
    double best = -kInf;
    for (const auto& lambda : verts) best = std::max(best, lambda.dot(rhs));
    CHECK_THAT(r.value, Catch::Matchers::WithinAbs(best, 1e-8));
    // Reported dual is optimal: lambda' rhs equals the value.
    CHECK_THAT(r.dual.dot(rhs), Catch::Matchers::WithinAbs(r.value, 1e-7));
  }
}

TEST_CASE("cost is first-stage cost plus recourse") {
  TwoStageLp model = to_two_stage(micro_instance());
  Vector z = Vector::Constant(1, 0.0);
  CHECK_THAT(cost(model, z, Vector::Constant(1, -2.0)), Catch::Matchers::WithinAbs(0.0, 1e-9));
  Vector z2 = Vector::Constant(1, 1.5);
  Vector y2 = Vector::Constant(1, 3.0);
  double c = cost(model, z2, y2);
  double v = second_stage_value(model, z2, y2).value;
  CHECK_THAT(c - model.c_z.dot(z2), Catch::Matchers::WithinAbs(v, 1e-12));
  // Single-scenario extensive form agrees at fixed z: clamp z via bounds.
  TwoStageLp pinned = model;
  pinned.first_stage = LpProblem(Vector::Zero(1), Matrix::Zero(0, 1), Vector::Zero(0), z2,
                                 z2);
  ScenarioSet one;
  one.points = y2.transpose();
  one.weights = Vector::Ones(1);
  auto ext = solve_extensive(pinned, one);
  CHECK_THAT(ext.objective, Catch::Matchers::WithinAbs(c, 1e-9));
}

TEST_CASE("complete recourse holds across the sampled domain") {
  auto inst = small_instance(7, 3, 4);
  TwoStageLp model = to_two_stage(inst);
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    Vector z(3);
    for (Index i = 0; i < 3; ++i) z(i) = rng.uniform(0.0, 5.0);
    Vector y(4);
    for (Index j = 0; j < 4; ++j) y(j) = rng.uniform(-10.0, 60.0);
    auto r = second_stage_value(model, z, y);
    CHECK(std::isfinite(r.value));
    CHECK(r.value >= -1e-9);
  }
}

TEST_CASE("extensive form solves the SAA and respects weights") {
  auto inst = small_instance(11, 2, 3);
  TwoStageLp model = to_two_stage(inst);
  auto scen = gaussian_scenarios(3, 12, 3, 40.0, 8.0);
  auto r = solve_extensive(model, scen);
  CHECK(r.z_star.size() == 2);
  CHECK((r.z_star.array() >= -1e-9).all());
  // Objective at the solution matches direct evaluation.
  double direct = saa_objective(model, scen, r.z_star);
  CHECK_THAT(direct, Catch::Matchers::WithinAbs(r.objective, 1e-8 * (1.0 + std::abs(direct))));
  // Duplicating every scenario with half weight changes nothing.
  ScenarioSet dup;
  dup.points.resize(2 * scen.size(), 3);
  dup.points << scen.points, scen.points;
  dup.weights.resize(2 * scen.size());
  dup.weights << 0.5 * scen.weights, 0.5 * scen.weights;
  auto r2 = solve_extensive(model, dup);
  CHECK_THAT(r2.objective, Catch::Matchers::WithinAbs(r.objective, 1e-9));
  // Scenario permutation leaves the objective unchanged.
  ScenarioSet perm;
  perm.points = scen.points.colwise().reverse().eval();
  perm.weights = scen.weights.reverse().eval();
  auto r3 = solve_extensive(model, perm);
  CHECK_THAT(r3.objective, Catch::Matchers::WithinAbs(r.objective, 1e-7));
  // Adding a zero-weight scenario changes nothing.
  ScenarioSet extra;
  extra.points.resize(scen.size() + 1, 3);
  extra.points.topRows(scen.size()) = scen.points;
  extra.points.row(scen.size()) = Vector::Constant(3, 123.0).transpose();
  extra.weights.resize(scen.size() + 1);
  extra.weights.head(scen.size()) = scen.weights;
  extra.weights(scen.size()) = 0.0;
  auto r4 = solve_extensive(model, extra);
  CHECK_THAT(r4.objective, Catch::Matchers::WithinAbs(r.objective, 1e-9));
}

TEST_CASE("size cap on the extensive form") {
  auto inst = small_instance(12, 2, 2);
  TwoStageLp model = to_two_stage(inst);
  auto scen = gaussian_scenarios(4, 50, 2, 30.0, 5.0);
  CHECK_THROWS_AS(solve_extensive(model, scen, 100), SizeCapExceeded);
}

TEST_CASE("L-shaped on a PP-style single scenario") {
  auto inst = small_instance(13, 2, 3);
  TwoStageLp model = to_two_stage(inst);
  ScenarioSet one;
  one.points = Vector::Constant(3, 45.0).transpose();
  one.weights = Vector::Ones(1);
  auto ls = solve_lshaped(model, one, 1e-9, 100);
  auto ext = solve_extensive(model, one);
  CHECK(ls.converged);
  CHECK(ls.iterations <= 10);
  CHECK_THAT(ls.objective,
             Catch::Matchers::WithinAbs(ext.objective, 1e-6 * (1.0 + std::abs(ext.objective))));
}

TEST_CASE("L-shaped matches extensive form on 20 seeded instances") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto inst = small_instance(1000 + seed, 3, 4);
    TwoStageLp model = to_two_stage(inst);
    Index n = 5 + static_cast<Index>(seed % 16);
    auto scen = gaussian_scenarios(seed, n, 4, 45.0, 10.0);
    auto ext = solve_extensive(model, scen);
    auto ls = solve_lshaped(model, scen, 1e-9, 200);
    CHECK(ls.converged);
    double rel = std::abs(ls.objective - ext.objective) / (1.0 + std::abs(ext.objective));
    CHECK(rel < 1e-6);
  }
}

TEST_CASE("L-shaped lower bounds are certified at termination") {
  auto inst = small_instance(21, 3, 4);
  TwoStageLp model = to_two_stage(inst);
  auto scen = gaussian_scenarios(100, 30, 4, 50.0, 12.0);
  auto ls = solve_lshaped(model, scen, 1e-9, 300);
  CHECK(ls.converged);
  CHECK(ls.gap <= 1e-9);
  CHECK(ls.lower_bound <= ls.objective + 1e-9 * (1.0 + std::abs(ls.objective)));
}

TEST_CASE("saa_objective matches a naive per-scenario loop") {
  auto inst = small_instance(31, 2, 3);
  TwoStageLp model = to_two_stage(inst);
  auto scen = gaussian_scenarios(200, 9, 3, 35.0, 9.0);
  Vector z(2);
  z << 10.0, 20.0;
  double mine = saa_objective(model, scen, z);
  double ref = model.c_z.dot(z);
  for (Index i = 0; i < scen.size(); ++i)
    ref += scen.weights(i) * second_stage_value(model, z, scen.points.row(i).transpose()).value;
  CHECK_THAT(mine, Catch::Matchers::WithinAbs(ref, 1e-9 * (1.0 + std::abs(ref))));
}

TEST_CASE("saa_objective is convex along segments") {
  auto inst = small_instance(32, 2, 3);
  TwoStageLp model = to_two_stage(inst);
  auto scen = gaussian_scenarios(300, 15, 3, 40.0, 8.0);
  Rng rng(33);
  for (int t = 0; t < 10; ++t) {
    Vector a(2), b(2);
    for (Index i = 0; i < 2; ++i) {
      a(i) = rng.uniform(0.0, 60.0);
      b(i) = rng.uniform(0.0, 60.0);
    }
    double fa = saa_objective(model, scen, a);
    double fb = saa_objective(model, scen, b);
    double fm = saa_objective(model, scen, 0.5 * (a + b));
    CHECK(fm <= 0.5 * (fa + fb) + 1e-8);
  }
}

TEST_CASE("Lipschitz bound from dual vertices") {
  auto inst = small_instance(41, 1, 2);
  TwoStageLp model = to_two_stage(inst);
  auto verts = oracle::dual_vertices(model.W, model.c_v);
  REQUIRE(!verts.empty());
  double lip = 0.0;
  for (const auto& lambda : verts)
    lip = std::max(lip, (model.h_matrix.transpose() * lambda).norm());
  Rng rng(42);
  for (int t = 0; t < 100; ++t) {
    Vector z = Vector::Constant(1, rng.uniform(0.0, 50.0));
    Vector y1(2), y2(2);
    for (Index j = 0; j < 2; ++j) {
      y1(j) = rng.uniform(-5.0, 80.0);
      y2(j) = rng.uniform(-5.0, 80.0);
    }
    double c1 = cost(model, z, y1);
    double c2 = cost(model, z, y2);
    CHECK(std::abs(c1 - c2) <= lip * (y1 - y2).norm() + 1e-7);
  }
}

TEST_CASE("model validation catches broken structure") {
  TwoStageLp model = to_two_stage(micro_instance());
  TwoStageLp bad = model;
  bad.W = Matrix::Zero(2, 4);  // rank 0
  CHECK_THROWS_AS(bad.validate(), RankDeficient);
  TwoStageLp neg = model;
  neg.c_v = Vector::Constant(model.dv(), -1.0);
  neg.W = model.W;
  CHECK_THROWS_AS(neg.validate(), DomainError);  // dual set empty: lambda'W <= c_v < 0 impossible
}

TEST_CASE("recourse infeasibility is surfaced loudly") {
  // W = [1] with v >= 0 cannot match a negative rhs.
  TwoStageLp m;
  m.d_z = 1;
  m.c_z = Vector::Zero(1);
  m.W = Matrix::Constant(1, 1, 1.0);
  m.T = Matrix::Zero(1, 1);
  m.c_v = Vector::Constant(1, 1.0);
  m.h_matrix = Matrix::Identity(1, 1);
  m.h_offset = Vector::Zero(1);
  m.first_stage = LpProblem(Vector::Zero(1), Matrix::Zero(0, 1), Vector::Zero(0),
                            Vector::Zero(1), Vector::Ones(1));
  CHECK_THROWS_AS(second_stage_value(m, Vector::Zero(1), Vector::Constant(1, -1.0)),
                  RecourseInfeasible);
}

TEST_CASE("two-stage serialization round trip") {
  auto inst = small_instance(55, 2, 3);
  TwoStageLp model = to_two_stage(inst);
  std::ostringstream out;
  write_two_stage(model, out, {"note test"});
  std::istringstream in(out.str());
  TwoStageLp back = read_two_stage(in);
  CHECK((back.c_z.array() == model.c_z.array()).all());
  CHECK((back.W.array() == model.W.array()).all());
  CHECK((back.T.array() == model.T.array()).all());
  CHECK((back.c_v.array() == model.c_v.array()).all());
  CHECK((back.h_matrix.array() == model.h_matrix.array()).all());
  CHECK((back.first_stage.upper.array() == model.first_stage.upper.array()).all());
  // Same solves after the round trip.
  auto scen = gaussian_scenarios(7, 6, 3, 40.0, 6.0);
  CHECK(solve_lshaped(back, scen, 1e-9, 100).objective ==
        solve_lshaped(model, scen, 1e-9, 100).objective);
}

TEST_CASE("L-shaped hits the iteration limit and reports its incumbent") {
  auto inst = small_instance(60, 3, 4);
  TwoStageLp model = to_two_stage(inst);
  auto scen = gaussian_scenarios(61, 25, 4, 45.0, 10.0);
  auto limited = solve_lshaped(model, scen, 1e-12, 2);
  CHECK_FALSE(limited.converged);
  CHECK(limited.gap > 0);
  CHECK(limited.iterations == 2);
  CHECK(std::isfinite(limited.objective));
  // The incumbent objective is genuine: re-evaluation agrees.
  CHECK_THAT(saa_objective(model, scen, limited.z_star),
             Catch::Matchers::WithinAbs(limited.objective, 1e-7 * (1 + limited.objective)));
  // And it upper-bounds the converged optimum.
  auto full = solve_lshaped(model, scen, 1e-9, 300);
  CHECK(limited.objective >= full.objective - 1e-9);
}

TEST_CASE("L-shaped lower bounds are nondecreasing across iterations") {
  auto inst = small_instance(70, 3, 4);
  TwoStageLp model = to_two_stage(inst);
  auto scen = gaussian_scenarios(71, 18, 4, 42.0, 9.0);
  // Determinism makes a shorter run a prefix of a longer one, so the lower
  // bound after k iterations is the k-th element of the sequence.
  double prev = -kInf;
  for (long k = 1; k <= 8; ++k) {
    auto r = solve_lshaped(model, scen, 1e-14, k);
    CHECK(r.lower_bound >= prev - 1e-12);
    CHECK(r.objective >= r.lower_bound - 1e-9 * (1.0 + std::abs(r.objective)));
    prev = r.lower_bound;
    if (r.converged) break;
  }
}
