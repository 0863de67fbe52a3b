#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "ersaa/lp.hpp"
#include "ersaa/rng.hpp"
#include "oracles.hpp"

using namespace ersaa;

namespace {

// Random feasible bounded LP: all bounds finite, rhs built from an interior
// point so phase 1 always succeeds.
LpProblem random_bounded_lp(std::uint64_t seed, Index m, Index p) {
  Rng rng(seed);
  Matrix a = oracle::random_matrix(rng, m, p, -2.0, 2.0);
  Vector lo(p), hi(p), c(p);
  for (Index j = 0; j < p; ++j) {
    lo(j) = rng.uniform(-3.0, 0.0);
    hi(j) = lo(j) + rng.uniform(0.5, 4.0);
    c(j) = rng.uniform(-2.0, 2.0);
  }
  Vector x0(p);
  for (Index j = 0; j < p; ++j) x0(j) = lo(j) + (hi(j) - lo(j)) * rng.uniform01();
  Vector b = a * x0;
  return LpProblem(std::move(c), std::move(a), std::move(b), std::move(lo), std::move(hi));
}

}  // namespace

TEST_CASE("minimize v subject to v >= 1") {
  Matrix a(0, 1);
  LpProblem p(Vector::Ones(1), a, Vector::Zero(0), Vector::Ones(1), Vector::Constant(1, kInf));
  auto s = solve_lp(p);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK_THAT(s.objective_value, Catch::Matchers::WithinAbs(1.0, 1e-9));
  CHECK_THAT(s.primal(0), Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("infeasible: v = 1 with v fixed at 0") {
  Matrix a(1, 1);
  a << 1;
  LpProblem p(Vector::Zero(1), a, Vector::Ones(1), Vector::Zero(1), Vector::Zero(1));
  CHECK(solve_lp(p).status == LpStatus::infeasible);
}

TEST_CASE("unbounded detection") {
  Matrix a(0, 1);
  LpProblem p(Vector::Constant(1, -1.0), a, Vector::Zero(0), Vector::Zero(1),
              Vector::Constant(1, kInf));
  CHECK(solve_lp(p).status == LpStatus::unbounded);
}

TEST_CASE("equality with free variable and dual extraction") {
  // min x1 + 2 x2  s.t.  x1 + x2 = 4, x1 free, 0 <= x2 <= 1
  Matrix a(1, 2);
  a << 1, 1;
  Vector c(2);
  c << 1, 2;
  Vector lo(2), hi(2);
  lo << -kInf, 0;
  hi << kInf, 1;
  LpProblem p(c, a, Vector::Constant(1, 4.0), lo, hi);
  auto s = solve_lp(p);
  REQUIRE(s.status == LpStatus::optimal);
  CHECK_THAT(s.objective_value, Catch::Matchers::WithinAbs(4.0, 1e-9));
  CHECK_THAT(s.primal(0), Catch::Matchers::WithinAbs(4.0, 1e-9));
  CHECK_THAT(s.primal(1), Catch::Matchers::WithinAbs(0.0, 1e-9));
  // Dual of the equality from the free basic variable: lambda = 1.
  CHECK_THAT(s.dual(0), Catch::Matchers::WithinAbs(1.0, 1e-9));
}

TEST_CASE("solver matches vertex enumeration on 100 seeded LPs") {
  int checked = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    LpProblem p = random_bounded_lp(seed, 4 + static_cast<Index>(seed % 3),
                                    7 + static_cast<Index>(seed % 4));
    auto expected = oracle::lp_vertex_enumeration(p);
    REQUIRE(expected.feasible);
    auto s = solve_lp(p);
    REQUIRE(s.status == LpStatus::optimal);
    CHECK_THAT(s.objective_value, Catch::Matchers::WithinAbs(expected.objective, 1e-8));
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("optimal solutions satisfy feasibility, duality, and complementarity") {
  for (std::uint64_t seed = 200; seed < 230; ++seed) {
    LpProblem p = random_bounded_lp(seed, 5, 9);
    auto s = solve_lp(p);
    REQUIRE(s.status == LpStatus::optimal);
    double bnorm = p.eq_rhs.cwiseAbs().maxCoeff();
    CHECK((p.eq_matrix * s.primal - p.eq_rhs).cwiseAbs().maxCoeff() <= 1e-7 * (1.0 + bnorm));
    // Strong duality: c'x = lambda'b + reduced costs applied at active bounds.
    double dual_obj = s.dual.dot(p.eq_rhs);
    for (Index j = 0; j < p.cols(); ++j) {
      double d = s.reduced_costs(j);
      if (d > 0)
        dual_obj += d * p.lower(j);
      else
        dual_obj += d * p.upper(j);
    }
    CHECK(std::abs(s.objective_value - dual_obj) <= 1e-6 * (1.0 + std::abs(s.objective_value)));
    // Complementary slackness: interior variables have zero reduced cost.
    for (Index j = 0; j < p.cols(); ++j) {
      bool interior = s.primal(j) > p.lower(j) + 1e-6 && s.primal(j) < p.upper(j) - 1e-6;
      if (interior) CHECK(std::abs(s.reduced_costs(j)) <= 1e-7);
      if (s.reduced_costs(j) > 1e-7)
        CHECK_THAT(s.primal(j), Catch::Matchers::WithinAbs(p.lower(j), 1e-6));
      if (s.reduced_costs(j) < -1e-7)
        CHECK_THAT(s.primal(j), Catch::Matchers::WithinAbs(p.upper(j), 1e-6));
    }
  }
}

TEST_CASE("determinism: identical inputs give bit-identical outputs") {
  LpProblem p = random_bounded_lp(42, 6, 10);
  auto s1 = solve_lp(p);
  auto s2 = solve_lp(p);
  REQUIRE(s1.status == s2.status);
  CHECK(s1.objective_value == s2.objective_value);
  CHECK((s1.primal.array() == s2.primal.array()).all());
  CHECK((s1.dual.array() == s2.dual.array()).all());
}

TEST_CASE("objective scaling leaves the argmin unchanged") {
  LpProblem p = random_bounded_lp(77, 5, 8);
  auto s1 = solve_lp(p);
  LpProblem scaled = p;
  scaled.objective *= 3.5;
  auto s2 = solve_lp(scaled);
  REQUIRE(s1.status == LpStatus::optimal);
  REQUIRE(s2.status == LpStatus::optimal);
  CHECK_THAT(s2.objective_value, Catch::Matchers::WithinAbs(3.5 * s1.objective_value, 1e-7));
  CHECK((s1.primal - s2.primal).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("degenerate LP terminates") {
  // Constraints through the origin force degenerate pivots.
  const Index m = 4, p = 8;
  Rng rng(7);
  Matrix a = oracle::random_matrix(rng, m, p, -1.0, 1.0);
  Vector b = Vector::Zero(m);
  Vector c(p);
  for (Index j = 0; j < p; ++j) c(j) = rng.uniform(-1.0, 1.0);
  LpProblem prob(c, a, b, Vector::Zero(p), Vector::Constant(p, 1.0));
  auto s = solve_lp(prob);
  CHECK((s.status == LpStatus::optimal || s.status == LpStatus::unbounded));
}

TEST_CASE("construction rejects malformed problems") {
  Matrix a = Matrix::Zero(1, 2);
  CHECK_THROWS_AS(LpProblem(Vector::Zero(2), a, Vector::Ones(1), Vector::Zero(2), Vector::Ones(2)),
                  DomainError);
  Matrix a2(1, 2);
  a2 << 1, 1;
  Vector lo(2), hi(2);
  lo << 1, 0;
  hi << 0, 1;
  CHECK_THROWS_AS(LpProblem(Vector::Zero(2), a2, Vector::Ones(1), lo, hi), DomainError);
}

TEST_CASE("debug dump is plain text") {
  LpProblem p = random_bounded_lp(3, 2, 3);
  std::ostringstream out;
  write_lp_debug(p, out);
  CHECK(out.str().find("lp 2 rows 3 cols") == 0);
  CHECK(out.str().find("row 1") != std::string::npos);
}
