#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "test_util.hpp"
#include "yoss/matching.hpp"

using namespace yoss;
using namespace yoss::testutil;

namespace {

Eigen::MatrixXi free_minlag(int r, int c) { return Eigen::MatrixXi::Zero(r, c); }

FirOperator scalar1(double v) {
  FirOperator t(1, 1, 0);
  t[0](0, 0) = v;
  return t;
}

FirOperator reconstruct(const MatchingProblem& mp, const MatchingProblem::Affine& e,
                        const std::vector<FirOperator>& solved) {
  FirOperator acc = e.constant;
  for (const auto& t : e.terms)
    acc = op_add(acc, op_mul(op_mul(t.left, solved[static_cast<size_t>(t.block)]), t.right));
  return acc;
}

}  // namespace

TEST_CASE("norm of a lone variable minimizes to zero") {
  MatchingProblem mp;
  mp.blocks.push_back({"x", 1, 1, 0, free_minlag(1, 1)});
  mp.objective.constant = FirOperator::zero(1, 1);
  mp.objective.terms.push_back({0, FirOperator::eye(1), FirOperator::eye(1)});
  MatchingResult r = mm_solve(mp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.gamma == doctest::Approx(0.0));
  CHECK(norm_linf_induced(r.solved[0]) <= 1e-10);
}

TEST_CASE("exact matching of a constant") {
  MatchingProblem mp;
  mp.blocks.push_back({"q", 1, 1, 0, free_minlag(1, 1)});
  mp.objective.constant = scalar1(1.0);
  mp.objective.terms.push_back({0, scalar1(-1.0), FirOperator::eye(1)});
  MatchingResult r = mm_solve(mp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.gamma == doctest::Approx(0.0));
  CHECK(r.solved[0].at(0)(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("deadbeat cancellation through a delay multiplier") {
  // minimize |0.5 lambda + lambda z| over order-0 z: zero at z = -0.5
  MatchingProblem mp;
  mp.blocks.push_back({"z", 1, 1, 0, free_minlag(1, 1)});
  FirOperator c(1, 1, 1);
  c[1](0, 0) = 0.5;
  mp.objective.constant = c;
  mp.objective.terms.push_back({0, op_delay(FirOperator::eye(1)), FirOperator::eye(1)});
  MatchingResult r = mm_solve(mp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.gamma == doctest::Approx(0.0));
  CHECK(r.solved[0].at(0)(0, 0) == doctest::Approx(-0.5));
}

TEST_CASE("scalar bound variables join the objective") {
  // minimize s subject to ||2 - q|| <= s with q restricted to lag >= 1: s = 2
  MatchingProblem mp;
  Eigen::MatrixXi ml(1, 1);
  ml << 1;
  mp.blocks.push_back({"q", 1, 1, 2, ml});
  mp.scalars.push_back({"s", std::numeric_limits<double>::infinity(), 1.0});
  MatchingProblem::Affine e;
  e.constant = scalar1(2.0);
  e.terms.push_back({0, scalar1(-1.0), FirOperator::eye(1)});
  mp.constraints.push_back({e, 0, 0.0});
  mp.objective.constant = FirOperator::zero(1, 1);
  MatchingResult r = mm_solve(mp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.scalar_values[0] == doctest::Approx(2.0));
  // the lag-0 coefficient stayed excluded
  CHECK(r.solved[0].at(0)(0, 0) == 0.0);
}

TEST_CASE("short horizon without explicit truncation is rejected") {
  MatchingProblem mp;
  mp.blocks.push_back({"q", 1, 1, 3, free_minlag(1, 1)});
  mp.objective.constant = scalar1(1.0);
  mp.objective.terms.push_back({0, op_delay(FirOperator::eye(1), 2), FirOperator::eye(1)});
  mp.horizon = 2;  // reachable degree is 5
  CHECK_THROWS_AS(mm_solve(mp), infeasible_error);
  mp.truncate = true;
  MatchingResult r = mm_solve(mp);
  CHECK(r.status == LpStatus::optimal);
}

TEST_CASE("norm encoding is exact on random instances") {
  Rng rng(20260815ull);
  for (int cs = 0; cs < 30; ++cs) {
    MatchingProblem mp;
    int vr = rint(rng, 1, 2), vc = rint(rng, 1, 2);
    mp.blocks.push_back({"q", vr, vc, rint(rng, 0, 3), free_minlag(vr, vc)});
    int er = rint(rng, 1, 2), ec = rint(rng, 1, 2);
    mp.objective.constant = rand_fir(rng, er, ec, rint(rng, 0, 3));
    mp.objective.terms.push_back(
        {0, rand_fir(rng, er, vr, rint(rng, 0, 2)), rand_fir(rng, vc, ec, rint(rng, 0, 2))});
    if (rint(rng, 0, 1)) {
      MatchingProblem::Affine side;
      side.constant = rand_fir(rng, er, ec, 1);
      side.terms.push_back(
          {0, rand_fir(rng, er, vr, 1), rand_fir(rng, vc, ec, 1)});
      mp.constraints.push_back({side, -1, runif(rng, 3.0, 8.0)});
    }
    MatchingResult r = mm_solve(mp);
    REQUIRE(r.status == LpStatus::optimal);
    FirOperator expr = reconstruct(mp, mp.objective, r.solved);
    CHECK(norm_linf_induced(expr) == doctest::Approx(r.gamma).epsilon(1e-9).scale(1.0));
    CHECK(std::abs(norm_linf_induced(expr) - r.gamma) <= 1e-7);
    for (const auto& con : mp.constraints) {
      FirOperator ce = reconstruct(mp, con.expr, r.solved);
      CHECK(norm_linf_induced(ce) <= con.bound_const + 1e-7);
    }
  }
}

TEST_CASE("optimal value never increases with FIR order") {
  Rng rng(20260816ull);
  for (int cs = 0; cs < 20; ++cs) {
    FirOperator constant = rand_fir(rng, 2, 2, 3);
    FirOperator left = rand_fir(rng, 2, 1, 1);
    FirOperator right = rand_fir(rng, 1, 2, 1);
    double prev = std::numeric_limits<double>::infinity();
    for (int ord = 0; ord <= 4; ++ord) {
      MatchingProblem mp;
      mp.blocks.push_back({"q", 1, 1, ord, free_minlag(1, 1)});
      mp.objective.constant = constant;
      mp.objective.terms.push_back({0, left, right});
      MatchingResult r = mm_solve(mp);
      REQUIRE(r.status == LpStatus::optimal);
      CHECK(r.gamma <= prev + 1e-9);
      prev = r.gamma;
    }
  }
}

TEST_CASE("solved blocks honor their minimum lag masks") {
  Rng rng(20260817ull);
  for (int cs = 0; cs < 30; ++cs) {
    MatchingProblem mp;
    int vr = 2, vc = 2, ord = rint(rng, 1, 3);
    Eigen::MatrixXi ml(vr, vc);
    for (int i = 0; i < vr; ++i)
      for (int j = 0; j < vc; ++j) {
        int pick = rint(rng, 0, 3);
        ml(i, j) = pick == 3 ? kInfDelay : pick;
      }
    mp.blocks.push_back({"q", vr, vc, ord, ml});
    mp.objective.constant = rand_fir(rng, 2, 2, 2);
    mp.objective.terms.push_back({0, rand_fir(rng, 2, 2, 1), rand_fir(rng, 2, 2, 1)});
    MatchingResult r = mm_solve(mp);
    REQUIRE(r.status == LpStatus::optimal);
    const FirOperator& q = r.solved[0];
    for (int k = 0; k <= q.order(); ++k)
      for (int i = 0; i < vr; ++i)
        for (int j = 0; j < vc; ++j)
          if (ml(i, j) == kInfDelay || k < ml(i, j)) CHECK(q[k](i, j) == 0.0);
  }
}

TEST_CASE("an all zero objective row is fine") {
  MatchingProblem mp;
  mp.blocks.push_back({"q", 1, 1, 0, free_minlag(1, 1)});
  mp.objective.constant = FirOperator::zero(2, 1);
  MatchingProblem::Term t;
  t.block = 0;
  t.left = FirOperator::zero(2, 1);
  t.left[0](0, 0) = 1.0;  // second output row never sees the variable
  t.right = FirOperator::eye(1);
  mp.objective.terms.push_back(t);
  MatchingResult r = mm_solve(mp);
  REQUIRE(r.status == LpStatus::optimal);
  CHECK(r.gamma == doctest::Approx(0.0));
}
