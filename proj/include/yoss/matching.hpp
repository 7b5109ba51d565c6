#pragma once
// Reduction of structured l-infinity model matching to linear programs.
#include <map>
#include <unordered_map>

#include "lp.hpp"
#include "structure.hpp"

namespace yoss {

// min gamma + sum(scalar obj terms)
//   s.t. ||objective expr|| <= gamma, per-constraint ||expr|| <= bound,
//        every decision block entry respecting its minimum admissible lag
struct MatchingProblem {
  struct VarBlock {
    std::string name;
    int rows = 0, cols = 0, order = 0;
    Eigen::MatrixXi minlag;  // entry (i,j): first admissible lag; kInfDelay excludes the entry
  };
  struct Term {
    int block = 0;
    FirOperator left, right;
  };
  struct Affine {
    FirOperator constant;
    std::vector<Term> terms;
  };
  struct ScalarVar {
    std::string name;
    double hi = std::numeric_limits<double>::infinity();  // lower bound is 0
    double obj_coef = 0.0;
  };
  struct NormConstraint {
    Affine expr;
    int bound_scalar = -1;     // index into scalars, or -1
    double bound_const = 0.0;  // used when bound_scalar < 0
  };
  // structural membership: entry (i,j) of expr must vanish at lags below
  // minlag(i,j) (all lags when kInfDelay); encoded as equality rows
  struct MaskConstraint {
    Affine expr;
    Eigen::MatrixXi minlag;
  };

  Affine objective;
  std::vector<VarBlock> blocks;
  std::vector<ScalarVar> scalars;
  std::vector<NormConstraint> constraints;
  std::vector<MaskConstraint> mask_constraints;
  int horizon = -1;       // -1: exact reachable degree of every expression
  bool truncate = false;  // explicit opt-in to norm truncation at the horizon
};

struct MatchingVarTable {
  struct Entry {
    int block, i, j, k;
  };
  std::vector<Entry> entries;
  // position of (block,i,j,k) in entries, or -1
  std::vector<std::vector<int>> index;  // per block: (i*cols+j)*(order+1)+k -> var
};

inline MatchingVarTable matching_vartable(const MatchingProblem& mp) {
  MatchingVarTable vt;
  for (size_t b = 0; b < mp.blocks.size(); ++b) {
    const auto& blk = mp.blocks[b];
    if (blk.minlag.rows() != blk.rows || blk.minlag.cols() != blk.cols)
      throw dim_error("matching_vartable: minlag shape");
    vt.index.emplace_back(static_cast<size_t>(blk.rows * blk.cols * (blk.order + 1)), -1);
    for (int i = 0; i < blk.rows; ++i)
      for (int j = 0; j < blk.cols; ++j) {
        int k0 = blk.minlag(i, j);
        if (k0 == kInfDelay) continue;
        for (int k = k0; k <= blk.order; ++k) {
          vt.index[b][static_cast<size_t>((i * blk.cols + j) * (blk.order + 1) + k)] =
              static_cast<int>(vt.entries.size());
          vt.entries.push_back({static_cast<int>(b), i, j, k});
        }
      }
  }
  return vt;
}

namespace detail {

// expanded affine expression: per (i,j,lag) the constant and decision coefficients
struct ExprRows {
  int rows = 0, cols = 0, lags = 0;
  std::vector<double> cst;                                    // (i*cols+j)*lags + l
  std::vector<std::vector<std::pair<int, double>>> coef;      // same layout -> (var, weight)
  bool any(int i, int j, int l) const {
    size_t at = static_cast<size_t>((i * cols + j) * lags + l);
    return cst[at] != 0.0 || !coef[at].empty();
  }
};

inline int affine_reach(const MatchingProblem& mp, const MatchingProblem::Affine& e) {
  int reach = e.constant.order();
  for (const auto& t : e.terms)
    reach = std::max(reach,
                     t.left.order() + mp.blocks[static_cast<size_t>(t.block)].order + t.right.order());
  return reach;
}

inline ExprRows expand_affine(const MatchingProblem& mp, const MatchingVarTable& vt,
                              const MatchingProblem::Affine& e, int lags) {
  ExprRows ex;
  ex.rows = e.constant.rows;
  ex.cols = e.constant.cols;
  ex.lags = lags;
  size_t total = static_cast<size_t>(ex.rows) * static_cast<size_t>(ex.cols) * static_cast<size_t>(lags);
  ex.cst.assign(total, 0.0);
  ex.coef.assign(total, {});
  for (int l = 0; l < std::min(lags, e.constant.lags()); ++l)
    for (int i = 0; i < ex.rows; ++i)
      for (int j = 0; j < ex.cols; ++j)
        ex.cst[static_cast<size_t>((i * ex.cols + j) * lags + l)] = e.constant[l](i, j);
  for (const auto& t : e.terms) {
    const auto& blk = mp.blocks[static_cast<size_t>(t.block)];
    if (t.left.cols != blk.rows || t.right.rows != blk.cols || t.left.rows != ex.rows ||
        t.right.cols != ex.cols)
      throw dim_error("expand_affine: term dimensions");
    // W(a,c)(l') = sum_{k1+k3=l'} outer(left(k1)[:,a], right(k3)[c,:])
    int wl = t.left.order() + t.right.order() + 1;
    std::vector<Mat> W(static_cast<size_t>(blk.rows * blk.cols * wl));
    for (int a = 0; a < blk.rows; ++a)
      for (int c = 0; c < blk.cols; ++c)
        for (int l = 0; l < wl; ++l) W[static_cast<size_t>((a * blk.cols + c) * wl + l)] = Mat::Zero(ex.rows, ex.cols);
    for (int k1 = 0; k1 <= t.left.order(); ++k1)
      for (int k3 = 0; k3 <= t.right.order(); ++k3)
        for (int a = 0; a < blk.rows; ++a)
          for (int c = 0; c < blk.cols; ++c)
            W[static_cast<size_t>((a * blk.cols + c) * wl + k1 + k3)].noalias() +=
                t.left[k1].col(a) * t.right[k3].row(c);
    for (const auto& en : vt.entries) {
      if (en.block != t.block) continue;
      int vi = vt.index[static_cast<size_t>(en.block)]
                       [static_cast<size_t>((en.i * blk.cols + en.j) * (blk.order + 1) + en.k)];
      for (int l = 0; l < wl && en.k + l < lags; ++l) {
        const Mat& Wl = W[static_cast<size_t>((en.i * blk.cols + en.j) * wl + l)];
        for (int i = 0; i < ex.rows; ++i)
          for (int j = 0; j < ex.cols; ++j)
            if (Wl(i, j) != 0.0)
              ex.coef[static_cast<size_t>((i * ex.cols + j) * lags + (en.k + l))].push_back(
                  {vi, Wl(i, j)});
      }
    }
  }
  return ex;
}

}  // namespace detail

struct BuiltMatching {
  LinearProgram lp;
  MatchingVarTable vt;
  int nblockvars = 0;
  int scalar0 = 0;   // first scalar variable index
  int gamma = 0;     // epigraph variable index
  int phi0 = 0;      // first split-variable index
};

// columns: [block coefficients | scalars | gamma | phi+- pairs]; every affine entry
// is an equality phi+ - phi- = entry; per-output-row sums of (phi+ + phi-) bound the norm
inline BuiltMatching mm_build(const MatchingProblem& mp) {
  BuiltMatching bm;
  bm.vt = matching_vartable(mp);
  bm.nblockvars = static_cast<int>(bm.vt.entries.size());
  bm.scalar0 = bm.nblockvars;
  bm.gamma = bm.scalar0 + static_cast<int>(mp.scalars.size());
  bm.phi0 = bm.gamma + 1;

  std::vector<detail::ExprRows> exprs;
  std::vector<int> expr_bound_scalar;  // -2 = objective (gamma)
  std::vector<double> expr_bound_const;
  auto add_expr = [&](const MatchingProblem::Affine& e, int bs, double bc) {
    int reach = detail::affine_reach(mp, e);
    int lags = reach + 1;
    if (mp.horizon >= 0) {
      if (mp.horizon < reach && !mp.truncate)
        throw infeasible_error("mm_build: horizon " + std::to_string(mp.horizon) +
                               " below reachable degree " + std::to_string(reach));
      lags = std::min(lags, mp.horizon + 1);
    }
    exprs.push_back(detail::expand_affine(mp, bm.vt, e, lags));
    expr_bound_scalar.push_back(bs);
    expr_bound_const.push_back(bc);
  };
  add_expr(mp.objective, -2, 0.0);
  for (const auto& nc : mp.constraints) add_expr(nc.expr, nc.bound_scalar, nc.bound_const);

  // membership constraints are structural, so they always expand to full reach
  std::vector<detail::ExprRows> masked;
  int nmaskrows = 0;
  for (const auto& mc : mp.mask_constraints) {
    int lags = detail::affine_reach(mp, mc.expr) + 1;
    detail::ExprRows ex = detail::expand_affine(mp, bm.vt, mc.expr, lags);
    if (mc.minlag.rows() != ex.rows || mc.minlag.cols() != ex.cols)
      throw dim_error("mm_build: mask constraint shape");
    for (int i = 0; i < ex.rows; ++i)
      for (int j = 0; j < ex.cols; ++j)
        for (int l = 0; l < ex.lags; ++l) {
          if (mc.minlag(i, j) != kInfDelay && l >= mc.minlag(i, j)) continue;
          if (!ex.any(i, j, l)) {
            size_t at = static_cast<size_t>((i * ex.cols + j) * ex.lags + l);
            if (std::abs(ex.cst[at]) > 1e-12)
              throw infeasible_error("mm_build: mask constraint forces a nonzero constant to 0");
            continue;
          }
          ++nmaskrows;
        }
    masked.push_back(std::move(ex));
  }

  // count phi pairs
  int npairs = 0;
  for (const auto& ex : exprs)
    for (int i = 0; i < ex.rows; ++i)
      for (int j = 0; j < ex.cols; ++j)
        for (int l = 0; l < ex.lags; ++l)
          if (ex.any(i, j, l)) ++npairs;

  int nv = bm.phi0 + 2 * npairs;
  int neq = npairs + nmaskrows;
  int nineq = 0;
  for (size_t x = 0; x < exprs.size(); ++x) nineq += exprs[x].rows;
  for (const auto& sv : mp.scalars)
    if (std::isfinite(sv.hi)) ++nineq;

  LinearProgram& lp = bm.lp;
  lp.c = Vec::Zero(nv);
  lp.E = Mat::Zero(neq, nv);
  lp.f = Vec::Zero(neq);
  lp.G = Mat::Zero(nineq, nv);
  lp.h = Vec::Zero(nineq);
  lp.lb.assign(static_cast<size_t>(nv), 0.0);
  for (int v = 0; v < bm.nblockvars; ++v) lp.lb[static_cast<size_t>(v)] = kNegInf;
  lp.c(bm.gamma) = 1.0;
  for (size_t s = 0; s < mp.scalars.size(); ++s) lp.c(bm.scalar0 + static_cast<int>(s)) = mp.scalars[s].obj_coef;

  int erow = 0, grow = 0, pv = bm.phi0;
  for (size_t x = 0; x < exprs.size(); ++x) {
    const auto& ex = exprs[x];
    for (int i = 0; i < ex.rows; ++i) {
      int sumrow = grow++;
      for (int j = 0; j < ex.cols; ++j)
        for (int l = 0; l < ex.lags; ++l) {
          if (!ex.any(i, j, l)) continue;
          size_t at = static_cast<size_t>((i * ex.cols + j) * ex.lags + l);
          int fp = pv++, fm = pv++;
          for (const auto& [vi, w] : ex.coef[at]) lp.E(erow, vi) += w;
          lp.E(erow, fp) = -1.0;
          lp.E(erow, fm) = 1.0;
          lp.f(erow) = -ex.cst[at];
          lp.crash.push_back({erow, fp, fm});
          ++erow;
          lp.G(sumrow, fp) += 1.0;
          lp.G(sumrow, fm) += 1.0;
        }
      int bs = expr_bound_scalar[x];
      if (bs == -2)
        lp.G(sumrow, bm.gamma) = -1.0;
      else if (bs >= 0)
        lp.G(sumrow, bm.scalar0 + bs) = -1.0;
      else
        lp.h(sumrow) = expr_bound_const[x];
    }
  }
  for (size_t s = 0; s < mp.scalars.size(); ++s)
    if (std::isfinite(mp.scalars[s].hi)) {
      lp.G(grow, bm.scalar0 + static_cast<int>(s)) = 1.0;
      lp.h(grow) = mp.scalars[s].hi;
      ++grow;
    }
  for (size_t mcx = 0; mcx < masked.size(); ++mcx) {
    const auto& ex = masked[mcx];
    const auto& ml = mp.mask_constraints[mcx].minlag;
    for (int i = 0; i < ex.rows; ++i)
      for (int j = 0; j < ex.cols; ++j)
        for (int l = 0; l < ex.lags; ++l) {
          if (ml(i, j) != kInfDelay && l >= ml(i, j)) continue;
          if (!ex.any(i, j, l)) continue;
          size_t at = static_cast<size_t>((i * ex.cols + j) * ex.lags + l);
          for (const auto& [vi, w] : ex.coef[at]) lp.E(erow, vi) += w;
          lp.f(erow) = -ex.cst[at];
          ++erow;
        }
  }
  return bm;
}

struct MatchingResult {
  LpStatus status = LpStatus::numerical;
  double value = 0.0;   // full LP objective
  double gamma = 0.0;   // norm epigraph value
  std::vector<FirOperator> solved;  // one per block
  std::vector<double> scalar_values;
  long iterations = 0;
  double residual = 0.0;
};

inline MatchingResult mm_solve(const MatchingProblem& mp) {
  BuiltMatching bm = mm_build(mp);
  LpResult r = lp_solve(bm.lp);
  MatchingResult out;
  out.status = r.status;
  out.iterations = r.iterations;
  out.residual = r.residual;
  if (r.status != LpStatus::optimal) return out;
  out.value = r.value;
  out.gamma = r.x(bm.gamma);
  for (const auto& blk : mp.blocks) out.solved.emplace_back(blk.rows, blk.cols, blk.order);
  for (size_t e = 0; e < bm.vt.entries.size(); ++e) {
    const auto& en = bm.vt.entries[e];
    out.solved[static_cast<size_t>(en.block)][en.k](en.i, en.j) = r.x(static_cast<int>(e));
  }
  for (auto& t : out.solved) t = op_trim(t, 0.0);
  for (size_t s = 0; s < mp.scalars.size(); ++s)
    out.scalar_values.push_back(r.x(bm.scalar0 + static_cast<int>(s)));
  return out;
}

}  // namespace yoss
