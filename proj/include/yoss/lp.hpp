#pragma once
// Self-contained dense two-phase simplex for the model-matching reductions.
#include <algorithm>
#include <iomanip>
#include <limits>
#include <sstream>

#include "fir.hpp"

namespace yoss {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// minimize c.v subject to G v <= h, E v = f, v_j >= lb_j (lb_j in {0, -inf})
struct LinearProgram {
  Vec c;
  Mat G;
  Vec h;
  Mat E;
  Vec f;
  std::vector<double> lb;
  // optional warm-start hints: for equality row r, columns of a +1/-1 complementary
  // pair appearing in no other equality row; used to seed a feasible crash basis
  struct CrashPair {
    int eq_row, col_pos, col_neg;
  };
  std::vector<CrashPair> crash;

  int vars() const { return static_cast<int>(c.size()); }
  int ineqs() const { return static_cast<int>(h.size()); }
  int eqs() const { return static_cast<int>(f.size()); }
};

enum class LpStatus { optimal, infeasible, unbounded, numerical };

struct LpResult {
  LpStatus status = LpStatus::numerical;
  double value = 0.0;
  Vec x;
  long iterations = 0;
  double residual = 0.0;
};

inline const char* lp_status_name(LpStatus s) {
  switch (s) {
    case LpStatus::optimal: return "optimal";
    case LpStatus::infeasible: return "infeasible";
    case LpStatus::unbounded: return "unbounded";
    default: return "numerical";
  }
}

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Tableau {
  RowMat T;          // m x (ncols+1), last column = rhs
  Vec cost;          // phase-2 reduced-cost row, size ncols+1 (last = -objective)
  Vec art;           // phase-1 reduced-cost row
  std::vector<int> basis;  // basic variable per row
  int m = 0, ncols = 0;
};

inline void pivot(Tableau& tb, int r, int q) {
  double piv = tb.T(r, q);
  tb.T.row(r) /= piv;
  Vec col = tb.T.col(q);
  col(r) = 0.0;
  tb.T.noalias() -= col * tb.T.row(r);
  tb.T.col(q).setZero();
  tb.T(r, q) = 1.0;
  double cc = tb.cost(q);
  if (cc != 0.0) tb.cost.noalias() -= cc * tb.T.row(r).transpose();
  double ca = tb.art(q);
  if (ca != 0.0) tb.art.noalias() -= ca * tb.T.row(r).transpose();
  tb.basis[static_cast<size_t>(r)] = q;
}

// Dantzig pricing with a permanent switch to Bland after a long stall
struct Pricer {
  long stall = 0;
  bool bland = false;
  double last = std::numeric_limits<double>::infinity();

  int enter(const Vec& rc, int ncols, const std::vector<bool>& allowed, double tol) {
    int best = -1;
    if (!bland) {
      double bv = -tol;
      for (int j = 0; j < ncols; ++j)
        if (allowed[static_cast<size_t>(j)] && rc(j) < bv) {
          bv = rc(j);
          best = j;
        }
      return best;
    }
    for (int j = 0; j < ncols; ++j)
      if (allowed[static_cast<size_t>(j)] && rc(j) < -tol) return j;
    return -1;
  }
  void observe(double obj) {
    if (obj < last - 1e-12) {
      last = obj;
      stall = 0;
    } else if (++stall > 600) {
      bland = true;
    }
  }
};

inline int ratio_row_at(const Tableau& tb, int q, double piv_tol) {
  int rhs = tb.ncols;
  int best = -1;
  double best_ratio = std::numeric_limits<double>::infinity(), best_piv = 0.0;
  for (int i = 0; i < tb.m; ++i) {
    double a = tb.T(i, q);
    if (a <= piv_tol) continue;
    double ratio = std::max(tb.T(i, rhs), 0.0) / a;
    if (best < 0) {
      best_ratio = ratio;
      best_piv = a;
      best = i;
      continue;
    }
    double band = 1e-9 * (1.0 + best_ratio);
    if (ratio < best_ratio - band || (ratio < best_ratio + band && a > best_piv)) {
      best_ratio = std::min(ratio, best_ratio);
      best_piv = a;
      best = i;
    }
  }
  return best;
}

// pivots below 1e-7 are admitted only when nothing larger qualifies: rank-1 updates
// leave noise of that order in long runs, and pivoting on noise wrecks the basis
inline int ratio_row(const Tableau& tb, int q, double piv_tol) {
  int r = ratio_row_at(tb, q, 1e-7);
  return r >= 0 ? r : ratio_row_at(tb, q, piv_tol);
}

}  // namespace detail

// Two-phase dense simplex. Free variables are split internally; equalities may carry
// crash hints that replace phase-1 artificials row by row.
inline LpResult lp_solve(const LinearProgram& lp, long max_iters = 2'000'000) {
  using detail::RowMat;
  const int nv = lp.vars();
  const int ne = lp.eqs();
  const int ni = lp.ineqs();
  if ((ne && lp.E.cols() != nv) || (ni && lp.G.cols() != nv) ||
      static_cast<int>(lp.lb.size()) != nv)
    throw dim_error("lp_solve: inconsistent dimensions");

  // split free variables: column map orig j -> (pos col, optional neg col)
  std::vector<int> pos_col(static_cast<size_t>(nv)), neg_col(static_cast<size_t>(nv), -1);
  int ns = 0;
  for (int j = 0; j < nv; ++j) {
    pos_col[static_cast<size_t>(j)] = ns++;
    if (lp.lb[static_cast<size_t>(j)] == kNegInf) neg_col[static_cast<size_t>(j)] = ns++;
  }
  const int m = ne + ni;
  const int nslack = ni;
  int ncols = ns + nslack;  // artificials appended after crash analysis
  const int max_art = m;

  detail::Tableau tb;
  tb.m = m;
  tb.T = detail::RowMat::Zero(m, ncols + max_art + 1);
  auto fill_row = [&](int row, const Mat& src, int src_row) {
    for (int j = 0; j < nv; ++j) {
      double a = src(src_row, j);
      if (a == 0.0) continue;
      tb.T(row, pos_col[static_cast<size_t>(j)]) = a;
      if (neg_col[static_cast<size_t>(j)] >= 0) tb.T(row, neg_col[static_cast<size_t>(j)]) = -a;
    }
  };
  int rhs_col = ncols + max_art;
  for (int i = 0; i < ne; ++i) {
    fill_row(i, lp.E, i);
    tb.T(i, rhs_col) = lp.f(i);
  }
  for (int i = 0; i < ni; ++i) {
    fill_row(ne + i, lp.G, i);
    tb.T(ne + i, ns + i) = 1.0;
    tb.T(ne + i, rhs_col) = lp.h(i);
  }
  // normalize rhs signs
  for (int i = 0; i < m; ++i)
    if (tb.T(i, rhs_col) < 0.0) tb.T.row(i) = -tb.T.row(i);

  // crash basis: hinted column per equality row, slack per inequality row
  tb.basis.assign(static_cast<size_t>(m), -1);
  std::vector<bool> crash_used(static_cast<size_t>(m), false);
  for (const LinearProgram::CrashPair& cp : lp.crash) {
    if (cp.eq_row < 0 || cp.eq_row >= ne) continue;
    int cpos = pos_col[static_cast<size_t>(cp.col_pos)];
    int cneg = pos_col[static_cast<size_t>(cp.col_neg)];
    int pick = tb.T(cp.eq_row, cpos) > 0.5 ? cpos : (tb.T(cp.eq_row, cneg) > 0.5 ? cneg : -1);
    if (pick < 0) continue;
    tb.basis[static_cast<size_t>(cp.eq_row)] = pick;
    crash_used[static_cast<size_t>(cp.eq_row)] = true;
  }
  for (int i = 0; i < ni; ++i) {
    // slack basic only if the normalized row kept its +1 slack and nonnegative rhs
    if (tb.T(ne + i, ns + i) > 0.5) tb.basis[static_cast<size_t>(ne + i)] = ns + i;
  }
  // reduce hinted basic columns (each appears in few rows; eliminate everywhere else)
  for (int i = 0; i < ne; ++i) {
    int b = tb.basis[static_cast<size_t>(i)];
    if (b < 0) continue;
    double piv = tb.T(i, b);
    tb.T.row(i) /= piv;
    for (int rr = 0; rr < m; ++rr) {
      if (rr == i) continue;
      double a = tb.T(rr, b);
      if (a != 0.0) tb.T.row(rr) -= a * tb.T.row(i);
    }
  }
  // a hinted reduction can leave another row's rhs negative; those rows get artificials
  int nart = 0;
  std::vector<int> art_rows;
  for (int i = 0; i < m; ++i) {
    if (tb.basis[static_cast<size_t>(i)] >= 0 && tb.T(i, rhs_col) >= -1e-11) continue;
    if (tb.T(i, rhs_col) < 0.0) tb.T.row(i) = -tb.T.row(i);
    int ac = ncols + nart++;
    tb.T(i, ac) = 1.0;
    tb.basis[static_cast<size_t>(i)] = ac;
    art_rows.push_back(i);
  }
  int total_cols = ncols + nart;
  tb.ncols = total_cols;
  // compact: move rhs next to the used artificials
  if (nart < max_art) {
    tb.T.col(total_cols) = tb.T.col(rhs_col);
    tb.T.conservativeResize(m, total_cols + 1);
  }
  rhs_col = total_cols;

  // phase-2 cost row over split columns
  tb.cost = Vec::Zero(total_cols + 1);
  for (int j = 0; j < nv; ++j) {
    tb.cost(pos_col[static_cast<size_t>(j)]) = lp.c(j);
    if (neg_col[static_cast<size_t>(j)] >= 0) tb.cost(neg_col[static_cast<size_t>(j)]) = -lp.c(j);
  }
  const Vec csplit = tb.cost.head(total_cols);
  // make reduced costs consistent with the crash basis
  for (int i = 0; i < m; ++i) {
    int b = tb.basis[static_cast<size_t>(i)];
    if (b < 0) throw numeric_error("lp_solve: row without basis");
    double cb = tb.cost(b);
    if (cb != 0.0) tb.cost -= cb * tb.T.row(i).transpose();
  }
  // phase-1 cost: sum of artificials
  tb.art = Vec::Zero(total_cols + 1);
  for (int i : art_rows) tb.art -= tb.T.row(i).transpose();
  for (int a = ncols; a < total_cols; ++a) tb.art(a) = 0.0;

  const double rc_tol = 1e-9, piv_tol = 1e-9;
  std::vector<bool> allowed(static_cast<size_t>(total_cols), true);
  long iters = 0;
  LpResult res;

  // original-orientation column and rhs access, shared by refactorization and recovery
  std::vector<int> col_var(static_cast<size_t>(total_cols), -1);
  std::vector<double> col_sign(static_cast<size_t>(total_cols), 0.0);
  for (int j = 0; j < nv; ++j) {
    col_var[static_cast<size_t>(pos_col[static_cast<size_t>(j)])] = j;
    col_sign[static_cast<size_t>(pos_col[static_cast<size_t>(j)])] = 1.0;
    if (neg_col[static_cast<size_t>(j)] >= 0) {
      col_var[static_cast<size_t>(neg_col[static_cast<size_t>(j)])] = j;
      col_sign[static_cast<size_t>(neg_col[static_cast<size_t>(j)])] = -1.0;
    }
  }
  auto orig_col = [&](int col, Vec& out) {
    out.setZero();
    int j = col < ns ? col_var[static_cast<size_t>(col)] : -1;
    if (j >= 0) {
      double sgn = col_sign[static_cast<size_t>(col)];
      for (int i = 0; i < ne; ++i) out(i) = sgn * lp.E(i, j);
      for (int i = 0; i < ni; ++i) out(ne + i) = sgn * lp.G(i, j);
    } else if (col >= ns && col < ns + nslack) {
      out(ne + (col - ns)) = 1.0;
    }
  };
  Vec rhs_orig(m);
  for (int i = 0; i < ne; ++i) rhs_orig(i) = lp.f(i);
  for (int i = 0; i < ni; ++i) rhs_orig(ne + i) = lp.h(i);

  // exact refactorization: rebuild tableau, rhs, and phase-2 reduced costs from the
  // original data for the current basis. Rank-1 pivot updates drift with the pivot
  // count, so any optimal or unbounded verdict is only final when reached with zero
  // pivots since a rebuild. Rows still owned by an artificial after phase 1 are
  // redundant once feasible and become inert zero rows.
  long pivots_since_rebuild = 0;
  bool tableau_verified = false;
  auto rebuild = [&]() -> bool {
#ifdef YOSS_LP_DIAG
    auto diag_t0 = std::chrono::steady_clock::now();
#endif
    std::vector<int> krows, kcols;
    krows.reserve(static_cast<size_t>(m));
    kcols.reserve(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
      int b = tb.basis[static_cast<size_t>(i)];
      if (b < ncols) {
        krows.push_back(i);
        kcols.push_back(b);
      } else {
        tb.T.row(i).setZero();
      }
    }
    const int nb = static_cast<int>(krows.size());
    Mat B(nb, nb);
    Vec col(m), cb(nb);
    for (int k = 0; k < nb; ++k) {
      orig_col(kcols[static_cast<size_t>(k)], col);
      for (int i = 0; i < nb; ++i) B(i, k) = col(krows[static_cast<size_t>(i)]);
      cb(k) = csplit(kcols[static_cast<size_t>(k)]);
    }
    Eigen::PartialPivLU<Mat> lu(B);
    Vec rk(nb);
    for (int i = 0; i < nb; ++i) rk(i) = rhs_orig(krows[static_cast<size_t>(i)]);
    Vec xb = lu.solve(rk);
    if (!xb.allFinite() || (nb && (B * xb - rk).cwiseAbs().maxCoeff() > 1e-6)) {
#ifdef YOSS_LP_DIAG
      std::fprintf(stderr, "[lp] rebuild FAIL nb=%d resid=%g finite=%d\n", nb,
                   nb ? (B * xb - rk).cwiseAbs().maxCoeff() : 0.0, (int)xb.allFinite());
#endif
      return false;
    }
    Vec y = lu.transpose().solve(cb);
    for (int a = ncols; a < total_cols; ++a) tb.cost(a) = 0.0;
    const int blockw = 1024;
    Mat W(nb, blockw), S;
    for (int j0 = 0; j0 < ncols; j0 += blockw) {
      int bw = std::min(blockw, ncols - j0);
      for (int j = 0; j < bw; ++j) {
        orig_col(j0 + j, col);
        for (int i = 0; i < nb; ++i) W(i, j) = col(krows[static_cast<size_t>(i)]);
      }
      S = lu.solve(W.leftCols(bw));
      for (int k = 0; k < nb; ++k)
        for (int j = 0; j < bw; ++j) tb.T(krows[static_cast<size_t>(k)], j0 + j) = S(k, j);
      for (int j = 0; j < bw; ++j) tb.cost(j0 + j) = csplit(j0 + j) - cb.dot(S.col(j));
    }
    for (int k = 0; k < nb; ++k)
      tb.T(krows[static_cast<size_t>(k)], rhs_col) = std::max(xb(k), 0.0);
    tb.cost(rhs_col) = -cb.dot(xb);
    pivots_since_rebuild = 0;
    tableau_verified = true;
#ifdef YOSS_LP_DIAG
    std::fprintf(stderr, "[lp] rebuild ok nb=%d ncols=%d iters=%ld (%.2fs)\n", nb, ncols, iters,
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - diag_t0).count());
#endif
    return true;
  };

  // phase 1
  if (nart > 0) {
    detail::Pricer pr;
    while (-tb.art(rhs_col) > 1e-9) {
      int q = pr.enter(tb.art, total_cols, allowed, rc_tol);
      if (q < 0) break;
      int r = detail::ratio_row(tb, q, piv_tol);
      if (r < 0) break;  // phase-1 objective bounded below by 0; treat as stall
      detail::pivot(tb, r, q);
      pr.observe(-tb.art(rhs_col));
      if (++iters > max_iters) {
        res.status = LpStatus::numerical;
        return res;
      }
    }
    if (-tb.art(rhs_col) > 1e-7) {
      res.status = LpStatus::infeasible;
      res.iterations = iters;
      return res;
    }
    // pivot any residual artificial out of the basis (degenerate rows)
    for (int i = 0; i < m; ++i) {
      int b = tb.basis[static_cast<size_t>(i)];
      if (b < ncols) continue;
      int q = -1;
      for (int j = 0; j < ncols; ++j)
        if (std::abs(tb.T(i, j)) > 1e-7) {
          q = j;
          break;
        }
      if (q >= 0) detail::pivot(tb, i, q);
    }
    for (int a = ncols; a < total_cols; ++a) allowed[static_cast<size_t>(a)] = false;
    // phase 2 starts from an exact tableau; a basis the original data cannot
    // reproduce means phase 1 itself pivoted on noise
    if (!rebuild()) {
      res.status = LpStatus::numerical;
      res.iterations = iters;
      return res;
    }
  }

  // phase 2: any optimal or unbounded verdict reached on a drifted tableau is
  // re-verified on a freshly rebuilt one before being returned
  {
    detail::Pricer pr;
    const long refresh_every = 6000;
    for (;;) {
      int q = pr.enter(tb.cost, total_cols, allowed, rc_tol);
      if (q < 0) {
        if (tableau_verified && pivots_since_rebuild == 0) break;
        if (!rebuild()) {
          res.status = LpStatus::numerical;
          res.iterations = iters;
          return res;
        }
        continue;
      }
      int r = detail::ratio_row(tb, q, piv_tol);
      if (r < 0) {
        if (tableau_verified && pivots_since_rebuild == 0) {
          res.status = LpStatus::unbounded;
          res.iterations = iters;
          return res;
        }
        if (!rebuild()) {
          res.status = LpStatus::numerical;
          res.iterations = iters;
          return res;
        }
        continue;
      }
      detail::pivot(tb, r, q);
      ++pivots_since_rebuild;
      pr.observe(-tb.cost(rhs_col));
      if (++iters > max_iters) {
        res.status = LpStatus::numerical;
        res.iterations = iters;
        return res;
      }
      if (pivots_since_rebuild >= refresh_every && !rebuild()) {
        res.status = LpStatus::numerical;
        res.iterations = iters;
        return res;
      }
    }
  }

  // recover the point; refine basic values against the original data by LU
  {
    Vec xs = Vec::Zero(ns + nslack);
    std::vector<int> brows;
    std::vector<int> bcols;
    for (int i = 0; i < m; ++i) {
      int b = tb.basis[static_cast<size_t>(i)];
      if (b >= ncols) continue;  // residual degenerate artificial: value 0
      brows.push_back(i);
      bcols.push_back(b);
    }
    int nb = static_cast<int>(bcols.size());
    Mat B = Mat::Zero(m, nb);
    Vec tmp(m);
    for (int k = 0; k < nb; ++k) {
      orig_col(bcols[static_cast<size_t>(k)], tmp);
      B.col(k) = tmp;
    }
    Vec xb;
    if (nb == m) {
      xb = Eigen::PartialPivLU<Mat>(B).solve(rhs_orig);
    } else {
      xb = B.colPivHouseholderQr().solve(rhs_orig);
    }
    bool refine_ok = (B * xb - rhs_orig).cwiseAbs().maxCoeff() < 1e-6 && xb.minCoeff() > -1e-6;
    if (!refine_ok) {
      // fall back to tableau values
      xb = Vec(nb);
      for (int k = 0; k < nb; ++k) xb(k) = tb.T(brows[static_cast<size_t>(k)], rhs_col);
    }
    for (int k = 0; k < nb; ++k) xs(bcols[static_cast<size_t>(k)]) = std::max(xb(k), 0.0);

    res.x = Vec::Zero(nv);
    for (int j = 0; j < nv; ++j) {
      double v = xs(pos_col[static_cast<size_t>(j)]);
      if (neg_col[static_cast<size_t>(j)] >= 0) v -= xs(neg_col[static_cast<size_t>(j)]);
      res.x(j) = v;
    }
    res.value = lp.c.dot(res.x);
    double resid = 0.0;
    if (ne) resid = (lp.E * res.x - lp.f).cwiseAbs().maxCoeff();
    if (ni) resid = std::max(resid, (lp.G * res.x - lp.h).maxCoeff());
    res.residual = std::max(resid, 0.0);
    res.iterations = iters;
    res.status = res.residual <= 1e-8 ? LpStatus::optimal : LpStatus::numerical;
#ifdef YOSS_LP_DIAG
    if (res.status != LpStatus::optimal)
      std::fprintf(stderr, "[lp] recovery resid=%g refine_ok=%d nb=%d m=%d\n", res.residual,
                   (int)refine_ok, nb, m);
#endif
  }
  return res;
}

// canonical plain-text dump: objective, then equalities, then inequalities, one per line
inline std::string lp_dump(const LinearProgram& lp) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "min";
  for (int j = 0; j < lp.vars(); ++j)
    if (lp.c(j) != 0.0) os << " " << (lp.c(j) < 0 ? "- " : "+ ") << std::abs(lp.c(j)) << " v" << j;
  os << "\n";
  auto row = [&os](const Mat& M, int i, const char* rel, double rhs, int nv) {
    bool any = false;
    for (int j = 0; j < nv; ++j)
      if (M(i, j) != 0.0) {
        os << (any ? " " : "") << (M(i, j) < 0 ? "- " : "+ ") << std::abs(M(i, j)) << " v" << j;
        any = true;
      }
    if (!any) os << "0";
    os << " " << rel << " " << rhs << "\n";
  };
  for (int i = 0; i < lp.eqs(); ++i) row(lp.E, i, "=", lp.f(i), lp.vars());
  for (int i = 0; i < lp.ineqs(); ++i) row(lp.G, i, "<=", lp.h(i), lp.vars());
  for (int j = 0; j < lp.vars(); ++j)
    if (lp.lb[static_cast<size_t>(j)] == 0.0) os << "v" << j << " >= 0\n";
  return os.str();
}

}  // namespace yoss
