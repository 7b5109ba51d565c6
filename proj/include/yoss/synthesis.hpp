#pragma once
// Youla operator state-space controller synthesis: structured (Q, Z) pairs,
// converging upper/lower performance bounds, and stably realizable
// distributed controller realizations.
#include <chrono>

#include "estimator.hpp"

namespace yoss {

struct YoulaPair {
  FirOperator Q;  // (n+p) x (n+p)
  FirOperator Z;  // m x (n+p)
  double eps = 0.0;  // achieved residual norm
  int order = 0;
};

enum class RealizationKind { fullinfo, output_feedback, nonsubspace };

inline const char* realization_kind_name(RealizationKind k) {
  switch (k) {
    case RealizationKind::fullinfo: return "fullinfo";
    case RealizationKind::output_feedback: return "output_feedback";
    default: return "nonsubspace";
  }
}

struct ControllerRealization {
  FirOperator A_K, B_K, C_K, D_K;
  RealizationKind kind = RealizationKind::output_feedback;
  std::vector<int> state_part;               // block sizes of x_K
  std::vector<std::string> state_names;      // matching labels
};

// node index of each scalar coordinate in a stacked space
inline std::vector<int> node_of_dims(const std::vector<int>& per_node) {
  std::vector<int> out;
  for (size_t i = 0; i < per_node.size(); ++i)
    out.insert(out.end(), static_cast<size_t>(per_node[i]), static_cast<int>(i));
  return out;
}

// minimum admissible lag of every entry of the stacked variable [Q; Z]:
// rows run over [x; y; u] coordinates, columns over [x; y]; the state rows of
// Q and the y-to-y block carry one extra unit of delay for well-posedness
inline Eigen::MatrixXi qz_minlag(const GeneralizedPlant& P) {
  int n = P.n(), p = P.p(), m = P.m();
  std::vector<int> rows_node = node_of_dims(P.dims.n);
  {
    std::vector<int> ynode = node_of_dims(P.dims.p), unode = node_of_dims(P.dims.m);
    rows_node.insert(rows_node.end(), ynode.begin(), ynode.end());
    rows_node.insert(rows_node.end(), unode.begin(), unode.end());
  }
  std::vector<int> cols_node = node_of_dims(P.dims.n);
  {
    std::vector<int> ynode = node_of_dims(P.dims.p);
    cols_node.insert(cols_node.end(), ynode.begin(), ynode.end());
  }
  Eigen::MatrixXi ml(n + p + m, n + p);
  for (int a = 0; a < n + p + m; ++a)
    for (int b = 0; b < n + p; ++b) {
      int d = P.mask.d(rows_node[static_cast<size_t>(a)], cols_node[static_cast<size_t>(b)]);
      if (d == kInfDelay) {
        ml(a, b) = kInfDelay;
        continue;
      }
      int off = 0;
      if (a < n)
        off = 1;  // Q11, Q12
      else if (a < n + p)
        off = b >= n ? 1 : 0;  // Q22 delayed, Q21 free
      ml(a, b) = d + off;
    }
  return ml;
}

// E_{Q,Z} = F0 + F1 [Q; Z]
inline std::pair<FirOperator, FirOperator> eqz_factors(const GeneralizedPlant& P) {
  int n = P.n(), p = P.p(), m = P.m();
  FirOperator la = op_delay(P.Abar);
  FirOperator F0full(n + p, n + p, std::max(la.order(), P.C2bar.order()));
  for (int k = 0; k <= F0full.order(); ++k) {
    F0full[k].block(0, 0, n, n) = la.at(k);
    F0full[k].block(n, 0, p, n) = P.C2bar.at(k);
  }
  FirOperator lb2 = op_delay(P.B2bar);
  int f1ord = std::max({la.order(), P.C2bar.order(), lb2.order()});
  FirOperator F1(n + p, n + p + m, f1ord);
  for (int k = 0; k <= f1ord; ++k) {
    F1[k].block(0, 0, n, n) = la.at(k);
    F1[k].block(n, 0, p, n) = P.C2bar.at(k);
    F1[k].block(0, n + p, n, m) = lb2.at(k);
  }
  F1[0].block(0, 0, n, n) -= Mat::Identity(n, n);
  F1[0].block(n, n, p, p) = -Mat::Identity(p, p);
  return {op_trim(F0full), op_trim(F1)};
}

inline FirOperator eqz_residual(const GeneralizedPlant& P, const YoulaPair& pair) {
  auto [F0, F1] = eqz_factors(P);
  return op_trim(op_add(F0, op_mul(F1, op_vstack({pair.Q, pair.Z}))));
}

// closed-loop model-matching data: Phi_wz = H + U [Q;Z] V when E_{Q,Z} = 0
struct ClosedLoopFactors {
  FirOperator H, U, V;
  FirOperator G;  // R1 Lambda B1bar + R2 D21bar (the w -> xhat error path)
  double cU = 0.0, cV = 0.0;
  int horizon = 0;
};

inline ClosedLoopFactors closedloop_factors(const GeneralizedPlant& P, const ObserverDesign& obs,
                                            int J = -1) {
  if (J < 0) J = std::max(64, 4 * obs.horizon);
  ObserverDesign d = estimator_design_from(P, obs.Q_L, obs.Z_L, obs.variant, J);
  int n = P.n(), p = P.p();
  FirOperator lb1 = op_delay(P.B1bar);
  ClosedLoopFactors f;
  f.horizon = J;
  f.G = op_trim(op_add(op_mul(d.R1, lb1, J), op_mul(d.R2, P.D21bar, J)));
  FirOperator c1la = op_mul(P.C1bar, op_delay(P.Abar));
  f.H = op_trim(op_add(op_add(op_mul(P.C1bar, lb1), op_mul(c1la, f.G, J)), P.D11bar));
  f.U = op_trim(op_hstack({P.C1bar, FirOperator::zero(P.r(), p), P.D12bar}));
  FirOperator lami = op_delay(P.Abar);
  lami[0] -= Mat::Identity(n, n);
  FirOperator F = op_vstack({lami, P.C2bar});
  f.V = op_trim(op_add(op_vstack({lb1, P.D21bar}), op_mul(F, f.G, J)));
  f.cU = norm_linf_induced(f.U);
  f.cV = norm_linf_induced(f.V);
  return f;
}

// shared core of the bound problems; lower relaxes by truncating all norms
// and widening the [I+Q; Z] budget to at least iqz_floor
inline MatchingProblem bounds_matching(const GeneralizedPlant& P, const ClosedLoopFactors& f,
                                       int N, double rho1, double rho2, bool lower, int Ncl,
                                       double iqz_floor) {
  int n = P.n(), p = P.p(), m = P.m();
  auto [F0, F1] = eqz_factors(P);
  MatchingProblem mp;
  mp.blocks.push_back({"qz", n + p + m, n + p, N, qz_minlag(P)});
  mp.scalars.push_back({"eps", rho1, rho2 / (1.0 - rho1)});
  mp.objective.constant = f.H;
  mp.objective.terms.push_back({0, f.U, f.V});
  MatchingProblem::Affine e;
  e.constant = F0;
  e.terms.push_back({0, F1, FirOperator::eye(n + p)});
  mp.constraints.push_back({e, 0, 0.0});
  MatchingProblem::Affine iqz;
  FirOperator iqz0(n + p + m, n + p, 0);
  iqz0[0].block(0, 0, n + p, n + p) = Mat::Identity(n + p, n + p);
  iqz.constant = iqz0;
  iqz.terms.push_back({0, FirOperator::eye(n + p + m), FirOperator::eye(n + p)});
  double bound = rho2 / (f.cU * f.cV);
  if (lower) bound = std::max(bound, iqz_floor);
  mp.constraints.push_back({iqz, -1, bound});
  if (lower) {
    mp.horizon = Ncl;
    mp.truncate = true;
  }
  return mp;
}

struct BoundSolve {
  LpStatus status = LpStatus::numerical;
  double value = 0.0;  // gamma + eps * rho2 / (1 - rho1)
  double gamma = 0.0;  // norm part alone
  double eps = 0.0;
  YoulaPair pair;
  long iterations = 0;
};

inline YoulaPair split_pair(const FirOperator& qz, int n, int p, int m, double eps, int order) {
  YoulaPair pr;
  pr.Q = op_trim(op_block(qz, 0, 0, n + p, n + p));
  pr.Z = op_trim(op_block(qz, n + p, 0, m, n + p));
  pr.eps = eps;
  pr.order = order;
  return pr;
}

enum class BoundSide { upper, lower };

inline BoundSolve outputfb_bounds(const GeneralizedPlant& P, const ClosedLoopFactors& f, int N,
                                  double rho1, double rho2, BoundSide side, int Ncl = -1,
                                  double iqz_floor = 0.0) {
  bool lower = side == BoundSide::lower;
  if (lower && Ncl < 0) Ncl = N;
  MatchingProblem mp = bounds_matching(P, f, N, rho1, rho2, lower, Ncl, iqz_floor);
  MatchingResult r = mm_solve(mp);
  BoundSolve out;
  out.status = r.status;
  out.iterations = r.iterations;
  if (r.status != LpStatus::optimal) return out;
  out.value = r.value;
  out.gamma = r.gamma;
  out.eps = r.scalar_values[0];
  out.pair = split_pair(r.solved[0], P.n(), P.p(), P.m(), out.eps, N);
  return out;
}

// minimize ||E_{Q,Z}|| at the given order; succeeds iff the optimum clears eps_target
inline YoulaPair fullinfo_synthesize(const GeneralizedPlant& P, int N, double eps_target) {
  if (!(eps_target < 1.0)) throw yoss_error("fullinfo_synthesize: need eps_target < 1");
  int n = P.n(), p = P.p(), m = P.m();
  auto [F0, F1] = eqz_factors(P);
  MatchingProblem mp;
  mp.blocks.push_back({"qz", n + p + m, n + p, N, qz_minlag(P)});
  mp.objective.constant = F0;
  mp.objective.terms.push_back({0, F1, FirOperator::eye(n + p)});
  MatchingResult r = mm_solve(mp);
  if (r.status != LpStatus::optimal)
    throw numeric_error(std::string("fullinfo_synthesize: LP ") + lp_status_name(r.status));
  if (r.gamma > eps_target)
    throw infeasible_error("fullinfo_synthesize: achieved " + std::to_string(r.gamma) +
                           " exceeds target " + std::to_string(eps_target) + " at order " +
                           std::to_string(N));
  return split_pair(r.solved[0], n, p, m, r.gamma, N);
}

// norm of the stacked [I + Q; Z]
inline double iqz_norm(const YoulaPair& pair) {
  FirOperator top = op_add(FirOperator::eye(pair.Q.rows), pair.Q);
  return norm_linf_induced(op_vstack({top, pair.Z}));
}

struct BoundsRow {
  long rho2 = 0;
  int N = 0;
  double gamma_lower = 0.0, gamma_upper = 0.0, epsilon = 0.0, seconds = 0.0;
};

struct BoundsTrace {
  std::vector<BoundsRow> rows;
};

struct BoundsOutcome {
  BoundsTrace trace;
  YoulaPair best;
  ClosedLoopFactors factors;
  long rho2_init = 0, rho2_final = 0;
  double iqz_cap = 0.0;
  double gap = std::numeric_limits<double>::infinity();
  bool converged = false;
};

// alternating bound refinement: at each FIR order of the schedule, grow the
// rho2 budget geometrically while the [I+Q; Z] constraint stays active, then
// move to the next order; stops when the gap at the final order clears target
inline BoundsOutcome algorithm1_run(const GeneralizedPlant& P, const ObserverDesign& obs,
                                    double rho1, std::vector<int> schedule, double gap_target,
                                    int max_stage_iters = 8) {
  if (schedule.empty()) schedule = {4, 8, 16, 30};
  if (!(gap_target > 0.0)) throw yoss_error("algorithm1_run: gap_target must be positive");
  BoundsOutcome out;
  out.factors = closedloop_factors(P, obs);
  const ClosedLoopFactors& f = out.factors;
  double cUcV = f.cU * f.cV;

  // initialization: a stabilizing pair from the pure residual minimization,
  // then the smallest integer budget this pair satisfies
  YoulaPair init = fullinfo_synthesize(P, schedule.front(), rho1);
  double nrm0 = std::min(iqz_norm(init), 100.0);
  out.rho2_init = static_cast<long>(std::ceil(cUcV * std::max(1.0, nrm0)));
  out.iqz_cap = 4.0 * std::max(1.0, nrm0);
  out.best = init;

  long rho2 = out.rho2_init;
  for (size_t sx = 0; sx < schedule.size(); ++sx) {
    int N = schedule[sx];
    bool last = sx + 1 == schedule.size();
    for (int it = 0; it < max_stage_iters; ++it) {
      auto t0 = std::chrono::steady_clock::now();
      BoundSolve up = outputfb_bounds(P, f, N, rho1, static_cast<double>(rho2), BoundSide::upper);
      if (up.status != LpStatus::optimal) {
        if (up.status == LpStatus::infeasible) {
          rho2 = static_cast<long>(std::ceil(2.0 * static_cast<double>(rho2)));
          continue;
        }
        throw numeric_error(std::string("algorithm1_run: upper LP ") +
                            lp_status_name(up.status));
      }
      double nrmU = iqz_norm(up.pair);
      bool binding = nrmU * cUcV >= static_cast<double>(rho2) * (1.0 - 1e-6);
      BoundSolve lo = outputfb_bounds(P, f, N, rho1, static_cast<double>(rho2), BoundSide::lower,
                                      N, out.iqz_cap);
      if (lo.status != LpStatus::optimal)
        throw numeric_error(std::string("algorithm1_run: lower LP ") +
                            lp_status_name(lo.status));
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      out.trace.rows.push_back(
          {rho2, N, lo.value, up.value, up.eps, secs});
      out.best = up.pair;
      out.rho2_final = rho2;
      out.gap = up.value - lo.value;
      if (last && out.gap <= gap_target) {
        out.converged = true;
        return out;
      }
      if (!binding) break;
      rho2 = static_cast<long>(std::ceil(2.0 * static_cast<double>(rho2)));
    }
  }
  return out;
}

// full-information realization: x_K = -Q x_K + [x; y], u = Z x_K
inline ControllerRealization controller_from_pair_fullinfo(const YoulaPair& pair) {
  ControllerRealization k;
  k.kind = RealizationKind::fullinfo;
  k.A_K = op_scale(-1.0, pair.Q);
  k.B_K = FirOperator::eye(pair.Q.rows);
  k.C_K = pair.Z;
  k.D_K = FirOperator::zero(pair.Z.rows, pair.Q.rows);
  k.state_part = {pair.Q.rows};
  k.state_names = {"xi"};
  return k;
}

// K = Z (I + Q)^{-1}, truncated
inline FirOperator fullinfo_gain(const YoulaPair& pair, int horizon) {
  FirOperator iq = op_add(FirOperator::eye(pair.Q.rows), pair.Q);
  return op_trim(op_mul(pair.Z, op_inverse_truncated(iq, horizon), horizon));
}

namespace detail {

// membership check of a flat operator over explicit per-coordinate node maps
inline bool member_by_nodes(const FirOperator& t, const Eigen::MatrixXi& d,
                            const std::vector<int>& rnode, const std::vector<int>& cnode,
                            double tol = 1e-9) {
  for (int k = 0; k <= t.order(); ++k)
    for (int i = 0; i < t.rows; ++i)
      for (int j = 0; j < t.cols; ++j) {
        int dij = d(rnode[static_cast<size_t>(i)], cnode[static_cast<size_t>(j)]);
        if ((dij == kInfDelay || k < dij) && std::abs(t[k](i, j)) > tol) return false;
      }
  return true;
}

}  // namespace detail

// output-feedback realization on state [xhat; xi1; xi2] driven by y
inline ControllerRealization controller_realize_output(const GeneralizedPlant& P,
                                                       const ObserverDesign& obs,
                                                       const YoulaPair& pair) {
  int n = P.n(), p = P.p(), m = P.m();
  if (pair.Q.rows != n + p || pair.Z.rows != m)
    throw dim_error("controller_realize_output: pair dims");
  FirOperator eL = estimator_residual(P, obs.Q_L, obs.Z_L, obs.variant);
  FirOperator M =
      op_mul(op_add(FirOperator::eye(n), op_delay(obs.Q_L)), op_delay(P.B2bar));
  FirOperator Q11 = op_block(pair.Q, 0, 0, n, n), Q12 = op_block(pair.Q, 0, n, n, p);
  FirOperator Q21 = op_block(pair.Q, n, 0, p, n), Q22 = op_block(pair.Q, n, n, p, p);
  FirOperator Z1 = op_block(pair.Z, 0, 0, m, n), Z2 = op_block(pair.Z, 0, n, m, p);

  std::vector<std::vector<FirOperator>> grid = {
      {op_delay(eL), op_mul(M, Z1), op_mul(M, Z2)},
      {FirOperator::eye(n), op_scale(-1.0, Q11), op_scale(-1.0, Q12)},
      {FirOperator::zero(p, n), op_scale(-1.0, Q21), op_scale(-1.0, Q22)}};
  ControllerRealization k;
  k.kind = RealizationKind::output_feedback;
  k.A_K = op_trim(op_vstack({op_hstack({grid[0][0], grid[0][1], grid[0][2]}),
                             op_hstack({grid[1][0], grid[1][1], grid[1][2]}),
                             op_hstack({grid[2][0], grid[2][1], grid[2][2]})}));
  k.B_K = op_trim(op_vstack({op_scale(-1.0, op_delay(obs.Z_L)), FirOperator::zero(n, p),
                             FirOperator::eye(p)}));
  k.C_K = op_trim(op_hstack({FirOperator::zero(m, n), Z1, Z2}));
  k.D_K = FirOperator::zero(m, p);
  k.state_part = {n, n, p};
  k.state_names = {"xhat", "xi1", "xi2"};

  // well-posedness: the lag-0 loop must be uniquely solvable
  Eigen::FullPivLU<Mat> lu(Mat::Identity(2 * n + p, 2 * n + p) - k.A_K.at(0));
  if (!lu.isInvertible())
    throw numeric_error("controller_realize_output: singular lag-0 interconnection");

  // structure: every block of the realization lives on the network
  std::vector<int> xnode = node_of_dims(P.dims.n), ynode = node_of_dims(P.dims.p),
                   unode = node_of_dims(P.dims.m);
  std::vector<int> knode = xnode;
  knode.insert(knode.end(), xnode.begin(), xnode.end());
  knode.insert(knode.end(), ynode.begin(), ynode.end());
  if (!detail::member_by_nodes(k.A_K, P.mask.d, knode, knode) ||
      !detail::member_by_nodes(k.B_K, P.mask.d, knode, ynode) ||
      !detail::member_by_nodes(k.C_K, P.mask.d, unode, knode))
    throw yoss_error("controller_realize_output: realization violates the network mask");
  return k;
}

struct NonsubspaceDesign {
  ControllerRealization K;
  FirOperator Q_L, Z_L;
  double eps_L = 0.0;
  YoulaPair pair;
  double small_gain = 0.0;  // eps_L * ||I + Q||, must be < 1
};

// synthesis without multiplicative closure: membership is enforced on the
// composite observer gains rather than on Q_L itself, and stability rests on
// a small-gain certificate
inline NonsubspaceDesign nonsubspace_synthesize(const GeneralizedPlant& P, int N,
                                                double eps_target, double epsL_target) {
  int n = P.n(), p = P.p(), m = P.m();

  // observer step: minimize the variant-B residual over free qL and masked zL
  // subject to (I + qL) Lambda B2bar living on the network
  MatchingProblem mp;
  mp.blocks.push_back({"qL", n, n, N, Eigen::MatrixXi::Zero(n, n)});
  mp.blocks.push_back({"zL", n, p, N, mask_expand(P.mask, P.dims.n, P.dims.p)});
  FirOperator la = op_delay(P.Abar);
  mp.objective.constant = la;
  mp.objective.terms.push_back({0, FirOperator::eye(n), la});
  mp.objective.terms.push_back({0, op_scale(-1.0, FirOperator::eye(n)), FirOperator::eye(n)});
  mp.objective.terms.push_back({1, FirOperator::eye(n), P.C2bar});
  MatchingProblem::Affine memb;
  FirOperator lb2 = op_delay(P.B2bar);
  memb.constant = lb2;
  memb.terms.push_back({0, FirOperator::eye(n), lb2});
  mp.mask_constraints.push_back({memb, mask_expand(P.mask, P.dims.n, P.dims.m)});
  MatchingResult r = mm_solve(mp);
  if (r.status != LpStatus::optimal)
    throw numeric_error(std::string("nonsubspace_synthesize: observer LP ") +
                        lp_status_name(r.status));
  if (r.gamma > epsL_target)
    throw infeasible_error("nonsubspace_synthesize: observer residual " +
                           std::to_string(r.gamma) + " exceeds target " +
                           std::to_string(epsL_target));
  NonsubspaceDesign d;
  d.Q_L = r.solved[0];
  d.Z_L = r.solved[1];
  d.eps_L = r.gamma;

  // controller step: the standard residual minimization at the same order
  d.pair = fullinfo_synthesize(P, N, eps_target);
  FirOperator iq = op_add(FirOperator::eye(n + p), d.pair.Q);
  d.small_gain = d.eps_L * norm_linf_induced(iq);
  if (d.small_gain >= 1.0)
    throw infeasible_error("nonsubspace_synthesize: small-gain certificate failed: " +
                           std::to_string(d.small_gain));

  // realization on [xhat_new; xi1; xi2; u]
  FirOperator M = op_trim(op_add(lb2, op_mul(d.Q_L, lb2)));  // (I + Q_L) Lambda B2bar
  FirOperator Q11 = op_block(d.pair.Q, 0, 0, n, n), Q12 = op_block(d.pair.Q, 0, n, n, p);
  FirOperator Q21 = op_block(d.pair.Q, n, 0, p, n), Q22 = op_block(d.pair.Q, n, n, p, p);
  FirOperator Z1 = op_block(d.pair.Z, 0, 0, m, n), Z2 = op_block(d.pair.Z, 0, n, m, p);
  FirOperator zn = FirOperator::zero(n, n);
  ControllerRealization& k = d.K;
  k.kind = RealizationKind::nonsubspace;
  k.A_K = op_trim(op_vstack(
      {op_hstack({zn, FirOperator::zero(n, n), FirOperator::zero(n, p), M}),
       op_hstack({FirOperator::eye(n), op_scale(-1.0, Q11), op_scale(-1.0, Q12),
                  FirOperator::zero(n, m)}),
       op_hstack({FirOperator::zero(p, n), op_scale(-1.0, Q21), op_scale(-1.0, Q22),
                  FirOperator::zero(p, m)}),
       op_hstack({FirOperator::zero(m, n), Z1, Z2, FirOperator::zero(m, m)})}));
  k.B_K = op_trim(op_vstack({op_scale(-1.0, d.Z_L), FirOperator::zero(n, p),
                             FirOperator::eye(p), FirOperator::zero(m, p)}));
  FirOperator cm = FirOperator::zero(m, 2 * n + p + m);
  cm[0].block(0, 2 * n + p, m, m) = Mat::Identity(m, m);
  k.C_K = cm;
  k.D_K = FirOperator::zero(m, p);
  k.state_part = {n, n, p, m};
  k.state_names = {"xhat_new", "xi1", "xi2", "u"};
  Eigen::FullPivLU<Mat> lu(Mat::Identity(2 * n + p + m, 2 * n + p + m) - k.A_K.at(0));
  if (!lu.isInvertible())
    throw numeric_error("nonsubspace_synthesize: singular lag-0 interconnection");
  return d;
}

}  // namespace yoss
