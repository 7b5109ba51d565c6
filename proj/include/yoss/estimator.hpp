#pragma once
// Generalized Luenberger observer: structured FIR synthesis by model matching,
// truncated gain realization, and the estimation-error maps.
#include "matching.hpp"
#include "plant.hpp"

namespace yoss {

enum class ResidualVariant { A, B, Auto };

inline const char* residual_variant_name(ResidualVariant v) {
  switch (v) {
    case ResidualVariant::A: return "A";
    case ResidualVariant::B: return "B";
    default: return "auto";
  }
}

// variant A: Abar + zL C2bar - qL (I - Lambda Abar)
// variant B: (I + qL) Lambda Abar + zL C2bar - qL
inline FirOperator estimator_residual(const GeneralizedPlant& P, const FirOperator& qL,
                                      const FirOperator& zL, ResidualVariant variant) {
  int n = P.n();
  if (qL.rows != n || qL.cols != n) throw dim_error("estimator_residual: qL must be n x n");
  if (zL.rows != n || zL.cols != P.p()) throw dim_error("estimator_residual: zL must be n x p");
  FirOperator zc = op_mul(zL, P.C2bar);
  if (variant == ResidualVariant::A) {
    FirOperator ima = op_sub(FirOperator::eye(n), op_delay(P.Abar));
    return op_trim(op_sub(op_add(P.Abar, zc), op_mul(qL, ima)));
  }
  FirOperator la = op_delay(P.Abar);
  return op_trim(op_sub(op_add(op_add(la, op_mul(qL, la)), zc), qL));
}

struct ObserverDesign {
  FirOperator Q_L, Z_L;     // structured FIR parameters
  double eps_L = 0.0;       // achieved residual norm
  ResidualVariant variant = ResidualVariant::A;
  FirOperator R1, R2;       // truncated observer gains
  int horizon = 0;          // truncation lag of R1, R2
  double neumann_tail = 0.0;  // certified truncation tail when eps_L < 1
  bool assumptions_ok = true;
};

// R1 = (I - Lambda E_L)^{-1} (I + Lambda Q_L), R2 = (I - Lambda E_L)^{-1} Lambda Z_L
inline ObserverDesign estimator_design_from(const GeneralizedPlant& P, const FirOperator& qL,
                                            const FirOperator& zL, ResidualVariant variant,
                                            int horizon = -1) {
  if (variant == ResidualVariant::Auto) {
    FirOperator ra = estimator_residual(P, qL, zL, ResidualVariant::A);
    FirOperator rb = estimator_residual(P, qL, zL, ResidualVariant::B);
    variant = norm_linf_induced(ra) <= norm_linf_induced(rb) ? ResidualVariant::A
                                                             : ResidualVariant::B;
  }
  ObserverDesign d;
  d.Q_L = qL;
  d.Z_L = zL;
  d.variant = variant;
  FirOperator eL = estimator_residual(P, qL, zL, variant);
  d.eps_L = norm_linf_induced(eL);
  int dominant = std::max({1, eL.order(), qL.order() + 1, zL.order() + 1, P.Abar.order()});
  if (horizon < 0) {
    horizon = 4 * dominant;
    if (d.eps_L > 0.0 && d.eps_L < 1.0) {
      // grow until the geometric tail certificate clears 1e-6 (Lambda E_L is
      // strictly causal, so truncation at H discards norm <= eps^{H+1}/(1-eps))
      while (horizon < 4096 &&
             std::pow(d.eps_L, horizon + 1) / (1.0 - d.eps_L) > 1e-6)
        horizon *= 2;
    }
  }
  d.horizon = horizon;
  d.neumann_tail = d.eps_L < 1.0 ? std::pow(d.eps_L, horizon + 1) / (1.0 - d.eps_L)
                                 : std::numeric_limits<double>::infinity();
  FirOperator res = op_inverse_truncated(op_sub(FirOperator::eye(P.n()), op_delay(eL)), horizon);
  d.R1 = op_trim(op_mul(res, op_add(FirOperator::eye(P.n()), op_delay(qL)), horizon));
  d.R2 = op_trim(op_mul(res, op_delay(zL), horizon));
  return d;
}

// minimize ||estimator_residual|| over mask-member FIR (qL, zL) of order N
inline ObserverDesign estimator_synthesize(const GeneralizedPlant& P, int N, double eps_target,
                                           ResidualVariant variant = ResidualVariant::Auto) {
  int n = P.n(), p = P.p();
  AssumptionReport rep = mask_check_assumptions(P.mask, P);
  bool assumptions_ok = rep.closed_under_mul && rep.abar_member && rep.c2_member;

  auto solve_variant = [&](ResidualVariant v) {
    MatchingProblem mp;
    mp.blocks.push_back({"qL", n, n, N, mask_expand(P.mask, P.dims.n, P.dims.n)});
    mp.blocks.push_back({"zL", n, p, N, mask_expand(P.mask, P.dims.n, P.dims.p)});
    if (v == ResidualVariant::A) {
      mp.objective.constant = P.Abar;
      mp.objective.terms.push_back(
          {0, op_scale(-1.0, FirOperator::eye(n)),
           op_sub(FirOperator::eye(n), op_delay(P.Abar))});
      mp.objective.terms.push_back({1, FirOperator::eye(n), P.C2bar});
    } else {
      FirOperator la = op_delay(P.Abar);
      mp.objective.constant = la;
      mp.objective.terms.push_back({0, FirOperator::eye(n), la});
      mp.objective.terms.push_back({0, op_scale(-1.0, FirOperator::eye(n)), FirOperator::eye(n)});
      mp.objective.terms.push_back({1, FirOperator::eye(n), P.C2bar});
    }
    return mm_solve(mp);
  };

  ResidualVariant pick = variant;
  MatchingResult r;
  if (variant == ResidualVariant::Auto) {
    MatchingResult ra = solve_variant(ResidualVariant::A);
    MatchingResult rb = solve_variant(ResidualVariant::B);
    if (ra.status != LpStatus::optimal && rb.status != LpStatus::optimal)
      throw numeric_error("estimator_synthesize: both residual variants failed to solve");
    bool use_a = ra.status == LpStatus::optimal &&
                 (rb.status != LpStatus::optimal || ra.gamma <= rb.gamma);
    pick = use_a ? ResidualVariant::A : ResidualVariant::B;
    r = use_a ? ra : rb;
  } else {
    r = solve_variant(variant);
    if (r.status != LpStatus::optimal)
      throw numeric_error(std::string("estimator_synthesize: LP ") + lp_status_name(r.status));
  }
  if (r.gamma > eps_target)
    throw infeasible_error("estimator_synthesize: achieved residual " + std::to_string(r.gamma) +
                           " exceeds target " + std::to_string(eps_target) +
                           " at FIR order " + std::to_string(N));
  ObserverDesign d = estimator_design_from(P, r.solved[0], r.solved[1], pick);
  d.assumptions_ok = assumptions_ok;
  return d;
}

// eq-of-motion recursion: xhat = Lambda E_L xhat + (I + Lambda Q_L) Lambda B2bar u - Lambda Z_L y
inline Signal estimator_run(const ObserverDesign& d, const GeneralizedPlant& P, const Signal& u,
                            const Signal& y) {
  if (u.dim != P.m() || y.dim != P.p()) throw dim_error("estimator_run: signal dimensions");
  if (u.length() != y.length()) throw dim_error("estimator_run: signal lengths differ");
  int T = u.length(), n = P.n();
  FirOperator eL = estimator_residual(P, d.Q_L, d.Z_L, d.variant);
  FirOperator bu = op_mul(op_add(FirOperator::eye(n), op_delay(d.Q_L)), op_delay(P.B2bar));
  FirOperator by = op_delay(d.Z_L);
  Signal drive_u = op_apply(bu, u), drive_y = op_apply(by, y);
  Signal xhat(n, T);
  for (int t = 0; t < T; ++t) {
    Vec v = drive_u[t] - drive_y[t];
    for (int k = 0; k <= eL.order(); ++k)
      if (t - 1 - k >= 0) v.noalias() += eL[k] * xhat[t - 1 - k];
    xhat[t] = v;
  }
  return xhat;
}

// e = -(R1 Lambda B1bar + R2 D21bar) w - R1 x0bar: both maps, truncated
inline std::pair<FirOperator, FirOperator> estimator_error_map(const ObserverDesign& d,
                                                               const GeneralizedPlant& P) {
  FirOperator from_w = op_scale(
      -1.0, op_add(op_mul(d.R1, op_delay(P.B1bar), d.horizon), op_mul(d.R2, P.D21bar, d.horizon)));
  FirOperator from_x0 = op_scale(-1.0, d.R1);
  return {op_trim(from_w), op_trim(from_x0)};
}

}  // namespace yoss
