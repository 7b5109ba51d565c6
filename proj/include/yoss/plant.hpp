#pragma once
// Aggregation of networked subsystems into the operator-form generalized plant.
#include "structure.hpp"

namespace yoss {

// per-link coupling: receiver state picks up B3 * (C3 x_from + D31 w_from) after the link delay
struct CouplingLink {
  Link link;
  Mat B3;   // n_to x width
  Mat C3;   // width x n_from
  Mat D31;  // width x q_from (empty = zero)
};

struct Subsystem {
  std::string name;
  Mat A, B1, B2, C1, D11, D12, C2, D21;
};

struct GeneralizedPlant {
  FirOperator Abar, B1bar, B2bar, C1bar, C2bar, D11bar, D12bar, D21bar;
  NodeDims dims;
  StructureMask mask;

  int n() const { return Abar.rows; }
  int q() const { return B1bar.cols; }
  int m() const { return B2bar.cols; }
  int r() const { return C1bar.rows; }
  int p() const { return C2bar.rows; }
};

namespace detail {
inline Mat or_zero(const Mat& m, int r, int c, const std::string& who) {
  if (m.size() == 0) return Mat::Zero(r, c);
  if (m.rows() != r || m.cols() != c)
    throw dim_error(who + ": expected " + std::to_string(r) + "x" + std::to_string(c) + ", got " +
                    std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  return m;
}
}  // namespace detail

// state recursion x(t+1) = A x(t) + ... puts the coupling block of Abar at the link delay
inline GeneralizedPlant plant_from_subsystems(const std::vector<Subsystem>& subs,
                                              const std::vector<CouplingLink>& links) {
  int N = static_cast<int>(subs.size());
  if (N == 0) throw dim_error("plant_from_subsystems: no subsystems");
  NodeDims dims;
  for (const Subsystem& s : subs) {
    int ni = static_cast<int>(s.A.rows());
    if (s.A.cols() != ni) throw dim_error("plant_from_subsystems: A not square in " + s.name);
    int pi = static_cast<int>(s.C2.rows());
    int mi = static_cast<int>(s.B2.cols());
    int ri = static_cast<int>(s.C1.rows());
    int qi = static_cast<int>(s.B1.size() ? s.B1.cols() : (s.D21.size() ? s.D21.cols() : 0));
    if (s.D21.size() && s.D21.cols() != qi) throw dim_error("plant_from_subsystems: D21 width in " + s.name);
    dims.n.push_back(ni);
    dims.p.push_back(pi);
    dims.m.push_back(mi);
    dims.q.push_back(qi);
    dims.r.push_back(ri);
  }
  std::vector<int> noff(static_cast<size_t>(N) + 1, 0), qoff = noff, moff = noff, poff = noff, roff = noff;
  for (int i = 0; i < N; ++i) {
    noff[i + 1] = noff[i] + dims.n[i];
    qoff[i + 1] = qoff[i] + dims.q[i];
    moff[i + 1] = moff[i] + dims.m[i];
    poff[i + 1] = poff[i] + dims.p[i];
    roff[i + 1] = roff[i] + dims.r[i];
  }
  int n = noff[N], q = qoff[N], m = moff[N], p = poff[N], r = roff[N];

  int max_tau = 0;
  for (const CouplingLink& cl : links) max_tau = std::max(max_tau, cl.link.delay);
  FirOperator Abar(n, n, max_tau), B1bar(n, q, max_tau);
  FirOperator B2bar(n, m), C1bar(r, n), C2bar(p, n), D11bar(r, q), D12bar(r, m), D21bar(p, q);
  for (int i = 0; i < N; ++i) {
    const Subsystem& s = subs[i];
    int ni = dims.n[i], pi = dims.p[i], mi = dims.m[i], qi = dims.q[i], ri = dims.r[i];
    Abar[0].block(noff[i], noff[i], ni, ni) = s.A;
    B1bar[0].block(noff[i], qoff[i], ni, qi) = detail::or_zero(s.B1, ni, qi, s.name + ".B1");
    B2bar[0].block(noff[i], moff[i], ni, mi) = detail::or_zero(s.B2, ni, mi, s.name + ".B2");
    C1bar[0].block(roff[i], noff[i], ri, ni) = detail::or_zero(s.C1, ri, ni, s.name + ".C1");
    C2bar[0].block(poff[i], noff[i], pi, ni) = detail::or_zero(s.C2, pi, ni, s.name + ".C2");
    D11bar[0].block(roff[i], qoff[i], ri, qi) = detail::or_zero(s.D11, ri, qi, s.name + ".D11");
    D12bar[0].block(roff[i], moff[i], ri, mi) = detail::or_zero(s.D12, ri, mi, s.name + ".D12");
    D21bar[0].block(poff[i], qoff[i], pi, qi) = detail::or_zero(s.D21, pi, qi, s.name + ".D21");
  }
  std::vector<Link> mask_links;
  for (const CouplingLink& cl : links) {
    int i = cl.link.to, j = cl.link.from;
    if (i < 0 || i >= N || j < 0 || j >= N) throw dim_error("plant_from_subsystems: unknown node in link");
    int w = static_cast<int>(cl.C3.rows());
    if (cl.B3.rows() != dims.n[i] || cl.B3.cols() != w || cl.C3.cols() != dims.n[j])
      throw dim_error("plant_from_subsystems: link coupling dimensions");
    int tau = cl.link.delay;
    Abar[tau].block(noff[i], noff[j], dims.n[i], dims.n[j]) += cl.B3 * cl.C3;
    if (cl.D31.size()) {
      if (cl.D31.rows() != w || cl.D31.cols() != dims.q[j])
        throw dim_error("plant_from_subsystems: link D31 dimensions");
      B1bar[tau].block(noff[i], qoff[j], dims.n[i], dims.q[j]) += cl.B3 * cl.D31;
    }
    mask_links.push_back(cl.link);
  }
  StructureMask mask = mask_from_network(N, mask_links, dims);
  return GeneralizedPlant{op_trim(Abar),  op_trim(B1bar), std::move(B2bar), std::move(C1bar),
                          std::move(C2bar), std::move(D11bar), std::move(D12bar), std::move(D21bar),
                          std::move(dims),  std::move(mask)};
}

// x(t+1) = sum_k Abar(k) x(t-k) + B1bar(k) w(t-k) + B2bar(k) u(t-k), x(0) = x0
inline void plant_simulate(const GeneralizedPlant& P, const Signal& u, const Signal& w, const Vec& x0,
                           int T, Signal& x, Signal& y, Signal& z) {
  if (u.dim != P.m() || w.dim != P.q()) throw dim_error("plant_simulate: input dimensions");
  if (x0.size() != P.n()) throw dim_error("plant_simulate: x0 dimension");
  x = Signal(P.n(), T);
  y = Signal(P.p(), T);
  z = Signal(P.r(), T);
  auto sig_at = [](const Signal& s, int t) { return t >= 0 && t < s.length() ? s[t] : Vec::Zero(s.dim); };
  for (int t = 0; t < T; ++t) {
    if (t == 0) {
      x[0] = x0;
    } else {
      Vec nx = Vec::Zero(P.n());
      for (int k = 0; k <= P.Abar.order(); ++k)
        if (t - 1 - k >= 0) nx.noalias() += P.Abar[k] * x[t - 1 - k];
      for (int k = 0; k <= P.B1bar.order(); ++k)
        if (t - 1 - k >= 0) nx.noalias() += P.B1bar[k] * sig_at(w, t - 1 - k);
      for (int k = 0; k <= P.B2bar.order(); ++k)
        if (t - 1 - k >= 0) nx.noalias() += P.B2bar[k] * sig_at(u, t - 1 - k);
      x[t] = nx;
    }
    Vec yt = Vec::Zero(P.p()), zt = Vec::Zero(P.r());
    for (int k = 0; k <= P.C2bar.order(); ++k)
      if (t - k >= 0) yt.noalias() += P.C2bar[k] * x[t - k];
    for (int k = 0; k <= P.D21bar.order(); ++k)
      if (t - k >= 0) yt.noalias() += P.D21bar[k] * sig_at(w, t - k);
    for (int k = 0; k <= P.C1bar.order(); ++k)
      if (t - k >= 0) zt.noalias() += P.C1bar[k] * x[t - k];
    for (int k = 0; k <= P.D11bar.order(); ++k)
      if (t - k >= 0) zt.noalias() += P.D11bar[k] * sig_at(w, t - k);
    for (int k = 0; k <= P.D12bar.order(); ++k)
      if (t - k >= 0) zt.noalias() += P.D12bar[k] * sig_at(u, t - k);
    y[t] = yt;
    z[t] = zt;
  }
}

// multiplicative closure (triangle inequality), membership of Abar/B2bar/C2bar,
// and full row rank of D21bar(0)
inline AssumptionReport mask_check_assumptions(const StructureMask& m, const GeneralizedPlant& P) {
  AssumptionReport rep;
  rep.closure_violations = mask_closure_violations(m);
  rep.closed_under_mul = rep.closure_violations.empty();
  rep.abar_member =
      mask_check_membership(P.Abar, m, m.dims.n, m.dims.n, &rep.membership_violations);
  rep.b2_member = mask_check_membership(P.B2bar, m, m.dims.n, m.dims.m, &rep.membership_violations);
  rep.c2_member = mask_check_membership(P.C2bar, m, m.dims.p, m.dims.n, &rep.membership_violations);
  Eigen::FullPivLU<Mat> lu(P.D21bar[0]);
  rep.d21_full_row_rank = lu.rank() == P.D21bar.rows;
  return rep;
}

struct PlantReport {
  bool dims_ok = true;
  AssumptionReport assumptions;
  std::string detail;
};

inline PlantReport plant_validate(const GeneralizedPlant& P) {
  PlantReport rep;
  int n = P.n();
  if (P.Abar.cols != n || P.B1bar.rows != n || P.B2bar.rows != n || P.C1bar.cols != n ||
      P.C2bar.cols != n || P.D11bar.rows != P.r() || P.D11bar.cols != P.q() ||
      P.D12bar.rows != P.r() || P.D12bar.cols != P.m() || P.D21bar.rows != P.p() ||
      P.D21bar.cols != P.q()) {
    rep.dims_ok = false;
    rep.detail = "operator dimensions inconsistent";
    return rep;  // membership checks need conformable dims
  }
  rep.assumptions = mask_check_assumptions(P.mask, P);
  return rep;
}

}  // namespace yoss
