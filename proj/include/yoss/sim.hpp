#pragma once
// Closed-loop simulation with fictitious controller communication noise,
// empirical gain estimation, and realizability auditing.
#include <random>

#include "synthesis.hpp"

namespace yoss {

enum class NoiseDist { uniform_sign, uniform_interval };

struct NoiseSpec {
  double nx_amplitude = 0.0;
  double nu_amplitude = 0.0;
  unsigned long long nx_seed = 1;
  unsigned long long nu_seed = 2;
  NoiseDist dist = NoiseDist::uniform_interval;
};

// amplitude scales a unit draw, so responses scale exactly with amplitude
inline Signal noise_signal(int dim, int T, double amplitude, unsigned long long seed,
                           NoiseDist dist) {
  Signal s(dim, T);
  if (amplitude == 0.0) return s;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < dim; ++i) {
      double v = unit(rng);
      if (dist == NoiseDist::uniform_sign) v = v >= 0.0 ? 1.0 : -1.0;
      s[t](i) = amplitude * v;
    }
  return s;
}

constexpr double kBlowUpThreshold = 1e9;

struct RunReport {
  double sup_x = 0, sup_y = 0, sup_u = 0, sup_z = 0, sup_xk = 0, sup_e = 0;
  bool divergent = false;
  int first_divergence_t = -1;
  int horizon = 0;
};

struct SimRun {
  Signal x, y, xk, u, z, e;
  RunReport report;
};

// simultaneous plant/controller recursion; the lag-0 algebraic loop over the
// stacked unknowns [x; y; x_K; u; z] is inverted once
inline SimRun closedloop_simulate(const GeneralizedPlant& P, const ControllerRealization& K,
                                  const Signal& w, const Vec& x0, const NoiseSpec& noise, int T) {
  int n = P.n(), p = P.p(), m = P.m(), r = P.r(), q = P.q(), nk = K.A_K.rows;
  if (K.B_K.cols != p || K.C_K.rows != m || K.A_K.cols != nk || K.C_K.cols != nk ||
      K.D_K.rows != m || K.D_K.cols != p)
    throw dim_error("closedloop_simulate: controller dimensions do not match the plant");
  if (w.dim != q) throw dim_error("closedloop_simulate: disturbance dimension");
  if (x0.size() != n) throw dim_error("closedloop_simulate: x0 dimension");
  if (w.length() < T) throw dim_error("closedloop_simulate: disturbance shorter than horizon");

  int N = n + p + nk + m + r;
  int ox = 0, oy = n, ok = n + p, ou = n + p + nk, oz = n + p + nk + m;
  Mat J0 = Mat::Zero(N, N);
  J0.block(oy, ox, p, n) = P.C2bar.at(0);
  J0.block(ok, ok, nk, nk) = K.A_K.at(0);
  J0.block(ok, oy, nk, p) = K.B_K.at(0);
  J0.block(ou, ok, m, nk) = K.C_K.at(0);
  J0.block(ou, oy, m, p) = K.D_K.at(0);
  J0.block(oz, ox, r, n) = P.C1bar.at(0);
  J0.block(oz, ou, r, m) = P.D12bar.at(0);
  Eigen::FullPivLU<Mat> lu(Mat::Identity(N, N) - J0);
  if (!lu.isInvertible()) throw numeric_error("closedloop_simulate: singular algebraic loop");

  Signal nx = noise_signal(nk, T, noise.nx_amplitude, noise.nx_seed, noise.dist);
  Signal nu = noise_signal(m, T, noise.nu_amplitude, noise.nu_seed, noise.dist);

  SimRun run;
  run.x = Signal(n, T);
  run.y = Signal(p, T);
  run.xk = Signal(nk, T);
  run.u = Signal(m, T);
  run.z = Signal(r, T);
  run.report.horizon = T;

  auto lagged = [&](const FirOperator& op, const Signal& s, int t, int from, Vec& acc, int off) {
    for (int k = from; k <= op.order(); ++k)
      if (t - k >= 0) acc.segment(off, op.rows).noalias() += op[k] * s[t - k];
  };
  for (int t = 0; t < T; ++t) {
    Vec rhs = Vec::Zero(N);
    // state: every term carries at least one step of delay
    for (int k = 0; k <= P.Abar.order(); ++k)
      if (t - 1 - k >= 0) rhs.segment(ox, n).noalias() += P.Abar[k] * run.x[t - 1 - k];
    for (int k = 0; k <= P.B1bar.order(); ++k)
      if (t - 1 - k >= 0) rhs.segment(ox, n).noalias() += P.B1bar[k] * w[t - 1 - k];
    for (int k = 0; k <= P.B2bar.order(); ++k)
      if (t - 1 - k >= 0) rhs.segment(ox, n).noalias() += P.B2bar[k] * run.u[t - 1 - k];
    if (t == 0) rhs.segment(ox, n) += x0;
    lagged(P.C2bar, run.x, t, 1, rhs, oy);
    lagged(P.D21bar, w, t, 0, rhs, oy);
    lagged(K.A_K, run.xk, t, 1, rhs, ok);
    lagged(K.B_K, run.y, t, 1, rhs, ok);
    rhs.segment(ok, nk) += nx[t];
    lagged(K.C_K, run.xk, t, 1, rhs, ou);
    lagged(K.D_K, run.y, t, 1, rhs, ou);
    rhs.segment(ou, m) += nu[t];
    lagged(P.C1bar, run.x, t, 1, rhs, oz);
    lagged(P.D11bar, w, t, 0, rhs, oz);
    lagged(P.D12bar, run.u, t, 1, rhs, oz);

    Vec s = lu.solve(rhs);
    run.x[t] = s.segment(ox, n);
    run.y[t] = s.segment(oy, p);
    run.xk[t] = s.segment(ok, nk);
    run.u[t] = s.segment(ou, m);
    run.z[t] = s.segment(oz, r);
    double peak = s.cwiseAbs().maxCoeff();
    if (peak > kBlowUpThreshold && !run.report.divergent) {
      run.report.divergent = true;
      run.report.first_divergence_t = t;
      break;
    }
  }
  // estimation error when the leading controller states reconstruct the plant state
  if (!K.state_part.empty() && K.state_part.front() == n) {
    run.e = Signal(n, T);
    for (int t = 0; t < T; ++t) run.e[t] = run.x[t] - run.xk[t].head(n);
    run.report.sup_e = run.e.sup_norm();
  }
  run.report.sup_x = run.x.sup_norm();
  run.report.sup_y = run.y.sup_norm();
  run.report.sup_u = run.u.sup_norm();
  run.report.sup_z = run.z.sup_norm();
  run.report.sup_xk = run.xk.sup_norm();
  return run;
}

// truncated closed-loop impulse responses from each disturbance channel to the
// regulated output; the row-sum norm lower-bounds the true gain and converges
// upward in T for stable loops
inline double empirical_gain(const GeneralizedPlant& P, const ControllerRealization& K, int T) {
  int q = P.q(), r = P.r();
  Mat rowsum = Mat::Zero(r, q);
  for (int j = 0; j < q; ++j) {
    Signal w(q, T);
    w[0](j) = 1.0;
    SimRun run = closedloop_simulate(P, K, w, Vec::Zero(P.n()), NoiseSpec{}, T);
    if (run.report.divergent) throw numeric_error("empirical_gain: divergent loop");
    for (int t = 0; t < T; ++t) rowsum.col(j) += run.z[t].cwiseAbs();
  }
  return rowsum.rowwise().sum().maxCoeff();
}

struct AuditReport {
  std::vector<double> amplitudes;
  std::vector<double> amplification;  // max over trials of sup response / amplitude
  double nx_amplification = 0.0;      // per-channel, at unit amplitude
  double nu_amplification = 0.0;
  double linearity_spread = 0.0;  // max/min amplification ratio minus one
  bool linear = false;
  bool divergent = false;
};

// Monte-Carlo noise injection: per trial the same seeds drive every amplitude,
// so a truly linear loop amplifies each trial identically across amplitudes
inline AuditReport realizability_audit(const GeneralizedPlant& P, const ControllerRealization& K,
                                       int trials, std::vector<double> amplitudes, int T,
                                       unsigned long long base_seed = 7,
                                       NoiseDist dist = NoiseDist::uniform_interval) {
  if (amplitudes.empty()) amplitudes = {0.1, 1.0, 10.0};
  if (trials < 1) trials = 1;
  AuditReport rep;
  rep.amplitudes = amplitudes;
  Signal w0(P.q(), T);
  Vec x0 = Vec::Zero(P.n());
  auto sup_all = [](const SimRun& run) {
    double s = std::max({run.report.sup_x, run.report.sup_y, run.report.sup_xk,
                         run.report.sup_u, run.report.sup_z});
    return std::max(s, 1e-30);
  };
  for (double a : amplitudes) {
    double worst = 0.0;
    for (int i = 0; i < trials; ++i) {
      NoiseSpec ns;
      ns.nx_amplitude = a;
      ns.nu_amplitude = a;
      ns.nx_seed = base_seed + 2 * static_cast<unsigned long long>(i);
      ns.nu_seed = base_seed + 2 * static_cast<unsigned long long>(i) + 1;
      ns.dist = dist;
      SimRun run = closedloop_simulate(P, K, w0, x0, ns, T);
      if (run.report.divergent) rep.divergent = true;
      worst = std::max(worst, sup_all(run) / a);
    }
    rep.amplification.push_back(worst);
  }
  // per-channel amplification at unit amplitude, first trial seeds
  {
    NoiseSpec ns;
    ns.nx_amplitude = 1.0;
    ns.nx_seed = base_seed;
    ns.dist = dist;
    SimRun rx = closedloop_simulate(P, K, w0, x0, ns, T);
    if (rx.report.divergent) rep.divergent = true;
    rep.nx_amplification = sup_all(rx);
    NoiseSpec nsu;
    nsu.nu_amplitude = 1.0;
    nsu.nu_seed = base_seed + 1;
    nsu.dist = dist;
    SimRun ru = closedloop_simulate(P, K, w0, x0, nsu, T);
    if (ru.report.divergent) rep.divergent = true;
    rep.nu_amplification = sup_all(ru);
  }
  double lo = *std::min_element(rep.amplification.begin(), rep.amplification.end());
  double hi = *std::max_element(rep.amplification.begin(), rep.amplification.end());
  rep.linearity_spread = lo > 0.0 ? hi / lo - 1.0 : std::numeric_limits<double>::infinity();
  rep.linear = !rep.divergent && rep.linearity_spread < 0.05;
  return rep;
}

}  // namespace yoss
