#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"
#include "fixtures.hpp"
#include "test_util.hpp"
#include "yoss/sim.hpp"

using namespace yoss;
using namespace yoss::testutil;

namespace {

// single node, open-loop stable: x(t+1) = 0.5 x + w, z = y = x
GeneralizedPlant geometric_plant() {
  GeneralizedPlant P;
  P.Abar = FirOperator((Mat(1, 1) << 0.5).finished());
  P.B1bar = FirOperator((Mat(1, 1) << 1.0).finished());
  P.B2bar = FirOperator((Mat(1, 1) << 1.0).finished());
  P.C1bar = FirOperator((Mat(1, 1) << 1.0).finished());
  P.C2bar = FirOperator((Mat(1, 1) << 1.0).finished());
  P.D11bar = FirOperator(Mat::Zero(1, 1));
  P.D12bar = FirOperator(Mat::Zero(1, 1));
  P.D21bar = FirOperator((Mat(1, 1) << 1.0).finished());
  P.dims = NodeDims{{1}, {1}, {1}, {1}, {1}};
  P.mask.d = Eigen::MatrixXi::Zero(1, 1);
  P.mask.dims = P.dims;
  return P;
}

// controller with no effect: one inert state, zero maps
ControllerRealization idle_controller(const GeneralizedPlant& P) {
  ControllerRealization k;
  k.kind = RealizationKind::fullinfo;
  k.A_K = FirOperator::zero(1, 1);
  k.B_K = FirOperator::zero(1, P.p());
  k.C_K = FirOperator::zero(P.m(), 1);
  k.D_K = FirOperator::zero(P.m(), P.p());
  k.state_part = {1};
  k.state_names = {"idle"};
  return k;
}

// synthesized output-feedback controller for the reference plant, small orders
ControllerRealization reference_controller(const GeneralizedPlant& P) {
  ObserverDesign obs = estimator_synthesize(P, 2, 0.001);
  YoulaPair pair = fullinfo_synthesize(P, 4, 0.9);
  return controller_realize_output(P, obs, pair);
}

// append an unreachable unstable mode that feeds the first input: the map from
// y to u is unchanged (the mode never moves without injected noise), but any
// communication noise on it grows like 1.2^t
ControllerRealization cancellation_wrapped(const ControllerRealization& base) {
  ControllerRealization k = base;
  int nk = base.A_K.rows, m = base.C_K.rows, p = base.B_K.cols;
  FirOperator A(nk + 1, nk + 1, std::max(base.A_K.order(), 1));
  for (int j = 0; j <= base.A_K.order(); ++j) A[j].topLeftCorner(nk, nk) = base.A_K[j];
  A[1](nk, nk) = 1.2;
  FirOperator B(nk + 1, p, base.B_K.order());
  for (int j = 0; j <= base.B_K.order(); ++j) B[j].topRows(nk) = base.B_K[j];
  FirOperator C(m, nk + 1, base.C_K.order());
  for (int j = 0; j <= base.C_K.order(); ++j) C[j].leftCols(nk) = base.C_K[j];
  C[0](0, nk) = 1.0;
  k.A_K = A;
  k.B_K = B;
  k.C_K = C;
  k.state_part.push_back(1);
  k.state_names.push_back("wrapped");
  return k;
}

double sig_diff(const Signal& a, const Signal& b) {
  double d = 0;
  for (int t = 0; t < a.length(); ++t) d = std::max(d, (a[t] - b[t]).cwiseAbs().maxCoeff());
  return d;
}

// largest absolute sample across all loop signals at one instant
double sup_at(const SimRun& run, int t) {
  double s = 0.0;
  for (const Signal* sig : {&run.x, &run.y, &run.xk, &run.u, &run.z})
    if (t < sig->length() && sig->dim) s = std::max(s, (*sig)[t].cwiseAbs().maxCoeff());
  return s;
}

}  // namespace

TEST_CASE("zero disturbance, zero state, zero noise give the zero trajectory") {
  GeneralizedPlant P = nested_plant();
  ControllerRealization K = reference_controller(P);
  Signal w(P.q(), 50);
  SimRun run = closedloop_simulate(P, K, w, Vec::Zero(P.n()), NoiseSpec{}, 50);
  CHECK(run.report.sup_x == 0.0);
  CHECK(run.report.sup_y == 0.0);
  CHECK(run.report.sup_u == 0.0);
  CHECK(run.report.sup_z == 0.0);
  CHECK(run.report.sup_xk == 0.0);
  CHECK(run.report.sup_e == 0.0);
  CHECK_FALSE(run.report.divergent);
  CHECK(run.report.horizon == 50);
}

TEST_CASE("noise-free loop equals the open plant driven by the loop's own input") {
  GeneralizedPlant P = nested_plant();
  ControllerRealization K = reference_controller(P);
  Rng rng(401);
  // the paths share u, so their difference follows the open-loop 1.2 mode and
  // grows like 1.2^T times rounding; T=50 keeps that amplification near 1e-11
  int T = 50;
  Signal w = rand_signal(rng, P.q(), T);
  Vec x0 = rand_mat(rng, P.n(), 1).col(0);
  SimRun run = closedloop_simulate(P, K, w, x0, NoiseSpec{}, T);
  Signal x, y, z;
  plant_simulate(P, run.u, w, x0, T, x, y, z);
  CHECK(sig_diff(run.x, x) <= 1e-10);
  CHECK(sig_diff(run.y, y) <= 1e-10);
  CHECK(sig_diff(run.z, z) <= 1e-10);
}

TEST_CASE("doubling disturbance, initial state, and noise doubles every signal") {
  GeneralizedPlant P = nested_plant();
  ControllerRealization K = reference_controller(P);
  Rng rng(402);
  int T = 60;
  Signal w = rand_signal(rng, P.q(), T);
  Signal w2(P.q(), T);
  for (int t = 0; t < T; ++t) w2[t] = 2.0 * w[t];
  Vec x0 = rand_mat(rng, P.n(), 1).col(0);
  NoiseSpec ns;
  ns.nx_amplitude = 0.3;
  ns.nu_amplitude = 0.2;
  NoiseSpec ns2 = ns;
  ns2.nx_amplitude = 0.6;
  ns2.nu_amplitude = 0.4;
  SimRun a = closedloop_simulate(P, K, w, x0, ns, T);
  SimRun b = closedloop_simulate(P, K, w2, 2.0 * x0, ns2, T);
  for (int t = 0; t < T; ++t) {
    CHECK((2.0 * a.x[t] - b.x[t]).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((2.0 * a.u[t] - b.u[t]).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((2.0 * a.z[t] - b.z[t]).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((2.0 * a.xk[t] - b.xk[t]).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("superposition of disturbance-only and state-only responses") {
  GeneralizedPlant P = nested_plant();
  ControllerRealization K = reference_controller(P);
  Rng rng(403);
  int T = 60;
  Signal w = rand_signal(rng, P.q(), T);
  Vec x0 = rand_mat(rng, P.n(), 1).col(0);
  SimRun joint = closedloop_simulate(P, K, w, x0, NoiseSpec{}, T);
  SimRun onlyw = closedloop_simulate(P, K, w, Vec::Zero(P.n()), NoiseSpec{}, T);
  Signal zero_w(P.q(), T);
  SimRun onlyx = closedloop_simulate(P, K, zero_w, x0, NoiseSpec{}, T);
  for (int t = 0; t < T; ++t) {
    CHECK((joint.x[t] - onlyw.x[t] - onlyx.x[t]).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK((joint.z[t] - onlyw.z[t] - onlyx.z[t]).cwiseAbs().maxCoeff() <= 1e-9);
  }
}

TEST_CASE("empirical gain of the geometric loop converges to the closed form") {
  GeneralizedPlant P = geometric_plant();
  ControllerRealization K = idle_controller(P);
  // impulse response of z: 0, 1, 0.5, 0.25, ... so the row sum approaches 2
  double g10 = empirical_gain(P, K, 10);
  double g30 = empirical_gain(P, K, 30);
  double g60 = empirical_gain(P, K, 60);
  CHECK(g10 <= g30);
  CHECK(g30 <= g60);
  CHECK(g60 <= 2.0 + 1e-12);
  CHECK(g60 == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("empirical gain stays below the certified upper bound and grows with T") {
  GeneralizedPlant P = nested_plant();
  ObserverDesign obs = estimator_synthesize(P, 2, 0.001);
  BoundsOutcome out = algorithm1_run(P, obs, 0.9, {2, 4}, 10.0);
  ControllerRealization K = controller_realize_output(P, obs, out.best);
  double gu = out.trace.rows.back().gamma_upper;
  double g50 = empirical_gain(P, K, 50);
  double g120 = empirical_gain(P, K, 120);
  double g240 = empirical_gain(P, K, 240);
  CHECK(g50 <= g120);
  CHECK(g120 <= g240);
  CHECK(g240 <= gu + 1e-6);
  CHECK(g240 > 0.1);
}

TEST_CASE("bounded noise at amplitude one stays bounded over five hundred steps") {
  GeneralizedPlant P = nested_plant();
  ControllerRealization K = reference_controller(P);
  NoiseSpec ns;
  ns.nx_amplitude = 1.0;
  ns.nu_amplitude = 1.0;
  Signal w(P.q(), 500);
  SimRun run = closedloop_simulate(P, K, w, Vec::Zero(P.n()), ns, 500);
  CHECK_FALSE(run.report.divergent);
  CHECK(run.report.sup_x < kBlowUpThreshold);
  CHECK(run.report.sup_u < kBlowUpThreshold);
  CHECK(run.report.sup_xk < kBlowUpThreshold);
  CHECK(std::isfinite(run.report.sup_z));
}

TEST_CASE("separation-designed controller damps a random initial state") {
  GeneralizedPlant P = nested_plant();
  // observer and full-information pair designed independently, then composed
  ControllerRealization K = reference_controller(P);
  Rng rng(404);
  Vec x0 = rand_mat(rng, P.n(), 1).col(0);
  int T = 500;
  Signal w(P.q(), T);
  SimRun run = closedloop_simulate(P, K, w, x0, NoiseSpec{}, T);
  CHECK_FALSE(run.report.divergent);
  double peak = 0.0, tail = 0.0;
  for (int t = 0; t < T; ++t) peak = std::max(peak, sup_at(run, t));
  for (int t = 400; t < T; ++t) tail = std::max(tail, sup_at(run, t));
  CHECK(peak > 0.0);
  CHECK(tail < 1e-6 * peak);
  // the estimation error also dies out
  double etail = 0.0;
  for (int t = 400; t < T; ++t) etail = std::max(etail, run.e[t].cwiseAbs().maxCoeff());
  CHECK(etail < 1e-6 * std::max(run.report.sup_e, 1e-12));
}

TEST_CASE("audit reports amplitude-linear amplification for a sound realization") {
  GeneralizedPlant P = nested_plant();
  ControllerRealization K = reference_controller(P);
  AuditReport rep = realizability_audit(P, K, 2, {0.1, 1.0, 10.0}, 300);
  CHECK_FALSE(rep.divergent);
  CHECK(rep.linear);
  // same seeds scale exactly with amplitude, so the spread is numerical noise
  CHECK(rep.linearity_spread < 1e-9);
  REQUIRE(rep.amplification.size() == 3);
  for (double a : rep.amplification) CHECK(a > 0.0);
  CHECK(rep.nx_amplification > 0.0);
  CHECK(rep.nu_amplification > 0.0);
}

TEST_CASE("audit flags a realization wrapping an unstable cancellation") {
  GeneralizedPlant P = nested_plant();
  ControllerRealization K = reference_controller(P);
  ControllerRealization bad = cancellation_wrapped(K);
  // without noise the wrapped mode never moves: identical closed loop
  Rng rng(405);
  int T = 80;
  Signal w = rand_signal(rng, P.q(), T);
  SimRun base = closedloop_simulate(P, K, w, Vec::Zero(P.n()), NoiseSpec{}, T);
  SimRun same = closedloop_simulate(P, bad, w, Vec::Zero(P.n()), NoiseSpec{}, T);
  CHECK(sig_diff(base.u, same.u) <= 1e-12);
  CHECK(sig_diff(base.z, same.z) <= 1e-12);
  // with state noise the mode compounds and crosses the blow-up threshold
  NoiseSpec ns;
  ns.nx_amplitude = 0.1;
  SimRun blown = closedloop_simulate(P, bad, Signal(P.q(), 300), Vec::Zero(P.n()), ns, 300);
  CHECK(blown.report.divergent);
  CHECK(blown.report.first_divergence_t >= 0);
  double worst = std::max({blown.report.sup_x, blown.report.sup_y, blown.report.sup_xk,
                           blown.report.sup_u, blown.report.sup_z});
  CHECK(worst >= kBlowUpThreshold);
  AuditReport rep = realizability_audit(P, bad, 2, {0.1, 1.0, 10.0}, 300);
  CHECK(rep.divergent);
  CHECK_FALSE(rep.linear);
}

TEST_CASE("sign noise takes only the two extreme values") {
  Signal s = noise_signal(3, 40, 0.7, 99, NoiseDist::uniform_sign);
  bool seen_pos = false, seen_neg = false;
  for (int t = 0; t < 40; ++t)
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(std::abs(s[t](i)) - 0.7) <= 1e-15);
      (s[t](i) > 0 ? seen_pos : seen_neg) = true;
    }
  CHECK(seen_pos);
  CHECK(seen_neg);
}

TEST_CASE("interval noise respects the amplitude bound and the seed") {
  Signal a = noise_signal(2, 30, 0.5, 7, NoiseDist::uniform_interval);
  Signal b = noise_signal(2, 30, 0.5, 7, NoiseDist::uniform_interval);
  Signal c = noise_signal(2, 30, 1.0, 7, NoiseDist::uniform_interval);
  CHECK(sig_diff(a, b) == 0.0);
  CHECK(a.sup_norm() <= 0.5);
  for (int t = 0; t < 30; ++t) CHECK((2.0 * a[t] - c[t]).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("dimension and well-posedness errors") {
  GeneralizedPlant P = nested_plant();
  ControllerRealization K = reference_controller(P);
  Signal w(P.q(), 10);
  ControllerRealization wrong = K;
  wrong.B_K = FirOperator::zero(wrong.A_K.rows, P.p() + 1);
  CHECK_THROWS_AS(closedloop_simulate(P, wrong, w, Vec::Zero(P.n()), NoiseSpec{}, 10), dim_error);
  Signal short_w(P.q(), 5);
  CHECK_THROWS_AS(closedloop_simulate(P, K, short_w, Vec::Zero(P.n()), NoiseSpec{}, 10), dim_error);
  // a unit self-loop at lag zero makes the algebraic loop singular
  GeneralizedPlant G = geometric_plant();
  ControllerRealization loopy = idle_controller(G);
  loopy.A_K[0](0, 0) = 1.0;
  CHECK_THROWS_AS(closedloop_simulate(G, loopy, Signal(1, 10), Vec::Zero(1), NoiseSpec{}, 10),
                  numeric_error);
}
