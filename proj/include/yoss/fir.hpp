#pragma once
// Causal LTI operators as finite impulse responses: value types and ring algebra.
#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace yoss {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct yoss_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct dim_error : yoss_error {
  using yoss_error::yoss_error;
};
struct numeric_error : yoss_error {
  using yoss_error::yoss_error;
};
struct infeasible_error : yoss_error {
  using yoss_error::yoss_error;
};

// T = sum_k coef[k] Lambda^k; all coefficients share one shape, length >= 1.
struct FirOperator {
  int rows = 0;
  int cols = 0;
  std::vector<Mat> coef;

  FirOperator() : rows(0), cols(0), coef{Mat::Zero(0, 0)} {}
  FirOperator(int r, int c, int order = 0)
      : rows(r), cols(c), coef(static_cast<size_t>(order) + 1, Mat::Zero(r, c)) {}
  explicit FirOperator(Mat m0) : rows(static_cast<int>(m0.rows())), cols(static_cast<int>(m0.cols())) {
    coef.push_back(std::move(m0));
  }
  explicit FirOperator(std::vector<Mat> ms) {
    if (ms.empty()) throw dim_error("FirOperator: empty coefficient list");
    rows = static_cast<int>(ms[0].rows());
    cols = static_cast<int>(ms[0].cols());
    for (const Mat& m : ms)
      if (m.rows() != rows || m.cols() != cols) throw dim_error("FirOperator: ragged coefficients");
    coef = std::move(ms);
  }

  int order() const { return static_cast<int>(coef.size()) - 1; }
  int lags() const { return static_cast<int>(coef.size()); }
  Mat& operator[](int k) { return coef[static_cast<size_t>(k)]; }
  const Mat& operator[](int k) const { return coef[static_cast<size_t>(k)]; }
  // coefficient at lag k, zero beyond the stored order
  Mat at(int k) const { return k <= order() ? coef[static_cast<size_t>(k)] : Mat::Zero(rows, cols); }

  static FirOperator eye(int n) {
    FirOperator t(n, n);
    t.coef[0] = Mat::Identity(n, n);
    return t;
  }
  static FirOperator zero(int r, int c) { return FirOperator(r, c); }
};

// s(0..T-1), every sample of dimension dim
struct Signal {
  int dim = 0;
  std::vector<Vec> samples;

  Signal() = default;
  Signal(int d, int T) : dim(d), samples(static_cast<size_t>(T), Vec::Zero(d)) {}
  int length() const { return static_cast<int>(samples.size()); }
  Vec& operator[](int t) { return samples[static_cast<size_t>(t)]; }
  const Vec& operator[](int t) const { return samples[static_cast<size_t>(t)]; }
  double sup_norm() const {
    double s = 0;
    for (const Vec& v : samples) s = std::max(s, v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
    return s;
  }
};

inline void check_same_shape(const FirOperator& a, const FirOperator& b, const char* who) {
  if (a.rows != b.rows || a.cols != b.cols) throw dim_error(std::string(who) + ": shape mismatch");
}

inline FirOperator op_add(const FirOperator& a, const FirOperator& b) {
  check_same_shape(a, b, "op_add");
  FirOperator out(a.rows, a.cols, std::max(a.order(), b.order()));
  for (int k = 0; k <= out.order(); ++k) out[k] = a.at(k) + b.at(k);
  return out;
}

inline FirOperator op_sub(const FirOperator& a, const FirOperator& b) {
  check_same_shape(a, b, "op_sub");
  FirOperator out(a.rows, a.cols, std::max(a.order(), b.order()));
  for (int k = 0; k <= out.order(); ++k) out[k] = a.at(k) - b.at(k);
  return out;
}

inline FirOperator op_scale(double s, const FirOperator& a) {
  FirOperator out = a;
  for (Mat& m : out.coef) m *= s;
  return out;
}

// composition = impulse-response convolution; maxlag >= 0 truncates the product
inline FirOperator op_mul(const FirOperator& a, const FirOperator& b, int maxlag = -1) {
  if (a.cols != b.rows) throw dim_error("op_mul: inner dimension mismatch");
  int full = a.order() + b.order();
  int ord = maxlag >= 0 ? std::min(maxlag, full) : full;
  FirOperator out(a.rows, b.cols, ord);
  for (int ka = 0; ka <= a.order(); ++ka)
    for (int kb = 0; kb <= b.order() && ka + kb <= ord; ++kb)
      out[ka + kb].noalias() += a[ka] * b[kb];
  return out;
}

inline FirOperator op_delay(const FirOperator& a, int k = 1) {
  if (k < 0) throw dim_error("op_delay: negative shift");
  FirOperator out(a.rows, a.cols, a.order() + k);
  for (int j = 0; j <= a.order(); ++j) out[j + k] = a[j];
  return out;
}

// drop trailing coefficients that vanish to tolerance (identity up to trailing zeros)
inline FirOperator op_trim(const FirOperator& a, double tol = 1e-12) {
  int last = 0;
  if (a.rows > 0 && a.cols > 0)
    for (int k = a.order(); k >= 1; --k)
      if (a[k].cwiseAbs().maxCoeff() > tol) {
        last = k;
        break;
      }
  FirOperator out(a.rows, a.cols, last);
  for (int k = 0; k <= last; ++k) out[k] = a[k];
  return out;
}

inline bool op_eq(const FirOperator& a, const FirOperator& b, double tol = 1e-12) {
  if (a.rows != b.rows || a.cols != b.cols) return false;
  if (a.rows == 0 || a.cols == 0) return true;
  int top = std::max(a.order(), b.order());
  for (int k = 0; k <= top; ++k)
    if ((a.at(k) - b.at(k)).cwiseAbs().maxCoeff() > tol) return false;
  return true;
}

// l-infinity induced gain: max over output rows of the absolute coefficient sum
inline double norm_linf_induced(const FirOperator& t) {
  if (t.rows == 0 || t.cols == 0) return 0.0;
  Vec rowsum = Vec::Zero(t.rows);
  for (const Mat& m : t.coef) rowsum += m.cwiseAbs().rowwise().sum();
  return rowsum.maxCoeff();
}

// truncated causal inverse: S(0)=T(0)^-1, S(k) = -T(0)^-1 sum_{m>=1} T(m) S(k-m)
inline FirOperator op_inverse_truncated(const FirOperator& t, int horizon, double rcond_min = 1e-10) {
  if (t.rows != t.cols) throw dim_error("op_inverse_truncated: operator not square");
  Eigen::PartialPivLU<Mat> lu(t[0]);
  double rcond = lu.rcond();
  if (!std::isfinite(rcond) || rcond < rcond_min)
    throw numeric_error("op_inverse_truncated: lag-0 coefficient ill-conditioned (rcond " +
                        std::to_string(rcond) + ")");
  FirOperator s(t.rows, t.cols, horizon);
  s[0] = lu.solve(Mat::Identity(t.rows, t.cols));
  for (int k = 1; k <= horizon; ++k) {
    Mat acc = Mat::Zero(t.rows, t.cols);
    for (int m = 1; m <= std::min(k, t.order()); ++m) acc.noalias() += t[m] * s[k - m];
    s[k] = -lu.solve(acc);
  }
  return s;
}

// sum_{j<=J} e^j truncated to horizon, J chosen so eps^{J+1}/(1-eps) <= tol
inline std::pair<FirOperator, double> op_neumann_inverse(const FirOperator& e, int horizon,
                                                         double tol = 1e-9) {
  if (e.rows != e.cols) throw dim_error("op_neumann_inverse: operator not square");
  double eps = norm_linf_induced(e);
  if (eps >= 1.0) throw numeric_error("op_neumann_inverse: gain " + std::to_string(eps) + " >= 1");
  FirOperator acc = FirOperator::eye(e.rows);
  FirOperator pw = FirOperator::eye(e.rows);
  double tail = eps < 1e-300 ? 0.0 : eps / (1.0 - eps);
  int J = 0;
  while (tail > tol) {
    pw = op_mul(pw, e, horizon);
    acc = op_add(acc, pw);
    ++J;
    tail *= eps;
    if (norm_linf_induced(pw) == 0.0) {
      tail = 0.0;
      break;
    }
  }
  FirOperator out(e.rows, e.cols, std::min(horizon, acc.order()));
  for (int k = 0; k <= out.order(); ++k) out[k] = acc[k];
  return {out, tail};
}

inline Signal op_apply(const FirOperator& t, const Signal& u) {
  if (t.cols != u.dim) throw dim_error("op_apply: signal dimension mismatch");
  Signal y(t.rows, u.length());
  for (int ti = 0; ti < u.length(); ++ti)
    for (int k = 0; k <= std::min(ti, t.order()); ++k) y[ti].noalias() += t[k] * u[ti - k];
  return y;
}

inline FirOperator op_hstack(const std::vector<FirOperator>& parts) {
  if (parts.empty()) throw dim_error("op_hstack: empty");
  int ord = 0, c = 0;
  for (const FirOperator& p : parts) {
    if (p.rows != parts[0].rows) throw dim_error("op_hstack: row mismatch");
    ord = std::max(ord, p.order());
    c += p.cols;
  }
  FirOperator out(parts[0].rows, c, ord);
  for (int k = 0; k <= ord; ++k) {
    int off = 0;
    for (const FirOperator& p : parts) {
      out[k].middleCols(off, p.cols) = p.at(k);
      off += p.cols;
    }
  }
  return out;
}

inline FirOperator op_vstack(const std::vector<FirOperator>& parts) {
  if (parts.empty()) throw dim_error("op_vstack: empty");
  int ord = 0, r = 0;
  for (const FirOperator& p : parts) {
    if (p.cols != parts[0].cols) throw dim_error("op_vstack: col mismatch");
    ord = std::max(ord, p.order());
    r += p.rows;
  }
  FirOperator out(r, parts[0].cols, ord);
  for (int k = 0; k <= ord; ++k) {
    int off = 0;
    for (const FirOperator& p : parts) {
      out[k].middleRows(off, p.rows) = p.at(k);
      off += p.rows;
    }
  }
  return out;
}

inline FirOperator op_block(const FirOperator& t, int r0, int c0, int nr, int nc) {
  if (r0 < 0 || c0 < 0 || r0 + nr > t.rows || c0 + nc > t.cols) throw dim_error("op_block: out of range");
  FirOperator out(nr, nc, t.order());
  for (int k = 0; k <= t.order(); ++k) out[k] = t[k].block(r0, c0, nr, nc);
  return out;
}

}  // namespace yoss
