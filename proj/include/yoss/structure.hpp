#pragma once
// Network structure as per-entry minimum-delay masks over node partitions.
#include <array>
#include <limits>
#include <numeric>

#include "fir.hpp"

namespace yoss {

// sentinel for "no influence permitted at any lag"
constexpr int kInfDelay = std::numeric_limits<int>::max();

struct NodeDims {
  std::vector<int> n;  // state dims
  std::vector<int> p;  // measurement dims
  std::vector<int> m;  // control dims
  std::vector<int> q;  // exogenous dims
  std::vector<int> r;  // regulated dims

  int count() const { return static_cast<int>(n.size()); }
  int total_n() const { return std::accumulate(n.begin(), n.end(), 0); }
  int total_p() const { return std::accumulate(p.begin(), p.end(), 0); }
  int total_m() const { return std::accumulate(m.begin(), m.end(), 0); }
  int total_q() const { return std::accumulate(q.begin(), q.end(), 0); }
  int total_r() const { return std::accumulate(r.begin(), r.end(), 0); }
};

// d(i,j) = minimum admissible lag of node-j-to-node-i influence; d(i,i) = 0
struct StructureMask {
  Eigen::MatrixXi d;
  NodeDims dims;

  int count() const { return static_cast<int>(d.rows()); }
};

struct Link {
  int from = 0;
  int to = 0;
  int delay = 0;
  // counts the receiving state update as one extra lag in the mask graph
  bool count_state_hop = false;
};

inline int delay_add(int a, int b) {
  return (a == kInfDelay || b == kInfDelay) ? kInfDelay : a + b;
}

// d = all-pairs shortest path over the directed link graph, 0 on the diagonal
inline StructureMask mask_from_network(int nodes, const std::vector<Link>& links, NodeDims dims) {
  Eigen::MatrixXi d = Eigen::MatrixXi::Constant(nodes, nodes, kInfDelay);
  for (int i = 0; i < nodes; ++i) d(i, i) = 0;
  for (const Link& l : links) {
    if (l.from < 0 || l.from >= nodes || l.to < 0 || l.to >= nodes)
      throw dim_error("mask_from_network: link endpoint out of range");
    if (l.delay < 0) throw dim_error("mask_from_network: negative link delay");
    int w = l.delay + (l.count_state_hop ? 1 : 0);
    d(l.to, l.from) = std::min(d(l.to, l.from), w);
  }
  for (int k = 0; k < nodes; ++k)
    for (int i = 0; i < nodes; ++i)
      for (int j = 0; j < nodes; ++j)
        d(i, j) = std::min(d(i, j), delay_add(d(i, k), d(k, j)));
  return StructureMask{std::move(d), std::move(dims)};
}

// expand the node-level mask to entry level for operators partitioned rows_of x cols_of
inline Eigen::MatrixXi mask_expand(const StructureMask& m, const std::vector<int>& rows_of,
                                   const std::vector<int>& cols_of) {
  int R = std::accumulate(rows_of.begin(), rows_of.end(), 0);
  int C = std::accumulate(cols_of.begin(), cols_of.end(), 0);
  Eigen::MatrixXi e(R, C);
  int roff = 0;
  for (size_t i = 0; i < rows_of.size(); ++i) {
    int coff = 0;
    for (size_t j = 0; j < cols_of.size(); ++j) {
      e.block(roff, coff, rows_of[i], cols_of[j]).setConstant(m.d(static_cast<int>(i), static_cast<int>(j)));
      coff += cols_of[j];
    }
    roff += rows_of[i];
  }
  return e;
}

struct MaskViolation {
  int block_i = 0, block_j = 0, lag = 0;
  double magnitude = 0.0;
};

// true iff every entry of block (i,j) vanishes at all lags below d(i,j)
inline bool mask_check_membership(const FirOperator& t, const StructureMask& m,
                                  const std::vector<int>& rows_of, const std::vector<int>& cols_of,
                                  std::vector<MaskViolation>* violations = nullptr, double tol = 1e-9) {
  int R = std::accumulate(rows_of.begin(), rows_of.end(), 0);
  int C = std::accumulate(cols_of.begin(), cols_of.end(), 0);
  if (t.rows != R || t.cols != C) throw dim_error("mask_check_membership: partition mismatch");
  bool ok = true;
  int roff = 0;
  for (int i = 0; i < m.count(); ++i) {
    int coff = 0;
    for (int j = 0; j < m.count(); ++j) {
      int dmin = m.d(i, j);
      int top = dmin == kInfDelay ? t.order() : std::min(t.order(), dmin - 1);
      for (int k = 0; k <= top; ++k) {
        double mag = t[k].block(roff, coff, rows_of[static_cast<size_t>(i)], cols_of[static_cast<size_t>(j)])
                         .cwiseAbs()
                         .maxCoeff();
        if (mag > tol) {
          ok = false;
          if (violations) violations->push_back(MaskViolation{i, j, k, mag});
        }
      }
      coff += cols_of[static_cast<size_t>(j)];
    }
    roff += rows_of[static_cast<size_t>(i)];
  }
  return ok;
}

// multiplicative closure of the masked set holds iff d obeys the triangle
// inequality; returns every (i, k, j) with d(i,j) > d(i,k) + d(k,j)
inline std::vector<std::array<int, 3>> mask_closure_violations(const StructureMask& m) {
  std::vector<std::array<int, 3>> out;
  int N = static_cast<int>(m.d.rows());
  for (int i = 0; i < N; ++i)
    for (int k = 0; k < N; ++k)
      for (int j = 0; j < N; ++j)
        if (m.d(i, j) > delay_add(m.d(i, k), m.d(k, j))) out.push_back({i, k, j});
  return out;
}

struct AssumptionReport {
  bool closed_under_mul = true;                    // triangle inequality on d
  std::vector<std::array<int, 3>> closure_violations;  // (i, k, j) with d(i,j) > d(i,k)+d(k,j)
  bool abar_member = true, b2_member = true, c2_member = true;
  std::vector<MaskViolation> membership_violations;
  bool d21_full_row_rank = true;
  bool ok() const {
    return closed_under_mul && abar_member && b2_member && c2_member && d21_full_row_rank;
  }
};

}  // namespace yoss
