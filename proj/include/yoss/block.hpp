#pragma once
// Partitioned grids of FIR operators; flatten/assemble are exact inverses.
#include <numeric>

#include "fir.hpp"

namespace yoss {

struct BlockOperator {
  std::vector<int> row_partition;
  std::vector<int> col_partition;
  std::vector<std::vector<FirOperator>> blocks;  // blocks[i][j]: row_partition[i] x col_partition[j]

  int block_rows() const { return static_cast<int>(row_partition.size()); }
  int block_cols() const { return static_cast<int>(col_partition.size()); }
  int total_rows() const { return std::accumulate(row_partition.begin(), row_partition.end(), 0); }
  int total_cols() const { return std::accumulate(col_partition.begin(), col_partition.end(), 0); }
  const FirOperator& operator()(int i, int j) const {
    return blocks[static_cast<size_t>(i)][static_cast<size_t>(j)];
  }
  FirOperator& operator()(int i, int j) { return blocks[static_cast<size_t>(i)][static_cast<size_t>(j)]; }
};

inline BlockOperator block_assemble(std::vector<std::vector<FirOperator>> grid,
                                    std::vector<int> row_partition, std::vector<int> col_partition) {
  if (grid.size() != row_partition.size()) throw dim_error("block_assemble: row partition mismatch");
  for (size_t i = 0; i < grid.size(); ++i) {
    if (grid[i].size() != col_partition.size()) throw dim_error("block_assemble: col partition mismatch");
    for (size_t j = 0; j < grid[i].size(); ++j)
      if (grid[i][j].rows != row_partition[i] || grid[i][j].cols != col_partition[j])
        throw dim_error("block_assemble: block shape mismatch at (" + std::to_string(i) + "," +
                        std::to_string(j) + ")");
  }
  return BlockOperator{std::move(row_partition), std::move(col_partition), std::move(grid)};
}

inline FirOperator block_flatten(const BlockOperator& b) {
  int ord = 0;
  for (const auto& row : b.blocks)
    for (const FirOperator& t : row) ord = std::max(ord, t.order());
  FirOperator out(b.total_rows(), b.total_cols(), ord);
  int roff = 0;
  for (int i = 0; i < b.block_rows(); ++i) {
    int coff = 0;
    for (int j = 0; j < b.block_cols(); ++j) {
      const FirOperator& t = b(i, j);
      for (int k = 0; k <= t.order(); ++k) out[k].block(roff, coff, t.rows, t.cols) = t[k];
      coff += b.col_partition[static_cast<size_t>(j)];
    }
    roff += b.row_partition[static_cast<size_t>(i)];
  }
  return out;
}

inline BlockOperator block_split(const FirOperator& t, std::vector<int> row_partition,
                                 std::vector<int> col_partition) {
  int tr = std::accumulate(row_partition.begin(), row_partition.end(), 0);
  int tc = std::accumulate(col_partition.begin(), col_partition.end(), 0);
  if (tr != t.rows || tc != t.cols) throw dim_error("block_split: partition does not tile operator");
  std::vector<std::vector<FirOperator>> grid(row_partition.size());
  int roff = 0;
  for (size_t i = 0; i < row_partition.size(); ++i) {
    int coff = 0;
    for (size_t j = 0; j < col_partition.size(); ++j) {
      grid[i].push_back(op_block(t, roff, coff, row_partition[i], col_partition[j]));
      coff += col_partition[j];
    }
    roff += row_partition[i];
  }
  return BlockOperator{std::move(row_partition), std::move(col_partition), std::move(grid)};
}

}  // namespace yoss
