#pragma once

#include <Eigen/Dense>

#include "twister/line_graph.hpp"

namespace twister {

/// Unnormalized Laplacian L = D - W of a line-graph view. Symmetric, zero
/// row sums, nonnegative diagonal. Off-diagonal entries are stored as a CSR
/// mirror of the view's adjacency.
struct SparseLaplacian {
  std::uint32_t dim = 0;
  std::vector<double> degree;                       // D_ii
  std::vector<std::size_t> offsets;                 // row start into offdiag
  std::vector<std::pair<EdgeId, double>> offdiag;   // (j, W_ij); L_ij = -W_ij

  std::span<const std::pair<EdgeId, double>> row_offdiag(std::uint32_t i) const {
    return {offdiag.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }

  Eigen::MatrixXd to_dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, dim);
    for (std::uint32_t i = 0; i < dim; ++i) {
      m(i, i) = degree[i];
      for (const auto& [j, w] : row_offdiag(i)) m(i, j) = -w;
    }
    return m;
  }
};

inline SparseLaplacian laplacian(const LineGraphView& view) {
  SparseLaplacian lap;
  lap.dim = view.node_count();
  lap.degree.assign(lap.dim, 0.0);
  lap.offsets.reserve(lap.dim + 1);
  lap.offsets.push_back(0);
  for (EdgeId i = 0; i < lap.dim; ++i) {
    for (const auto& [j, w] : view.neighbors_of(i)) {
      lap.degree[i] += w;
      lap.offdiag.emplace_back(j, w);
    }
    lap.offsets.push_back(lap.offdiag.size());
  }
  return lap;
}

}  // namespace twister
