#pragma once

#include <optional>
#include <string>

#include "twister/embedding.hpp"
#include "twister/line_graph.hpp"

namespace twister {

/// Dirichlet energy of Z on a line-graph view: sum over unordered adjacent
/// pairs of W_ab * ||z_a - z_b||^2 (the 1/2 in the symmetric double sum).
/// Computed by pairwise summation over the sparse adjacency in fixed order.
inline double dirichlet_energy(const LineGraphView& view, const EmbeddingMatrix& z) {
  if (z.rows() != view.node_count())
    throw Error("dirichlet_energy: Z rows (" + std::to_string(z.rows()) +
                ") must match view nodes (" + std::to_string(view.node_count()) + ")");
  double energy = 0.0;
  view.for_each_line_edge([&](EdgeId a, EdgeId b, double w) {
    const auto za = z.row(a);
    const auto zb = z.row(b);
    double dist2 = 0.0;
    for (std::size_t j = 0; j < za.size(); ++j) {
      const double d = za[j] - zb[j];
      dist2 += d * d;
    }
    energy += w * dist2;
  });
  return energy;
}

/// Energies of one completed-review embedding on the user, item, and
/// weighted-user views.
struct EnergyReport {
  double e_user = 0.0;
  double e_item = 0.0;
  double e_user_weighted = 0.0;
  std::uint32_t n_edges = 0;
  std::string variant;
  std::string embedder;
};

inline EnergyReport energy_report(const LineGraphView& user_v, const LineGraphView& item_v,
                                  const LineGraphView& user_weighted_v, const EmbeddingMatrix& z,
                                  std::string variant = {}, std::string embedder = {}) {
  EnergyReport report;
  report.e_user = dirichlet_energy(user_v, z);
  report.e_item = dirichlet_energy(item_v, z);
  report.e_user_weighted = dirichlet_energy(user_weighted_v, z);
  report.n_edges = user_v.node_count();
  report.variant = std::move(variant);
  report.embedder = std::move(embedder);
  return report;
}

/// Componentwise energy ratios relative to the Blank baseline. A zero blank
/// component makes that ratio undefined (absent).
struct NormalizedEnergy {
  std::optional<double> user, item, user_weighted;
};

inline NormalizedEnergy normalized_energy(const EnergyReport& report, const EnergyReport& blank) {
  NormalizedEnergy out;
  if (blank.e_user > 0.0) out.user = report.e_user / blank.e_user;
  if (blank.e_item > 0.0) out.item = report.e_item / blank.e_item;
  if (blank.e_user_weighted > 0.0) out.user_weighted = report.e_user_weighted / blank.e_user_weighted;
  return out;
}

}  // namespace twister
