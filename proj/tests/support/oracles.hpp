#pragma once

// Independent oracles for property tests. These deliberately use the naive
// O(n^2)-style formulations so they stay decoupled from the library's
// optimized paths.

#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "twister/embedding.hpp"
#include "twister/ingest.hpp"
#include "twister/laplacian.hpp"
#include "twister/line_graph.hpp"
#include "twister/teg.hpp"

namespace oracles {

using twister::BipartiteTEG;
using twister::EdgeId;

// Repeated full-scan peeling: delete any vertex with degree < k, rebuild,
// repeat until stable. Returns surviving original edge ids.
inline std::vector<EdgeId> peeling_k_core(const BipartiteTEG& teg, unsigned k) {
  std::set<EdgeId> alive;
  for (EdgeId e = 0; e < teg.n_edges(); ++e) alive.insert(e);
  bool changed = true;
  while (changed) {
    changed = false;
    std::map<std::string, int> udeg, ideg;
    for (EdgeId e : alive) {
      udeg[teg.user_name(teg.edge(e).user)]++;
      ideg[teg.item_name(teg.edge(e).item)]++;
    }
    std::set<EdgeId> next;
    for (EdgeId e : alive) {
      const auto& edge = teg.edge(e);
      if (udeg[teg.user_name(edge.user)] >= static_cast<int>(k) &&
          ideg[teg.item_name(edge.item)] >= static_cast<int>(k))
        next.insert(e);
    }
    if (next.size() != alive.size()) {
      alive = std::move(next);
      changed = true;
    }
  }
  return {alive.begin(), alive.end()};
}

// All-pairs line-graph adjacency by direct endpoint comparison.
enum class Share { any, user, item };
inline std::set<std::pair<EdgeId, EdgeId>> brute_line_edges(const BipartiteTEG& teg, Share mode) {
  std::set<std::pair<EdgeId, EdgeId>> out;
  for (EdgeId a = 0; a < teg.n_edges(); ++a) {
    for (EdgeId b = a + 1; b < teg.n_edges(); ++b) {
      const auto& ea = teg.edge(a);
      const auto& eb = teg.edge(b);
      const bool same_user = ea.user == eb.user;
      const bool same_item = ea.item == eb.item;
      const bool adjacent = mode == Share::any    ? (same_user || same_item)
                            : mode == Share::user ? same_user
                                                  : same_item;
      if (adjacent) out.emplace(a, b);
    }
  }
  return out;
}

inline std::set<std::pair<EdgeId, EdgeId>> view_line_edges(const twister::LineGraphView& view) {
  std::set<std::pair<EdgeId, EdgeId>> out;
  view.for_each_line_edge([&](EdgeId a, EdgeId b, double) { out.emplace(a, b); });
  return out;
}

// Dense trace-form Dirichlet energy: tr(Z^T L Z).
inline double trace_energy(const twister::SparseLaplacian& lap, const twister::EmbeddingMatrix& z) {
  const Eigen::MatrixXd L = lap.to_dense();
  Eigen::MatrixXd Z(z.rows(), z.dim());
  for (std::size_t i = 0; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.dim(); ++j) Z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = z.row(i)[j];
  return (Z.transpose() * L * Z).trace();
}

// Full-matrix LCS over token vectors.
inline std::size_t lcs_full_matrix(const std::vector<std::string>& a,
                                   const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> dp(a.size() + 1, std::vector<std::size_t>(b.size() + 1, 0));
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      dp[i][j] = a[i - 1] == b[j - 1] ? dp[i - 1][j - 1] + 1 : std::max(dp[i - 1][j], dp[i][j - 1]);
  return dp[a.size()][b.size()];
}

// Ranking metrics from an explicit candidate score list, computed by sorting
// (positive loses ties).
struct RankOracle {
  double acc, auc, mrr, ndcg;
};
inline RankOracle rank_metrics_from_scores(double s_pos, const std::vector<double>& s_negs,
                                           unsigned k) {
  std::vector<std::pair<double, int>> candidates;  // (score, is_positive)
  candidates.emplace_back(s_pos, 1);
  for (double s : s_negs) candidates.emplace_back(s, 0);
  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // positive sorts after tied negatives
  });
  std::size_t rank = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    if (candidates[i].second == 1) rank = i + 1;
  double wins = 0.0;
  for (double s : s_negs) {
    if (s_pos > s)
      wins += 1.0;
    else if (s_pos == s)
      wins += 0.5;
  }
  RankOracle oracle{};
  oracle.acc = rank == 1 ? 1.0 : 0.0;
  oracle.mrr = 1.0 / static_cast<double>(rank);
  oracle.ndcg = rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
  oracle.auc = wins / static_cast<double>(s_negs.size());
  return oracle;
}

// Seeded random bipartite TEG with reviews on every edge.
inline BipartiteTEG random_teg(std::uint32_t n_users, std::uint32_t n_items,
                               std::uint32_t target_edges, std::uint64_t seed,
                               bool with_reviews = true) {
  twister::Rng rng(seed);
  std::set<std::pair<std::uint32_t, std::uint32_t>> pairs;
  const std::uint64_t max_pairs = static_cast<std::uint64_t>(n_users) * n_items;
  const std::uint32_t want = static_cast<std::uint32_t>(
      std::min<std::uint64_t>(target_edges, max_pairs));
  while (pairs.size() < want) {
    pairs.emplace(static_cast<std::uint32_t>(rng.below(n_users)),
                  static_cast<std::uint32_t>(rng.below(n_items)));
  }
  const auto& vocab = twister::lorem_vocabulary();
  std::vector<twister::InteractionRecord> records;
  for (const auto& [u, i] : pairs) {
    twister::InteractionRecord rec;
    rec.user_id = "u" + std::to_string(u);
    rec.item_id = "i" + std::to_string(i);
    rec.rating = 1.0 + static_cast<double>(rng.below(5));
    if (with_reviews) {
      std::string review;
      const std::size_t len = 3 + rng.below(8);
      for (std::size_t t = 0; t < len; ++t) {
        if (!review.empty()) review.push_back(' ');
        review += vocab[rng.below(vocab.size())];
      }
      rec.review = review + ".";
    }
    records.push_back(std::move(rec));
  }
  return twister::build_teg(records);
}

}  // namespace oracles
