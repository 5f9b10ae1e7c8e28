#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "twister/embedding.hpp"
#include "twister/teg.hpp"

namespace twister {

/// Lightweight review-aware edge scorer:
///   score(u, i, z) = p_u . q_i + w . z + b
/// with the review feature z being the completed-review embedding row (the
/// zero vector for review-less candidates).
struct EdgeScorer {
  unsigned rank = 0;
  std::size_t dim = 0;
  std::vector<double> user_factors;   // n_users x rank
  std::vector<double> item_factors;   // n_items x rank
  std::vector<double> review_weights; // dim
  double bias = 0.0;

  double score(UserId u, ItemId i, std::span<const double> z) const {
    double s = bias;
    for (unsigned f = 0; f < rank; ++f)
      s += user_factors[u * rank + f] * item_factors[i * rank + f];
    if (!z.empty()) {
      if (z.size() != dim) throw Error("EdgeScorer::score: review feature dimension mismatch");
      for (std::size_t j = 0; j < dim; ++j) s += review_weights[j] * z[j];
    }
    return s;
  }
};

struct ScorerParams {
  unsigned rank = 8;
  unsigned epochs = 30;
  double learning_rate = 0.05;
};

/// Fit the scorer with seeded SGD on a binary logistic objective: each train
/// edge is a positive, paired with one sampled non-interacted item of the
/// same user as a negative (review feature zero). Records the per-epoch
/// average loss; zero epochs returns the initialization.
inline EdgeScorer train_edge_scorer(const BipartiteTEG& teg, std::span<const EdgeId> train_edges,
                                    const EmbeddingMatrix& z, ScorerParams params,
                                    std::uint64_t seed, std::vector<double>* loss_trace = nullptr) {
  if (train_edges.empty()) throw Error("train_edge_scorer: empty train set");
  if (z.rows() != teg.n_edges()) throw Error("train_edge_scorer: Z rows must align to edge ids");
  if (params.rank == 0) throw Error("train_edge_scorer: rank must be >= 1");

  const unsigned r = params.rank;
  const std::size_t d = z.dim();
  Rng rng(derive_seed(seed, 0x5c0));

  EdgeScorer scorer;
  scorer.rank = r;
  scorer.dim = d;
  scorer.user_factors.resize(teg.n_users() * r);
  scorer.item_factors.resize(teg.n_items() * r);
  scorer.review_weights.assign(d, 0.0);
  for (double& v : scorer.user_factors) v = 0.1 * rng.normal();
  for (double& v : scorer.item_factors) v = 0.1 * rng.normal();

  auto sigmoid = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
  auto softplus = [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); };

  auto sample_negative_item = [&](UserId u, Rng& local) -> ItemId {
    // Rejection-sample an item the user has not interacted with; give up
    // after a bounded number of tries (dense users) and use the last draw.
    ItemId candidate = 0;
    for (int tries = 0; tries < 16; ++tries) {
      candidate = static_cast<ItemId>(local.below(teg.n_items()));
      bool interacted = false;
      for (EdgeId e : teg.user_edges(u))
        if (teg.edge(e).item == candidate) {
          interacted = true;
          break;
        }
      if (!interacted) return candidate;
    }
    return candidate;
  };

  std::vector<EdgeId> order(train_edges.begin(), train_edges.end());
  const double lr = params.learning_rate;
  const std::vector<double> zero;

  for (unsigned epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t idx = 0; idx < order.size(); ++idx) {
      const EdgeId e = order[idx];
      const TegEdge& edge = teg.edge(e);
      const UserId u = edge.user;
      const ItemId pos = edge.item;
      Rng neg_rng(derive_seed(seed, (static_cast<std::uint64_t>(epoch) << 32) | e, 0x9e6));
      const ItemId neg = sample_negative_item(u, neg_rng);

      const auto z_pos = z.row(e);
      const double s_pos = scorer.score(u, pos, z_pos);
      const double s_neg = scorer.score(u, neg, zero);
      epoch_loss += softplus(-s_pos) + softplus(s_neg);

      const double g_pos = -sigmoid(-s_pos);  // dL/ds_pos
      const double g_neg = sigmoid(s_neg);    // dL/ds_neg

      for (unsigned f = 0; f < r; ++f) {
        const double pu = scorer.user_factors[u * r + f];
        const double qp = scorer.item_factors[pos * r + f];
        const double qn = scorer.item_factors[neg * r + f];
        scorer.user_factors[u * r + f] -= lr * (g_pos * qp + g_neg * qn);
        scorer.item_factors[pos * r + f] -= lr * g_pos * pu;
        scorer.item_factors[neg * r + f] -= lr * g_neg * pu;
      }
      for (std::size_t j = 0; j < d; ++j)
        scorer.review_weights[j] -= lr * g_pos * z_pos[j];
      scorer.bias -= lr * (g_pos + g_neg);
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss))
      throw Error("train_edge_scorer: non-finite loss at epoch " + std::to_string(epoch));
    if (loss_trace) loss_trace->push_back(epoch_loss);
  }
  return scorer;
}

/// Top-k ranking metrics; all values in [0,1].
struct MetricsReport {
  double acc = 0.0;   // hit@1 within the candidate list
  double auc = 0.0;   // positive outscores negative, ties count 1/2
  double mrr = 0.0;
  double ndcg = 0.0;  // binary relevance at k
  unsigned k = 10;
  unsigned n_negatives = 9;
  std::uint64_t seed = 0;
  std::size_t evaluated_edges = 0;
  std::size_t skipped_edges = 0;
};

/// Rank each test edge's true item against n_negatives sampled items the
/// user never interacted with (their review feature is the zero vector). The
/// positive's rank counts strictly-greater negatives plus ties (pessimistic
/// tie handling); AUC credits ties 1/2. Deterministic given seed; users
/// without enough candidate items are skipped and counted.
inline MetricsReport rank_metrics(const EdgeScorer& scorer, const BipartiteTEG& teg,
                                  std::span<const EdgeId> test_edges,
                                  const EmbeddingMatrix& z_completed, unsigned n_negatives,
                                  unsigned k, std::uint64_t seed) {
  if (n_negatives + 1 < k) throw Error("rank_metrics: need n_negatives >= k-1");
  if (z_completed.rows() != teg.n_edges())
    throw Error("rank_metrics: Z rows must align to edge ids");

  MetricsReport report;
  report.k = k;
  report.n_negatives = n_negatives;
  report.seed = seed;
  const std::vector<double> zero;

  double acc = 0.0, auc = 0.0, mrr = 0.0, ndcg = 0.0;
  for (const EdgeId e : test_edges) {
    const TegEdge& edge = teg.edge(e);
    const UserId u = edge.user;

    std::vector<char> interacted(teg.n_items(), 0);
    for (EdgeId ue : teg.user_edges(u)) interacted[teg.edge(ue).item] = 1;
    std::vector<ItemId> pool;
    for (ItemId i = 0; i < teg.n_items(); ++i)
      if (!interacted[i]) pool.push_back(i);
    if (pool.size() < n_negatives) {
      ++report.skipped_edges;
      continue;
    }

    Rng rng(derive_seed(seed, e, 0x7a9));
    const auto pick = rng.sample_without_replacement(static_cast<std::uint32_t>(pool.size()),
                                                     n_negatives);
    const double s_pos = scorer.score(u, edge.item, z_completed.row(e));
    std::size_t wins = 0, ties = 0, losses = 0;
    for (const auto idx : pick) {
      const double s_neg = scorer.score(u, pool[idx], zero);
      if (s_pos > s_neg)
        ++wins;
      else if (s_pos == s_neg)
        ++ties;
      else
        ++losses;
    }
    const std::size_t rank = 1 + losses + ties;
    acc += rank == 1 ? 1.0 : 0.0;
    mrr += 1.0 / static_cast<double>(rank);
    ndcg += rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
    auc += (static_cast<double>(wins) + 0.5 * static_cast<double>(ties)) /
           static_cast<double>(n_negatives);
    ++report.evaluated_edges;
  }

  if (report.evaluated_edges > 0) {
    const auto n = static_cast<double>(report.evaluated_edges);
    report.acc = acc / n;
    report.auc = auc / n;
    report.mrr = mrr / n;
    report.ndcg = ndcg / n;
  }
  return report;
}

}  // namespace twister
