#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "twister/embedding.hpp"
#include "twister/preprocess.hpp"
#include "twister/teg.hpp"

namespace twister {

/// Output of one imputer run. Covers exactly the masked edge set (ascending);
/// text-space variants fill `texts`, embedding-space variants fill `rows`
/// (row i belongs to edges[i]). Observed edges are never touched.
struct ImputationResult {
  std::string variant;
  bool text_space = true;
  std::vector<EdgeId> edges;
  std::vector<std::string> texts;
  EmbeddingMatrix rows;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> params;
  std::vector<EdgeId> failed_edges;  // generation failures (fallback text used)

  const std::string* text_for(EdgeId e) const {
    const auto it = std::lower_bound(edges.begin(), edges.end(), e);
    if (it == edges.end() || *it != e || !text_space) return nullptr;
    return &texts[static_cast<std::size_t>(it - edges.begin())];
  }
};

/// Every masked edge becomes the empty string.
inline ImputationResult impute_blank(const BipartiteTEG& teg, const Mask& mask) {
  (void)teg;
  ImputationResult r;
  r.variant = "Blank";
  r.edges = mask.omega;
  r.texts.assign(mask.omega.size(), std::string());
  return r;
}

/// Random token sequences: length sampled from the empirical length
/// distribution of observed reviews (fallback 20), tokens drawn uniformly
/// from the observed vocabulary (fallback lorem list). Deterministic given
/// seed.
inline ImputationResult impute_random(const BipartiteTEG& teg, const Mask& mask,
                                      std::uint64_t seed) {
  std::vector<std::size_t> lengths;
  std::set<std::string> vocab_set;
  for (EdgeId e = 0; e < teg.n_edges(); ++e) {
    const std::string* review = observed_review(teg, mask, e);
    if (!review) continue;
    auto toks = tokenize(*review);
    lengths.push_back(toks.size());
    vocab_set.insert(toks.begin(), toks.end());
  }
  std::vector<std::string> vocab(vocab_set.begin(), vocab_set.end());
  if (vocab.empty()) {
    const auto& fallback = lorem_vocabulary();
    vocab.assign(fallback.begin(), fallback.end());
  }

  ImputationResult r;
  r.variant = "Random";
  r.seed = seed;
  r.edges = mask.omega;
  r.texts.reserve(mask.omega.size());
  for (EdgeId e : mask.omega) {
    Rng rng(derive_seed(seed, e));
    const std::size_t len = lengths.empty() ? 20 : lengths[rng.below(lengths.size())];
    std::string text;
    for (std::size_t t = 0; t < len; ++t) {
      if (!text.empty()) text.push_back(' ');
      text += vocab[rng.below(vocab.size())];
    }
    r.texts.push_back(std::move(text));
  }
  return r;
}

enum class MeanScope { global, per_item };

/// Constant fill with the mean of observed review embedding rows. Per-item
/// scope averages within the edge's item, falling back to the global mean
/// for items with no observed review.
inline ImputationResult impute_mean(const BipartiteTEG& teg, const Mask& mask,
                                    const EmbeddingMatrix& z_obs,
                                    MeanScope scope = MeanScope::global) {
  if (z_obs.rows() != teg.n_edges()) throw Error("impute_mean: Z rows must align to edge ids");
  const auto observed = observed_review_edges(teg, mask);
  if (observed.empty()) throw Error("impute_mean: no observed reviews");
  const std::size_t d = z_obs.dim();

  std::vector<double> global(d, 0.0);
  for (EdgeId e : observed) {
    const auto row = z_obs.row(e);
    for (std::size_t j = 0; j < d; ++j) global[j] += row[j];
  }
  for (double& v : global) v /= static_cast<double>(observed.size());

  ImputationResult r;
  r.variant = "Mean";
  r.text_space = false;
  r.edges = mask.omega;
  r.rows = EmbeddingMatrix(mask.omega.size(), d);
  r.params["scope"] = scope == MeanScope::global ? "global" : "per-item";

  for (std::size_t k = 0; k < mask.omega.size(); ++k) {
    if (scope == MeanScope::per_item) {
      const ItemId item = teg.edge(mask.omega[k]).item;
      std::vector<double> acc(d, 0.0);
      std::size_t count = 0;
      for (EdgeId e : teg.item_edges(item)) {
        if (!observed_review(teg, mask, e)) continue;
        const auto row = z_obs.row(e);
        for (std::size_t j = 0; j < d; ++j) acc[j] += row[j];
        ++count;
      }
      if (count > 0) {
        for (double& v : acc) v /= static_cast<double>(count);
        r.rows.set_row(k, acc);
        continue;
      }
    }
    r.rows.set_row(k, global);
  }
  return r;
}

/// KNN in embedding space. Candidates are observed edges sharing the masked
/// edge's user or item (fallback: all observed edges), ranked by cosine
/// between the candidate's item embedding and the masked edge's item
/// embedding, ties broken by ascending edge id; the imputed row is the mean
/// of the top-k candidates' review embeddings.
inline ImputationResult impute_knn(const BipartiteTEG& teg, const Mask& mask,
                                   const EmbeddingMatrix& z_obs,
                                   const std::map<std::string, std::vector<double>>& item_embeddings,
                                   unsigned k = 5) {
  if (k == 0) throw Error("impute_knn: k must be >= 1");
  if (z_obs.rows() != teg.n_edges()) throw Error("impute_knn: Z rows must align to edge ids");
  const auto observed = observed_review_edges(teg, mask);
  if (observed.empty()) throw Error("impute_knn: no observed reviews");
  const std::size_t d = z_obs.dim();

  auto item_emb = [&](ItemId i) -> const std::vector<double>& {
    auto it = item_embeddings.find(teg.item_name(i));
    if (it == item_embeddings.end())
      throw Error("impute_knn: missing embedding for item " + teg.item_name(i));
    return it->second;
  };

  ImputationResult r;
  r.variant = "KNN";
  r.text_space = false;
  r.edges = mask.omega;
  r.rows = EmbeddingMatrix(mask.omega.size(), d);
  r.params["k"] = std::to_string(k);

  for (std::size_t idx = 0; idx < mask.omega.size(); ++idx) {
    const EdgeId e = mask.omega[idx];
    const TegEdge& edge = teg.edge(e);

    std::vector<EdgeId> candidates;
    const auto ue = teg.user_edges(edge.user);
    const auto ie = teg.item_edges(edge.item);
    std::set_union(ue.begin(), ue.end(), ie.begin(), ie.end(), std::back_inserter(candidates));
    std::erase_if(candidates, [&](EdgeId c) { return !observed_review(teg, mask, c); });
    if (candidates.empty()) candidates = observed;

    const auto& target = item_emb(edge.item);
    std::vector<std::pair<double, EdgeId>> ranked;
    ranked.reserve(candidates.size());
    for (EdgeId c : candidates) ranked.emplace_back(cosine(item_emb(teg.edge(c).item), target), c);
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });

    const std::size_t take = std::min<std::size_t>(k, ranked.size());
    std::vector<double> acc(d, 0.0);
    for (std::size_t t = 0; t < take; ++t) {
      const auto row = z_obs.row(ranked[t].second);
      for (std::size_t j = 0; j < d; ++j) acc[j] += row[j];
    }
    for (double& v : acc) v /= static_cast<double>(take);
    r.rows.set_row(idx, acc);
  }
  return r;
}

struct MfParams {
  unsigned rank = 16;
  unsigned epochs = 50;
  double learning_rate = 0.05;
};

/// Low-rank completion in embedding space: user factors p_u, item factors
/// q_i and a linear decoder C minimize sum over observed edges of
/// ||z_ui - C (p_u . q_i)||^2 by seeded SGD (Hadamard-factor form, one model
/// shared across embedding dimensions). Imputed row = C (p_u . q_i).
inline ImputationResult impute_mf(const BipartiteTEG& teg, const Mask& mask,
                                  const EmbeddingMatrix& z_obs, MfParams params,
                                  std::uint64_t seed,
                                  std::vector<double>* loss_trace = nullptr) {
  if (params.rank == 0) throw Error("impute_mf: rank must be >= 1");
  if (z_obs.rows() != teg.n_edges()) throw Error("impute_mf: Z rows must align to edge ids");
  const auto observed = observed_review_edges(teg, mask);
  if (observed.empty()) throw Error("impute_mf: no observed reviews");

  const std::size_t d = z_obs.dim();
  const std::size_t r = params.rank;
  Rng rng(derive_seed(seed, 0x3f));

  std::vector<double> p(teg.n_users() * r), q(teg.n_items() * r), dec(d * r);
  for (double& v : p) v = 0.3 * rng.normal();
  for (double& v : q) v = 0.3 * rng.normal();
  for (double& v : dec) v = rng.normal() / std::sqrt(static_cast<double>(r));

  std::vector<double> h(r), err(d), dh(r);
  auto predict_into = [&](UserId u, ItemId i, std::vector<double>& out_h) {
    for (std::size_t f = 0; f < r; ++f) out_h[f] = p[u * r + f] * q[i * r + f];
  };

  auto full_loss = [&]() {
    double total = 0.0;
    for (EdgeId e : observed) {
      const TegEdge& edge = teg.edge(e);
      predict_into(edge.user, edge.item, h);
      const auto z = z_obs.row(e);
      for (std::size_t jd = 0; jd < d; ++jd) {
        double pred = 0.0;
        for (std::size_t f = 0; f < r; ++f) pred += dec[jd * r + f] * h[f];
        const double diff = pred - z[jd];
        total += diff * diff;
      }
    }
    return total / static_cast<double>(observed.size());
  };

  std::vector<EdgeId> order(observed);
  const double lr = params.learning_rate;
  for (unsigned epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (EdgeId e : order) {
      const TegEdge& edge = teg.edge(e);
      const UserId u = edge.user;
      const ItemId i = edge.item;
      predict_into(u, i, h);
      const auto z = z_obs.row(e);
      for (std::size_t jd = 0; jd < d; ++jd) {
        double pred = 0.0;
        for (std::size_t f = 0; f < r; ++f) pred += dec[jd * r + f] * h[f];
        err[jd] = pred - z[jd];
      }
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t jd = 0; jd < d; ++jd) {
        const double g = 2.0 * err[jd];
        for (std::size_t f = 0; f < r; ++f) {
          dh[f] += g * dec[jd * r + f];
          dec[jd * r + f] -= lr * g * h[f];
        }
      }
      for (std::size_t f = 0; f < r; ++f) {
        const double gp = dh[f] * q[i * r + f];
        const double gq = dh[f] * p[u * r + f];
        p[u * r + f] -= lr * gp;
        q[i * r + f] -= lr * gq;
      }
    }
    const double epoch_loss = full_loss();
    if (!std::isfinite(epoch_loss))
      throw Error("impute_mf: non-finite loss at epoch " + std::to_string(epoch));
    if (loss_trace) loss_trace->push_back(epoch_loss);
  }

  ImputationResult result;
  result.variant = "MF";
  result.text_space = false;
  result.seed = seed;
  result.edges = mask.omega;
  result.rows = EmbeddingMatrix(mask.omega.size(), d);
  result.params["rank"] = std::to_string(params.rank);
  result.params["epochs"] = std::to_string(params.epochs);
  result.params["lr"] = std::to_string(params.learning_rate);
  for (std::size_t idx = 0; idx < mask.omega.size(); ++idx) {
    const TegEdge& edge = teg.edge(mask.omega[idx]);
    predict_into(edge.user, edge.item, h);
    std::vector<double> row(d, 0.0);
    for (std::size_t jd = 0; jd < d; ++jd)
      for (std::size_t f = 0; f < r; ++f) row[jd] += dec[jd * r + f] * h[f];
    result.rows.set_row(idx, row);
  }
  return result;
}

}  // namespace twister
