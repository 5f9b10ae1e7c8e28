#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>
#include <vector>

#include "twister/teg.hpp"

namespace twister {

/// Maximal subgraph in which every remaining vertex has degree >= k.
/// Single-pass peeling with a work queue; idempotent.
inline BipartiteTEG k_core(const BipartiteTEG& teg, unsigned k) {
  if (k == 0) throw Error("k_core: k must be >= 1");
  std::vector<std::size_t> udeg(teg.n_users()), ideg(teg.n_items());
  for (UserId u = 0; u < teg.n_users(); ++u) udeg[u] = teg.user_degree(u);
  for (ItemId i = 0; i < teg.n_items(); ++i) ideg[i] = teg.item_degree(i);
  std::vector<char> edge_alive(teg.n_edges(), 1);
  std::vector<char> user_dead(teg.n_users(), 0), item_dead(teg.n_items(), 0);

  std::deque<std::pair<bool, std::uint32_t>> work;  // (is_user, vertex)
  for (UserId u = 0; u < teg.n_users(); ++u)
    if (udeg[u] < k) {
      user_dead[u] = 1;
      work.emplace_back(true, u);
    }
  for (ItemId i = 0; i < teg.n_items(); ++i)
    if (ideg[i] < k) {
      item_dead[i] = 1;
      work.emplace_back(false, i);
    }

  while (!work.empty()) {
    auto [is_user, v] = work.front();
    work.pop_front();
    const auto incident = is_user ? teg.user_edges(v) : teg.item_edges(v);
    for (EdgeId e : incident) {
      if (!edge_alive[e]) continue;
      edge_alive[e] = 0;
      const TegEdge& edge = teg.edge(e);
      if (is_user) {
        if (!item_dead[edge.item] && --ideg[edge.item] < k) {
          item_dead[edge.item] = 1;
          work.emplace_back(false, edge.item);
        }
      } else {
        if (!user_dead[edge.user] && --udeg[edge.user] < k) {
          user_dead[edge.user] = 1;
          work.emplace_back(true, edge.user);
        }
      }
    }
  }

  std::vector<EdgeId> keep;
  for (EdgeId e = 0; e < teg.n_edges(); ++e)
    if (edge_alive[e]) keep.push_back(e);
  return induced_subgraph(teg, keep);
}

/// Ego sample: n_seeds users drawn uniformly without replacement. The result
/// keeps the seed users, their adjacent items, and exactly the edges between
/// them (second-hop users are not pulled in). Deterministic given seed;
/// n_seeds >= |U| keeps the whole graph.
inline BipartiteTEG ego_sample(const BipartiteTEG& teg, std::uint32_t n_seeds, std::uint64_t seed) {
  if (n_seeds == 0) throw Error("ego_sample: n_seeds must be >= 1");
  const auto n = static_cast<std::uint32_t>(teg.n_users());
  const std::uint32_t take = std::min(n_seeds, n);
  Rng rng(derive_seed(seed, 0xe90));
  const auto seeds = rng.sample_without_replacement(n, take);

  std::vector<EdgeId> keep;
  for (UserId u : seeds) {
    const auto span = teg.user_edges(u);
    keep.insert(keep.end(), span.begin(), span.end());
  }
  std::sort(keep.begin(), keep.end());
  return induced_subgraph(teg, keep);
}

struct SplitRatios {
  double train = 0.7;
  double val = 0.1;
  double test = 0.2;
};

// Disjoint train/val/test edge-id sets covering the whole graph.
struct EdgeSplit {
  std::vector<EdgeId> train, val, test;
};

/// Seeded shuffle split. Sizes are round(ratio * |edges|) for train and val,
/// remainder for test; parts are reported in ascending edge-id order.
inline EdgeSplit split_edges(const BipartiteTEG& teg, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train <= 0 || ratios.val <= 0 || ratios.test <= 0)
    throw Error("split_edges: ratios must be positive");
  if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
    throw Error("split_edges: ratios must sum to 1");
  const std::size_t n = teg.n_edges();
  if (n < 3) throw Error("split_edges: need at least 3 edges to populate all parts");

  std::vector<EdgeId> ids(n);
  std::iota(ids.begin(), ids.end(), 0u);
  Rng rng(derive_seed(seed, 0x5b17));
  rng.shuffle(ids);

  const auto n_train = static_cast<std::size_t>(std::llround(ratios.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(ratios.val * static_cast<double>(n)));
  if (n_train + n_val > n) throw Error("split_edges: rounded sizes exceed edge count");

  EdgeSplit split;
  split.train.assign(ids.begin(), ids.begin() + n_train);
  split.val.assign(ids.begin() + n_train, ids.begin() + n_train + n_val);
  split.test.assign(ids.begin() + n_train + n_val, ids.end());
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.val.begin(), split.val.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

enum class MaskProtocol { uniform, cold_start, native_missing };

inline std::string mask_protocol_name(MaskProtocol p) {
  switch (p) {
    case MaskProtocol::uniform: return "uniform";
    case MaskProtocol::cold_start: return "cold-start";
    case MaskProtocol::native_missing: return "native";
  }
  return "unknown";
}

/// Edge ids whose review is treated as missing. Ratings on masked edges stay
/// observed; only the review text is hidden from imputers.
struct Mask {
  MaskProtocol protocol = MaskProtocol::uniform;
  std::vector<EdgeId> omega;           // ascending
  std::vector<UserId> selected_users;  // cold-start only
  double parameter = 0.0;              // ratio or user fraction
  std::uint64_t seed = 0;

  bool contains(EdgeId e) const {
    return std::binary_search(omega.begin(), omega.end(), e);
  }
};

/// floor(ratio * |edges|) edges chosen uniformly without replacement.
inline Mask mask_uniform(const BipartiteTEG& teg, double ratio, std::uint64_t seed) {
  if (ratio < 0.0 || ratio > 1.0) throw Error("mask_uniform: ratio must be in [0,1]");
  const auto n = static_cast<std::uint32_t>(teg.n_edges());
  const auto m = static_cast<std::uint32_t>(std::floor(ratio * static_cast<double>(n)));
  Rng rng(derive_seed(seed, 0xa51));
  Mask mask;
  mask.protocol = MaskProtocol::uniform;
  mask.parameter = ratio;
  mask.seed = seed;
  mask.omega = rng.sample_without_replacement(n, m);
  return mask;
}

/// floor(fraction * |users|) users chosen uniformly; omega is exactly the
/// union of their incident edge ids.
inline Mask mask_cold_start(const BipartiteTEG& teg, double user_fraction, std::uint64_t seed) {
  if (user_fraction < 0.0 || user_fraction > 1.0)
    throw Error("mask_cold_start: fraction must be in [0,1]");
  const auto n = static_cast<std::uint32_t>(teg.n_users());
  const auto m = static_cast<std::uint32_t>(std::floor(user_fraction * static_cast<double>(n)));
  Rng rng(derive_seed(seed, 0xc01d));
  Mask mask;
  mask.protocol = MaskProtocol::cold_start;
  mask.parameter = user_fraction;
  mask.seed = seed;
  mask.selected_users = rng.sample_without_replacement(n, m);
  for (UserId u : mask.selected_users) {
    const auto span = teg.user_edges(u);
    mask.omega.insert(mask.omega.end(), span.begin(), span.end());
  }
  std::sort(mask.omega.begin(), mask.omega.end());
  return mask;
}

/// Edges whose review is natively absent.
inline Mask mask_native(const BipartiteTEG& teg) {
  Mask mask;
  mask.protocol = MaskProtocol::native_missing;
  for (EdgeId e = 0; e < teg.n_edges(); ++e)
    if (!teg.edge(e).payload.review) mask.omega.push_back(e);
  return mask;
}

/// The review of edge e as visible to imputers: absent when masked or when
/// the edge has no review. Imputer code must read reviews through this.
inline const std::string* observed_review(const BipartiteTEG& teg, const Mask& mask, EdgeId e) {
  if (mask.contains(e)) return nullptr;
  const auto& review = teg.edge(e).payload.review;
  return review ? &*review : nullptr;
}

/// Observed-review edge ids (ascending): not masked, review present.
inline std::vector<EdgeId> observed_review_edges(const BipartiteTEG& teg, const Mask& mask) {
  std::vector<EdgeId> out;
  for (EdgeId e = 0; e < teg.n_edges(); ++e)
    if (observed_review(teg, mask, e)) out.push_back(e);
  return out;
}

}  // namespace twister
