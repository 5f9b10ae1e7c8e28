#pragma once

#include <algorithm>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "twister/embedding.hpp"
#include "twister/teg.hpp"

namespace twister {

enum class ViewKind { full, user, item, user_weighted };

inline std::string view_kind_name(ViewKind k) {
  switch (k) {
    case ViewKind::full: return "full";
    case ViewKind::user: return "user";
    case ViewKind::item: return "item";
    case ViewKind::user_weighted: return "user-weighted";
  }
  return "unknown";
}

/// Line-graph view over a TEG: nodes are TEG edge ids, adjacency is symmetric
/// with nonnegative weights and no self-loops, rows sorted by neighbor id.
/// Immutable after construction; holds a pointer to the TEG it was built
/// from, which must outlive the view.
class LineGraphView {
 public:
  LineGraphView(ViewKind kind, const BipartiteTEG* teg,
                std::vector<std::vector<std::pair<EdgeId, double>>> rows)
      : kind_(kind), teg_(teg) {
    offsets_.reserve(rows.size() + 1);
    offsets_.push_back(0);
    for (auto& row : rows) {
      std::sort(row.begin(), row.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      flat_.insert(flat_.end(), row.begin(), row.end());
      offsets_.push_back(flat_.size());
    }
  }

  ViewKind kind() const { return kind_; }
  const BipartiteTEG& teg() const { return *teg_; }
  std::uint32_t node_count() const { return static_cast<std::uint32_t>(offsets_.size() - 1); }

  std::span<const std::pair<EdgeId, double>> neighbors_of(EdgeId node) const {
    return {flat_.data() + offsets_[node], offsets_[node + 1] - offsets_[node]};
  }

  std::size_t n_line_edges() const { return flat_.size() / 2; }

  const EdgePayload& payload(EdgeId node) const { return teg_->edge(node).payload; }

  // Visit each unordered adjacency pair once (a < b).
  template <typename F>
  void for_each_line_edge(F&& f) const {
    for (EdgeId a = 0; a < node_count(); ++a)
      for (const auto& [b, w] : neighbors_of(a))
        if (a < b) f(a, b, w);
  }

 private:
  ViewKind kind_;
  const BipartiteTEG* teg_;
  std::vector<std::size_t> offsets_;
  std::vector<std::pair<EdgeId, double>> flat_;
};

namespace detail {

// Group edges by one endpoint and connect all pairs within a group.
template <typename EndpointEdges>
void connect_groups(std::vector<std::vector<std::pair<EdgeId, double>>>& rows, std::size_t groups,
                    EndpointEdges&& edges_of) {
  for (std::size_t g = 0; g < groups; ++g) {
    const auto edges = edges_of(g);
    for (std::size_t a = 0; a < edges.size(); ++a)
      for (std::size_t b = a + 1; b < edges.size(); ++b) {
        rows[edges[a]].emplace_back(edges[b], 1.0);
        rows[edges[b]].emplace_back(edges[a], 1.0);
      }
  }
}

}  // namespace detail

/// Two TEG edges are adjacent iff they share the user. Unweighted.
inline LineGraphView user_view(const BipartiteTEG& teg) {
  std::vector<std::vector<std::pair<EdgeId, double>>> rows(teg.n_edges());
  detail::connect_groups(rows, teg.n_users(), [&](std::size_t u) {
    return teg.user_edges(static_cast<UserId>(u));
  });
  return LineGraphView(ViewKind::user, &teg, std::move(rows));
}

/// Two TEG edges are adjacent iff they share the item. Unweighted.
inline LineGraphView item_view(const BipartiteTEG& teg) {
  std::vector<std::vector<std::pair<EdgeId, double>>> rows(teg.n_edges());
  detail::connect_groups(rows, teg.n_items(), [&](std::size_t i) {
    return teg.item_edges(static_cast<ItemId>(i));
  });
  return LineGraphView(ViewKind::item, &teg, std::move(rows));
}

/// Full line graph: adjacent iff a user or an item is shared. Built per
/// endpoint grouping; distinct edges can share at most one endpoint, so the
/// user-pair and item-pair sets are disjoint and need no dedup.
inline LineGraphView line_graph_full(const BipartiteTEG& teg) {
  std::vector<std::vector<std::pair<EdgeId, double>>> rows(teg.n_edges());
  detail::connect_groups(rows, teg.n_users(), [&](std::size_t u) {
    return teg.user_edges(static_cast<UserId>(u));
  });
  detail::connect_groups(rows, teg.n_items(), [&](std::size_t i) {
    return teg.item_edges(static_cast<ItemId>(i));
  });
  return LineGraphView(ViewKind::full, &teg, std::move(rows));
}

/// User-view topology with weight(e1,e2) = max(0, cos(item_e1, item_e2)).
/// Negative similarity is clamped to keep edge weights nonnegative. Requires
/// an embedding for every item that carries at least one edge.
inline LineGraphView weighted_user_view(const BipartiteTEG& teg,
                                        const std::map<std::string, std::vector<double>>& item_embeddings) {
  std::vector<const std::vector<double>*> emb(teg.n_items(), nullptr);
  for (ItemId i = 0; i < teg.n_items(); ++i) {
    if (teg.item_degree(i) == 0) continue;
    auto it = item_embeddings.find(teg.item_name(i));
    if (it == item_embeddings.end())
      throw Error("weighted_user_view: missing embedding for item " + teg.item_name(i));
    emb[i] = &it->second;
  }

  std::vector<std::vector<std::pair<EdgeId, double>>> rows(teg.n_edges());
  for (UserId u = 0; u < teg.n_users(); ++u) {
    const auto edges = teg.user_edges(u);
    for (std::size_t a = 0; a < edges.size(); ++a)
      for (std::size_t b = a + 1; b < edges.size(); ++b) {
        const ItemId ia = teg.edge(edges[a]).item;
        const ItemId ib = teg.edge(edges[b]).item;
        const double w = std::max(0.0, cosine(*emb[ia], *emb[ib]));
        rows[edges[a]].emplace_back(edges[b], w);
        rows[edges[b]].emplace_back(edges[a], w);
      }
  }
  return LineGraphView(ViewKind::user_weighted, &teg, std::move(rows));
}

/// Adjacency row of a node, ascending neighbor ids. Errors on unknown ids.
inline std::span<const std::pair<EdgeId, double>> neighbors(const LineGraphView& view, EdgeId node) {
  if (node >= view.node_count())
    throw Error("neighbors: unknown node id " + std::to_string(node));
  return view.neighbors_of(node);
}

/// Debug export: one "a b weight" line per unordered adjacency pair.
inline void export_edge_list(const LineGraphView& view, std::ostream& out) {
  view.for_each_line_edge([&](EdgeId a, EdgeId b, double w) {
    out << a << ' ' << b << ' ' << w << '\n';
  });
}

}  // namespace twister
