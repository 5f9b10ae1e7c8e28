#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "twister/common.hpp"

namespace twister {

using EdgeId = std::uint32_t;
using UserId = std::uint32_t;
using ItemId = std::uint32_t;

struct RatingScale {
  double min = 1.0;
  double max = 5.0;
  bool contains(double r) const { return r >= min && r <= max; }
};

// Edge payload: rating plus optional review text. A present review is
// non-empty after whitespace trimming.
struct EdgePayload {
  double rating = 0.0;
  std::optional<std::string> review;
};

// One raw interaction, as produced by the parsers and synthetic generators.
struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  double rating = 0.0;
  std::optional<std::string> review;
};

struct TegEdge {
  UserId user = 0;
  ItemId item = 0;
  EdgePayload payload;
};

/// Bipartite textual-edge graph. Immutable after construction; edge ids are
/// dense 0..n_edges()-1 with at most one edge per (user, item) pair. Safe to
/// share across concurrent readers.
class BipartiteTEG {
 public:
  std::size_t n_users() const { return user_names_.size(); }
  std::size_t n_items() const { return item_names_.size(); }
  std::size_t n_edges() const { return edges_.size(); }

  const std::string& user_name(UserId u) const { return user_names_.at(u); }
  const std::string& item_name(ItemId i) const { return item_names_.at(i); }

  std::optional<UserId> user_index(std::string_view name) const {
    auto it = user_index_.find(std::string(name));
    if (it == user_index_.end()) return std::nullopt;
    return it->second;
  }
  std::optional<ItemId> item_index(std::string_view name) const {
    auto it = item_index_.find(std::string(name));
    if (it == item_index_.end()) return std::nullopt;
    return it->second;
  }

  const TegEdge& edge(EdgeId e) const {
    if (e >= edges_.size()) throw Error("edge id out of range: " + std::to_string(e));
    return edges_[e];
  }

  // Incident edge ids, ascending.
  std::span<const EdgeId> user_edges(UserId u) const {
    return {user_edges_.at(u).data(), user_edges_.at(u).size()};
  }
  std::span<const EdgeId> item_edges(ItemId i) const {
    return {item_edges_.at(i).data(), item_edges_.at(i).size()};
  }

  std::size_t user_degree(UserId u) const { return user_edges_.at(u).size(); }
  std::size_t item_degree(ItemId i) const { return item_edges_.at(i).size(); }

  // Metadata text s_i; empty string when none was supplied.
  const std::string& item_metadata(ItemId i) const { return item_metadata_.at(i); }

  const RatingScale& scale() const { return scale_; }

  // --- construction (used by build_teg / induced_subgraph only) ---

  UserId intern_user(const std::string& name) {
    auto it = user_index_.find(name);
    if (it != user_index_.end()) return it->second;
    const auto id = static_cast<UserId>(user_names_.size());
    user_index_.emplace(name, id);
    user_names_.push_back(name);
    user_edges_.emplace_back();
    return id;
  }

  ItemId intern_item(const std::string& name) {
    auto it = item_index_.find(name);
    if (it != item_index_.end()) return it->second;
    const auto id = static_cast<ItemId>(item_names_.size());
    item_index_.emplace(name, id);
    item_names_.push_back(name);
    item_edges_.emplace_back();
    item_metadata_.emplace_back();
    return id;
  }

  void set_item_metadata(ItemId i, std::string text) { item_metadata_.at(i) = std::move(text); }

  EdgeId append_edge(UserId u, ItemId i, EdgePayload payload) {
    const auto id = static_cast<EdgeId>(edges_.size());
    edges_.push_back(TegEdge{u, i, std::move(payload)});
    user_edges_.at(u).push_back(id);
    item_edges_.at(i).push_back(id);
    return id;
  }

  void set_scale(RatingScale s) { scale_ = s; }

 private:
  std::vector<std::string> user_names_;
  std::vector<std::string> item_names_;
  std::unordered_map<std::string, UserId> user_index_;
  std::unordered_map<std::string, ItemId> item_index_;
  std::vector<TegEdge> edges_;
  std::vector<std::vector<EdgeId>> user_edges_;
  std::vector<std::vector<EdgeId>> item_edges_;
  std::vector<std::string> item_metadata_;
  RatingScale scale_;
};

struct BuildDiagnostics {
  std::size_t rejected = 0;
  std::vector<std::string> messages;
};

/// Build a TEG from interaction records. Duplicate (user, item) records keep
/// the last payload; edge ids follow first-occurrence order after dedup.
/// Records with an out-of-scale rating or an empty id are rejected with a
/// diagnostic. An empty record stream yields an empty (valid) graph.
inline BipartiteTEG build_teg(std::span<const InteractionRecord> records,
                              const std::map<std::string, std::string>& item_metadata = {},
                              RatingScale scale = {},
                              BuildDiagnostics* diag = nullptr) {
  BipartiteTEG teg;
  teg.set_scale(scale);
  std::unordered_map<std::uint64_t, EdgeId> seen;  // (user,item) -> edge id
  std::vector<TegEdge> staged;
  std::vector<std::pair<UserId, ItemId>> staged_endpoints;

  auto report = [&](const std::string& msg) {
    if (diag) {
      ++diag->rejected;
      diag->messages.push_back(msg);
    }
  };

  for (const auto& rec : records) {
    if (rec.user_id.empty() || rec.item_id.empty()) {
      report("record with empty user or item id rejected");
      continue;
    }
    if (!std::isfinite(rec.rating) || !scale.contains(rec.rating)) {
      report("rating " + std::to_string(rec.rating) + " outside scale for (" + rec.user_id +
             ", " + rec.item_id + ")");
      continue;
    }
    const UserId u = teg.intern_user(rec.user_id);
    const ItemId i = teg.intern_item(rec.item_id);

    EdgePayload payload;
    payload.rating = rec.rating;
    if (rec.review) {
      std::string t = trim(*rec.review);
      if (!t.empty()) payload.review = std::move(t);
    }

    const std::uint64_t key = (static_cast<std::uint64_t>(u) << 32) | i;
    auto it = seen.find(key);
    if (it == seen.end()) {
      seen.emplace(key, static_cast<EdgeId>(staged.size()));
      staged.push_back(TegEdge{u, i, std::move(payload)});
      staged_endpoints.emplace_back(u, i);
    } else {
      staged[it->second].payload = std::move(payload);  // last record wins
    }
  }

  for (auto& e : staged) teg.append_edge(e.user, e.item, std::move(e.payload));

  for (const auto& [name, text] : item_metadata) {
    if (auto idx = teg.item_index(name)) teg.set_item_metadata(*idx, trim(text));
  }
  return teg;
}

/// Subgraph induced by a set of edge ids (ascending relative order is kept,
/// so edge ids renumber densely and deterministically). Vertices incident to
/// no kept edge are dropped.
inline BipartiteTEG induced_subgraph(const BipartiteTEG& teg, std::span<const EdgeId> keep) {
  BipartiteTEG out;
  out.set_scale(teg.scale());
  for (EdgeId e : keep) {
    const TegEdge& edge = teg.edge(e);
    const UserId u = out.intern_user(teg.user_name(edge.user));
    const ItemId i = out.intern_item(teg.item_name(edge.item));
    out.set_item_metadata(i, teg.item_metadata(edge.item));
    out.append_edge(u, i, edge.payload);
  }
  return out;
}

}  // namespace twister
