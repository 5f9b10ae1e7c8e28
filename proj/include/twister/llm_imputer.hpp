#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "twister/generation.hpp"
#include "twister/imputation.hpp"
#include "twister/line_graph.hpp"
#include "twister/prompts.hpp"

namespace twister {

/// Payload text for prompts: review first (so extractive summaries carry its
/// vocabulary), rating cue appended. The review part is truncated to
/// review_token_cap whitespace tokens.
inline std::string payload_text(const EdgePayload& payload, std::size_t review_token_cap = 60) {
  const std::string cue = "(rated " + format_rating(payload.rating) + "/5.0)";
  if (!payload.review) return cue;
  const std::string body = truncate_tokens(*payload.review, review_token_cap);
  if (body.empty()) return cue;
  return body + " " + cue;
}

/// One-hop neighbor payload texts for an edge: neighbors whose review is
/// observed (not masked), sorted by descending weight then ascending id,
/// truncated to `cap`. The focal edge's own payload is not included.
inline std::vector<std::string> collect_context(const LineGraphView& view, EdgeId edge,
                                                const Mask& mask, std::size_t cap = 10,
                                                std::size_t payload_token_cap = 60) {
  const auto row = neighbors(view, edge);
  std::vector<std::pair<EdgeId, double>> kept;
  for (const auto& [id, w] : row)
    if (observed_review(view.teg(), mask, id)) kept.emplace_back(id, w);
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (kept.size() > cap) kept.resize(cap);
  std::vector<std::string> out;
  out.reserve(kept.size());
  for (const auto& [id, w] : kept)
    out.push_back(payload_text(view.teg().edge(id).payload, payload_token_cap));
  return out;
}

namespace detail {

inline std::string aggregate(GenerationBackend& backend, const PromptTemplate& tmpl,
                             const std::string& focal, std::span<const std::string> neighbors,
                             std::uint64_t seed, GenerationUsage& usage) {
  const std::string prompt = render_aggregation_prompt(tmpl, focal, neighbors);
  std::string out = trim(backend.generate(prompt, seed, usage));
  if (out.empty()) {
    // Backend gave nothing; fall back to the first non-empty input sentence.
    out = first_sentence(focal);
    for (const auto& n : neighbors) {
      if (!out.empty()) break;
      out = first_sentence(n);
    }
  }
  return out;
}

}  // namespace detail

/// Single round of user-side aggregation over one-hop payloads.
inline std::string aggregate_user(GenerationBackend& backend, const std::string& focal_payload,
                                  std::span<const std::string> neighbor_payloads,
                                  std::uint64_t seed, GenerationUsage& usage) {
  return detail::aggregate(backend, user_aggregation_template(), focal_payload, neighbor_payloads,
                           seed, usage);
}

/// Single round of item-side aggregation over one-hop payloads.
inline std::string aggregate_item(GenerationBackend& backend, const std::string& focal_payload,
                                  std::span<const std::string> neighbor_payloads,
                                  std::uint64_t seed, GenerationUsage& usage) {
  return detail::aggregate(backend, item_aggregation_template(), focal_payload, neighbor_payloads,
                           seed, usage);
}

struct GenerationOutcome {
  std::string text;
  bool failed = false;
  GenerationUsage usage;
};

/// Query the backend with an assembled edge prompt. Output is trimmed and
/// truncated to max_new_tokens whitespace tokens; empty output falls back to
/// a single sentence derived from the rating cue. Retries are bounded; a
/// persistent failure is recorded (fallback text) so the pipeline continues.
inline GenerationOutcome generate_review(GenerationBackend& backend, const PromptBundle& bundle,
                                         std::uint64_t seed, int max_retries = 3) {
  GenerationOutcome outcome;
  for (int attempt = 0; attempt < std::max(1, max_retries); ++attempt) {
    try {
      outcome.text = trim(backend.generate(bundle.prompt, seed, outcome.usage));
      outcome.failed = false;
      break;
    } catch (const std::exception&) {
      outcome.failed = true;
    }
  }
  if (!outcome.failed) outcome.text = truncate_tokens(outcome.text, backend.max_new_tokens());
  if (outcome.text.empty())
    outcome.text = "Rated " + bundle.ingredients.rating_cue + ".";
  return outcome;
}

enum class Variant { llm, llm_i, llm_u, llm_um, llm_ui };

inline Variant parse_variant(std::string_view name) {
  if (name == "LLM") return Variant::llm;
  if (name == "LLM-I") return Variant::llm_i;
  if (name == "LLM-U") return Variant::llm_u;
  if (name == "LLM-Um") return Variant::llm_um;
  if (name == "LLM-UI") return Variant::llm_ui;
  throw Error("unknown variant: " + std::string(name));
}

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::llm: return "LLM";
    case Variant::llm_i: return "LLM-I";
    case Variant::llm_u: return "LLM-U";
    case Variant::llm_um: return "LLM-Um";
    case Variant::llm_ui: return "LLM-UI";
  }
  return "?";
}

inline bool variant_uses_user_view(Variant v) {
  return v == Variant::llm_u || v == Variant::llm_um || v == Variant::llm_ui;
}
inline bool variant_uses_item_view(Variant v) {
  return v == Variant::llm_i || v == Variant::llm_ui;
}
inline bool variant_uses_metadata(Variant v) {
  return v == Variant::llm || v == Variant::llm_um || v == Variant::llm_ui;
}

struct LlmImputerOptions {
  std::size_t neighbor_cap = 10;
  std::size_t payload_token_cap = 60;
  // Masked focal edges contribute their rating cue to aggregation prompts;
  // set false to drop the focal payload entirely.
  bool include_focal_rating = true;
  unsigned n_workers = 1;
  int max_retries = 3;
};

struct ImputeRunStats {
  TokenLedger ledger;
  std::vector<EdgeId> user_context_absent;
  std::vector<EdgeId> item_context_absent;
  std::vector<std::string> diagnostics;
};

/// Run one imputation variant over the masked edges. Required views must be
/// supplied up front (user view may be the weighted variant); the result
/// covers exactly the mask. Deterministic given (inputs, seed) including
/// across worker counts: per-edge seeds derive from the edge id and ledger
/// reduction follows edge order.
inline ImputationResult impute_variant(Variant variant, const BipartiteTEG& teg, const Mask& mask,
                                       const LineGraphView* user_v, const LineGraphView* item_v,
                                       GenerationBackend& backend, std::uint64_t seed,
                                       const LlmImputerOptions& options = {},
                                       ImputeRunStats* stats = nullptr,
                                       std::vector<PromptBundle>* audit = nullptr) {
  if (variant_uses_user_view(variant)) {
    if (!user_v) throw Error(variant_name(variant) + " requires a user-side view");
    if (user_v->kind() != ViewKind::user && user_v->kind() != ViewKind::user_weighted)
      throw Error(variant_name(variant) + ": supplied view is not user-side");
  }
  if (variant_uses_item_view(variant)) {
    if (!item_v) throw Error(variant_name(variant) + " requires an item-side view");
    if (item_v->kind() != ViewKind::item)
      throw Error(variant_name(variant) + ": supplied view is not item-side");
  }

  struct Cell {
    std::optional<GenerationUsage> user_usage, item_usage;
    GenerationUsage gen_usage;
    bool user_absent = false, item_absent = false, failed = false;
    std::string text;
    std::string diagnostic;
    PromptBundle bundle;
  };
  std::vector<Cell> cells(mask.omega.size());

  auto process = [&](std::size_t idx) {
    Cell& cell = cells[idx];
    const EdgeId e = mask.omega[idx];
    const TegEdge& edge = teg.edge(e);

    EdgePayload focal_rating_only{edge.payload.rating, std::nullopt};
    const std::string focal =
        options.include_focal_rating ? payload_text(focal_rating_only) : std::string();

    std::optional<std::string> user_ctx, item_ctx, metadata;
    if (variant_uses_user_view(variant)) {
      const auto payloads =
          collect_context(*user_v, e, mask, options.neighbor_cap, options.payload_token_cap);
      if (payloads.empty()) {
        cell.user_absent = true;
      } else {
        try {
          GenerationUsage usage;
          user_ctx = aggregate_user(backend, focal, payloads, derive_seed(seed, e, 1), usage);
          cell.user_usage = usage;
        } catch (const std::exception& ex) {
          cell.user_absent = true;
          cell.diagnostic = "user aggregation failed for edge " + std::to_string(e) + ": " + ex.what();
        }
      }
    }
    if (variant_uses_item_view(variant)) {
      const auto payloads =
          collect_context(*item_v, e, mask, options.neighbor_cap, options.payload_token_cap);
      if (payloads.empty()) {
        cell.item_absent = true;
      } else {
        try {
          GenerationUsage usage;
          item_ctx = aggregate_item(backend, focal, payloads, derive_seed(seed, e, 2), usage);
          cell.item_usage = usage;
        } catch (const std::exception& ex) {
          cell.item_absent = true;
          cell.diagnostic = "item aggregation failed for edge " + std::to_string(e) + ": " + ex.what();
        }
      }
    }
    if (variant_uses_metadata(variant)) {
      const std::string& meta = teg.item_metadata(edge.item);
      if (!meta.empty()) metadata = meta;
    }

    const PromptTemplate& tmpl =
        variant == Variant::llm ? edge_basic_template() : edge_template();
    cell.bundle = build_edge_prompt(edge.payload.rating, metadata, item_ctx, user_ctx, tmpl);

    auto outcome =
        generate_review(backend, cell.bundle, derive_seed(seed, e, 3), options.max_retries);
    cell.text = std::move(outcome.text);
    cell.failed = outcome.failed;
    cell.gen_usage = outcome.usage;
  };

  const unsigned workers = std::max(1u, options.n_workers);
  if (workers == 1 || cells.size() < 2) {
    for (std::size_t i = 0; i < cells.size(); ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) return;
          process(i);
        }
      });
    }
    for (auto& t : pool) t.join();
  }

  ImputationResult result;
  result.variant = variant_name(variant);
  result.seed = seed;
  result.edges = mask.omega;
  result.texts.reserve(cells.size());
  result.params["neighbor_cap"] = std::to_string(options.neighbor_cap);
  result.params["backend"] = backend.name();

  for (std::size_t i = 0; i < cells.size(); ++i) {
    Cell& cell = cells[i];
    result.texts.push_back(std::move(cell.text));
    if (cell.failed) result.failed_edges.push_back(mask.omega[i]);
    if (stats) {
      if (cell.user_usage) stats->ledger.user_aggregation.add(*cell.user_usage);
      if (cell.item_usage) stats->ledger.item_aggregation.add(*cell.item_usage);
      stats->ledger.imputation.add(cell.gen_usage);
      if (cell.user_absent) stats->user_context_absent.push_back(mask.omega[i]);
      if (cell.item_absent) stats->item_context_absent.push_back(mask.omega[i]);
      if (!cell.diagnostic.empty()) stats->diagnostics.push_back(cell.diagnostic);
    }
    if (audit) audit->push_back(std::move(cell.bundle));
  }
  if (stats) stats->ledger.model = backend.name();
  return result;
}

/// Completed review matrix: observed entries untouched, masked entries filled
/// by the imputer (possibly with empty text for Blank).
struct CompletedReviewMatrix {
  std::vector<std::optional<std::string>> reviews;  // aligned to edge ids
  std::vector<bool> imputed;

  std::size_t review_count() const {
    std::size_t n = 0;
    for (const auto& r : reviews)
      if (r) ++n;
    return n;
  }

  // Text used for embedding: absent reviews embed as the zero row.
  std::string text_or_empty(EdgeId e) const { return reviews[e] ? *reviews[e] : std::string(); }
};

/// Merge a text-space imputation result with the observed reviews. Errors if
/// the result is missing any masked edge.
inline CompletedReviewMatrix assemble_completed_reviews(const BipartiteTEG& teg, const Mask& mask,
                                                        const ImputationResult& result) {
  if (!result.text_space)
    throw Error("assemble_completed_reviews: result is embedding-space; no texts to assemble");
  std::vector<EdgeId> missing;
  for (EdgeId e : mask.omega)
    if (!result.text_for(e)) missing.push_back(e);
  if (!missing.empty()) {
    std::string msg = "assemble_completed_reviews: result missing masked edges:";
    for (EdgeId e : missing) msg += " " + std::to_string(e);
    throw Error(msg);
  }

  CompletedReviewMatrix completed;
  completed.reviews.resize(teg.n_edges());
  completed.imputed.assign(teg.n_edges(), false);
  for (EdgeId e = 0; e < teg.n_edges(); ++e) {
    if (mask.contains(e)) {
      completed.reviews[e] = *result.text_for(e);
      completed.imputed[e] = true;
    } else if (teg.edge(e).payload.review) {
      completed.reviews[e] = *teg.edge(e).payload.review;
    }
  }
  return completed;
}

}  // namespace twister
