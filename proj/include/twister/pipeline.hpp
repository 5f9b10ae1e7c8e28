#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twister/artifacts.hpp"
#include "twister/config.hpp"
#include "twister/ingest.hpp"
#include "twister/judge.hpp"
#include "twister/laplacian.hpp"
#include "twister/llm_imputer.hpp"
#include "twister/remote.hpp"
#include "twister/scorer.hpp"
#include "twister/smoothness.hpp"
#include "twister/text_metrics.hpp"

namespace twister {

/// End-to-end run orchestration. Every stage reads its inputs from the
/// artifact store and persists its outputs, so stages can be rerun
/// individually through the CLI subcommands. With the mock/hashing backends
/// and a fixed seed, all artifacts and the final report are byte-stable.
class Pipeline {
 public:
  explicit Pipeline(RunConfig config) : config_(std::move(config)), store_(config_.output_dir) {
    validate_config(config_);
  }

  const RunConfig& config() const { return config_; }
  ArtifactStore& store() { return store_; }

  // ----- stages ------------------------------------------------------------

  void run_ingest() {
    ParsedDataset data;
    if (config_.dataset.format == "synthetic") {
      const auto& s = config_.dataset.synthetic;
      if (s.kind == "blocks") {
        BlockSynthParams params;
        params.n_users = s.users;
        params.n_items = s.items;
        params.n_blocks = s.blocks;
        params.in_density = s.in_density;
        params.cross_density = s.cross_density;
        params.vocab_per_block = s.vocab_per_block;
        params.seed = config_.seed;
        data = synth_block_teg(params);
      } else {
        std::vector<std::string> vocab;
        for (std::uint32_t w = 0; w < s.vocab_size; ++w) vocab.push_back("w" + std::to_string(w));
        data = synth_teg(s.users, s.items, s.density, vocab, config_.seed);
      }
    } else {
      const auto format = config_.dataset.format == "amazon" ? DatasetFormat::amazon
                                                             : DatasetFormat::goodreads;
      data = parse_dataset_file(config_.dataset.path, format);
      if (!config_.dataset.metadata_path.empty()) {
        auto meta = parse_dataset_file(config_.dataset.metadata_path, format);
        for (auto& [k, v] : meta.item_metadata) data.item_metadata[k] = v;
        data.stats.metadata_entries += meta.stats.metadata_entries;
      }
    }

    BuildDiagnostics diag;
    const auto teg = build_teg(data.records, data.item_metadata, RatingScale{}, &diag);
    store_.write_text("teg.jsonl", teg_to_jsonl(teg));

    nlohmann::json stats;
    stats["records"] = data.stats.records;
    stats["metadata_entries"] = data.stats.metadata_entries;
    stats["malformed_lines"] = data.stats.malformed;
    stats["skipped_no_rating"] = data.stats.skipped_no_rating;
    stats["rejected_records"] = diag.rejected;
    stats["n_users"] = teg.n_users();
    stats["n_items"] = teg.n_items();
    stats["n_edges"] = teg.n_edges();
    store_.write_text("ingest_stats.json", stats.dump(2) + "\n");
    store_.record_stage("ingest", {"teg.jsonl", "ingest_stats.json"}, config_.seed);
  }

  void run_preprocess() {
    auto teg = teg_from_jsonl(store_.read_text("teg.jsonl"));
    if (config_.k_core >= 1) teg = k_core(teg, config_.k_core);
    if (config_.ego_seeds >= 1 && teg.n_users() > 0)
      teg = ego_sample(teg, config_.ego_seeds, stage_seed("ego"));
    store_.write_text("teg_pre.jsonl", teg_to_jsonl(teg));
    store_.record_stage("preprocess", {"teg_pre.jsonl"}, stage_seed("ego"));
  }

  void run_mask() {
    const auto teg = working_teg();
    const auto split = split_edges(teg, config_.split, stage_seed("split"));
    store_.write_text("split.json", split_to_json(split).dump(2) + "\n");

    Mask mask;
    if (config_.mask_protocol == "uniform")
      mask = mask_uniform(teg, config_.mask_ratio, stage_seed("mask"));
    else if (config_.mask_protocol == "cold-start")
      mask = mask_cold_start(teg, config_.mask_ratio, stage_seed("mask"));
    else
      mask = mask_native(teg);
    store_.write_text("mask.json", mask_to_json(mask).dump(2) + "\n");
    store_.record_stage("mask", {"split.json", "mask.json"}, stage_seed("mask"));
  }

  // Impute the requested variants (all configured ones when `only` is empty).
  void run_impute(const std::vector<std::string>& only = {}) {
    const auto teg = working_teg();
    const auto mask = mask_from_json(parse_json(store_.read_text("mask.json")));
    const auto embedder = make_embedder();

    std::optional<EmbeddingMatrix> z_obs;
    std::optional<std::map<std::string, std::vector<double>>> item_emb;
    std::optional<LineGraphView> users, items;

    auto ensure_z_obs = [&] {
      if (!z_obs) z_obs = embed_observed(teg, mask, *embedder);
    };
    auto ensure_item_emb = [&] {
      if (!item_emb) item_emb = embed_item_texts(teg, *embedder, &mask);
    };

    for (const auto& name : selected_variants(only)) {
      ImputationResult result;
      std::optional<ImputeRunStats> stats;
      if (name == "Blank") {
        result = impute_blank(teg, mask);
      } else if (name == "Random") {
        result = impute_random(teg, mask, variant_seed(name));
      } else if (name == "Mean") {
        ensure_z_obs();
        result = impute_mean(teg, mask, *z_obs);
      } else if (name == "KNN") {
        ensure_z_obs();
        ensure_item_emb();
        result = impute_knn(teg, mask, *z_obs, *item_emb, config_.knn_k);
      } else if (name == "MF") {
        ensure_z_obs();
        result = impute_mf(teg, mask, *z_obs, config_.mf, variant_seed(name));
      } else {
        const Variant variant = parse_variant(name);
        if (variant_uses_user_view(variant) && !users) users.emplace(user_view(teg));
        if (variant_uses_item_view(variant) && !items) items.emplace(item_view(teg));
        auto backend = make_generation_backend();
        LlmImputerOptions options;
        options.neighbor_cap = config_.neighbor_cap;
        options.payload_token_cap = config_.payload_token_cap;
        options.n_workers = config_.n_workers;
        stats.emplace();
        result = impute_variant(variant, teg, mask, users ? &*users : nullptr,
                                items ? &*items : nullptr, *backend, variant_seed(name),
                                options, &*stats);
      }
      const std::string file = imputed_file(name);
      store_.write_text(file, imputation_to_jsonl(result));
      std::vector<std::string> files = {file};
      if (stats) {
        nlohmann::json ledger = ledger_to_json(stats->ledger);
        ledger["user_context_absent"] = stats->user_context_absent;
        ledger["item_context_absent"] = stats->item_context_absent;
        const std::string ledger_file = "ledger_" + name + ".json";
        store_.write_text(ledger_file, ledger.dump(2) + "\n");
        files.push_back(ledger_file);
      }
      store_.record_stage("impute:" + name, files, variant_seed(name));
    }
  }

  void run_evaluate() {
    const auto teg = working_teg();
    const auto mask = mask_from_json(parse_json(store_.read_text("mask.json")));
    const auto split = split_from_json(parse_json(store_.read_text("split.json")));
    const auto embedder = make_embedder();

    nlohmann::json out;
    for (const auto& name : selected_variants({})) {
      const auto result = imputation_from_jsonl(store_.read_text(imputed_file(name)));
      const auto z = completed_embedding(teg, mask, result, *embedder);

      const auto scorer =
          train_edge_scorer(teg, split.train, z, config_.scorer, stage_seed("scorer"));
      const auto metrics = rank_metrics(scorer, teg, split.test, z, config_.n_negatives,
                                        config_.top_k, stage_seed("rank"));

      nlohmann::json v;
      v["embedding_space"] = !result.text_space;
      v["metrics"] = {{"acc", metrics.acc},
                      {"auc", metrics.auc},
                      {"mrr", metrics.mrr},
                      {"ndcg", metrics.ndcg},
                      {"k", metrics.k},
                      {"n_negatives", metrics.n_negatives},
                      {"evaluated_edges", metrics.evaluated_edges},
                      {"skipped_edges", metrics.skipped_edges}};
      v["fidelity"] = fidelity_json(teg, mask, result, *embedder);
      out[name] = v;
    }
    store_.write_text("evaluate.json", out.dump(2) + "\n");
    store_.record_stage("evaluate", {"evaluate.json"}, stage_seed("scorer"));
  }

  void run_energy() {
    const auto teg = working_teg();
    const auto mask = mask_from_json(parse_json(store_.read_text("mask.json")));
    const auto embedder = make_embedder();

    const auto users = user_view(teg);
    const auto items = item_view(teg);
    const auto item_emb = embed_item_texts(teg, *embedder, &mask);
    const auto weighted = weighted_user_view(teg, item_emb);

    std::map<std::string, EnergyReport> reports;
    for (const auto& name : selected_variants({})) {
      const auto result = imputation_from_jsonl(store_.read_text(imputed_file(name)));
      const auto z = completed_embedding(teg, mask, result, *embedder);
      reports.emplace(name, energy_report(users, items, weighted, z, name, embedder->name()));
    }

    nlohmann::json out;
    const auto blank = reports.find("Blank");
    for (const auto& name : selected_variants({})) {
      const auto& r = reports.at(name);
      nlohmann::json v;
      v["e_user"] = r.e_user;
      v["e_item"] = r.e_item;
      v["e_user_weighted"] = r.e_user_weighted;
      v["n_edges"] = r.n_edges;
      v["embedder"] = r.embedder;
      if (blank != reports.end()) {
        const auto norm = normalized_energy(r, blank->second);
        nlohmann::json n;
        n["user"] = norm.user ? nlohmann::json(*norm.user) : nlohmann::json();
        n["item"] = norm.item ? nlohmann::json(*norm.item) : nlohmann::json();
        n["user_weighted"] =
            norm.user_weighted ? nlohmann::json(*norm.user_weighted) : nlohmann::json();
        v["normalized_vs_blank"] = n;
      }
      out[name] = v;
    }
    store_.write_text("energy.json", out.dump(2) + "\n");
    store_.record_stage("energy", {"energy.json"}, config_.seed);
  }

  void run_judge() {
    const auto teg = working_teg();
    const auto mask = mask_from_json(parse_json(store_.read_text("mask.json")));
    const auto kind =
        config_.judge_template == "amazon" ? JudgeTemplate::amazon : JudgeTemplate::goodreads;

    std::unique_ptr<GenerationBackend> backend;
    if (config_.judge_backend == "mock")
      backend = std::make_unique<MockJudgeBackend>();
    else
      backend = std::make_unique<RemoteGenerationBackend>(
          RemoteGenerationBackend::from_env(config_.max_new_tokens));

    nlohmann::json out;
    for (const auto& name : selected_variants({})) {
      const auto result = imputation_from_jsonl(store_.read_text(imputed_file(name)));
      if (!result.text_space) continue;  // nothing to judge in embedding space

      std::vector<JudgeInput> inputs;
      for (std::size_t idx = 0; idx < result.edges.size() && inputs.size() < config_.judge_max_reviews;
           ++idx) {
        const auto& edge = teg.edge(result.edges[idx]);
        JudgeInput in;
        in.item_id = teg.item_name(edge.item);
        in.user_id = teg.user_name(edge.user);
        in.rating = edge.payload.rating;
        in.review = result.texts[idx];
        in.item_label = teg.item_metadata(edge.item);
        inputs.push_back(std::move(in));
      }
      const auto judged = judge_reviews(*backend, kind, inputs, config_.judge_seeds);

      nlohmann::json rows = nlohmann::json::array();
      JudgeScores sum;
      std::size_t judged_count = 0;
      for (const auto& jr : judged) {
        nlohmann::json row;
        row["index"] = jr.index;
        row["judged"] = jr.judged;
        if (jr.judged) {
          row["authenticity"] = jr.mean.authenticity;
          row["helpfulness"] = jr.mean.helpfulness;
          row["specificity"] = jr.mean.specificity;
          row["readability"] = jr.mean.readability;
          sum.authenticity += jr.mean.authenticity;
          sum.helpfulness += jr.mean.helpfulness;
          sum.specificity += jr.mean.specificity;
          sum.readability += jr.mean.readability;
          ++judged_count;
        }
        rows.push_back(std::move(row));
      }
      nlohmann::json v;
      v["reviews"] = rows;
      v["judged_count"] = judged_count;
      if (judged_count > 0) {
        const auto n = static_cast<double>(judged_count);
        v["mean"] = {{"authenticity", sum.authenticity / n},
                     {"helpfulness", sum.helpfulness / n},
                     {"specificity", sum.specificity / n},
                     {"readability", sum.readability / n}};
      }
      out[name] = v;
    }
    store_.write_text("judge.json", out.dump(2) + "\n");
    store_.record_stage("judge", {"judge.json"},
                        config_.judge_seeds.empty() ? 0 : config_.judge_seeds.front());
  }

  // Assemble report.json from persisted artifacts only (no recomputation).
  nlohmann::json build_report(const std::vector<nlohmann::json>& failures = {}) {
    nlohmann::json report;
    report["config"] = config_to_json(config_);
    report["artifact_version"] = ArtifactStore::kArtifactVersion;
    if (store_.exists("ingest_stats.json"))
      report["ingest"] = parse_json(store_.read_text("ingest_stats.json"));
    if (store_.exists("teg_pre.jsonl") || store_.exists("teg.jsonl")) {
      const auto teg = working_teg();
      report["dataset_summary"] = {{"n_users", teg.n_users()},
                                   {"n_items", teg.n_items()},
                                   {"n_edges", teg.n_edges()}};
    }
    if (store_.exists("mask.json")) {
      const auto mask_json = parse_json(store_.read_text("mask.json"));
      report["mask_summary"] = {{"protocol", mask_json["protocol"]},
                                {"omega_size", mask_json["omega"].size()}};
    }
    if (store_.exists("split.json")) {
      const auto split_json = parse_json(store_.read_text("split.json"));
      report["split_summary"] = {{"train", split_json["train"].size()},
                                 {"val", split_json["val"].size()},
                                 {"test", split_json["test"].size()}};
    }
    if (store_.exists("evaluate.json"))
      report["evaluation"] = parse_json(store_.read_text("evaluate.json"));
    if (store_.exists("energy.json"))
      report["energy"] = parse_json(store_.read_text("energy.json"));
    if (store_.exists("judge.json"))
      report["judge"] = parse_json(store_.read_text("judge.json"));
    for (const auto& name : config_.variants) {
      const std::string ledger_file = "ledger_" + name + ".json";
      if (store_.exists(ledger_file))
        report["ledgers"][name] = parse_json(store_.read_text(ledger_file));
    }
    report["manifest"] = store_.load_manifest();
    report["failures"] = failures;
    report["ok"] = failures.empty();
    return report;
  }

  /// Run every stage in order; stage failures are recorded and the report is
  /// still written. Exit status 0 iff all requested stages succeeded.
  int run_all() {
    std::vector<nlohmann::json> failures;
    auto step = [&](const char* stage, auto&& fn) {
      if (!failures.empty()) return;  // halt after first failure
      try {
        fn();
      } catch (const std::exception& ex) {
        failures.push_back({{"stage", stage}, {"error", ex.what()}});
      }
    };
    step("ingest", [&] { run_ingest(); });
    step("preprocess", [&] { run_preprocess(); });
    step("mask", [&] { run_mask(); });
    step("impute", [&] { run_impute(); });
    step("evaluate", [&] { run_evaluate(); });
    step("energy", [&] { run_energy(); });
    if (config_.judge_enabled) step("judge", [&] { run_judge(); });

    const auto report = build_report(failures);
    store_.write_text("report.json", report.dump(2) + "\n");
    return failures.empty() ? 0 : 1;
  }

  // ----- shared helpers (used by stages and tests) --------------------------

  BipartiteTEG working_teg() const {
    if (store_.exists("teg_pre.jsonl")) return teg_from_jsonl(store_.read_text("teg_pre.jsonl"));
    return teg_from_jsonl(store_.read_text("teg.jsonl"));
  }

  std::unique_ptr<EmbeddingBackend> make_embedder() const {
    if (config_.embedding_backend == "hashing")
      return std::make_unique<HashingEmbedder>(config_.embedding_dim);
    return std::make_unique<RemoteEmbedder>(RemoteEmbedder::from_env(config_.embedding_dim));
  }

  std::unique_ptr<GenerationBackend> make_generation_backend() const {
    if (config_.generation_backend == "mock")
      return std::make_unique<MockGenerationBackend>(config_.max_new_tokens);
    return std::make_unique<RemoteGenerationBackend>(
        RemoteGenerationBackend::from_env(config_.max_new_tokens));
  }

  static EmbeddingMatrix embed_observed(const BipartiteTEG& teg, const Mask& mask,
                                        EmbeddingBackend& embedder) {
    std::vector<std::string> texts;
    texts.reserve(teg.n_edges());
    for (EdgeId e = 0; e < teg.n_edges(); ++e) {
      const std::string* review = observed_review(teg, mask, e);
      texts.push_back(review ? *review : std::string());
    }
    return embed(embedder, texts);
  }

  // Z over all edges: observed reviews plus the variant's masked fills.
  static EmbeddingMatrix completed_embedding(const BipartiteTEG& teg, const Mask& mask,
                                             const ImputationResult& result,
                                             EmbeddingBackend& embedder) {
    if (result.text_space) {
      const auto completed = assemble_completed_reviews(teg, mask, result);
      std::vector<std::string> texts;
      texts.reserve(teg.n_edges());
      for (EdgeId e = 0; e < teg.n_edges(); ++e) texts.push_back(completed.text_or_empty(e));
      return embed(embedder, texts);
    }
    EmbeddingMatrix z = embed_observed(teg, mask, embedder);
    if (result.rows.dim() != z.dim())
      throw Error("completed_embedding: imputed row dimension mismatch");
    for (std::size_t idx = 0; idx < result.edges.size(); ++idx)
      z.set_row(result.edges[idx], result.rows.row(idx));
    return z;
  }

  static nlohmann::json ledger_to_json(const TokenLedger& ledger) {
    auto row = [](const LedgerRow& r) {
      return nlohmann::json{{"count", r.count},
                            {"total_tokens", r.total_tokens},
                            {"total_seconds", r.total_seconds},
                            {"avg_tokens", r.avg_tokens()},
                            {"avg_seconds", r.avg_seconds()}};
    };
    nlohmann::json j;
    j["model"] = ledger.model;
    j["user_aggregation"] = row(ledger.user_aggregation);
    j["item_aggregation"] = row(ledger.item_aggregation);
    j["imputation"] = row(ledger.imputation);
    j["table"] = ledger.to_table();
    return j;
  }

  static std::string imputed_file(const std::string& variant) {
    return "imputed_" + variant + ".jsonl";
  }

 private:
  static nlohmann::json parse_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw Error("artifacts: invalid JSON payload");
    return j;
  }

  std::vector<std::string> selected_variants(const std::vector<std::string>& only) const {
    if (only.empty()) return config_.variants;
    for (const auto& o : only) {
      bool known = false;
      for (const auto& v : config_.variants) known |= v == o;
      if (!known) throw Error("variant " + o + " is not in the configured list");
    }
    return only;
  }

  std::uint64_t stage_seed(const std::string& tag) const {
    return derive_seed(config_.seed, fnv1a64(tag));
  }
  std::uint64_t variant_seed(const std::string& name) const {
    return derive_seed(config_.seed, fnv1a64("impute:" + name));
  }

  nlohmann::json fidelity_json(const BipartiteTEG& teg, const Mask& mask,
                               const ImputationResult& result, EmbeddingBackend& embedder) const {
    // Ground truth exists only for masked edges that natively carried text.
    std::vector<std::pair<EdgeId, std::string>> truth;
    for (EdgeId e : mask.omega)
      if (teg.edge(e).payload.review) truth.emplace_back(e, *teg.edge(e).payload.review);

    nlohmann::json out;
    out["pairs"] = truth.size();
    if (truth.empty()) return out;

    if (result.text_space) {
      std::vector<std::pair<EdgeId, std::string>> imputed;
      for (const auto& [e, t] : truth) imputed.emplace_back(e, *result.text_for(e));
      const auto fid = semantic_fidelity(imputed, truth, embedder);
      out["rouge_l"] = fid.mean_rouge;
      out["cosine"] = fid.mean_cosine;
    } else {
      // Embedding-space variants are compared in embedding space directly
      // (no text to run ROUGE on); flagged as a protocol deviation.
      std::vector<std::string> truth_texts;
      for (const auto& [e, t] : truth) truth_texts.push_back(t);
      const auto truth_z = embed(embedder, truth_texts);
      double sum = 0.0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto it = std::lower_bound(result.edges.begin(), result.edges.end(), truth[i].first);
        const auto idx = static_cast<std::size_t>(it - result.edges.begin());
        sum += cosine(result.rows.row(idx), truth_z.row(i));
      }
      out["rouge_l"] = nullptr;
      out["cosine"] = sum / static_cast<double>(truth.size());
      out["protocol_deviation"] = "embedding-space comparison; no text decoding";
    }
    return out;
  }

  RunConfig config_;
  ArtifactStore store_;
};

/// Convenience wrapper: run everything, return the exit status.
inline int run_pipeline(const RunConfig& config) {
  Pipeline pipeline(config);
  return pipeline.run_all();
}

}  // namespace twister
