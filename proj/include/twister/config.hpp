#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twister/imputation.hpp"
#include "twister/preprocess.hpp"
#include "twister/scorer.hpp"

namespace twister {

struct SyntheticConfig {
  std::string kind = "uniform";  // uniform | blocks
  std::uint32_t users = 100;
  std::uint32_t items = 200;
  double density = 0.06;
  std::uint32_t vocab_size = 0;  // 0 = builtin list
  std::uint32_t blocks = 3;
  double in_density = 0.30;
  double cross_density = 0.02;
  std::uint32_t vocab_per_block = 25;
};

struct DatasetConfig {
  std::string format = "synthetic";  // synthetic | amazon | goodreads
  std::string path;
  std::string metadata_path;
  SyntheticConfig synthetic;
};

/// Validated configuration for a full run. Unknown JSON keys are rejected;
/// secrets never appear here (remote credentials come from the environment:
/// TWISTER_LLM_ENDPOINT, TWISTER_LLM_MODEL, TWISTER_LLM_API_KEY,
/// TWISTER_EMBED_ENDPOINT).
struct RunConfig {
  DatasetConfig dataset;
  unsigned k_core = 5;
  std::uint32_t ego_seeds = 100;
  SplitRatios split;
  std::string mask_protocol = "uniform";  // uniform | cold-start | native
  double mask_ratio = 0.5;
  std::vector<std::string> variants = {"Blank", "Random", "Mean", "KNN", "MF", "LLM-UI"};
  std::string embedding_backend = "hashing";  // hashing | remote
  std::size_t embedding_dim = 64;
  std::string generation_backend = "mock";  // mock | remote
  std::size_t max_new_tokens = 250;
  unsigned n_workers = 1;
  std::size_t neighbor_cap = 10;
  std::size_t payload_token_cap = 60;
  unsigned knn_k = 5;
  MfParams mf;
  ScorerParams scorer;
  unsigned n_negatives = 9;
  unsigned top_k = 10;
  bool judge_enabled = true;
  std::string judge_backend = "mock";  // mock | remote
  std::string judge_template = "amazon";
  std::vector<std::uint64_t> judge_seeds = {1, 2, 3};
  std::size_t judge_max_reviews = 25;
  std::uint64_t seed = 42;
  std::string output_dir = "runs/out";
};

namespace detail {

inline void require_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw Error("config: unknown key \"" + it.key() + "\" in " + where);
  }
}

template <typename T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
  auto it = j.find(key);
  if (it != j.end()) out = it->get<T>();
}

}  // namespace detail

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig c;
  detail::require_keys(j,
                       {"dataset", "preprocess", "split", "mask", "variants", "embedding",
                        "generation", "knn", "mf", "scorer", "eval", "judge", "seed",
                        "output_dir"},
                       "top level");

  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    detail::require_keys(d, {"format", "path", "metadata_path", "synthetic"}, "dataset");
    detail::maybe(d, "format", c.dataset.format);
    detail::maybe(d, "path", c.dataset.path);
    detail::maybe(d, "metadata_path", c.dataset.metadata_path);
    if (d.contains("synthetic")) {
      const auto& s = d["synthetic"];
      detail::require_keys(s,
                           {"kind", "users", "items", "density", "vocab_size", "blocks",
                            "in_density", "cross_density", "vocab_per_block"},
                           "dataset.synthetic");
      detail::maybe(s, "kind", c.dataset.synthetic.kind);
      detail::maybe(s, "users", c.dataset.synthetic.users);
      detail::maybe(s, "items", c.dataset.synthetic.items);
      detail::maybe(s, "density", c.dataset.synthetic.density);
      detail::maybe(s, "vocab_size", c.dataset.synthetic.vocab_size);
      detail::maybe(s, "blocks", c.dataset.synthetic.blocks);
      detail::maybe(s, "in_density", c.dataset.synthetic.in_density);
      detail::maybe(s, "cross_density", c.dataset.synthetic.cross_density);
      detail::maybe(s, "vocab_per_block", c.dataset.synthetic.vocab_per_block);
    }
  }
  if (j.contains("preprocess")) {
    const auto& p = j["preprocess"];
    detail::require_keys(p, {"k_core", "ego_seeds"}, "preprocess");
    detail::maybe(p, "k_core", c.k_core);
    detail::maybe(p, "ego_seeds", c.ego_seeds);
  }
  if (j.contains("split")) {
    const auto& s = j["split"];
    detail::require_keys(s, {"train", "val", "test"}, "split");
    detail::maybe(s, "train", c.split.train);
    detail::maybe(s, "val", c.split.val);
    detail::maybe(s, "test", c.split.test);
  }
  if (j.contains("mask")) {
    const auto& m = j["mask"];
    detail::require_keys(m, {"protocol", "ratio"}, "mask");
    detail::maybe(m, "protocol", c.mask_protocol);
    detail::maybe(m, "ratio", c.mask_ratio);
  }
  detail::maybe(j, "variants", c.variants);
  if (j.contains("embedding")) {
    const auto& e = j["embedding"];
    detail::require_keys(e, {"backend", "dimension"}, "embedding");
    detail::maybe(e, "backend", c.embedding_backend);
    detail::maybe(e, "dimension", c.embedding_dim);
  }
  if (j.contains("generation")) {
    const auto& g = j["generation"];
    detail::require_keys(
        g, {"backend", "max_new_tokens", "n_workers", "neighbor_cap", "payload_token_cap"},
        "generation");
    detail::maybe(g, "backend", c.generation_backend);
    detail::maybe(g, "max_new_tokens", c.max_new_tokens);
    detail::maybe(g, "n_workers", c.n_workers);
    detail::maybe(g, "neighbor_cap", c.neighbor_cap);
    detail::maybe(g, "payload_token_cap", c.payload_token_cap);
  }
  if (j.contains("knn")) {
    detail::require_keys(j["knn"], {"k"}, "knn");
    detail::maybe(j["knn"], "k", c.knn_k);
  }
  if (j.contains("mf")) {
    const auto& m = j["mf"];
    detail::require_keys(m, {"rank", "epochs", "lr"}, "mf");
    detail::maybe(m, "rank", c.mf.rank);
    detail::maybe(m, "epochs", c.mf.epochs);
    detail::maybe(m, "lr", c.mf.learning_rate);
  }
  if (j.contains("scorer")) {
    const auto& s = j["scorer"];
    detail::require_keys(s, {"rank", "epochs", "lr"}, "scorer");
    detail::maybe(s, "rank", c.scorer.rank);
    detail::maybe(s, "epochs", c.scorer.epochs);
    detail::maybe(s, "lr", c.scorer.learning_rate);
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    detail::require_keys(e, {"n_negatives", "k"}, "eval");
    detail::maybe(e, "n_negatives", c.n_negatives);
    detail::maybe(e, "k", c.top_k);
  }
  if (j.contains("judge")) {
    const auto& jd = j["judge"];
    detail::require_keys(jd, {"enabled", "backend", "template", "seeds", "max_reviews"}, "judge");
    detail::maybe(jd, "enabled", c.judge_enabled);
    detail::maybe(jd, "backend", c.judge_backend);
    detail::maybe(jd, "template", c.judge_template);
    detail::maybe(jd, "seeds", c.judge_seeds);
    detail::maybe(jd, "max_reviews", c.judge_max_reviews);
  }
  detail::maybe(j, "seed", c.seed);
  detail::maybe(j, "output_dir", c.output_dir);
  return c;
}

inline void validate_config(const RunConfig& c) {
  const std::set<std::string> formats = {"synthetic", "amazon", "goodreads"};
  if (!formats.count(c.dataset.format))
    throw Error("config: unknown dataset format " + c.dataset.format);
  if (c.dataset.format != "synthetic" && c.dataset.path.empty())
    throw Error("config: dataset.path required for " + c.dataset.format);
  const std::set<std::string> kinds = {"uniform", "blocks"};
  if (!kinds.count(c.dataset.synthetic.kind))
    throw Error("config: unknown synthetic kind " + c.dataset.synthetic.kind);
  const std::set<std::string> protocols = {"uniform", "cold-start", "native"};
  if (!protocols.count(c.mask_protocol))
    throw Error("config: unknown mask protocol " + c.mask_protocol);
  if (c.mask_ratio < 0.0 || c.mask_ratio > 1.0) throw Error("config: mask ratio must be in [0,1]");
  if (c.variants.empty()) throw Error("config: variants list is empty");
  const std::set<std::string> known = {"Blank", "Random", "Mean",  "KNN",    "MF",
                                       "LLM",   "LLM-I",  "LLM-U", "LLM-Um", "LLM-UI"};
  for (const auto& v : c.variants)
    if (!known.count(v)) throw Error("config: unknown variant " + v);
  std::set<std::string> unique(c.variants.begin(), c.variants.end());
  if (unique.size() != c.variants.size()) throw Error("config: duplicate variant requested");
  if (c.embedding_backend != "hashing" && c.embedding_backend != "remote")
    throw Error("config: unknown embedding backend " + c.embedding_backend);
  if (c.generation_backend != "mock" && c.generation_backend != "remote")
    throw Error("config: unknown generation backend " + c.generation_backend);
  if (c.judge_backend != "mock" && c.judge_backend != "remote")
    throw Error("config: unknown judge backend " + c.judge_backend);
  if (c.judge_template != "amazon" && c.judge_template != "goodreads")
    throw Error("config: unknown judge template " + c.judge_template);
  if (c.embedding_dim == 0) throw Error("config: embedding dimension must be positive");
  if (c.n_negatives + 1 < c.top_k) throw Error("config: need n_negatives >= k-1");
  if (c.output_dir.empty()) throw Error("config: output_dir must be set");
  if (c.judge_enabled && c.judge_seeds.empty())
    throw Error("config: judge enabled but no seeds given");
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config: cannot open " + path);
  nlohmann::json j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw Error("config: invalid JSON in " + path);
  auto c = parse_run_config(j);
  validate_config(c);
  return c;
}

inline nlohmann::json config_to_json(const RunConfig& c) {
  nlohmann::json j;
  j["dataset"]["format"] = c.dataset.format;
  j["dataset"]["path"] = c.dataset.path;
  j["dataset"]["metadata_path"] = c.dataset.metadata_path;
  j["dataset"]["synthetic"] = {{"kind", c.dataset.synthetic.kind},
                               {"users", c.dataset.synthetic.users},
                               {"items", c.dataset.synthetic.items},
                               {"density", c.dataset.synthetic.density},
                               {"vocab_size", c.dataset.synthetic.vocab_size},
                               {"blocks", c.dataset.synthetic.blocks},
                               {"in_density", c.dataset.synthetic.in_density},
                               {"cross_density", c.dataset.synthetic.cross_density},
                               {"vocab_per_block", c.dataset.synthetic.vocab_per_block}};
  j["preprocess"] = {{"k_core", c.k_core}, {"ego_seeds", c.ego_seeds}};
  j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
  j["mask"] = {{"protocol", c.mask_protocol}, {"ratio", c.mask_ratio}};
  j["variants"] = c.variants;
  j["embedding"] = {{"backend", c.embedding_backend}, {"dimension", c.embedding_dim}};
  j["generation"] = {{"backend", c.generation_backend},
                     {"max_new_tokens", c.max_new_tokens},
                     {"n_workers", c.n_workers},
                     {"neighbor_cap", c.neighbor_cap},
                     {"payload_token_cap", c.payload_token_cap}};
  j["knn"] = {{"k", c.knn_k}};
  j["mf"] = {{"rank", c.mf.rank}, {"epochs", c.mf.epochs}, {"lr", c.mf.learning_rate}};
  j["scorer"] = {{"rank", c.scorer.rank},
                 {"epochs", c.scorer.epochs},
                 {"lr", c.scorer.learning_rate}};
  j["eval"] = {{"n_negatives", c.n_negatives}, {"k", c.top_k}};
  j["judge"] = {{"enabled", c.judge_enabled},
                {"backend", c.judge_backend},
                {"template", c.judge_template},
                {"seeds", c.judge_seeds},
                {"max_reviews", c.judge_max_reviews}};
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  return j;
}

}  // namespace twister
