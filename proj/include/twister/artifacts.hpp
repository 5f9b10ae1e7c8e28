#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "twister/imputation.hpp"
#include "twister/preprocess.hpp"
#include "twister/teg.hpp"

namespace twister {

inline std::string content_hash_hex(std::string_view content) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(content)));
  return std::string(buf);
}

/// File-backed artifact directory with a manifest of content hashes, seeds,
/// and versions so stages can be rerun and audited individually.
class ArtifactStore {
 public:
  static constexpr int kArtifactVersion = 1;

  explicit ArtifactStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  const std::filesystem::path& dir() const { return dir_; }

  bool exists(const std::string& name) const {
    return std::filesystem::exists(dir_ / name);
  }

  void write_text(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("artifacts: cannot write " + (dir_ / name).string());
    out << content;
  }

  std::string read_text(const std::string& name) const {
    std::ifstream in(dir_ / name, std::ios::binary);
    if (!in) throw Error("artifacts: cannot read " + (dir_ / name).string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // Record a stage's outputs (file -> content hash) plus its seed.
  void record_stage(const std::string& stage, const std::vector<std::string>& files,
                    std::uint64_t seed) {
    nlohmann::json manifest = load_manifest();
    manifest["artifact_version"] = kArtifactVersion;
    nlohmann::json entry;
    entry["seed"] = seed;
    for (const auto& f : files) entry["files"][f] = content_hash_hex(read_text(f));
    manifest["stages"][stage] = entry;
    write_text("manifest.json", manifest.dump(2) + "\n");
  }

  nlohmann::json load_manifest() const {
    if (!exists("manifest.json")) return nlohmann::json::object();
    nlohmann::json j = nlohmann::json::parse(read_text("manifest.json"), nullptr, false);
    return j.is_discarded() ? nlohmann::json::object() : j;
  }

 private:
  std::filesystem::path dir_;
};

// --------------------------------------------------------------------------
// JSON-lines TEG serialization. Edges are written in id order so the bytes
// (and the rebuilt edge ids) are deterministic.

inline std::string teg_to_jsonl(const BipartiteTEG& teg) {
  std::string out;
  nlohmann::json header;
  header["type"] = "header";
  header["version"] = 1;
  header["n_users"] = teg.n_users();
  header["n_items"] = teg.n_items();
  header["n_edges"] = teg.n_edges();
  header["scale_min"] = teg.scale().min;
  header["scale_max"] = teg.scale().max;
  out += header.dump() + "\n";
  for (EdgeId e = 0; e < teg.n_edges(); ++e) {
    const auto& edge = teg.edge(e);
    nlohmann::json j;
    j["type"] = "edge";
    j["id"] = e;
    j["user"] = teg.user_name(edge.user);
    j["item"] = teg.item_name(edge.item);
    j["rating"] = edge.payload.rating;
    if (edge.payload.review) j["review"] = *edge.payload.review;
    out += j.dump() + "\n";
  }
  for (ItemId i = 0; i < teg.n_items(); ++i) {
    if (teg.item_metadata(i).empty()) continue;
    nlohmann::json j;
    j["type"] = "item_meta";
    j["item"] = teg.item_name(i);
    j["text"] = teg.item_metadata(i);
    out += j.dump() + "\n";
  }
  return out;
}

inline BipartiteTEG teg_from_jsonl(const std::string& content) {
  BipartiteTEG teg;
  std::istringstream in(content);
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("type"))
      throw Error("teg artifact: malformed line: " + line);
    const std::string type = j["type"].get<std::string>();
    if (type == "header") {
      RatingScale scale;
      scale.min = j.value("scale_min", 1.0);
      scale.max = j.value("scale_max", 5.0);
      teg.set_scale(scale);
    } else if (type == "edge") {
      const UserId u = teg.intern_user(j.at("user").get<std::string>());
      const ItemId i = teg.intern_item(j.at("item").get<std::string>());
      EdgePayload payload;
      payload.rating = j.at("rating").get<double>();
      if (j.contains("review")) payload.review = j["review"].get<std::string>();
      teg.append_edge(u, i, std::move(payload));
    } else if (type == "item_meta") {
      const ItemId i = teg.intern_item(j.at("item").get<std::string>());
      teg.set_item_metadata(i, j.at("text").get<std::string>());
    } else {
      throw Error("teg artifact: unknown line type " + type);
    }
  }
  return teg;
}

inline nlohmann::json mask_to_json(const Mask& mask) {
  nlohmann::json j;
  j["protocol"] = mask_protocol_name(mask.protocol);
  j["parameter"] = mask.parameter;
  j["seed"] = mask.seed;
  j["omega"] = mask.omega;
  j["selected_users"] = mask.selected_users;
  return j;
}

inline Mask mask_from_json(const nlohmann::json& j) {
  Mask mask;
  const std::string protocol = j.at("protocol").get<std::string>();
  if (protocol == "uniform")
    mask.protocol = MaskProtocol::uniform;
  else if (protocol == "cold-start")
    mask.protocol = MaskProtocol::cold_start;
  else if (protocol == "native")
    mask.protocol = MaskProtocol::native_missing;
  else
    throw Error("mask artifact: unknown protocol " + protocol);
  mask.parameter = j.value("parameter", 0.0);
  mask.seed = j.value("seed", 0ull);
  mask.omega = j.at("omega").get<std::vector<EdgeId>>();
  mask.selected_users = j.value("selected_users", std::vector<UserId>{});
  return mask;
}

inline nlohmann::json split_to_json(const EdgeSplit& split) {
  nlohmann::json j;
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  return j;
}

inline EdgeSplit split_from_json(const nlohmann::json& j) {
  EdgeSplit split;
  split.train = j.at("train").get<std::vector<EdgeId>>();
  split.val = j.at("val").get<std::vector<EdgeId>>();
  split.test = j.at("test").get<std::vector<EdgeId>>();
  return split;
}

inline std::string imputation_to_jsonl(const ImputationResult& result) {
  std::string out;
  nlohmann::json header;
  header["type"] = "header";
  header["variant"] = result.variant;
  header["text_space"] = result.text_space;
  header["seed"] = result.seed;
  header["params"] = result.params;
  header["failed_edges"] = result.failed_edges;
  if (!result.text_space) header["dimension"] = result.rows.dim();
  out += header.dump() + "\n";
  for (std::size_t idx = 0; idx < result.edges.size(); ++idx) {
    nlohmann::json j;
    j["edge"] = result.edges[idx];
    if (result.text_space) {
      j["text"] = result.texts[idx];
    } else {
      const auto row = result.rows.row(idx);
      j["row"] = std::vector<double>(row.begin(), row.end());
    }
    out += j.dump() + "\n";
  }
  return out;
}

inline ImputationResult imputation_from_jsonl(const std::string& content) {
  ImputationResult result;
  std::istringstream in(content);
  std::string line;
  bool have_header = false;
  std::size_t dim = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) throw Error("imputation artifact: malformed line");
    if (j.contains("type") && j["type"] == "header") {
      result.variant = j.at("variant").get<std::string>();
      result.text_space = j.at("text_space").get<bool>();
      result.seed = j.value("seed", 0ull);
      if (j.contains("params"))
        result.params = j["params"].get<std::map<std::string, std::string>>();
      result.failed_edges = j.value("failed_edges", std::vector<EdgeId>{});
      dim = j.value("dimension", 0u);
      have_header = true;
      continue;
    }
    if (!have_header) throw Error("imputation artifact: missing header line");
    result.edges.push_back(j.at("edge").get<EdgeId>());
    if (result.text_space)
      result.texts.push_back(j.at("text").get<std::string>());
    else
      rows.push_back(j.at("row").get<std::vector<double>>());
  }
  if (!result.text_space) {
    result.rows = EmbeddingMatrix(rows.size(), dim);
    for (std::size_t i = 0; i < rows.size(); ++i) result.rows.set_row(i, rows[i]);
  }
  return result;
}

}  // namespace twister
