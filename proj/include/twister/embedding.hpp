#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "twister/preprocess.hpp"
#include "twister/teg.hpp"

namespace twister {

/// Dense row-major real matrix with rows aligned to TEG edge ids (or item
/// ids). Empty-text rows are exactly the zero vector.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t dim)
      : rows_(rows), dim_(dim), data_(rows * dim, 0.0) {}

  static EmbeddingMatrix zeros(std::size_t rows, std::size_t dim) {
    return EmbeddingMatrix(rows, dim);
  }

  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<double> mutable_row(std::size_t i) {
    return {data_.data() + i * dim_, dim_};
  }

  void set_row(std::size_t i, std::span<const double> values) {
    if (values.size() != dim_) throw Error("EmbeddingMatrix::set_row: dimension mismatch");
    std::copy(values.begin(), values.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
  }

  bool row_is_zero(std::size_t i) const {
    const auto r = row(i);
    return std::all_of(r.begin(), r.end(), [](double v) { return v == 0.0; });
  }

  const std::vector<double>& data() const { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Text-embedding backend. Deterministic backends return the same vector for
/// the same input text; implementations must be shareable across concurrent
/// callers.
class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dimension() const = 0;
  virtual bool deterministic() const = 0;
  // One output row per input, order-preserving. Inputs are non-empty after
  // trimming (embed() shortcuts empty text to the zero row).
  virtual std::vector<std::vector<double>> encode(const std::vector<std::string>& texts) = 0;
};

/// Deterministic feature-hashing bag-of-words embedder: lowercase tokens
/// split on non-alphanumerics, each token hashed to a bucket with a +-1 sign,
/// non-empty output L2-normalized. Permutation-invariant over tokens.
class HashingEmbedder final : public EmbeddingBackend {
 public:
  explicit HashingEmbedder(std::size_t dim = 64) : dim_(dim) {
    if (dim_ == 0) throw Error("HashingEmbedder: dimension must be positive");
  }

  std::string name() const override { return "hashing-" + std::to_string(dim_); }
  std::size_t dimension() const override { return dim_; }
  bool deterministic() const override { return true; }

  std::vector<std::vector<double>> encode(const std::vector<std::string>& texts) override {
    std::vector<std::vector<double>> out;
    out.reserve(texts.size());
    for (const auto& text : texts) out.push_back(encode_one(text));
    return out;
  }

  std::vector<double> encode_one(std::string_view text) const {
    std::vector<double> v(dim_, 0.0);
    for (const auto& tok : tokenize(text)) {
      const std::uint64_t h = fnv1a64(tok);
      const std::size_t bucket = static_cast<std::size_t>(h % dim_);
      v[bucket] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (norm > 0.0) {
      norm = std::sqrt(norm);
      for (double& x : v) x /= norm;
    }
    return v;
  }

 private:
  std::size_t dim_;
};

/// Embed a batch of texts. Empty/whitespace inputs map to the zero row
/// without touching the backend; output rows preserve input order.
inline EmbeddingMatrix embed(EmbeddingBackend& backend, std::span<const std::string> texts) {
  EmbeddingMatrix m(texts.size(), backend.dimension());
  std::vector<std::string> pending;
  std::vector<std::size_t> pending_rows;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (trim(texts[i]).empty()) continue;  // zero row
    pending.push_back(texts[i]);
    pending_rows.push_back(i);
  }
  if (pending.empty()) return m;
  const auto encoded = backend.encode(pending);
  if (encoded.size() != pending.size())
    throw Error("embed: backend returned " + std::to_string(encoded.size()) + " rows for " +
                std::to_string(pending.size()) + " inputs");
  for (std::size_t k = 0; k < encoded.size(); ++k) {
    if (encoded[k].size() != backend.dimension())
      throw Error("embed: backend row dimension mismatch");
    for (double v : encoded[k])
      if (!std::isfinite(v)) throw Error("embed: non-finite value in backend output");
    m.set_row(pending_rows[k], encoded[k]);
  }
  return m;
}

/// Cosine similarity; 0 when either vector has zero norm. Dimension mismatch
/// is an error.
inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error("cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  return cosine(std::span<const double>(a), std::span<const double>(b));
}

/// Item text feeding the encoders: metadata s_i when non-empty, otherwise
/// the item's observed reviews joined in edge-id order, otherwise "". When a
/// mask is supplied, masked reviews are invisible (imputer-facing paths must
/// pass the mask).
inline std::string item_text(const BipartiteTEG& teg, ItemId item, const Mask* mask = nullptr) {
  if (item >= teg.n_items()) throw Error("item_text: unknown item id " + std::to_string(item));
  const std::string& meta = teg.item_metadata(item);
  if (!meta.empty()) return meta;
  std::string joined;
  for (EdgeId e : teg.item_edges(item)) {
    const auto& review = teg.edge(e).payload.review;
    if (!review) continue;
    if (mask && mask->contains(e)) continue;
    if (!joined.empty()) joined.push_back(' ');
    joined += *review;
  }
  return joined;
}

inline std::string item_text(const BipartiteTEG& teg, std::string_view item_name,
                             const Mask* mask = nullptr) {
  const auto idx = teg.item_index(item_name);
  if (!idx) throw Error("item_text: unknown item " + std::string(item_name));
  return item_text(teg, *idx, mask);
}

/// Per-item embeddings keyed by item name, from item_text under the given
/// mask. Used for the weighted user view and KNN candidate ranking.
inline std::map<std::string, std::vector<double>> embed_item_texts(const BipartiteTEG& teg,
                                                                   EmbeddingBackend& backend,
                                                                   const Mask* mask = nullptr) {
  std::vector<std::string> texts;
  texts.reserve(teg.n_items());
  for (ItemId i = 0; i < teg.n_items(); ++i) texts.push_back(item_text(teg, i, mask));
  const EmbeddingMatrix m = embed(backend, texts);
  std::map<std::string, std::vector<double>> out;
  for (ItemId i = 0; i < teg.n_items(); ++i) {
    const auto r = m.row(i);
    out.emplace(teg.item_name(i), std::vector<double>(r.begin(), r.end()));
  }
  return out;
}

}  // namespace twister
