#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <zlib.h>

#include <nlohmann/json.hpp>

#include "twister/teg.hpp"

namespace twister {

struct ParseStats {
  std::size_t lines = 0;
  std::size_t records = 0;
  std::size_t metadata_entries = 0;
  std::size_t malformed = 0;
  std::size_t skipped_no_rating = 0;
};

struct ParsedDataset {
  std::vector<InteractionRecord> records;
  std::map<std::string, std::string> item_metadata;
  ParseStats stats;
};

namespace detail {

inline std::optional<double> as_number(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      std::size_t pos = 0;
      const std::string s = j.get<std::string>();
      const double v = std::stod(s, &pos);
      if (pos == s.size()) return v;
    } catch (...) {
    }
  }
  return std::nullopt;
}

inline std::optional<std::string> as_string(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

// Shared line loop. handle_line returns false for malformed input.
template <typename Handler>
ParsedDataset parse_jsonl(std::istream& in, Handler&& handle_line) {
  if (!in.good()) throw Error("ingest: input stream is not readable");
  ParsedDataset out;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = trim(line);
    if (t.empty()) continue;
    ++out.stats.lines;
    nlohmann::json j = nlohmann::json::parse(t, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object() || !handle_line(j, out)) ++out.stats.malformed;
  }
  if (in.bad()) throw Error("ingest: stream failed mid-read");
  if (out.stats.lines > 0 && out.stats.malformed * 2 > out.stats.lines)
    throw Error("ingest: more than half of the input lines are malformed; wrong file?");
  return out;
}

}  // namespace detail

/// Amazon Review 2018 JSON lines. Review lines carry reviewerID/asin/overall
/// with optional reviewText; metadata lines carry asin plus title/description
/// (item text = title + description). Both kinds may share one stream.
inline ParsedDataset parse_amazon(std::istream& in) {
  return detail::parse_jsonl(in, [](const nlohmann::json& j, ParsedDataset& out) {
    const auto user = detail::as_string(j, "reviewerID");
    const auto item = detail::as_string(j, "asin");
    if (!item) return false;
    if (!user) {
      const auto title = detail::as_string(j, "title");
      const auto desc = detail::as_string(j, "description");
      if (!title && !desc) return false;
      std::string text = title ? *title : "";
      if (desc && !desc->empty()) {
        if (!text.empty()) text += " ";
        text += *desc;
      }
      out.item_metadata[*item] = trim(text);
      ++out.stats.metadata_entries;
      return true;
    }
    if (user->empty() || item->empty()) return false;
    auto overall = j.find("overall");
    if (overall == j.end()) {
      ++out.stats.skipped_no_rating;
      return true;
    }
    const auto rating = detail::as_number(*overall);
    if (!rating) return false;
    InteractionRecord rec;
    rec.user_id = *user;
    rec.item_id = *item;
    rec.rating = *rating;
    if (auto review = detail::as_string(j, "reviewText")) rec.review = *review;
    out.records.push_back(std::move(rec));
    ++out.stats.records;
    return true;
  });
}

/// Goodreads Book Graph JSON lines: user_id/book_id/rating with optional
/// review_text; metadata lines carry book_id + title (item text = title).
inline ParsedDataset parse_goodreads(std::istream& in) {
  return detail::parse_jsonl(in, [](const nlohmann::json& j, ParsedDataset& out) {
    const auto item = detail::as_string(j, "book_id");
    if (!item) return false;
    const auto user = detail::as_string(j, "user_id");
    if (!user) {
      const auto title = detail::as_string(j, "title");
      if (!title) return false;
      out.item_metadata[*item] = trim(*title);
      ++out.stats.metadata_entries;
      return true;
    }
    if (user->empty() || item->empty()) return false;
    auto rating_it = j.find("rating");
    if (rating_it == j.end()) {
      ++out.stats.skipped_no_rating;
      return true;
    }
    const auto rating = detail::as_number(*rating_it);
    if (!rating) return false;
    InteractionRecord rec;
    rec.user_id = *user;
    rec.item_id = *item;
    rec.rating = *rating;
    if (auto review = detail::as_string(j, "review_text")) rec.review = *review;
    out.records.push_back(std::move(rec));
    ++out.stats.records;
    return true;
  });
}

/// Read a file that may be gzip-compressed (detected by magic bytes).
inline std::string read_maybe_gzip(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open file: " + path);
  std::string raw((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (raw.size() < 2 || static_cast<unsigned char>(raw[0]) != 0x1f ||
      static_cast<unsigned char>(raw[1]) != 0x8b) {
    return raw;
  }
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) throw Error("gzip: inflateInit failed");
  std::string out;
  out.reserve(raw.size() * 4);
  std::vector<char> buf(1 << 16);
  zs.next_in = reinterpret_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  int ret = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = static_cast<uInt>(buf.size());
    ret = inflate(&zs, Z_NO_FLUSH);
    if (ret != Z_OK && ret != Z_STREAM_END) {
      inflateEnd(&zs);
      throw Error("gzip: corrupt stream in " + path);
    }
    out.append(buf.data(), buf.size() - zs.avail_out);
  } while (ret != Z_STREAM_END && zs.avail_in > 0);
  inflateEnd(&zs);
  return out;
}

enum class DatasetFormat { amazon, goodreads };

inline ParsedDataset parse_dataset_file(const std::string& path, DatasetFormat format) {
  std::istringstream in(read_maybe_gzip(path));
  return format == DatasetFormat::amazon ? parse_amazon(in) : parse_goodreads(in);
}

/// Deterministic synthetic dataset: each (user, item) pair becomes an edge
/// with probability `density`; every edge carries a rating in [1,5] and a
/// review of 5-15 vocabulary tokens. Item metadata uses 3 vocabulary tokens.
inline ParsedDataset synth_teg(std::uint32_t n_users, std::uint32_t n_items, double density,
                               const std::vector<std::string>& review_vocab, std::uint64_t seed) {
  if (n_users == 0 || n_items == 0) throw Error("synth_teg: need at least one user and item");
  if (density <= 0.0 || density > 1.0) throw Error("synth_teg: density must be in (0,1]");
  const auto& vocab = review_vocab.empty() ? lorem_vocabulary() : review_vocab;

  auto pad_id = [](char prefix, std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%c%05u", prefix, v);
    return std::string(buf);
  };

  Rng rng(derive_seed(seed, 0x5e7));
  ParsedDataset out;
  for (std::uint32_t u = 0; u < n_users; ++u) {
    for (std::uint32_t i = 0; i < n_items; ++i) {
      if (density < 1.0 && rng.unit() >= density) continue;
      InteractionRecord rec;
      rec.user_id = pad_id('u', u);
      rec.item_id = pad_id('i', i);
      rec.rating = 1.0 + static_cast<double>(rng.below(5));
      const std::size_t len = 5 + rng.below(11);
      std::string review;
      for (std::size_t t = 0; t < len; ++t) {
        if (!review.empty()) review.push_back(' ');
        review += vocab[rng.below(vocab.size())];
      }
      review.push_back('.');
      rec.review = std::move(review);
      out.records.push_back(std::move(rec));
      ++out.stats.records;
    }
  }
  for (std::uint32_t i = 0; i < n_items; ++i) {
    std::string meta;
    for (int t = 0; t < 3; ++t) {
      if (!meta.empty()) meta.push_back(' ');
      meta += vocab[rng.below(vocab.size())];
    }
    out.item_metadata[pad_id('i', i)] = meta;
  }
  return out;
}

struct BlockSynthParams {
  std::uint32_t n_users = 60;
  std::uint32_t n_items = 90;
  std::uint32_t n_blocks = 3;
  double in_density = 0.30;    // same-block (user, item) pairs
  double cross_density = 0.02; // off-block pairs
  std::uint32_t vocab_per_block = 25;
  std::uint64_t seed = 1;
};

/// Synthetic dataset with planted preference blocks: users interact mostly
/// with items of their own block, in-block ratings are high, and reviews use
/// a block-specific vocabulary. Used for utility-ordering fixtures.
inline ParsedDataset synth_block_teg(const BlockSynthParams& p) {
  if (p.n_users == 0 || p.n_items == 0) throw Error("synth_block_teg: empty axes");
  if (p.n_blocks == 0) throw Error("synth_block_teg: need at least one block");

  std::vector<std::vector<std::string>> block_vocab(p.n_blocks);
  for (std::uint32_t b = 0; b < p.n_blocks; ++b)
    for (std::uint32_t w = 0; w < p.vocab_per_block; ++w)
      block_vocab[b].push_back("b" + std::to_string(b) + "w" + std::to_string(w));

  auto pad_id = [](char prefix, std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%c%05u", prefix, v);
    return std::string(buf);
  };

  Rng rng(derive_seed(p.seed, 0xb10c));
  ParsedDataset out;
  for (std::uint32_t u = 0; u < p.n_users; ++u) {
    const std::uint32_t ub = u % p.n_blocks;
    for (std::uint32_t i = 0; i < p.n_items; ++i) {
      const std::uint32_t ib = i % p.n_blocks;
      const bool in_block = ub == ib;
      const double density = in_block ? p.in_density : p.cross_density;
      if (rng.unit() >= density) continue;
      InteractionRecord rec;
      rec.user_id = pad_id('u', u);
      rec.item_id = pad_id('i', i);
      rec.rating = in_block ? 4.0 + static_cast<double>(rng.below(2))
                            : 1.0 + static_cast<double>(rng.below(2));
      const auto& vocab = block_vocab[ib];
      const std::size_t len = 6 + rng.below(7);
      std::string review;
      for (std::size_t t = 0; t < len; ++t) {
        if (!review.empty()) review.push_back(' ');
        review += vocab[rng.below(vocab.size())];
      }
      review.push_back('.');
      rec.review = std::move(review);
      out.records.push_back(std::move(rec));
      ++out.stats.records;
    }
  }
  for (std::uint32_t i = 0; i < p.n_items; ++i) {
    const auto& vocab = block_vocab[i % p.n_blocks];
    out.item_metadata[pad_id('i', i)] = vocab[0] + " " + vocab[1 % vocab.size()];
  }
  return out;
}

}  // namespace twister
