#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace twister {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Seeded randomness.
//
// Engines are pinned here instead of using <random> distributions because the
// standard leaves distribution output implementation-defined; reports must be
// byte-stable given a seed.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-independent per-item seed derivation (e.g. per edge id).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x51ed2701a9e3ull));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
  return derive_seed(derive_seed(master, a), b);
}

// xoshiro256** — small, fast, fully specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : state_) {
      x = splitmix64(x);
      s = x;
    }
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Unbiased draw in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw Error("Rng::below: n must be positive");
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  double unit() {  // [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();
    const double u2 = unit();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    spare_ = mag * std::sin(2.0 * M_PI * u2);
    has_spare_ = true;
    return mag * std::cos(2.0 * M_PI * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // k distinct values from [0, n), ascending.
  std::vector<std::uint32_t> sample_without_replacement(std::uint32_t n, std::uint32_t k) {
    if (k > n) throw Error("sample_without_replacement: k > n");
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    for (std::uint32_t i = 0; i < k; ++i) {
      const std::uint32_t j = i + static_cast<std::uint32_t>(below(n - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4]{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Text helpers shared by the embedder, metrics, and prompt machinery.

inline std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

// Lowercase tokens split on non-alphanumeric characters.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    const auto uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      cur.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

inline std::vector<std::string_view> whitespace_tokens(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.push_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::size_t count_tokens(std::string_view text) {
  return whitespace_tokens(text).size();
}

// First max_tokens whitespace tokens, re-joined with single spaces.
inline std::string truncate_tokens(std::string_view text, std::size_t max_tokens) {
  const auto toks = whitespace_tokens(text);
  std::string out;
  for (std::size_t i = 0; i < toks.size() && i < max_tokens; ++i) {
    if (!out.empty()) out.push_back(' ');
    out.append(toks[i]);
  }
  return out;
}

// Prefix up to and including the first '.', '!' or '?'; whole text if none.
inline std::string first_sentence(std::string_view text) {
  const std::string t = trim(text);
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == '.' || t[i] == '!' || t[i] == '?') {
      return t.substr(0, i + 1);
    }
  }
  return t;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// One decimal place, matching the "4.5/5.0" rating-cue convention.
inline std::string format_rating(double rating) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", rating);
  return std::string(buf);
}

// Fallback token list for synthetic reviews and review-less random fills.
inline const std::vector<std::string>& lorem_vocabulary() {
  static const std::vector<std::string> words = {
      "lorem",  "ipsum", "dolor",  "sit",    "amet",  "consectetur", "adipiscing",
      "elit",   "sed",   "tempor", "magna",  "quis",  "aliqua",      "fugiat",
      "culpa",  "velit", "nulla",  "beatae", "omnis", "natus"};
  return words;
}

}  // namespace twister
