#pragma once

#include <cstdint>
#include <cstdio>
#include <string>

#include "twister/prompts.hpp"

namespace twister {

struct GenerationUsage {
  std::uint64_t prompt_tokens = 0;
  std::uint64_t completion_tokens = 0;
  double seconds = 0.0;
};

/// Text-generation backend. Implementations throw on failure; retry policy
/// lives in the callers. Must be safely shareable across concurrent callers.
class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string name() const = 0;
  virtual std::size_t max_new_tokens() const = 0;
  virtual bool deterministic() const = 0;
  virtual std::string generate(const std::string& prompt, std::uint64_t seed,
                               GenerationUsage& usage) = 0;
};

/// Deterministic extractive mock: a pure function of the prompt (the seed is
/// accepted but unused). Rules:
///   - aggregation prompts ("Focal interaction:" line): first sentence of the
///     focal payload, then first sentences of up to 5 neighbor payloads;
///   - edge prompts ("Rating:" line): a rating-cue sentence plus the first 30
///     tokens of the item-context ingredient (item metadata when the context
///     slot is absent);
///   - anything else: the prompt's leading tokens.
/// Output is truncated to max_new_tokens whitespace tokens; reported time is
/// synthetic (tokens x 5ms) so ledgers stay byte-stable.
class MockGenerationBackend final : public GenerationBackend {
 public:
  explicit MockGenerationBackend(std::size_t max_new_tokens = 250)
      : max_new_tokens_(max_new_tokens) {}

  std::string name() const override { return "mock"; }
  std::size_t max_new_tokens() const override { return max_new_tokens_; }
  bool deterministic() const override { return true; }

  std::string generate(const std::string& prompt, std::uint64_t /*seed*/,
                       GenerationUsage& usage) override {
    usage.prompt_tokens = count_tokens(prompt);
    std::string out;
    if (prompt.find("Focal interaction: ") != std::string::npos) {
      out = summarize_aggregation(prompt);
    } else if (prompt.find("Rating: ") != std::string::npos) {
      out = summarize_edge(prompt);
    } else {
      out = truncate_tokens(prompt, max_new_tokens_);
    }
    out = truncate_tokens(out, max_new_tokens_);
    usage.completion_tokens = count_tokens(out);
    usage.seconds = static_cast<double>(usage.completion_tokens) * 0.005;
    return out;
  }

 private:
  static std::string line_value(const std::string& text, const std::string& label) {
    std::size_t pos = text.find(label);
    if (pos == std::string::npos) return {};
    pos += label.size();
    const std::size_t end = text.find('\n', pos);
    return trim(text.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
  }

  std::string summarize_aggregation(const std::string& prompt) const {
    std::string out = first_sentence(line_value(prompt, "Focal interaction: "));
    std::size_t pos = 0;
    int taken = 0;
    const std::string label = "Neighbor interaction: ";
    while (taken < 5 && (pos = prompt.find(label, pos)) != std::string::npos) {
      pos += label.size();
      const std::size_t end = prompt.find('\n', pos);
      const std::string payload =
          trim(prompt.substr(pos, end == std::string::npos ? std::string::npos : end - pos));
      const std::string sentence = first_sentence(payload);
      if (!sentence.empty()) {
        if (!out.empty()) out.push_back(' ');
        out += sentence;
        ++taken;
      }
    }
    return out;
  }

  std::string summarize_edge(const std::string& prompt) const {
    const std::string rating_field = line_value(prompt, "Rating: ");
    std::string rating = rating_field.substr(0, rating_field.find('/'));
    std::string out = "Rated " + rating + " out of 5.";
    std::string ctx = line_value(prompt, "Item context: ");
    if (ctx.empty() || ctx == kNoItemContextMarker) {
      ctx = line_value(prompt, "Item metadata: ");
      if (ctx == kNoMetadataMarker) ctx.clear();
    }
    if (!ctx.empty()) out += " " + truncate_tokens(ctx, 30);
    return out;
  }

  std::size_t max_new_tokens_;
};

// ---------------------------------------------------------------------------
// Token/time accounting.

struct LedgerRow {
  std::uint64_t count = 0;
  std::uint64_t total_tokens = 0;
  double total_seconds = 0.0;

  void add(const GenerationUsage& usage) {
    ++count;
    total_tokens += usage.completion_tokens;
    total_seconds += usage.seconds;
  }
  double avg_tokens() const {
    return count ? static_cast<double>(total_tokens) / static_cast<double>(count) : 0.0;
  }
  double avg_seconds() const { return count ? total_seconds / static_cast<double>(count) : 0.0; }
};

/// Per-run generation ledger: aggregation rows (user/item) and the imputation
/// row, each with counts, totals, and averages.
struct TokenLedger {
  std::string model;
  LedgerRow user_aggregation;
  LedgerRow item_aggregation;
  LedgerRow imputation;

  std::string to_table() const {
    char buf[160];
    std::string out = "Model: " + model + "\n";
    out += "Type        Count   Total Tokens  Total Time (s)  Avg Tokens  Avg Time (s)\n";
    auto line = [&](const char* label, const LedgerRow& row) {
      std::snprintf(buf, sizeof(buf), "%-10s  %6llu  %12llu  %14.1f  %10.1f  %12.3f\n", label,
                    static_cast<unsigned long long>(row.count),
                    static_cast<unsigned long long>(row.total_tokens), row.total_seconds,
                    row.avg_tokens(), row.avg_seconds());
      out += buf;
    };
    line("User Agg", user_aggregation);
    line("Item Agg", item_aggregation);
    line("Imputation", imputation);
    return out;
  }
};

}  // namespace twister
