#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twister/generation.hpp"
#include "twister/prompts.hpp"

namespace twister {

enum class JudgeTemplate { amazon, goodreads };

/// Per-review judge scores, each in [1,5].
struct JudgeScores {
  double authenticity = 0.0;
  double helpfulness = 0.0;
  double specificity = 0.0;
  double readability = 0.0;
  std::string reasoning;
};

namespace detail {

// These render with {{ }} escaping for the literal JSON skeleton.
inline const PromptTemplate& amazon_judge_template() {
  static const PromptTemplate tmpl{
      "judge-amazon-v1",
      "You are evaluating the quality of an Amazon product review for a {category}.\n"
      "Product ASIN: {book_id}\n"
      "User ID: {user_id}\n"
      "Rating: {rating}/5.0\n"
      "Review Text: \"{review_text}\"\n"
      "\n"
      "Please rate the review on a 5-point scale (1 = very poor, 5 = excellent):\n"
      "- Authenticity: genuine, human-written tone.\n"
      "- Helpfulness: useful to potential buyers.\n"
      "- Specificity: concrete product details.\n"
      "- Readability: clear and coherent.\n"
      "\n"
      "Important guidelines:\n"
      "- Empty or very short reviews should score lower.\n"
      "- Generic or superlative-only language lowers authenticity.\n"
      "- Consider whether the review is actionable.\n"
      "- Judge coherence and grammar quality.\n"
      "\n"
      "Provide your evaluation in JSON below.\n"
      "{{\n"
      "    \"authenticity\": <1-5>,\n"
      "    \"helpfulness\":  <1-5>,\n"
      "    \"specificity\":  <1-5>,\n"
      "    \"readability\":  <1-5>,\n"
      "    \"reasoning\":    \"<brief explanation>\"\n"
      "}}\n",
      {"category", "book_id", "user_id", "rating", "review_text"}};
  return tmpl;
}

inline const PromptTemplate& goodreads_judge_template() {
  static const PromptTemplate tmpl{
      "judge-goodreads-v1",
      "You are evaluating the quality of a Goodreads book review for {book_title}.\n"
      "Book ID/ISBN: {book_id}\n"
      "User ID: {user_id}\n"
      "Rating: {rating}/5.0\n"
      "Review Text: \"{review_text}\"\n"
      "\n"
      "Please rate the review on a 5-point scale (1 = very poor, 5 = excellent):\n"
      "- Authenticity: genuine opinion.\n"
      "- Helpfulness: useful to readers.\n"
      "- Specificity: plot/character details.\n"
      "- Readability: clear and coherent.\n"
      "\n"
      "Important guidelines:\n"
      "- Empty or very short reviews should score lower.\n"
      "- Generic or superlative-only language lowers authenticity.\n"
      "- Consider whether the review is actionable.\n"
      "- Judge coherence and grammar quality.\n"
      "\n"
      "Provide your evaluation in JSON:\n"
      "{{\n"
      "    \"authenticity\": <1-5>,\n"
      "    \"helpfulness\":  <1-5>,\n"
      "    \"specificity\":  <1-5>,\n"
      "    \"readability\":  <1-5>,\n"
      "    \"reasoning\":    \"<brief explanation>\"\n"
      "}}\n",
      {"book_title", "book_id", "user_id", "rating", "review_text"}};
  return tmpl;
}

}  // namespace detail

/// Render the judge prompt for one review. `item_label` fills the Amazon
/// {category} / Goodreads {book_title} slot; when empty a generic label is
/// used. Unresolved placeholders are an error.
inline std::string render_judge_prompt(JudgeTemplate kind, const std::string& item_id,
                                       const std::string& user_id, double rating,
                                       const std::string& review,
                                       const std::string& item_label = "") {
  const bool amazon = kind == JudgeTemplate::amazon;
  const PromptTemplate& tmpl =
      amazon ? detail::amazon_judge_template() : detail::goodreads_judge_template();
  std::map<std::string, std::string> values;
  values[amazon ? "category" : "book_title"] =
      item_label.empty() ? (amazon ? "product" : "book") : item_label;
  values["book_id"] = item_id;
  values["user_id"] = user_id;
  values["rating"] = format_rating(rating);
  values["review_text"] = review;
  return render_template(tmpl, values);
}

namespace detail {

inline std::optional<double> score_value(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return std::nullopt;
  if (it->is_number()) return it->get<double>();
  if (it->is_string()) {
    try {
      std::size_t pos = 0;
      const std::string s = it->get<std::string>();
      const double v = std::stod(s, &pos);
      if (pos == s.size()) return v;
    } catch (...) {
    }
  }
  return std::nullopt;
}

inline double clamp_score(double v) { return std::min(5.0, std::max(1.0, v)); }

// Extract the balanced {...} block starting at `open`, honoring strings.
inline std::optional<std::string> balanced_block(const std::string& text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\')
        ++i;
      else if (c == '"')
        in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    if (c == '{') ++depth;
    if (c == '}' && --depth == 0) return text.substr(open, i - open + 1);
  }
  return std::nullopt;
}

}  // namespace detail

/// Extract the first well-formed JSON object carrying all four score keys,
/// even when wrapped in prose. Scores are clamped to [1,5]; a missing
/// reasoning string becomes "". No parseable object: nullopt (the caller
/// records the failure and continues).
inline std::optional<JudgeScores> parse_judge_response(const std::string& text) {
  std::size_t pos = 0;
  while ((pos = text.find('{', pos)) != std::string::npos) {
    const auto block = detail::balanced_block(text, pos);
    if (!block) break;
    nlohmann::json j = nlohmann::json::parse(*block, nullptr, /*allow_exceptions=*/false);
    if (j.is_object()) {
      const auto a = detail::score_value(j, "authenticity");
      const auto h = detail::score_value(j, "helpfulness");
      const auto s = detail::score_value(j, "specificity");
      const auto r = detail::score_value(j, "readability");
      if (a && h && s && r) {
        JudgeScores scores;
        scores.authenticity = detail::clamp_score(*a);
        scores.helpfulness = detail::clamp_score(*h);
        scores.specificity = detail::clamp_score(*s);
        scores.readability = detail::clamp_score(*r);
        auto reasoning = j.find("reasoning");
        if (reasoning != j.end() && reasoning->is_string())
          scores.reasoning = reasoning->get<std::string>();
        return scores;
      }
    }
    ++pos;
  }
  return std::nullopt;
}

struct JudgeInput {
  std::string item_id;
  std::string user_id;
  double rating = 0.0;
  std::string review;
  std::string item_label;
};

struct JudgedReview {
  std::size_t index = 0;
  bool judged = false;
  JudgeScores mean;                 // arithmetic mean over seeds that parsed
  std::vector<JudgeScores> per_seed;
};

/// Judge each review once per seed and report the arithmetic per-dimension
/// mean. A review where every seed fails is marked unjudged.
inline std::vector<JudgedReview> judge_reviews(GenerationBackend& backend, JudgeTemplate kind,
                                               std::span<const JudgeInput> reviews,
                                               std::span<const std::uint64_t> seeds,
                                               TokenLedger* ledger = nullptr) {
  std::vector<JudgedReview> out;
  out.reserve(reviews.size());
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    const auto& review = reviews[i];
    JudgedReview result;
    result.index = i;
    for (const std::uint64_t seed : seeds) {
      const std::string prompt = render_judge_prompt(kind, review.item_id, review.user_id,
                                                     review.rating, review.review,
                                                     review.item_label);
      try {
        GenerationUsage usage;
        const std::string response = backend.generate(prompt, seed, usage);
        if (ledger) ledger->imputation.add(usage);
        if (auto scores = parse_judge_response(response)) result.per_seed.push_back(*scores);
      } catch (const std::exception&) {
        // failed seed; skip
      }
    }
    if (!result.per_seed.empty()) {
      result.judged = true;
      const auto n = static_cast<double>(result.per_seed.size());
      for (const auto& s : result.per_seed) {
        result.mean.authenticity += s.authenticity / n;
        result.mean.helpfulness += s.helpfulness / n;
        result.mean.specificity += s.specificity / n;
        result.mean.readability += s.readability / n;
      }
      result.mean.reasoning = result.per_seed.front().reasoning;
    }
    out.push_back(std::move(result));
  }
  return out;
}

/// Offline judge stand-in: deterministic scores from clipped affine functions
/// of review token count and type-token ratio, emitted as a prose-wrapped
/// JSON object (so the extraction path is exercised end to end).
class MockJudgeBackend final : public GenerationBackend {
 public:
  std::string name() const override { return "mock-judge"; }
  std::size_t max_new_tokens() const override { return 250; }
  bool deterministic() const override { return true; }

  std::string generate(const std::string& prompt, std::uint64_t /*seed*/,
                       GenerationUsage& usage) override {
    usage.prompt_tokens = count_tokens(prompt);
    const std::string review = extract_review(prompt);
    const auto tokens = tokenize(review);
    const double n = static_cast<double>(tokens.size());
    const std::set<std::string> distinct(tokens.begin(), tokens.end());
    const double ttr = tokens.empty() ? 0.0 : static_cast<double>(distinct.size()) / n;

    nlohmann::json j;
    j["authenticity"] = detail::clamp_score(1.0 + 0.15 * n * ttr);
    j["helpfulness"] = detail::clamp_score(1.0 + 0.10 * n);
    j["specificity"] = detail::clamp_score(1.0 + 4.0 * ttr * std::min(n, 20.0) / 20.0);
    j["readability"] = detail::clamp_score(tokens.empty() ? 1.0 : 2.0 + 0.08 * n);
    char reason[96];
    std::snprintf(reason, sizeof(reason), "tokens=%zu type_token_ratio=%.2f", tokens.size(), ttr);
    j["reasoning"] = reason;

    const std::string out = "Here is my evaluation.\n" + j.dump(2) + "\n";
    usage.completion_tokens = count_tokens(out);
    usage.seconds = static_cast<double>(usage.completion_tokens) * 0.005;
    return out;
  }

 private:
  static std::string extract_review(const std::string& prompt) {
    const std::string label = "Review Text: \"";
    const std::size_t start = prompt.find(label);
    if (start == std::string::npos) return {};
    const std::size_t from = start + label.size();
    std::size_t end = prompt.find("\"\n", from);
    if (end == std::string::npos) end = prompt.rfind('"');
    if (end == std::string::npos || end < from) return {};
    return prompt.substr(from, end - from);
  }
};

}  // namespace twister
