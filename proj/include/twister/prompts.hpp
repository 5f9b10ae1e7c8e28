#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "twister/common.hpp"

namespace twister {

// Fixed markers substituted for absent prompt ingredients.
inline constexpr std::string_view kNoMetadataMarker = "(no item metadata available)";
inline constexpr std::string_view kNoItemContextMarker = "(no item context available)";
inline constexpr std::string_view kNoUserContextMarker = "(no user context available)";

/// A versioned prompt template with {name} placeholders. `required` lists the
/// placeholders that must appear in the text; violations are load-time
/// errors.
struct PromptTemplate {
  std::string id;
  std::string text;
  std::vector<std::string> required;
};

inline void validate_template(const PromptTemplate& tmpl) {
  for (const auto& name : tmpl.required) {
    if (tmpl.text.find("{" + name + "}") == std::string::npos)
      throw Error("template " + tmpl.id + " missing placeholder {" + name + "}");
  }
}

/// Substitute {name} placeholders; {{ and }} escape literal braces. A
/// placeholder with no supplied value is an error; supplied values without a
/// placeholder are ignored by rendering (the caller decides whether that is
/// allowed).
inline std::string render_template(const PromptTemplate& tmpl,
                                   const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.text.size());
  std::size_t i = 0;
  while (i < tmpl.text.size()) {
    const char c = tmpl.text[i];
    if ((c == '{' || c == '}') && i + 1 < tmpl.text.size() && tmpl.text[i + 1] == c) {
      out.push_back(c);
      i += 2;
      continue;
    }
    if (c == '{') {
      const std::size_t close = tmpl.text.find('}', i);
      if (close == std::string::npos)
        throw Error("template " + tmpl.id + ": unterminated placeholder");
      const std::string name = tmpl.text.substr(i + 1, close - i - 1);
      auto it = values.find(name);
      if (it == values.end())
        throw Error("template " + tmpl.id + ": unresolved placeholder {" + name + "}");
      out += it->second;
      i = close + 1;
    } else {
      out.push_back(c);
      ++i;
    }
  }
  return out;
}

// Built-in templates. The mock generation backend relies on the
// "Focal interaction:" / "Neighbor interaction:" / "Rating:" /
// "Item context:" / "Item metadata:" line labels below.

inline const PromptTemplate& user_aggregation_template() {
  static const PromptTemplate tmpl{
      "agg-user-v1",
      "Summarize this user's reviewing voice and preferences in at most three sentences, "
      "grounded only in the interactions below.\n"
      "Focal interaction: {focal}\n"
      "{neighbors}"
      "Summary:",
      {"focal", "neighbors"}};
  return tmpl;
}

inline const PromptTemplate& item_aggregation_template() {
  static const PromptTemplate tmpl{
      "agg-item-v1",
      "Summarize what reviewers say about this item in at most three sentences, "
      "grounded only in the interactions below.\n"
      "Focal interaction: {focal}\n"
      "{neighbors}"
      "Summary:",
      {"focal", "neighbors"}};
  return tmpl;
}

/// Edge-generation template with the full ingredient list: rating cue, item
/// metadata, item context, user context.
inline const PromptTemplate& edge_template() {
  static const PromptTemplate tmpl{
      "edge-v1",
      "Write a first-person review consistent with the interaction details below.\n"
      "Rating: {rating}/5.0\n"
      "Item metadata: {metadata}\n"
      "Item context: {item_context}\n"
      "User context: {user_context}\n"
      "Review:",
      {"rating", "metadata", "item_context", "user_context"}};
  return tmpl;
}

/// Structure-free edge template: rating cue and item metadata only.
inline const PromptTemplate& edge_basic_template() {
  static const PromptTemplate tmpl{
      "edge-basic-v1",
      "Write a first-person review consistent with the interaction details below.\n"
      "Rating: {rating}/5.0\n"
      "Item metadata: {metadata}\n"
      "Review:",
      {"rating", "metadata"}};
  return tmpl;
}

/// Ingredient record retained for auditing: what actually flowed into the
/// rendered prompt.
struct PromptIngredients {
  std::string rating_cue;  // e.g. "4.5/5.0"
  std::optional<std::string> item_metadata;
  std::optional<std::string> item_context;  // aggregated item-side summary
  std::optional<std::string> user_context;  // aggregated user-side summary
};

struct PromptBundle {
  std::string template_id;
  std::string prompt;
  PromptIngredients ingredients;
};

/// Assemble the edge prompt. Absent ingredients render as fixed markers; an
/// ingredient supplied to a template that has no slot for it is an error
/// (every non-absent ingredient must appear exactly once).
inline PromptBundle build_edge_prompt(double rating, std::optional<std::string> item_metadata,
                                      std::optional<std::string> item_context,
                                      std::optional<std::string> user_context,
                                      const PromptTemplate& tmpl = edge_template()) {
  validate_template(tmpl);
  auto has_slot = [&](const char* name) {
    return tmpl.text.find(std::string("{") + name + "}") != std::string::npos;
  };
  if (item_metadata && !has_slot("metadata"))
    throw Error("build_edge_prompt: template " + tmpl.id + " has no metadata slot");
  if (item_context && !has_slot("item_context"))
    throw Error("build_edge_prompt: template " + tmpl.id + " has no item context slot");
  if (user_context && !has_slot("user_context"))
    throw Error("build_edge_prompt: template " + tmpl.id + " has no user context slot");

  PromptBundle bundle;
  bundle.template_id = tmpl.id;
  bundle.ingredients.rating_cue = format_rating(rating) + "/5.0";
  bundle.ingredients.item_metadata = item_metadata;
  bundle.ingredients.item_context = item_context;
  bundle.ingredients.user_context = user_context;

  std::map<std::string, std::string> values;
  values["rating"] = format_rating(rating);
  if (has_slot("metadata"))
    values["metadata"] = item_metadata ? *item_metadata : std::string(kNoMetadataMarker);
  if (has_slot("item_context"))
    values["item_context"] = item_context ? *item_context : std::string(kNoItemContextMarker);
  if (has_slot("user_context"))
    values["user_context"] = user_context ? *user_context : std::string(kNoUserContextMarker);
  bundle.prompt = render_template(tmpl, values);
  return bundle;
}

/// Render an aggregation prompt from a focal payload and neighbor payloads.
inline std::string render_aggregation_prompt(const PromptTemplate& tmpl, const std::string& focal,
                                             std::span<const std::string> neighbor_payloads) {
  validate_template(tmpl);
  std::string neighbors;
  for (const auto& n : neighbor_payloads) neighbors += "Neighbor interaction: " + n + "\n";
  return render_template(tmpl, {{"focal", focal}, {"neighbors", neighbors}});
}

}  // namespace twister
