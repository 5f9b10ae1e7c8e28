#pragma once

#include <string>
#include <vector>

#include "twister/embedding.hpp"

namespace twister {

namespace detail {

inline std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.empty() || b.empty()) return 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace detail

/// ROUGE-L F1 over word tokens: P = LCS/|hyp|, R = LCS/|ref|,
/// F1 = 2PR/(P+R); 0 when both sides are empty.
inline double rouge_l(std::string_view hypothesis, std::string_view reference) {
  const auto hyp = tokenize(hypothesis);
  const auto ref = tokenize(reference);
  if (hyp.empty() && ref.empty()) return 0.0;
  if (hyp.empty() || ref.empty()) return 0.0;
  const auto lcs = static_cast<double>(detail::lcs_length(hyp, ref));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(hyp.size());
  const double r = lcs / static_cast<double>(ref.size());
  return 2.0 * p * r / (p + r);
}

struct FidelityPair {
  EdgeId edge = 0;
  double rouge = 0.0;
  double cosine = 0.0;
};

struct FidelityReport {
  double mean_rouge = 0.0;
  double mean_cosine = 0.0;
  std::vector<FidelityPair> pairs;  // per-edge table, ascending edge id
};

/// Compare imputed texts against ground-truth masked reviews, paired by edge
/// id. This is the evaluation privilege: masked ground truth is readable
/// here and nowhere upstream. Missing pairs are an error listing the edges.
inline FidelityReport semantic_fidelity(
    const std::vector<std::pair<EdgeId, std::string>>& imputed,
    const std::vector<std::pair<EdgeId, std::string>>& ground_truth, EmbeddingBackend& backend) {
  std::map<EdgeId, const std::string*> truth;
  for (const auto& [e, text] : ground_truth) truth[e] = &text;

  std::vector<EdgeId> missing;
  for (const auto& [e, text] : imputed)
    if (!truth.count(e)) missing.push_back(e);
  if (!missing.empty()) {
    std::string msg = "semantic_fidelity: missing ground truth for edges:";
    for (EdgeId e : missing) msg += " " + std::to_string(e);
    throw Error(msg);
  }

  FidelityReport report;
  std::vector<std::string> texts;
  texts.reserve(imputed.size() * 2);
  for (const auto& [e, text] : imputed) {
    texts.push_back(text);
    texts.push_back(*truth[e]);
  }
  const EmbeddingMatrix m = embed(backend, texts);

  double sum_rouge = 0.0, sum_cos = 0.0;
  for (std::size_t i = 0; i < imputed.size(); ++i) {
    FidelityPair pair;
    pair.edge = imputed[i].first;
    pair.rouge = rouge_l(imputed[i].second, *truth[pair.edge]);
    pair.cosine = cosine(m.row(2 * i), m.row(2 * i + 1));
    sum_rouge += pair.rouge;
    sum_cos += pair.cosine;
    report.pairs.push_back(pair);
  }
  std::sort(report.pairs.begin(), report.pairs.end(),
            [](const FidelityPair& a, const FidelityPair& b) { return a.edge < b.edge; });
  if (!report.pairs.empty()) {
    report.mean_rouge = sum_rouge / static_cast<double>(report.pairs.size());
    report.mean_cosine = sum_cos / static_cast<double>(report.pairs.size());
  }
  return report;
}

}  // namespace twister
