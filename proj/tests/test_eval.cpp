#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "twister/scorer.hpp"
#include "twister/text_metrics.hpp"

using namespace twister;

namespace {

// Scorer with pinned parameters so candidate scores are fully controlled.
EdgeScorer fixed_scorer(const BipartiteTEG& teg, unsigned rank, std::size_t dim) {
  EdgeScorer s;
  s.rank = rank;
  s.dim = dim;
  s.user_factors.assign(teg.n_users() * rank, 0.0);
  s.item_factors.assign(teg.n_items() * rank, 0.0);
  s.review_weights.assign(dim, 0.0);
  return s;
}

}  // namespace

TEST_CASE("rouge_l on the spec fixtures", "[eval]") {
  CHECK(rouge_l("the cat sat", "the cat sat") == Catch::Approx(1.0));
  CHECK(rouge_l("alpha beta", "gamma delta") == 0.0);
  CHECK(rouge_l("the cat", "the cat sat") == Catch::Approx(0.8));
  CHECK(rouge_l("the cat sat", "the cat") == Catch::Approx(0.8));
  CHECK(rouge_l("", "") == 0.0);
  CHECK(rouge_l("something", "") == 0.0);
}

TEST_CASE("rouge_l is F1-symmetric and matches the full-matrix LCS oracle", "[eval]") {
  Rng rng(41);
  const auto& vocab = lorem_vocabulary();
  for (int trial = 0; trial < 300; ++trial) {
    auto make = [&](std::size_t max_len) {
      std::string s;
      const std::size_t len = rng.below(max_len + 1);
      for (std::size_t i = 0; i < len; ++i) {
        if (!s.empty()) s.push_back(' ');
        s += vocab[rng.below(6)];  // small vocabulary forces overlaps
      }
      return s;
    };
    const std::string a = make(30), b = make(30);
    const auto ta = tokenize(a), tb = tokenize(b);
    const auto lcs = static_cast<double>(oracles::lcs_full_matrix(ta, tb));
    double expected = 0.0;
    if (lcs > 0.0) {
      const double p = lcs / static_cast<double>(ta.size());
      const double r = lcs / static_cast<double>(tb.size());
      expected = 2.0 * p * r / (p + r);
    }
    CHECK(rouge_l(a, b) == Catch::Approx(expected).margin(1e-12));
    CHECK(rouge_l(a, b) == Catch::Approx(rouge_l(b, a)).margin(1e-12));
  }
}

TEST_CASE("semantic_fidelity pairs by edge id", "[eval]") {
  HashingEmbedder backend(32);
  using Pair = std::pair<EdgeId, std::string>;
  const std::vector<Pair> truth = {{0, "alpha beta"}, {1, "gamma delta"}, {2, "epsilon"}};

  SECTION("perfect imputation scores (1, 1)") {
    const auto report = semantic_fidelity(truth, truth, backend);
    CHECK(report.mean_rouge == Catch::Approx(1.0));
    CHECK(report.mean_cosine == Catch::Approx(1.0));
  }
  SECTION("all-empty imputation scores (0, 0)") {
    const std::vector<Pair> empty = {{0, ""}, {1, ""}, {2, ""}};
    const auto report = semantic_fidelity(empty, truth, backend);
    CHECK(report.mean_rouge == 0.0);
    CHECK(report.mean_cosine == 0.0);  // zero-vector rule
  }
  SECTION("three-pair fixture equals the elementwise mean") {
    const std::vector<Pair> imputed = {{0, "alpha beta"}, {1, "gamma"}, {2, "zeta"}};
    const auto report = semantic_fidelity(imputed, truth, backend);
    double rouge_sum = 0.0, cos_sum = 0.0;
    for (std::size_t i = 0; i < imputed.size(); ++i) {
      rouge_sum += rouge_l(imputed[i].second, truth[i].second);
      const auto m = embed(backend, std::vector<std::string>{imputed[i].second, truth[i].second});
      cos_sum += cosine(m.row(0), m.row(1));
    }
    CHECK(report.mean_rouge == Catch::Approx(rouge_sum / 3.0));
    CHECK(report.mean_cosine == Catch::Approx(cos_sum / 3.0));
    REQUIRE(report.pairs.size() == 3);
  }
  SECTION("missing pair errors with the edge id") {
    const std::vector<Pair> imputed = {{0, "x"}, {7, "y"}};
    CHECK_THROWS_WITH(semantic_fidelity(imputed, truth, backend),
                      Catch::Matchers::ContainsSubstring("7"));
  }
}

TEST_CASE("train_edge_scorer separates a planted preference block", "[eval]") {
  BlockSynthParams params;
  params.n_users = 16;
  params.n_items = 24;
  params.n_blocks = 2;
  params.in_density = 0.6;
  params.cross_density = 0.05;
  params.seed = 9;
  const auto data = synth_block_teg(params);
  const auto teg = build_teg(data.records, data.item_metadata);
  REQUIRE(teg.n_edges() > 40);

  HashingEmbedder backend(32);
  std::vector<std::string> texts;
  for (EdgeId e = 0; e < teg.n_edges(); ++e)
    texts.push_back(teg.edge(e).payload.review.value_or(""));
  const auto z = embed(backend, texts);

  std::vector<EdgeId> train;
  for (EdgeId e = 0; e < teg.n_edges(); ++e) train.push_back(e);

  ScorerParams sp;
  sp.epochs = 40;
  std::vector<double> trace;
  const auto scorer = train_edge_scorer(teg, train, z, sp, 3, &trace);
  REQUIRE(trace.size() == sp.epochs);
  CHECK(trace.back() < trace.front());

  const auto metrics = rank_metrics(scorer, teg, train, z, 9, 10, 5);
  CHECK(metrics.auc > 0.95);

  SECTION("same seed gives identical parameters") {
    const auto again = train_edge_scorer(teg, train, z, sp, 3);
    CHECK(scorer.user_factors == again.user_factors);
    CHECK(scorer.item_factors == again.item_factors);
    CHECK(scorer.review_weights == again.review_weights);
    CHECK(scorer.bias == again.bias);
  }
  SECTION("zero epochs returns the initialization") {
    ScorerParams zp;
    zp.epochs = 0;
    const auto init = train_edge_scorer(teg, train, z, zp, 3);
    CHECK(init.bias == 0.0);
    bool any_nonzero = false;
    for (double v : init.user_factors) any_nonzero |= v != 0.0;
    CHECK(any_nonzero);  // seeded random init
  }
}

TEST_CASE("rank_metrics on a perfect scorer", "[eval]") {
  const auto teg = oracles::random_teg(4, 30, 12, 19);
  auto scorer = fixed_scorer(teg, 1, 4);
  scorer.review_weights.assign(4, 1.0);  // positives carry z = ones, negatives zero
  EmbeddingMatrix z(teg.n_edges(), 4);
  for (EdgeId e = 0; e < teg.n_edges(); ++e)
    z.set_row(e, std::vector<double>{1.0, 1.0, 1.0, 1.0});

  std::vector<EdgeId> test;
  for (EdgeId e = 0; e < teg.n_edges(); ++e) test.push_back(e);
  const auto metrics = rank_metrics(scorer, teg, test, z, 9, 10, 7);
  CHECK(metrics.acc == 1.0);
  CHECK(metrics.auc == 1.0);
  CHECK(metrics.mrr == 1.0);
  CHECK(metrics.ndcg == 1.0);
}

TEST_CASE("rank_metrics hand case: positive at rank 2 of 10", "[eval]") {
  // One user, one positive item, 9 negatives. Give exactly one negative a
  // higher score via its item factor.
  std::vector<InteractionRecord> records;
  records.push_back({"u1", "p", 5.0, std::nullopt});
  for (int i = 0; i < 9; ++i)
    records.push_back({"filler", "n" + std::to_string(i), 3.0, std::nullopt});
  const auto teg = build_teg(records);

  auto scorer = fixed_scorer(teg, 1, 2);
  // user factor 1 for u1; item factor boosts exactly one negative above the
  // positive's review contribution.
  scorer.user_factors[teg.user_index("u1").value()] = 1.0;
  scorer.item_factors[teg.item_index("n0").value()] = 5.0;
  scorer.item_factors[teg.item_index("p").value()] = 1.0;
  scorer.review_weights = {0.0, 0.0};

  EmbeddingMatrix z(teg.n_edges(), 2);
  const std::vector<EdgeId> test = {0};
  const auto metrics = rank_metrics(scorer, teg, test, z, 9, 10, 3);
  CHECK(metrics.mrr == Catch::Approx(0.5));
  CHECK(metrics.ndcg == Catch::Approx(1.0 / std::log2(3.0)).margin(1e-12));
  CHECK(metrics.acc == 0.0);
  CHECK(metrics.auc == Catch::Approx(8.0 / 9.0));
}

TEST_CASE("rank_metrics matches the exhaustive oracle on candidate lists <= 10", "[eval]") {
  // Drive the scorer with controlled scores through item factors for a
  // single user, sweeping many random score configurations.
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const unsigned n_neg = 1 + static_cast<unsigned>(rng.below(9));  // list size <= 10
    std::vector<InteractionRecord> records;
    records.push_back({"u1", "pos", 5.0, std::nullopt});
    for (unsigned i = 0; i < n_neg; ++i)
      records.push_back({"filler", "neg" + std::to_string(i), 3.0, std::nullopt});
    const auto teg = build_teg(records);

    auto scorer = fixed_scorer(teg, 1, 1);
    scorer.user_factors[teg.user_index("u1").value()] = 1.0;
    // quantized scores so ties actually occur
    const double pos_score = static_cast<double>(rng.below(4));
    scorer.item_factors[teg.item_index("pos").value()] = pos_score;
    std::vector<double> neg_scores;
    for (unsigned i = 0; i < n_neg; ++i) {
      const double s = static_cast<double>(rng.below(4));
      scorer.item_factors[teg.item_index("neg" + std::to_string(i)).value()] = s;
      neg_scores.push_back(s);
    }

    EmbeddingMatrix z(teg.n_edges(), 1);
    const auto metrics =
        rank_metrics(scorer, teg, std::vector<EdgeId>{0}, z, n_neg, std::min(10u, n_neg + 1), 1);
    const auto oracle = oracles::rank_metrics_from_scores(pos_score, neg_scores,
                                                          std::min(10u, n_neg + 1));
    CHECK(metrics.acc == oracle.acc);
    CHECK(metrics.auc == Catch::Approx(oracle.auc).margin(1e-15));
    CHECK(metrics.mrr == Catch::Approx(oracle.mrr).margin(1e-15));
    CHECK(metrics.ndcg == Catch::Approx(oracle.ndcg).margin(1e-15));
  }
}

TEST_CASE("random scorer AUC concentrates near one half", "[eval]") {
  double total = 0.0;
  int n_runs = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto teg = oracles::random_teg(10, 40, 60, seed);
    auto scorer = fixed_scorer(teg, 2, 4);
    Rng rng(seed * 3 + 1);
    for (auto& v : scorer.user_factors) v = rng.normal();
    for (auto& v : scorer.item_factors) v = rng.normal();
    for (auto& v : scorer.review_weights) v = rng.normal();

    EmbeddingMatrix z(teg.n_edges(), 4);
    Rng zr(seed * 5 + 2);
    for (EdgeId e = 0; e < teg.n_edges(); ++e)
      for (auto& v : z.mutable_row(e)) v = zr.normal();

    std::vector<EdgeId> test;
    for (EdgeId e = 0; e < teg.n_edges(); ++e) test.push_back(e);
    const auto metrics = rank_metrics(scorer, teg, test, z, 9, 10, seed);
    total += metrics.auc;
    ++n_runs;
  }
  CHECK(std::abs(total / n_runs - 0.5) < 0.05);
}

TEST_CASE("rank_metrics validates and skips unsampleable users", "[eval]") {
  const auto teg = oracles::random_teg(3, 3, 9, 2);  // complete: no negatives available
  const auto scorer = fixed_scorer(teg, 1, 1);
  EmbeddingMatrix z(teg.n_edges(), 1);
  CHECK_THROWS_AS(rank_metrics(scorer, teg, std::vector<EdgeId>{0}, z, 5, 10, 1), Error);
  const auto metrics = rank_metrics(scorer, teg, std::vector<EdgeId>{0}, z, 9, 10, 1);
  CHECK(metrics.skipped_edges == 1);
  CHECK(metrics.evaluated_edges == 0);
}
