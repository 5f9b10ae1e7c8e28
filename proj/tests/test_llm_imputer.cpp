#include <catch2/catch_amalgamated.hpp>

#include "support/oracles.hpp"
#include "twister/llm_imputer.hpp"

using namespace twister;

namespace {

// Backend that always fails N times then succeeds; used for retry tests.
class FlakyBackend final : public GenerationBackend {
 public:
  explicit FlakyBackend(int failures) : failures_(failures) {}
  std::string name() const override { return "flaky"; }
  std::size_t max_new_tokens() const override { return 250; }
  bool deterministic() const override { return false; }
  std::string generate(const std::string& prompt, std::uint64_t seed,
                       GenerationUsage& usage) override {
    if (calls_++ < failures_) throw Error("boom");
    MockGenerationBackend mock;
    return mock.generate(prompt, seed, usage);
  }
  int calls() const { return calls_; }

 private:
  int failures_;
  int calls_ = 0;
};

class CountingBackend final : public GenerationBackend {
 public:
  std::string name() const override { return "counting"; }
  std::size_t max_new_tokens() const override { return 250; }
  bool deterministic() const override { return true; }
  std::string generate(const std::string& prompt, std::uint64_t seed,
                       GenerationUsage& usage) override {
    if (prompt.find("Focal interaction: ") != std::string::npos) ++aggregation_calls;
    else ++generation_calls;
    MockGenerationBackend mock;
    return mock.generate(prompt, seed, usage);
  }
  int aggregation_calls = 0;
  int generation_calls = 0;
};

BipartiteTEG small_fixture() {
  // u1: e0=(u1,i1,"great game. lots of fun."), e1=(u1,i2,"solid sequel.")
  // u2: e2=(u2,i1,"broken port."), e3=(u2,i3,no review)
  std::vector<InteractionRecord> records(4);
  records[0] = {"u1", "i1", 5.0, std::string("great game. lots of fun.")};
  records[1] = {"u1", "i2", 4.0, std::string("solid sequel.")};
  records[2] = {"u2", "i1", 2.0, std::string("broken port.")};
  records[3] = {"u2", "i3", 3.0, std::nullopt};
  return build_teg(records, {{"i1", "arcade racer"}, {"i2", "sequel racer"}});
}

}  // namespace

TEST_CASE("payload_text puts the review before the rating cue", "[llm]") {
  EdgePayload p{4.0, std::string("nice game. would buy.")};
  CHECK(payload_text(p) == "nice game. would buy. (rated 4.0/5.0)");
  EdgePayload rating_only{2.5, std::nullopt};
  CHECK(payload_text(rating_only) == "(rated 2.5/5.0)");
}

TEST_CASE("collect_context filters masked reviews and truncates by weight then id", "[llm]") {
  const auto teg = small_fixture();
  const auto view = user_view(teg);
  Mask mask;

  SECTION("isolated node returns nothing") {
    const auto item = item_view(teg);
    CHECK(collect_context(item, 3, mask).empty());  // i3 has one edge
  }
  SECTION("masked neighbor excluded") {
    mask.omega = {1};
    const auto ctx = collect_context(view, 0, mask);
    CHECK(ctx.empty());  // e1 was u1's only other edge
  }
  SECTION("cap keeps the best-weighted neighbor") {
    const auto item = item_view(teg);
    const auto ctx = collect_context(item, 0, mask, 1);
    REQUIRE(ctx.size() == 1);
    CHECK(ctx[0].find("broken port") != std::string::npos);
  }
}

TEST_CASE("mock aggregation copies focal and neighbor first sentences", "[llm]") {
  MockGenerationBackend backend;
  GenerationUsage usage;

  SECTION("no neighbors: summary contains the focal text") {
    const auto out = aggregate_user(backend, "great", {}, 1, usage);
    CHECK(out.find("great") != std::string::npos);
  }
  SECTION("two neighbors appear in order") {
    const std::vector<std::string> neighbors = {"first neighbor. tail.", "second neighbor. tail."};
    const auto out = aggregate_user(backend, "focal text. more.", neighbors, 1, usage);
    const auto a = out.find("first neighbor.");
    const auto b = out.find("second neighbor.");
    REQUIRE(a != std::string::npos);
    REQUIRE(b != std::string::npos);
    CHECK(out.find("focal text.") < a);
    CHECK(a < b);
    CHECK(out.find("tail") == std::string::npos);  // only first sentences
  }
  SECTION("deterministic across calls") {
    const std::vector<std::string> neighbors = {"n one.", "n two."};
    GenerationUsage u2;
    CHECK(aggregate_user(backend, "f.", neighbors, 9, usage) ==
          aggregate_user(backend, "f.", neighbors, 9, u2));
  }
}

TEST_CASE("build_edge_prompt renders ingredients exactly once with markers", "[llm]") {
  const auto bundle = build_edge_prompt(4.5, std::string("meta text"), std::string("item ctx"),
                                        std::string("user ctx"));
  CHECK(bundle.prompt.find("Rating: 4.5/5.0") != std::string::npos);
  CHECK(bundle.prompt.find("meta text") != std::string::npos);
  CHECK(bundle.prompt.find("item ctx") != std::string::npos);
  CHECK(bundle.prompt.find("user ctx") != std::string::npos);
  CHECK(bundle.ingredients.rating_cue == "4.5/5.0");

  const auto cold = build_edge_prompt(3.0, std::string("meta"), std::string("ctx"), std::nullopt);
  CHECK(cold.prompt.find(kNoUserContextMarker) != std::string::npos);

  PromptTemplate broken{"edge-broken", "Rating: {rating}/5.0\nReview:", {"rating", "metadata"}};
  CHECK_THROWS_AS(build_edge_prompt(3.0, std::string("m"), std::nullopt, std::nullopt, broken),
                  Error);
}

TEST_CASE("generate_review truncates, falls back, and counts tokens", "[llm]") {
  MockGenerationBackend tiny(5);
  const auto bundle = build_edge_prompt(4.0, std::string("a very long metadata description "
                                                         "with many words to copy"),
                                        std::nullopt, std::nullopt);
  const auto outcome = generate_review(tiny, bundle, 3);
  CHECK_FALSE(outcome.failed);
  CHECK(count_tokens(outcome.text) <= 5);

  // Persistent failure: fallback text derived from the rating cue.
  FlakyBackend dead(1000);
  const auto failed = generate_review(dead, bundle, 3, 3);
  CHECK(failed.failed);
  CHECK(failed.text == "Rated 4.0/5.0.");

  // One failure then success.
  FlakyBackend flaky(1);
  const auto ok = generate_review(flaky, bundle, 3, 3);
  CHECK_FALSE(ok.failed);
  CHECK(flaky.calls() == 2);
}

TEST_CASE("impute_variant validates required views before generating", "[llm]") {
  const auto teg = small_fixture();
  const auto mask = mask_uniform(teg, 0.5, 1);
  MockGenerationBackend backend;
  CHECK_THROWS_AS(
      impute_variant(Variant::llm_ui, teg, mask, nullptr, nullptr, backend, 1), Error);
  const auto users = user_view(teg);
  CHECK_THROWS_AS(
      impute_variant(Variant::llm_ui, teg, mask, &users, nullptr, backend, 1), Error);
  CHECK_THROWS_AS(
      impute_variant(Variant::llm_i, teg, mask, nullptr, &users, backend, 1), Error);
}

TEST_CASE("plain LLM issues zero aggregation calls; LLM-UI at most two per edge", "[llm]") {
  const auto teg = small_fixture();
  const auto mask = mask_uniform(teg, 0.5, 2);
  const auto users = user_view(teg);
  const auto items = item_view(teg);

  CountingBackend plain;
  const auto r0 = impute_variant(Variant::llm, teg, mask, nullptr, nullptr, plain, 1);
  CHECK(plain.aggregation_calls == 0);
  CHECK(plain.generation_calls == static_cast<int>(mask.omega.size()));
  CHECK(r0.edges == mask.omega);

  CountingBackend both;
  const auto r1 = impute_variant(Variant::llm_ui, teg, mask, &users, &items, both, 1);
  CHECK(both.aggregation_calls <= 2 * static_cast<int>(mask.omega.size()));
  CHECK(r1.edges == mask.omega);
}

TEST_CASE("plain LLM prompt carries rating and metadata only", "[llm]") {
  const auto teg = small_fixture();
  Mask mask;
  mask.omega = {0};
  MockGenerationBackend backend;
  std::vector<PromptBundle> audit;
  impute_variant(Variant::llm, teg, mask, nullptr, nullptr, backend, 1, {}, nullptr, &audit);
  REQUIRE(audit.size() == 1);
  CHECK(audit[0].template_id == "edge-basic-v1");
  CHECK(audit[0].prompt.find("Item context:") == std::string::npos);
  CHECK(audit[0].prompt.find("User context:") == std::string::npos);
  CHECK(audit[0].prompt.find("arcade racer") != std::string::npos);
}

TEST_CASE("cold-start user still completes under LLM-U", "[llm]") {
  // Two users; mask all of u1's edges so every user-side context is absent.
  std::vector<InteractionRecord> records(4);
  records[0] = {"u1", "i1", 4.0, std::string("alpha one.")};
  records[1] = {"u1", "i2", 3.0, std::string("alpha two.")};
  records[2] = {"u2", "i1", 5.0, std::string("beta one.")};
  records[3] = {"u2", "i2", 2.0, std::string("beta two.")};
  const auto teg = build_teg(records);
  Mask mask;
  mask.protocol = MaskProtocol::cold_start;
  mask.omega = {0, 1};

  const auto users = user_view(teg);
  MockGenerationBackend backend;
  ImputeRunStats stats;
  std::vector<PromptBundle> audit;
  const auto result =
      impute_variant(Variant::llm_u, teg, mask, &users, nullptr, backend, 1, {}, &stats, &audit);
  CHECK(result.edges == mask.omega);
  CHECK(stats.user_context_absent == mask.omega);
  for (const auto& bundle : audit)
    CHECK(bundle.prompt.find(kNoUserContextMarker) != std::string::npos);
  for (const auto& text : result.texts) CHECK_FALSE(text.empty());
}

TEST_CASE("mask discipline: no prompt contains masked review text", "[llm]") {
  auto base = oracles::random_teg(6, 6, 24, 51);
  auto mask = mask_uniform(base, 0.5, 9);
  std::vector<InteractionRecord> records;
  for (EdgeId e = 0; e < base.n_edges(); ++e) {
    const auto& edge = base.edge(e);
    InteractionRecord rec;
    rec.user_id = base.user_name(edge.user);
    rec.item_id = base.item_name(edge.item);
    rec.rating = edge.payload.rating;
    rec.review = mask.contains(e) ? "sentineltoken hidden words" : "ordinary visible words";
    records.push_back(rec);
  }
  const auto teg = build_teg(records);
  const auto users = user_view(teg);
  const auto items = item_view(teg);
  MockGenerationBackend backend;
  std::vector<PromptBundle> audit;
  const auto result =
      impute_variant(Variant::llm_ui, teg, mask, &users, &items, backend, 3, {}, nullptr, &audit);
  for (const auto& bundle : audit) {
    CHECK(bundle.prompt.find("sentineltoken") == std::string::npos);
    if (bundle.ingredients.user_context)
      CHECK(bundle.ingredients.user_context->find("sentineltoken") == std::string::npos);
    if (bundle.ingredients.item_context)
      CHECK(bundle.ingredients.item_context->find("sentineltoken") == std::string::npos);
  }
  for (const auto& text : result.texts)
    CHECK(text.find("sentineltoken") == std::string::npos);
}

TEST_CASE("one-hop discipline: contexts come from adjacent edges only", "[llm]") {
  const auto teg = oracles::random_teg(5, 5, 15, 77);
  const auto users = user_view(teg);
  Mask mask;
  for (EdgeId e = 0; e < teg.n_edges(); ++e) {
    const auto ctx = collect_context(users, e, mask);
    const auto row = neighbors(users, e);
    CHECK(ctx.size() <= row.size());
  }
}

TEST_CASE("impute_variant is byte-identical across worker counts", "[llm]") {
  const auto teg = oracles::random_teg(8, 8, 40, 66);
  const auto mask = mask_uniform(teg, 0.5, 4);
  const auto users = user_view(teg);
  const auto items = item_view(teg);
  MockGenerationBackend backend;

  LlmImputerOptions seq;
  seq.n_workers = 1;
  LlmImputerOptions par;
  par.n_workers = 3;

  ImputeRunStats stats_seq, stats_par;
  const auto a =
      impute_variant(Variant::llm_ui, teg, mask, &users, &items, backend, 12, seq, &stats_seq);
  const auto b =
      impute_variant(Variant::llm_ui, teg, mask, &users, &items, backend, 12, par, &stats_par);
  CHECK(a.texts == b.texts);
  CHECK(a.edges == b.edges);
  CHECK(stats_seq.ledger.imputation.total_tokens == stats_par.ledger.imputation.total_tokens);
  CHECK(stats_seq.ledger.user_aggregation.total_seconds ==
        stats_par.ledger.user_aggregation.total_seconds);
}

TEST_CASE("assemble_completed_reviews preserves observed bytes", "[llm]") {
  const auto teg = small_fixture();
  Mask mask;
  mask.omega = {1};
  MockGenerationBackend backend;
  const auto users = user_view(teg);
  const auto result = impute_variant(Variant::llm_u, teg, mask, &users, nullptr, backend, 5);
  const auto completed = assemble_completed_reviews(teg, mask, result);

  CHECK(completed.reviews[0].value() == "great game. lots of fun.");
  CHECK(completed.reviews[2].value() == "broken port.");
  CHECK(completed.imputed[1]);
  CHECK_FALSE(completed.reviews[3].has_value());  // natively absent, unmasked
  CHECK(completed.review_count() == 3);

  SECTION("empty mask returns the input reviews") {
    Mask none;
    const auto blank = impute_blank(teg, none);
    const auto same = assemble_completed_reviews(teg, none, blank);
    CHECK(same.review_count() == 3);
    CHECK_FALSE(same.imputed[0]);
  }
  SECTION("missing edges are an error listing them") {
    Mask wider;
    wider.omega = {1, 3};
    CHECK_THROWS_WITH(assemble_completed_reviews(teg, wider, result),
                      Catch::Matchers::ContainsSubstring("3"));
  }
}

TEST_CASE("token ledger renders the accounting table", "[llm]") {
  const auto teg = small_fixture();
  const auto mask = mask_uniform(teg, 0.5, 3);
  const auto users = user_view(teg);
  const auto items = item_view(teg);
  MockGenerationBackend backend;
  ImputeRunStats stats;
  impute_variant(Variant::llm_ui, teg, mask, &users, &items, backend, 2, {}, &stats);
  CHECK(stats.ledger.imputation.count == mask.omega.size());
  const auto table = stats.ledger.to_table();
  CHECK(table.find("User Agg") != std::string::npos);
  CHECK(table.find("Item Agg") != std::string::npos);
  CHECK(table.find("Imputation") != std::string::npos);
  CHECK(table.find("Avg Tokens") != std::string::npos);
}
