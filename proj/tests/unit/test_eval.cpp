#include <doctest.h>

#include <vector>

#include "igt/errors.hpp"
#include "igt/eval.hpp"
#include "igt/toy.hpp"
#include "igt/workspace.hpp"
#include "oracles.hpp"

using namespace igt;

namespace {

Vec scores(std::initializer_list<double> v) {
  Vec s(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) s(i++) = x;
  return s;
}

}  // namespace

TEST_CASE("metrics") {
  const std::vector<std::size_t> ranks = {1, 2, 4};
  CHECK(mrr(ranks) == doctest::Approx(0.5833).epsilon(1e-4));
  CHECK(hits_at_k(ranks, 3) == doctest::Approx(2.0 / 3.0));
  CHECK(hits_at_k(ranks, 1) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(mrr(std::vector<std::size_t>{}), ContractError);
  const auto b = summarize(ranks);
  CHECK(b.count == 3);
  CHECK(b.hits10 == 1.0);
  CHECK(summarize(std::vector<std::size_t>{}).count == 0);
}

TEST_CASE("rank with ties and filtering") {
  CHECK(rank_candidates(scores({0.2, 0.7, 0.1}), EntityId{1}) == 1);
  CHECK(rank_candidates(scores({0.7, 0.7, 0.1}), EntityId{0}) == 2);  // tied at the max
  // Gold (index 1) ties with index 2; index 0 is higher.
  CHECK(rank_candidates(scores({0.9, 0.5, 0.5, 0.1}), EntityId{1}) == 3);
  CHECK(rank_candidates(scores({0.1, 0.5, 0.5, 0.5}), EntityId{1}) == 2);
  CHECK(rank_candidates(scores({0.9, 0.5, 0.2}), EntityId{1}) == 2);
  CHECK(rank_candidates(scores({0.9, 0.5, 0.2}), EntityId{1}, {0}) == 1);
  CHECK(rank_candidates(scores({0.9, 0.5, 0.2}), EntityId{1}, {1}) == 2);  // gold never filtered
  CHECK_THROWS_AS(rank_candidates(scores({0.1}), EntityId{3}), LookupError);
}

TEST_CASE("property: rank equals the sorting oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto n = static_cast<Eigen::Index>(1 + uniform_index(rng, 50));
    Vec s(n);
    // Coarse values make ties common.
    for (Eigen::Index i = 0; i < n; ++i) s(i) = static_cast<double>(uniform_index(rng, 6));
    const auto gold = static_cast<std::uint32_t>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    std::unordered_set<std::uint32_t> known;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (uniform_index(rng, 4) == 0) known.insert(static_cast<std::uint32_t>(i));
    }
    CHECK(rank_candidates(s, EntityId{gold}, known) == oracle::rank(s, gold, known));
  }
}

TEST_CASE("property: filtering a higher true entity lowers the rank by one") {
  Rng rng(5);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index n = 20;
    Vec s(n);
    for (Eigen::Index i = 0; i < n; ++i) s(i) = uniform01(rng);
    const std::uint32_t gold = 3;
    std::uint32_t higher = n;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (s(i) > s(gold)) higher = i;
    }
    if (higher == n) continue;
    CHECK(rank_candidates(s, EntityId{gold}, {higher}) + 1 == rank_candidates(s, EntityId{gold}));
  }
}

TEST_CASE("diagnostics of single-triple inputs") {
  std::vector<Subgraph> sgs(3, make_subgraph(EntityId{0}, RelationId{0, false}, {}));
  const auto d = collect_diagnostics(sgs);
  CHECK(d.inputs == 3);
  CHECK(d.a_it == 1.0);
  CHECK(d.a_il == 3.0);
  CHECK(d.a_bbr == 0.0);
  DiagnosticsAccumulator empty;
  CHECK_THROWS_AS(empty.result(), ContractError);
}

TEST_CASE("filter index") {
  std::unordered_set<Triple, TripleHash> known = {
      {EntityId{0}, RelationId{0, false}, EntityId{1}},
      {EntityId{0}, RelationId{0, false}, EntityId{2}},
      {EntityId{1}, RelationId{0, true}, EntityId{0}},
  };
  FilterIndex f(known);
  CHECK(f.tails(EntityId{0}, RelationId{0, false}).size() == 2);
  CHECK(f.tails(EntityId{1}, RelationId{0, true}).contains(0));
  CHECK(f.tails(EntityId{5}, RelationId{0, false}).empty());
}

TEST_CASE("report JSON round trip") {
  EvalReport r;
  r.split = "valid";
  r.filtered = false;
  r.overall = MetricBlock{4, 0.5, 0.25, 0.5, 1.0};
  r.tail = MetricBlock{2, 0.75, 0.5, 1.0, 1.0};
  r.head = MetricBlock{2, 0.25, 0.0, 0.0, 1.0};
  r.diagnostics = Diagnostics{4, 16.0, 35.5, 0.0};
  r.rankings.push_back({EntityId{1}, RelationId{2, true}, EntityId{3}, 7, 0xabcdefULL});
  const auto back = report_from_json(report_json(r));
  CHECK(back.split == "valid");
  CHECK_FALSE(back.filtered);
  CHECK(back.overall.mrr == 0.5);
  CHECK(back.head.count == 2);
  CHECK(back.diagnostics.a_il == 35.5);
  REQUIRE(back.rankings.size() == 1);
  CHECK(back.rankings[0].relation == RelationId{2, true});
  CHECK(back.rankings[0].rank == 7);
  CHECK(back.rankings[0].scores_digest == 0xabcdefULL);
  CHECK_THROWS_AS(report_from_json("{not json"), FormatError);
  CHECK_THROWS_AS(report_from_json("{}"), FormatError);
  CHECK(report_text(r).find("valid") != std::string::npos);
}

TEST_CASE("evaluation on the toy graph is deterministic and well formed") {
  const auto ws = make_workspace(make_toy_dataset());
  auto cfg = toy_train_config(1);
  auto model = build_model(cfg, ws);
  EvalOptions opt;
  opt.sampler = cfg.sampler;
  opt.seed = 9;
  opt.max_triples = 10;
  opt.keep_rankings = true;
  const auto a = evaluate_ranking(*model, ws.graph, ws.data.valid, ws.filter, opt, "valid");
  const auto b = evaluate_ranking(*model, ws.graph, ws.data.valid, ws.filter, opt, "valid");
  CHECK(a.overall.count == 20);
  CHECK(a.tail.count == 10);
  CHECK(a.head.count == 10);
  CHECK(a.overall.mrr == b.overall.mrr);
  REQUIRE(a.rankings.size() == 20);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(a.rankings[i].scores_digest == b.rankings[i].scores_digest);
    CHECK(a.rankings[i].rank >= 1);
    CHECK(a.rankings[i].rank <= ws.graph.entity_count());
  }
  CHECK(a.overall.mrr > 0.0);
  CHECK(a.overall.mrr <= 1.0);
  CHECK(a.diagnostics.inputs == 20);

  opt.filtered = false;
  const auto raw = evaluate_ranking(*model, ws.graph, ws.data.valid, ws.filter, opt, "valid");
  CHECK(raw.overall.mrr <= a.overall.mrr);
}

TEST_CASE("training diagnostics on the toy graph") {
  const auto ws = make_workspace(make_toy_dataset());
  SamplerConfig sc;
  const auto d = training_diagnostics(ws.graph, sc, BucketMap{}, 200, 4);
  CHECK(d.overall.inputs == 200);
  CHECK(d.overall.a_it == 16.0);
  CHECK(d.overall.a_il >= 33.0);
  CHECK(d.overall.a_il <= 48.0);
  CHECK(d.overall.a_bbr == 0.0);
  const auto again = training_diagnostics(ws.graph, sc, BucketMap{}, 200, 4);
  CHECK(again.overall.a_il == d.overall.a_il);
}
