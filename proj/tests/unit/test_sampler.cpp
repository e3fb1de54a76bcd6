#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fixtures.hpp"
#include "igt/errors.hpp"
#include "igt/sampler.hpp"

using namespace igt;
using fixture::ent;
using fixture::rel;

namespace {

std::set<std::string> tails(const KnowledgeGraph& kg, const std::vector<SampledTriple>& s) {
  std::set<std::string> out;
  for (const auto& x : s) out.insert(kg.entity_name(x.triple.tail));
  return out;
}

std::set<Triple> triples(const std::vector<SampledTriple>& s) {
  std::set<Triple> out;
  for (const auto& x : s) out.insert(x.triple);
  return out;
}

std::set<std::uint32_t> ids(const std::vector<EntityId>& v) {
  std::set<std::uint32_t> out;
  for (auto e : v) out.insert(e.index);
  return out;
}

Triple tri(const KnowledgeGraph& kg, const char* h, const char* r, const char* t) {
  return {ent(kg, h), rel(kg, r), ent(kg, t)};
}

KnowledgeGraph random_graph(std::uint64_t seed, std::size_t n_ent, std::size_t n_rel,
                            std::size_t n) {
  Rng rng(seed);
  std::vector<std::string> lines;
  for (std::size_t i = 0; i < n; ++i) {
    lines.push_back("e" + std::to_string(uniform_index(rng, n_ent)) + " r" +
                    std::to_string(uniform_index(rng, n_rel)) + " e" +
                    std::to_string(uniform_index(rng, n_ent)));
  }
  return fixture::graph(lines, true);
}

}  // namespace

TEST_CASE("T_hr ring one") {
  Rng rng(1);
  auto lone = fixture::graph({"h r t"}, false);
  CHECK(sample_hr_neighbors(lone, ent(lone, "h"), rel(lone, "r"), ent(lone, "t"), 5, 1, rng)
            .empty());

  auto kg = fixture::graph({"h r t", "h r x", "h r y"}, false);
  auto s = sample_hr_neighbors(kg, ent(kg, "h"), rel(kg, "r"), ent(kg, "t"), 5, 1, rng);
  CHECK(tails(kg, s) == std::set<std::string>{"x", "y"});
  for (const auto& x : s) {
    CHECK(x.ring == 1);
    CHECK(x.set == TripleSet::HeadRelation);
  }
}

TEST_CASE("T_hr prefers high-degree tails") {
  std::vector<std::string> lines = {"h r x", "h r y"};
  for (int i = 0; i < 8; ++i) lines.push_back("x s u" + std::to_string(i));
  auto kg = fixture::graph(lines, false);
  REQUIRE(kg.degree(ent(kg, "x")).total() == 9);
  REQUIRE(kg.degree(ent(kg, "y")).total() == 1);
  Rng rng(7);
  int x_hits = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto s = sample_hr_neighbors(kg, ent(kg, "h"), rel(kg, "r"), std::nullopt, 1, 1, rng);
    REQUIRE(s.size() == 1);
    x_hits += s[0].triple.tail == ent(kg, "x");
  }
  CHECK(std::abs(static_cast<double>(x_hits) / draws - 0.9) <= 0.02);
}

TEST_CASE("T_hr outer rings expand from ring-one entities") {
  auto kg = fixture::graph({"h r x", "x s y", "y s z"}, false);
  Rng rng(3);
  auto s = sample_hr_neighbors(kg, ent(kg, "h"), rel(kg, "r"), std::nullopt, 5, 2, rng);
  REQUIRE(s.size() == 2);
  CHECK(s[0].ring == 1);
  CHECK(s[1].ring == 2);
  CHECK(s[1].triple == tri(kg, "x", "s", "y"));
}

TEST_CASE("T_h ring one") {
  Rng rng(1);
  auto a = fixture::graph({"h r t", "h s u"}, false);
  CHECK(triples(sample_head_neighbors(a, ent(a, "h"), rel(a, "r"), 5, 1, rng)) ==
        std::set<Triple>{tri(a, "h", "s", "u")});

  auto b = fixture::graph({"h r t"}, false);
  CHECK(sample_head_neighbors(b, ent(b, "h"), rel(b, "r"), 5, 1, rng).empty());
}

TEST_CASE("T_h takes both directions") {
  Rng rng(2);
  auto kg = fixture::graph({"u s h", "h s v", "h q w"}, false);
  auto s = sample_head_neighbors(kg, ent(kg, "h"), rel(kg, "q"), 5, 1, rng);
  CHECK(triples(s) == std::set<Triple>{tri(kg, "u", "s", "h"), tri(kg, "h", "s", "v")});
}

TEST_CASE("T_r") {
  Rng rng(1);
  auto a = fixture::graph({"h r t", "a r b"}, false);
  CHECK(triples(sample_distant_relation(a, ent(a, "h"), ent(a, "t"), rel(a, "r"), 5, rng)) ==
        std::set<Triple>{tri(a, "a", "r", "b")});

  auto b = fixture::graph({"h r t", "a r t"}, false);
  CHECK(sample_distant_relation(b, ent(b, "h"), ent(b, "t"), rel(b, "r"), 5, rng).empty());

  std::vector<std::string> lines = {"h r t"};
  for (int i = 0; i < 8; ++i) lines.push_back("a" + std::to_string(i) + " r b" + std::to_string(i));
  auto c = fixture::graph(lines, false);
  auto s = sample_distant_relation(c, ent(c, "h"), ent(c, "t"), rel(c, "r"), 5, rng);
  CHECK(s.size() == 5);
  CHECK(triples(s).size() == 5);
}

TEST_CASE("extract_subgraph on a single-triple graph returns the target alone") {
  auto kg = fixture::graph({"h r t"}, true);
  SamplerConfig cfg;
  Rng rng(1);
  auto sg = extract_subgraph(kg, ent(kg, "h"), rel(kg, "r"), ent(kg, "t"), cfg, rng);
  CHECK(sg.triples.size() == 1);
  CHECK(sg.exhausted);
  CHECK(sg.size() == 3);
  CHECK(sg.tokens[sg.mask_position()].kind == TokenKind::Mask);
}

TEST_CASE("extract_subgraph Pos and Neg") {
  auto kg = fixture::graph({"h r t", "h r x", "h s u", "a r b"}, true);
  SamplerConfig cfg;
  cfg.m_hr = cfg.m_h = cfg.m_r = 1;
  Rng rng(5);
  auto sg = extract_subgraph(kg, ent(kg, "h"), rel(kg, "r"), ent(kg, "t"), cfg, rng);
  CHECK(ids(sg.pos_entities) == std::set<std::uint32_t>{ent(kg, "x").index});
  CHECK(ids(sg.neg_entities) == std::set<std::uint32_t>{ent(kg, "h").index, ent(kg, "u").index,
                                                         ent(kg, "a").index, ent(kg, "b").index});
  CHECK_FALSE(sg.exhausted);
  const auto dump = format_subgraph(sg, kg);
  CHECK(dump.rfind("TT\th\tr\t?\n", 0) == 0);
  CHECK(dump.find("POS:") != std::string::npos);
}

TEST_CASE("property: budget, partition, exclusion, determinism") {
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    auto kg = random_graph(seed, 30, 3, 120);
    SamplerConfig cfg;
    Rng qrng(seed * 31);
    for (int q = 0; q < 8; ++q) {
      const auto& target = kg.triple(uniform_index(qrng, kg.triple_count()));
      Rng r1(seed * 1000 + q), r2(seed * 1000 + q);
      auto sg = extract_subgraph(kg, target.head, target.relation, target.tail, cfg, r1);
      auto again = extract_subgraph(kg, target.head, target.relation, target.tail, cfg, r2);
      CHECK(sg.tokens == again.tokens);

      // Budget.
      CHECK(sg.triples.size() - 1 <= cfg.total());
      if (!sg.exhausted) CHECK(sg.triples.size() - 1 == cfg.total());

      // Partition of entity tokens.
      std::set<std::uint32_t> entity_tokens;
      for (const auto& t : sg.tokens) {
        if (t.kind == TokenKind::Entity) entity_tokens.insert(t.id);
      }
      auto pos = ids(sg.pos_entities), neg = ids(sg.neg_entities);
      for (auto p : pos) CHECK_FALSE(neg.contains(p));
      std::set<std::uint32_t> all = pos;
      all.insert(neg.begin(), neg.end());
      CHECK(all == entity_tokens);
      if (!pos.contains(target.head.index)) CHECK(neg.contains(target.head.index));

      // Exclusion: the target fact never leaks, T_hr ring one never names the gold
      // tail, and T_r avoids both query endpoints.
      std::set<Triple> seen;
      for (std::size_t i = 1; i < sg.triples.size(); ++i) {
        const auto& s = sg.triples[i];
        const Triple canon = s.triple.relation.inverse ? s.triple.inverted() : s.triple;
        CHECK(seen.insert(canon).second);
        CHECK(s.triple != target);
        CHECK(s.triple != target.inverted());
        if (s.set == TripleSet::HeadRelation && s.ring == 1) CHECK(s.triple.tail != target.tail);
        if (s.set == TripleSet::Relation && s.ring == 1) {
          CHECK(s.triple.head != target.head);
          CHECK(s.triple.tail != target.head);
          CHECK(s.triple.head != target.tail);
          CHECK(s.triple.tail != target.tail);
        }
      }
    }
  }
}

TEST_CASE("property: degree-weighted selection passes a chi-square test") {
  // Ring-one candidates x1..x4 with total degree 1..4.
  std::vector<std::string> lines;
  for (int k = 1; k <= 4; ++k) {
    lines.push_back("h r x" + std::to_string(k));
    for (int j = 1; j < k; ++j) lines.push_back("x" + std::to_string(k) + " s y" + std::to_string(k * 10 + j));
  }
  auto kg = fixture::graph(lines, false);
  std::map<std::uint32_t, int> counts;
  Rng rng(11);
  const int draws = 20000;
  for (int i = 0; i < draws; ++i) {
    auto s = sample_hr_neighbors(kg, ent(kg, "h"), rel(kg, "r"), std::nullopt, 1, 1, rng);
    ++counts[s.at(0).triple.tail.index];
  }
  double chi2 = 0;
  for (int k = 1; k <= 4; ++k) {
    const double expected = draws * k / 10.0;
    const double observed = counts[ent(kg, ("x" + std::to_string(k)).c_str()).index];
    chi2 += (observed - expected) * (observed - expected) / expected;
  }
  CHECK(chi2 < 11.345);  // chi-square, 3 dof, p = 0.01
}

TEST_CASE("ring-one pool sizes and saturation") {
  auto kg = fixture::graph({"h r t", "h r x", "h s u", "v q h", "a r b", "c r t"}, true);
  auto p = ring1_pool_sizes(kg, ent(kg, "h"), rel(kg, "r"), ent(kg, "t"));
  CHECK(p.head_relation == 1);
  CHECK(p.head == 2);
  CHECK(p.relation == 1);
  SamplerConfig cfg;
  cfg.m_hr = 1;
  cfg.m_h = 2;
  cfg.m_r = 1;
  CHECK(saturated(p, cfg));
  cfg.m_r = 2;
  CHECK_FALSE(saturated(p, cfg));
}

TEST_CASE("sampler config validation") {
  SamplerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.radius = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.radius = 1;
  cfg.m_hr = cfg.m_h = cfg.m_r = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
