#include <doctest.h>

#include <algorithm>

#include "igt/errors.hpp"
#include "igt/positions.hpp"
#include "oracles.hpp"

using namespace igt;

namespace {

SampledTriple st(std::uint32_t h, std::uint32_t r, std::uint32_t t,
                 TripleSet set = TripleSet::Head, std::uint32_t ring = 1) {
  return {Triple{EntityId{h}, RelationId::from_flat(r), EntityId{t}}, set, ring};
}

std::vector<std::vector<int>> grid(const DistanceMatrix& p) {
  std::vector<std::vector<int>> g(p.size(), std::vector<int>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = 0; j < p.size(); ++j) g[i][j] = p(i, j);
  return g;
}

std::vector<std::vector<int>> grid(const DistinctionMatrix& d) {
  std::vector<std::vector<int>> g(d.size(), std::vector<int>(d.size()));
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.size(); ++j) g[i][j] = d(i, j);
  return g;
}

Subgraph random_subgraph(Rng& rng) {
  const auto k = uniform_index(rng, 6);
  std::vector<SampledTriple> s;
  for (std::size_t i = 0; i < k; ++i) {
    s.push_back(st(static_cast<std::uint32_t>(uniform_index(rng, 5)),
                   static_cast<std::uint32_t>(uniform_index(rng, 4)),
                   static_cast<std::uint32_t>(uniform_index(rng, 5))));
  }
  return make_subgraph(EntityId{0}, RelationId{0, false}, s);
}

}  // namespace

TEST_CASE("single triple") {
  auto sg = make_subgraph(EntityId{0}, RelationId{0, false}, {});
  auto p = build_distance_matrix(sg);
  CHECK(grid(p) == std::vector<std::vector<int>>{{0, 1, 2}, {-1, 0, 1}, {-2, -1, 0}});
  auto d = build_distinction_matrix(sg, p);
  CHECK(grid(d) == std::vector<std::vector<int>>{{0, 1, 0}, {2, 3, 2}, {0, 1, 0}});
}

TEST_CASE("sibling relations are unreachable from each other") {
  // Target (0, r0, ?) and (0, r1, 1): both relation tokens hang off entity 0.
  auto sg = make_subgraph(EntityId{0}, RelationId{0, false}, {st(0, 2, 1)});
  auto p = build_distance_matrix(sg);
  const auto r0 = sg.positions[0].relation, r1 = sg.positions[1].relation;
  CHECK(p.is_g2g(r0, r1));
  CHECK(p.is_g2g(r1, r0));
  auto d = build_distinction_matrix(sg, p);
  CHECK(d.is_g2g(r0, r1));
  CHECK(d(sg.positions[0].head, sg.positions[1].tail) == kEntityEntity);

  DistinctionOptions all;
  all.share_g2g = false;
  auto full = build_distinction_matrix(sg, p, all);
  CHECK(full(r0, r1) == kRelationRelation);
}

TEST_CASE("chain distance") {
  // a -r-> b -s-> c as sampled triples behind the target (a, r, ?).
  auto sg = make_subgraph(EntityId{0}, RelationId{0, false},
                          {st(0, 0, 1, TripleSet::HeadRelation), st(1, 2, 2, TripleSet::HeadRelation, 2)});
  auto p = build_distance_matrix(sg);
  const auto a = *sg.entity_position(EntityId{0});
  const auto c = *sg.entity_position(EntityId{2});
  CHECK(p(a, c) == 4);
  CHECK(p(c, a) == -4);
}

TEST_CASE("bucketize") {
  BucketMap map;
  CHECK_NOTHROW(map.validate());
  CHECK(map.bucket(0) == 15);
  CHECK(map.bucket(15) == 30);
  CHECK(map.bucket(-15) == 0);
  CHECK(map.bucket(40) == 30);
  CHECK(map.bucket(-40) == 0);
  CHECK(map.bucket(kG2G) == 31);
  CHECK(map.beyond_range(16));
  CHECK_FALSE(map.beyond_range(kG2G));
  BucketMap bad{32, 16};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  auto sg = make_subgraph(EntityId{0}, RelationId{0, false}, {st(0, 2, 1)});
  auto p = build_distance_matrix(sg);
  auto d = build_distinction_matrix(sg, p);
  auto db = bucketize(d);
  std::vector<std::uint32_t> seen;
  for (std::size_t i = 0; i < sg.size(); ++i) {
    for (std::size_t j = 0; j < sg.size(); ++j) {
      const auto b = db(i, j);
      CHECK(b < kDistinctionBuckets);
      CHECK(b == (d.is_g2g(i, j) ? kDistinctionG2GBucket : static_cast<std::uint32_t>(d(i, j))));
      seen.push_back(b);
    }
  }
  std::sort(seen.begin(), seen.end());
  seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
  CHECK(seen == std::vector<std::uint32_t>{0, 1, 2, 3, 4});
  CHECK(db.beyond_range_count == 0);

  // A short exact range pushes the chain ends beyond it.
  auto chain = make_subgraph(EntityId{0}, RelationId{0, false},
                             {st(0, 0, 1, TripleSet::HeadRelation), st(1, 2, 2)});
  auto pb = bucketize(build_distance_matrix(chain), BucketMap{8, 3});
  CHECK(pb.beyond_range_count == 2);
}

TEST_CASE("mismatched P is rejected") {
  auto sg = make_subgraph(EntityId{0}, RelationId{0, false}, {st(0, 2, 1)});
  CHECK_THROWS_AS(build_distinction_matrix(sg, DistanceMatrix(2)), ContractError);
}

TEST_CASE("grid formatting marks unreachable pairs") {
  auto sg = make_subgraph(EntityId{0}, RelationId{0, false}, {st(0, 2, 1)});
  const auto text = format_grid(build_distance_matrix(sg));
  CHECK(text.find('G') != std::string::npos);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(sg.size()));
}

TEST_CASE("property: brute force on small layouts, antisymmetry, symmetric mask") {
  Rng rng(99);
  for (int trial = 0; trial < 300; ++trial) {
    auto sg = random_subgraph(rng);
    REQUIRE(sg.size() <= 12);
    auto p = build_distance_matrix(sg);
    auto d = build_distinction_matrix(sg, p);
    const auto ref = oracle::distance(sg);
    CHECK(grid(p) == ref);
    CHECK(grid(d) == oracle::distinction(sg, ref));
    for (std::size_t i = 0; i < sg.size(); ++i) {
      for (std::size_t j = 0; j < sg.size(); ++j) {
        CHECK(p.is_g2g(i, j) == p.is_g2g(j, i));
        if (!p.is_g2g(i, j)) CHECK(p(i, j) == -p(j, i));
      }
    }
  }
}

TEST_CASE("property: permuting the sampled triples relabels P") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SampledTriple> s;
    const auto k = 2 + uniform_index(rng, 4);
    for (std::size_t i = 0; i < k; ++i) {
      s.push_back(st(static_cast<std::uint32_t>(uniform_index(rng, 5)),
                     static_cast<std::uint32_t>(uniform_index(rng, 4)),
                     static_cast<std::uint32_t>(uniform_index(rng, 5))));
    }
    auto a = make_subgraph(EntityId{0}, RelationId{0, false}, s);
    std::reverse(s.begin(), s.end());
    auto b = make_subgraph(EntityId{0}, RelationId{0, false}, s);

    // Token identity: entity id, or (triple slot) for relation tokens and the mask.
    auto map_token = [&](std::size_t i) -> std::size_t {
      const auto& t = a.tokens[i];
      if (t.kind == TokenKind::Entity) return *b.entity_position(EntityId{t.id});
      if (t.kind == TokenKind::Mask) return b.mask_position();
      const std::size_t triple_b = t.triple == 0 ? 0 : k + 1 - t.triple;
      return b.positions[triple_b].relation;
    };
    auto pa = build_distance_matrix(a), pb = build_distance_matrix(b);
    const auto fwd = oracle::all_simple_path_minima(a);
    for (std::size_t i = 0; i < a.size(); ++i) {
      for (std::size_t j = 0; j < a.size(); ++j) {
        const auto bi = map_token(i), bj = map_token(j);
        CHECK(pa.is_g2g(i, j) == pb.is_g2g(bi, bj));
        if (pa.is_g2g(i, j)) continue;
        CHECK(std::abs(pa(i, j)) == std::abs(pb(bi, bj)));
        const bool tie = fwd[i][j] == fwd[j][i];
        if (!tie) CHECK(pa(i, j) == pb(bi, bj));
      }
    }
  }
}
