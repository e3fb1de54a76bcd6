#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "fixtures.hpp"
#include "igt/errors.hpp"
#include "igt/fusion.hpp"
#include "igt/toy.hpp"
#include "igt/workspace.hpp"

using namespace igt;

namespace {

Subgraph scoped_subgraph() {
  const RelationId r{0, false}, s{1, false};
  std::vector<SampledTriple> t = {
      {Triple{EntityId{0}, r, EntityId{1}}, TripleSet::HeadRelation, 1},
      {Triple{EntityId{1}, r, EntityId{2}}, TripleSet::HeadRelation, 2},
      {Triple{EntityId{0}, s, EntityId{3}}, TripleSet::Head, 1},
      {Triple{EntityId{3}, r, EntityId{4}}, TripleSet::Head, 2},
      {Triple{EntityId{5}, r, EntityId{6}}, TripleSet::Relation, 1},
  };
  return make_subgraph(EntityId{0}, r, t);
}

EmbeddingCache sample_cache() {
  EmbeddingCache c;
  c.flags = kEmbeddingMeanPooled;
  c.width = 3;
  c.entities[0] = Vec::Constant(3, 0.5);
  c.entities[2] = Vec::LinSpaced(3, -1, 1);
  c.relations[1] = Vec::Constant(3, 2.0);
  c.pairs[{0, 1}] = Vec::Constant(3, -0.25);
  return c;
}

void write_bytes(const std::filesystem::path& p, const std::string& bytes) {
  std::ofstream(p, std::ios::binary) << bytes;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("relation scopes") {
  CHECK(parse_scope("r") == RelationScope::Target);
  CHECK(parse_scope("mr_l") == RelationScope::Local);
  CHECK(parse_scope("mr_g") == RelationScope::Global);
  CHECK_THROWS_AS(parse_scope("mr"), ConfigError);
  CHECK(std::string(scope_name(RelationScope::Local)) == "mr_l");

  const auto sg = scoped_subgraph();
  const auto rel_pos = [&](std::size_t triple) { return sg.positions[triple].relation; };
  CHECK(relation_context_positions(sg, RelationScope::Target) == std::vector<std::size_t>{rel_pos(0)});
  CHECK(relation_context_positions(sg, RelationScope::Local) ==
        std::vector<std::size_t>{rel_pos(0), rel_pos(1), rel_pos(2), rel_pos(4)});
  CHECK(relation_context_positions(sg, RelationScope::Global) ==
        std::vector<std::size_t>{rel_pos(0), rel_pos(1), rel_pos(2), rel_pos(4), rel_pos(5)});
}

TEST_CASE("target scope passes the token row through") {
  Rng rng(1);
  const auto sg = scoped_subgraph();
  const Mat states = gaussian(static_cast<Eigen::Index>(sg.size()), 4, 1.0, rng);
  PoolingOperator pool("p", ParamGroup::Other, 4, 4, rng);
  const Vec v = pool_relation_context(states, sg, RelationScope::Target, pool);
  CHECK((v - states.row(static_cast<Eigen::Index>(sg.relation_position()))).isZero());
}

TEST_CASE("fuse") {
  Vec a(2), b(2);
  a << 1.0, 2.0;
  b << 0.1, 0.3;
  CHECK(fuse(a, b, 0.0) == a);
  CHECK(fuse(a, b, 1.0) == b);
  const Vec half = fuse(a, b, 0.5);
  CHECK(half(0) == doctest::Approx(0.55));
  CHECK(half(1) == doctest::Approx(1.15));
  CHECK_THROWS_AS(fuse(a, Vec::Zero(3), 0.5), ContractError);
  CHECK(concat_classifier_input(a, b).size() == 4);

  FusionConfig fc;
  fc.lambda = 1.5;
  CHECK_THROWS_AS(fc.validate(), ConfigError);
}

TEST_CASE("IGTEMB1 round trip") {
  fixture::TempDir dir("emb");
  const auto c = sample_cache();
  write_embedding_cache(dir / "c.bin", c);
  const auto back = read_embedding_cache(dir / "c.bin");
  CHECK(back.flags == c.flags);
  CHECK(back.width == 3);
  CHECK(back.record_count() == 4);
  CHECK(back.entities.at(2).isApprox(c.entities.at(2)));
  CHECK(back.pairs.at({0, 1})(0) == -0.25);

  const auto bytes = read_bytes(dir / "c.bin");
  CHECK(bytes.size() == 7 + 1 + 8 + 8 + 4 * (1 + 8 + 8 + 3 * 4));
  CHECK(bytes.substr(0, 7) == "IGTEMB1");
}

TEST_CASE("IGTEMB1 rejects corruption") {
  fixture::TempDir dir("embbad");
  write_embedding_cache(dir / "c.bin", sample_cache());
  const auto good = read_bytes(dir / "c.bin");
  const std::size_t header = 7 + 1 + 8 + 8;
  const std::size_t record = 1 + 8 + 8 + 12;

  auto rejects = [&](std::string bytes) {
    write_bytes(dir / "x.bin", bytes);
    CHECK_THROWS_AS(read_embedding_cache(dir / "x.bin"), FormatError);
  };
  std::string magic = good;
  magic[0] = 'X';
  rejects(magic);
  rejects(good.substr(0, good.size() - 1));
  rejects(good + "z");
  std::string kind = good;
  kind[header] = 7;
  rejects(kind);
  std::string dup = good;
  dup.replace(header + record, record, good.substr(header, record));
  rejects(dup);
  std::string nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  nan.replace(header + 17, 4, reinterpret_cast<const char*>(&q), 4);
  rejects(nan);
  std::string id2 = good;
  id2[header + 9] = 1;  // entity record with a nonzero second id
  rejects(id2);
}

TEST_CASE("cache provider") {
  CacheProvider p(sample_cache());
  CHECK(p.width() == 3);
  CHECK_FALSE(p.accepts_fused_inputs());
  const auto base = p.base(EntityId{1}, RelationId::from_flat(1), nullptr);
  CHECK(base.entity.isZero());
  CHECK(base.relation(0) == 2.0);
  CHECK(p.last_hidden(EntityId{0}, RelationId::from_flat(1), Vec(), Vec(), nullptr)(0) == -0.25);
  CHECK_THROWS_AS(p.last_hidden(EntityId{1}, RelationId::from_flat(1), Vec(), Vec(), nullptr),
                  LookupError);
}

TEST_CASE("cache provider only supports lambda zero") {
  fixture::TempDir dir("embmodel");
  const auto ws = make_workspace(make_toy_dataset());
  EmbeddingCache c;
  c.width = 4;
  for (std::uint32_t e = 0; e < ws.graph.entity_count(); ++e) c.entities[e] = Vec::Constant(4, 0.1);
  for (const auto& t : ws.data.train) {
    c.pairs[{t.head.index, t.relation.flat()}] = Vec::Constant(4, 0.2);
    c.pairs[{t.tail.index, t.relation.inverted().flat()}] = Vec::Constant(4, 0.3);
  }
  write_embedding_cache(dir / "c.bin", c);

  TrainConfig tc = toy_train_config(3);
  tc.model.provider = "cache";
  tc.model.fusion.lambda = 0.5;
  CHECK_THROWS_AS(build_model(tc, ws, dir / "c.bin"), ConfigError);
  tc.model.fusion.lambda = 0.0;
  auto model = build_model(tc, ws, dir / "c.bin");
  CHECK(model->provider->kind() == "cache");
  const auto& t = ws.data.train.front();
  SamplerConfig sc;
  Rng rng(1);
  const auto sg = extract_subgraph(ws.graph, t.head, t.relation, t.tail, sc, rng);
  const auto b = model->loss(sg, t.tail);
  CHECK(std::isfinite(b.total));
}

TEST_CASE("stub provider prompt") {
  const auto tpl = prompt_template();
  CHECK(std::count(tpl.begin(), tpl.end(), "[H]") >= 1);
  CHECK(std::count(tpl.begin(), tpl.end(), "{r}") == 1);

  const auto ws = make_workspace(make_toy_dataset());
  StubProviderConfig cfg;
  cfg.d_llm = 8;
  cfg.n_layers = 1;
  cfg.n_heads = 2;
  cfg.d_ff = 8;
  Rng rng(2);
  StubPromptProvider stub(ws.catalog, cfg, rng);
  const auto ids = stub.prompt_ids(EntityId{0}, RelationId{0, false});
  const auto h_slot = stub.vocabulary().at("[H]");
  CHECK(std::count(ids.begin(), ids.end(), h_slot) ==
        std::count(tpl.begin(), tpl.end(), "[H]"));
  CHECK(ids.size() > tpl.size());

  auto tape = stub.new_tape();
  const auto base = stub.base(EntityId{0}, RelationId{0, false}, tape.get());
  CHECK(base.entity.size() == 8);
  const Vec out = stub.last_hidden(EntityId{0}, RelationId{0, false}, base.entity, base.relation,
                                   tape.get());
  CHECK(out.size() == 8);
  CHECK(out.allFinite());

  StubProviderConfig bad = cfg;
  bad.n_heads = 3;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
