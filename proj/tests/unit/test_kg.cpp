#include <doctest.h>

#include <fstream>

#include "fixtures.hpp"
#include "igt/errors.hpp"
#include "igt/kg.hpp"
#include "igt/rng.hpp"

using namespace igt;

namespace {

Dataset random_dataset(std::uint64_t seed, std::size_t n_ent, std::size_t n_rel, std::size_t n) {
  Rng rng(seed);
  Dataset d;
  for (std::size_t i = 0; i < n_ent; ++i) d.entities.add("e" + std::to_string(i));
  for (std::size_t i = 0; i < n_rel; ++i) d.relations.add("r" + std::to_string(i));
  auto pick = [&] {
    return Triple{EntityId{static_cast<std::uint32_t>(uniform_index(rng, n_ent))},
                  RelationId{static_cast<std::uint32_t>(uniform_index(rng, n_rel)), false},
                  EntityId{static_cast<std::uint32_t>(uniform_index(rng, n_ent))}};
  };
  for (std::size_t i = 0; i < n; ++i) d.train.push_back(pick());
  for (std::size_t i = 0; i < n / 10; ++i) d.valid.push_back(pick());
  for (std::size_t i = 0; i < n / 10; ++i) d.test.push_back(pick());
  d.entity_text["e0"] = "first entity";
  return d;
}

}  // namespace

TEST_CASE("parse_triples assigns dense ids in first-appearance order") {
  Vocabulary ents, rels;
  auto t = parse_triples("a\tr\tb\nb\tr\tc\n", ents, rels);
  CHECK(t.size() == 2);
  CHECK(ents.size() == 3);
  CHECK(rels.size() == 1);
  CHECK(ents.at("a") == 0);
  CHECK(ents.at("c") == 2);
  CHECK(t[1].head.index == 1);
}

TEST_CASE("empty input gives empty results") {
  Vocabulary ents, rels;
  CHECK(parse_triples("", ents, rels).empty());
  CHECK(ents.empty());
  auto kg = KnowledgeGraph::build(ents, rels, {}, false);
  CHECK(kg.triple_count() == 0);
  CHECK(kg.entity_count() == 0);
}

TEST_CASE("malformed lines are parse errors with a line number") {
  Vocabulary ents, rels;
  try {
    parse_triples("a\tr\tb\n\na\tb\n", ents, rels);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_triples("a\tr\tb\tc\n", ents, rels), ParseError);
  CHECK_THROWS_AS(parse_triples("a\t\tb\n", ents, rels), ParseError);
}

TEST_CASE("frozen vocabularies reject unknown names") {
  Vocabulary ents, rels;
  parse_triples("a\tr\tb\n", ents, rels);
  CHECK_THROWS_AS(parse_triples("a\tr\tz\n", ents, rels, VocabMode::Frozen), LookupError);
  CHECK(parse_triples("b\tr\ta\n", ents, rels, VocabMode::Frozen).size() == 1);
}

TEST_CASE("degree counts in and out edges") {
  auto single = fixture::graph({"a r b"}, false);
  CHECK(single.degree(fixture::ent(single, "a")) == Degree{0, 1});
  auto doubled = add_inverse_relations(single);
  CHECK(doubled.degree(fixture::ent(doubled, "a")) == Degree{1, 1});

  auto fan_in = fixture::graph({"a r b", "c r b"}, false);
  CHECK(fan_in.degree(fixture::ent(fan_in, "b")) == Degree{2, 0});
  CHECK_THROWS_AS(fan_in.degree(EntityId{99}), LookupError);
}

TEST_CASE("inverse doubling") {
  auto kg = fixture::graph({"a r b", "b s c"}, false);
  auto d = add_inverse_relations(kg);
  CHECK(d.triple_count() == 4);
  CHECK(d.relation_count() == 4);
  CHECK(d.doubled());
  const auto r = fixture::rel(d, "r");
  CHECK(d.contains(Triple{fixture::ent(d, "b"), r.inverted(), fixture::ent(d, "a")}));
  CHECK(d.relation_by_name("inverse of r") == r.inverted());
  CHECK(d.relation_name(r.inverted()) == "inverse of r");
  CHECK_THROWS_AS(add_inverse_relations(d), ContractError);
  CHECK_THROWS_AS(kg.relation_by_name("inverse of r"), LookupError);
}

TEST_CASE("duplicates are dropped once") {
  auto kg = fixture::graph({"a r b", "a r b", "a r c"}, false);
  CHECK(kg.triple_count() == 2);
  CHECK(kg.duplicates_dropped() == 1);
}

TEST_CASE("property: inverse closure and index consistency") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    auto data = random_dataset(seed, 15, 4, 60);
    auto kg = data.train_graph(true);
    std::size_t heads = 0, tails = 0, rels = 0;
    for (const auto& t : kg.triples()) CHECK(kg.contains(t.inverted()));
    for (std::uint32_t e = 0; e < kg.entity_count(); ++e) {
      for (auto i : kg.by_head(EntityId{e})) CHECK(kg.triple(i).head.index == e);
      for (auto i : kg.by_tail(EntityId{e})) CHECK(kg.triple(i).tail.index == e);
      heads += kg.by_head(EntityId{e}).size();
      tails += kg.by_tail(EntityId{e}).size();
      const auto deg = kg.degree(EntityId{e});
      CHECK(deg.in == deg.out);  // every out edge has an inverse in edge
    }
    for (std::uint32_t f = 0; f < kg.relation_slots(); ++f) {
      const auto r = RelationId::from_flat(f);
      for (auto i : kg.by_relation(r)) CHECK(kg.triple(i).relation == r);
      rels += kg.by_relation(r).size();
    }
    CHECK(heads == kg.triple_count());
    CHECK(tails == kg.triple_count());
    CHECK(rels == kg.triple_count());
  }
}

TEST_CASE("property: IGTKG1 round trip") {
  fixture::TempDir dir("kg");
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto data = random_dataset(seed, 12, 3, 40);
    save_dataset(dir / "d.igtkg", data);
    auto back = load_dataset(dir / "d.igtkg");
    CHECK(back.entities == data.entities);
    CHECK(back.relations == data.relations);
    CHECK(back.train == data.train);
    CHECK(back.valid == data.valid);
    CHECK(back.test == data.test);

    auto kg = data.train_graph(true);
    save_graph(dir / "g.igtkg", kg);
    auto g = load_graph(dir / "g.igtkg");
    CHECK(g.triples() == kg.triples());
    CHECK(g.doubled());
  }
}

TEST_CASE("IGTKG1 rejects bad files") {
  fixture::TempDir dir("kgbad");
  {
    std::ofstream out(dir / "junk", std::ios::binary);
    out << "NOTAKG1 plus some bytes";
  }
  CHECK_THROWS_AS(load_dataset(dir / "junk"), FormatError);

  save_dataset(dir / "ok", random_dataset(3, 5, 2, 10));
  const auto full = std::filesystem::file_size(dir / "ok");
  std::filesystem::resize_file(dir / "ok", full - 3);
  CHECK_THROWS_AS(load_dataset(dir / "ok"), FormatError);
}

TEST_CASE("dataset directory loading") {
  fixture::TempDir dir("kgdir");
  auto write = [&](const char* name, const char* body) {
    std::ofstream(dir / name) << body;
  };
  write("train.txt", "a\tr\tb\nb\tr\tc\n");
  write("valid.txt", "a\tr\tc\n");
  write("test.txt", "c\tr\ta\n");
  write("entity2text.txt", "a\tthe letter a\n");
  auto d = load_dataset_dir(dir.path());
  CHECK(d.train.size() == 2);
  CHECK(d.entities.size() == 3);
  CHECK(d.entity_text.at("a") == "the letter a");
  CHECK(d.all_true_triples().size() == 8);

  auto kg = d.train_graph();
  auto cat = TextCatalog::build(kg, d.entity_text, d.relation_text);
  CHECK(cat.entity_text(EntityId{0}) == "the letter a");
  CHECK(cat.entity_text(EntityId{1}) == "b");
  CHECK(cat.relation_text(RelationId{0, true}).find("inverse") != std::string::npos);
  CHECK(split_words("The Letter  a") == std::vector<std::string>{"the", "letter", "a"});
}
