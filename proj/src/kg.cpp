#include "igt/kg.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "igt/binio.hpp"
#include "igt/errors.hpp"
#include "igt/log.hpp"

namespace igt {

// ---------------------------------------------------------------- Vocabulary

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::at(std::string_view name) const {
  auto id = find(name);
  if (!id) throw LookupError("unknown name \"" + std::string(name) + "\"");
  return *id;
}

std::uint32_t Vocabulary::add(std::string_view name) {
  if (auto id = find(name)) return *id;
  if (frozen_) throw LookupError("vocabulary is frozen; unknown name \"" + std::string(name) + "\"");
  const auto id = static_cast<std::uint32_t>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

const std::string& Vocabulary::name(std::uint32_t index) const {
  if (index >= names_.size()) {
    throw LookupError("vocabulary index " + std::to_string(index) + " out of range");
  }
  return names_[index];
}

// ---------------------------------------------------------------- parsing

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <class F>
void for_each_line(std::string_view text, F&& f) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    f(++line_no, line);
    start = end + 1;
  }
}

}  // namespace

std::vector<Triple> parse_triples(std::string_view text, Vocabulary& entities,
                                  Vocabulary& relations, VocabMode mode,
                                  std::string_view source) {
  std::vector<Triple> out;
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.find_first_not_of(" \t") == std::string_view::npos) return;
    auto fields = split_tabs(line);
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
      throw ParseError(std::string(source), line_no,
                       "expected head<TAB>relation<TAB>tail, got " +
                           std::to_string(fields.size()) + " field(s)");
    }
    auto resolve = [&](Vocabulary& v, std::string_view name) {
      if (mode == VocabMode::Frozen) {
        auto id = v.find(name);
        if (!id) {
          throw LookupError(std::string(source) + ":" + std::to_string(line_no) +
                            ": unknown name \"" + std::string(name) + "\"");
        }
        return *id;
      }
      return v.add(name);
    };
    Triple t;
    t.head = EntityId{resolve(entities, fields[0])};
    t.relation = RelationId{resolve(relations, fields[1]), false};
    t.tail = EntityId{resolve(entities, fields[2])};
    out.push_back(t);
  });
  return out;
}

std::vector<Triple> load_triples(const std::filesystem::path& path, Vocabulary& entities,
                                 Vocabulary& relations, VocabMode mode) {
  return parse_triples(read_file(path), entities, relations, mode, path.string());
}

// ---------------------------------------------------------------- KnowledgeGraph

KnowledgeGraph KnowledgeGraph::build(Vocabulary entities, Vocabulary relations,
                                     std::vector<Triple> triples, bool doubled) {
  KnowledgeGraph kg;
  kg.entities_ = std::move(entities);
  kg.relations_ = std::move(relations);
  kg.doubled_ = doubled;
  kg.triples_.reserve(triples.size());
  kg.lookup_.reserve(triples.size());
  for (const auto& t : triples) {
    if (!kg.valid(t.head) || !kg.valid(t.tail) || !kg.valid(t.relation)) {
      throw LookupError("triple references an id outside the vocabularies");
    }
    if (!kg.lookup_.insert(t).second) {
      ++kg.duplicates_dropped_;
      continue;
    }
    kg.triples_.push_back(t);
  }
  if (kg.duplicates_dropped_ > 0) {
    warn(std::to_string(kg.duplicates_dropped_) + " duplicate triple(s) dropped");
  }
  kg.index();
  return kg;
}

void KnowledgeGraph::index() {
  by_head_.assign(entities_.size(), {});
  by_tail_.assign(entities_.size(), {});
  by_relation_.assign(relation_slots(), {});
  for (std::uint32_t i = 0; i < triples_.size(); ++i) {
    const auto& t = triples_[i];
    by_head_[t.head.index].push_back(i);
    by_tail_[t.tail.index].push_back(i);
    by_relation_[t.relation.flat()].push_back(i);
  }
}

std::span<const std::uint32_t> KnowledgeGraph::by_head(EntityId e) const {
  if (!valid(e)) throw LookupError("entity " + std::to_string(e.index) + " out of range");
  return by_head_[e.index];
}

std::span<const std::uint32_t> KnowledgeGraph::by_tail(EntityId e) const {
  if (!valid(e)) throw LookupError("entity " + std::to_string(e.index) + " out of range");
  return by_tail_[e.index];
}

std::span<const std::uint32_t> KnowledgeGraph::by_relation(RelationId r) const {
  if (r.index >= relations_.size()) {
    throw LookupError("relation " + std::to_string(r.index) + " out of range");
  }
  return by_relation_[r.flat()];
}

Degree KnowledgeGraph::degree(EntityId e) const {
  if (!valid(e)) throw LookupError("entity " + std::to_string(e.index) + " out of range");
  return {by_tail_[e.index].size(), by_head_[e.index].size()};
}

std::string KnowledgeGraph::entity_name(EntityId e) const { return entities_.name(e.index); }

std::string KnowledgeGraph::relation_name(RelationId r) const {
  const auto& base = relations_.name(r.index);
  return r.inverse ? std::string(kInversePrefix) + base : base;
}

RelationId KnowledgeGraph::relation_by_name(std::string_view name) const {
  if (auto id = relations_.find(name)) return {*id, false};
  if (name.starts_with(kInversePrefix)) {
    auto id = relations_.at(name.substr(kInversePrefix.size()));
    if (!doubled_) throw LookupError("inverse relation requested on an undoubled graph");
    return {id, true};
  }
  throw LookupError("unknown relation \"" + std::string(name) + "\"");
}

EntityId KnowledgeGraph::entity_by_name(std::string_view name) const {
  return EntityId{entities_.at(name)};
}

KnowledgeGraph add_inverse_relations(const KnowledgeGraph& kg) {
  if (kg.doubled_) throw ContractError("add_inverse_relations: graph is already doubled");
  std::vector<Triple> all;
  all.reserve(kg.triples_.size() * 2);
  for (const auto& t : kg.triples_) all.push_back(t);
  for (const auto& t : kg.triples_) all.push_back(t.inverted());
  return KnowledgeGraph::build(kg.entities_, kg.relations_, std::move(all), true);
}

// ---------------------------------------------------------------- text

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::vector<std::uint32_t> TextCatalog::tokenize(std::string_view text) {
  std::vector<std::uint32_t> ids;
  for (const auto& w : split_words(text)) ids.push_back(words_.add(w));
  if (ids.empty()) ids.push_back(words_.add("<empty>"));
  return ids;
}

TextCatalog TextCatalog::build(const KnowledgeGraph& kg,
                               const std::unordered_map<std::string, std::string>& entity_text,
                               const std::unordered_map<std::string, std::string>& relation_text) {
  TextCatalog cat;
  const auto& ents = kg.entities().names();
  for (const auto& name : ents) {
    auto it = entity_text.find(name);
    cat.entity_text_.push_back(it == entity_text.end() ? name : it->second);
    cat.entity_tokens_.push_back(cat.tokenize(cat.entity_text_.back()));
  }
  const auto& rels = kg.relations().names();
  cat.relation_text_.resize(rels.size() * 2);
  cat.relation_tokens_.resize(rels.size() * 2);
  for (std::uint32_t i = 0; i < rels.size(); ++i) {
    auto it = relation_text.find(rels[i]);
    const std::string base = it == relation_text.end() ? rels[i] : it->second;
    for (bool inv : {false, true}) {
      const auto flat = RelationId{i, inv}.flat();
      cat.relation_text_[flat] = inv ? std::string(kInversePrefix) + base : base;
      cat.relation_tokens_[flat] = cat.tokenize(cat.relation_text_[flat]);
    }
  }
  return cat;
}

const std::string& TextCatalog::entity_text(EntityId e) const {
  if (e.index >= entity_text_.size()) throw LookupError("no text for entity");
  return entity_text_[e.index];
}

const std::string& TextCatalog::relation_text(RelationId r) const {
  if (r.flat() >= relation_text_.size()) throw LookupError("no text for relation");
  return relation_text_[r.flat()];
}

const std::vector<std::uint32_t>& TextCatalog::entity_tokens(EntityId e) const {
  if (e.index >= entity_tokens_.size()) throw LookupError("no tokens for entity");
  return entity_tokens_[e.index];
}

const std::vector<std::uint32_t>& TextCatalog::relation_tokens(RelationId r) const {
  if (r.flat() >= relation_tokens_.size()) throw LookupError("no tokens for relation");
  return relation_tokens_[r.flat()];
}

std::unordered_map<std::string, std::string> load_text_catalog(const std::filesystem::path& path) {
  std::unordered_map<std::string, std::string> out;
  const auto text = read_file(path);
  for_each_line(text, [&](std::size_t line_no, std::string_view line) {
    if (line.empty()) return;
    auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      throw ParseError(path.string(), line_no, "expected id<TAB>description");
    }
    out[std::string(line.substr(0, tab))] = std::string(line.substr(tab + 1));
  });
  return out;
}

// ---------------------------------------------------------------- Dataset

KnowledgeGraph Dataset::train_graph(bool doubled) const {
  auto kg = KnowledgeGraph::build(entities, relations, train);
  return doubled ? add_inverse_relations(kg) : kg;
}

std::unordered_set<Triple, TripleHash> Dataset::all_true_triples() const {
  std::unordered_set<Triple, TripleHash> all;
  for (const auto* split : {&train, &valid, &test}) {
    for (const auto& t : *split) {
      all.insert(t);
      all.insert(t.inverted());
    }
  }
  return all;
}

Dataset load_dataset_dir(const std::filesystem::path& dir) {
  Dataset d;
  d.train = load_triples(dir / "train.txt", d.entities, d.relations);
  for (auto [name, split] : {std::pair{"valid.txt", &d.valid}, std::pair{"test.txt", &d.test}}) {
    if (std::filesystem::exists(dir / name)) *split = load_triples(dir / name, d.entities, d.relations);
  }
  if (std::filesystem::exists(dir / "entity2text.txt")) {
    d.entity_text = load_text_catalog(dir / "entity2text.txt");
  }
  if (std::filesystem::exists(dir / "relation2text.txt")) {
    d.relation_text = load_text_catalog(dir / "relation2text.txt");
  }
  for (const auto& [id, _] : d.entity_text) {
    if (!d.entities.find(id)) warn("entity2text: id \"" + id + "\" not in the triples files");
  }
  return d;
}

// ---------------------------------------------------------------- snapshots

namespace {

struct Split {
  std::string name;
  std::vector<Triple> triples;
};

void write_container(const std::filesystem::path& path, const Vocabulary& ents,
                     const Vocabulary& rels, bool doubled, const std::vector<Split>& splits,
                     const std::unordered_map<std::string, std::string>* etext,
                     const std::unordered_map<std::string, std::string>* rtext) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(kGraphMagic.data(), static_cast<std::streamsize>(kGraphMagic.size()));
  binio::write_u64(out, kGraphVersion);
  for (const auto* v : {&ents, &rels}) {
    binio::write_u64(out, v->size());
    for (const auto& n : v->names()) binio::write_string(out, n);
  }
  binio::write_pod<std::uint8_t>(out, doubled ? 1 : 0);
  binio::write_u64(out, splits.size());
  for (const auto& s : splits) {
    binio::write_string(out, s.name);
    binio::write_u64(out, s.triples.size());
    for (const auto& t : s.triples) {
      binio::write_pod<std::uint32_t>(out, t.head.index);
      binio::write_pod<std::uint32_t>(out, t.relation.flat());
      binio::write_pod<std::uint32_t>(out, t.tail.index);
    }
  }
  // Text catalogs, sorted by key so the file is deterministic.
  for (const auto* m : {etext, rtext}) {
    std::vector<std::pair<std::string, std::string>> items;
    if (m) items.assign(m->begin(), m->end());
    std::sort(items.begin(), items.end());
    binio::write_u64(out, items.size());
    for (const auto& [k, v] : items) {
      binio::write_string(out, k);
      binio::write_string(out, v);
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

struct Container {
  Vocabulary ents, rels;
  bool doubled = false;
  std::vector<Split> splits;
  std::unordered_map<std::string, std::string> etext, rtext;
};

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  binio::expect_magic(in, kGraphMagic);
  const auto version = binio::read_u64(in);
  if (version != kGraphVersion) {
    throw FormatError("unsupported graph snapshot version " + std::to_string(version));
  }
  Container c;
  for (auto* v : {&c.ents, &c.rels}) {
    const auto n = binio::read_u64(in);
    for (std::uint64_t i = 0; i < n; ++i) v->add(binio::read_string(in));
    if (v->size() != n) throw FormatError("duplicate names in snapshot vocabulary");
  }
  c.doubled = binio::read_pod<std::uint8_t>(in) != 0;
  const auto n_splits = binio::read_u64(in);
  for (std::uint64_t s = 0; s < n_splits; ++s) {
    Split split;
    split.name = binio::read_string(in);
    const auto n = binio::read_u64(in);
    split.triples.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
      Triple t;
      t.head.index = binio::read_pod<std::uint32_t>(in);
      t.relation = RelationId::from_flat(binio::read_pod<std::uint32_t>(in));
      t.tail.index = binio::read_pod<std::uint32_t>(in);
      if (t.head.index >= c.ents.size() || t.tail.index >= c.ents.size() ||
          t.relation.index >= c.rels.size()) {
        throw FormatError("snapshot triple references an id outside the vocabularies");
      }
      split.triples.push_back(t);
    }
    c.splits.push_back(std::move(split));
  }
  for (auto* m : {&c.etext, &c.rtext}) {
    const auto n = binio::read_u64(in);
    for (std::uint64_t i = 0; i < n; ++i) {
      auto k = binio::read_string(in);
      (*m)[k] = binio::read_string(in);
    }
  }
  return c;
}

}  // namespace

void save_dataset(const std::filesystem::path& path, const Dataset& d) {
  write_container(path, d.entities, d.relations, false,
                  {{"train", d.train}, {"valid", d.valid}, {"test", d.test}}, &d.entity_text,
                  &d.relation_text);
}

Dataset load_dataset(const std::filesystem::path& path) {
  auto c = read_container(path);
  Dataset d;
  d.entities = std::move(c.ents);
  d.relations = std::move(c.rels);
  for (auto& s : c.splits) {
    if (s.name == "train") d.train = std::move(s.triples);
    else if (s.name == "valid") d.valid = std::move(s.triples);
    else if (s.name == "test") d.test = std::move(s.triples);
    else if (s.name == "graph") d.train = std::move(s.triples);
  }
  d.entity_text = std::move(c.etext);
  d.relation_text = std::move(c.rtext);
  return d;
}

void save_graph(const std::filesystem::path& path, const KnowledgeGraph& kg) {
  write_container(path, kg.entities(), kg.relations(), kg.doubled(), {{"graph", kg.triples()}},
                  nullptr, nullptr);
}

KnowledgeGraph load_graph(const std::filesystem::path& path) {
  auto c = read_container(path);
  if (c.splits.size() != 1 || c.splits[0].name != "graph") {
    throw FormatError("snapshot does not hold a single graph");
  }
  return KnowledgeGraph::build(std::move(c.ents), std::move(c.rels), std::move(c.splits[0].triples),
                               c.doubled);
}

}  // namespace igt
