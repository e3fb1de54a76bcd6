#pragma once

// Knowledge graph store: vocabularies, triples, adjacency/degree indices,
// inverse-relation doubling, text catalog and the IGTKG1 snapshot container.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace igt {

struct EntityId {
  std::uint32_t index = 0;
  auto operator<=>(const EntityId&) const = default;
};

/// A base relation or its inverse r^-1. Inverses share the base index; the
/// flat index interleaves them (2*index + inverse) and addresses embedding rows.
struct RelationId {
  std::uint32_t index = 0;
  bool inverse = false;

  RelationId inverted() const { return {index, !inverse}; }
  std::uint32_t flat() const { return 2 * index + (inverse ? 1U : 0U); }
  static RelationId from_flat(std::uint32_t flat) { return {flat / 2, (flat & 1U) != 0}; }

  auto operator<=>(const RelationId&) const = default;
};

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  Triple inverted() const { return {tail, relation.inverted(), head}; }
  auto operator<=>(const Triple&) const = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t k = (static_cast<std::uint64_t>(t.head.index) << 32) | t.tail.index;
    k ^= static_cast<std::uint64_t>(t.relation.flat()) * 0x9E3779B97F4A7C15ULL;
    k ^= k >> 31;
    k *= 0xBF58476D1CE4E5B9ULL;
    k ^= k >> 27;
    return static_cast<std::size_t>(k);
  }
};

struct Degree {
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t total() const { return in + out; }
  bool operator==(const Degree&) const = default;
};

/// Name <-> dense index map in first-appearance order.
class Vocabulary {
 public:
  std::size_t size() const { return names_.size(); }
  bool empty() const { return names_.empty(); }

  std::optional<std::uint32_t> find(std::string_view name) const;
  /// Throws LookupError when the name is unknown.
  std::uint32_t at(std::string_view name) const;
  std::uint32_t add(std::string_view name);
  const std::string& name(std::uint32_t index) const;
  const std::vector<std::string>& names() const { return names_; }

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  bool operator==(const Vocabulary& o) const { return names_ == o.names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
  bool frozen_ = false;
};

/// How load_triples treats names missing from the vocabularies.
enum class VocabMode { Append, Frozen };

/// Reads head<TAB>relation<TAB>tail lines. Blank lines are skipped; anything
/// else that is not exactly three non-empty fields is a ParseError.
std::vector<Triple> load_triples(const std::filesystem::path& path, Vocabulary& entities,
                                 Vocabulary& relations, VocabMode mode = VocabMode::Append);
std::vector<Triple> parse_triples(std::string_view text, Vocabulary& entities,
                                  Vocabulary& relations, VocabMode mode = VocabMode::Append,
                                  std::string_view source = "<memory>");

/// Immutable triple store with head/tail/relation indices and degrees.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  /// Duplicate triples are dropped (see duplicates_dropped()). `doubled` declares
  /// that `triples` already holds every inverse; use add_inverse_relations to add them.
  static KnowledgeGraph build(Vocabulary entities, Vocabulary relations,
                              std::vector<Triple> triples, bool doubled = false);

  std::size_t entity_count() const { return entities_.size(); }
  std::size_t base_relation_count() const { return relations_.size(); }
  /// Base relations, plus their inverses once doubled.
  std::size_t relation_count() const { return relations_.size() * (doubled_ ? 2 : 1); }
  /// Embedding rows needed to address every flat relation index.
  std::size_t relation_slots() const { return relations_.size() * 2; }
  std::size_t triple_count() const { return triples_.size(); }
  bool doubled() const { return doubled_; }
  std::size_t duplicates_dropped() const { return duplicates_dropped_; }

  const Vocabulary& entities() const { return entities_; }
  const Vocabulary& relations() const { return relations_; }
  const std::vector<Triple>& triples() const { return triples_; }
  const Triple& triple(std::size_t i) const { return triples_[i]; }

  std::span<const std::uint32_t> by_head(EntityId e) const;
  std::span<const std::uint32_t> by_tail(EntityId e) const;
  std::span<const std::uint32_t> by_relation(RelationId r) const;
  Degree degree(EntityId e) const;
  bool contains(const Triple& t) const { return lookup_.contains(t); }

  bool valid(EntityId e) const { return e.index < entities_.size(); }
  bool valid(RelationId r) const {
    return r.index < relations_.size() && (!r.inverse || doubled_);
  }
  std::string entity_name(EntityId e) const;
  std::string relation_name(RelationId r) const;
  /// Resolves "name" or "inverse of name" (the latter only on a doubled graph).
  RelationId relation_by_name(std::string_view name) const;
  EntityId entity_by_name(std::string_view name) const;

  friend KnowledgeGraph add_inverse_relations(const KnowledgeGraph& kg);

 private:
  void index();

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  std::vector<std::vector<std::uint32_t>> by_head_, by_tail_, by_relation_;
  std::unordered_set<Triple, TripleHash> lookup_;
  bool doubled_ = false;
  std::size_t duplicates_dropped_ = 0;
};

/// Adds (t, r^-1, h) for every (h, r, t). Throws ContractError when already doubled.
KnowledgeGraph add_inverse_relations(const KnowledgeGraph& kg);

inline constexpr std::string_view kInversePrefix = "inverse of ";

/// Surface strings and base-tokenizer token ids for every entity and relation slot.
class TextCatalog {
 public:
  /// Descriptions keyed by vocabulary name; missing entries fall back to the name.
  static TextCatalog build(const KnowledgeGraph& kg,
                           const std::unordered_map<std::string, std::string>& entity_text = {},
                           const std::unordered_map<std::string, std::string>& relation_text = {});

  std::size_t entity_count() const { return entity_text_.size(); }
  std::size_t relation_slots() const { return relation_text_.size(); }
  const std::string& entity_text(EntityId e) const;
  const std::string& relation_text(RelationId r) const;
  const std::vector<std::uint32_t>& entity_tokens(EntityId e) const;
  const std::vector<std::uint32_t>& relation_tokens(RelationId r) const;
  /// Base tokenizer vocabulary (lower-cased whitespace words).
  const Vocabulary& words() const { return words_; }

 private:
  std::vector<std::uint32_t> tokenize(std::string_view text);

  Vocabulary words_;
  std::vector<std::string> entity_text_, relation_text_;
  std::vector<std::vector<std::uint32_t>> entity_tokens_, relation_tokens_;
};

/// Reads id<TAB>description lines.
std::unordered_map<std::string, std::string> load_text_catalog(const std::filesystem::path& path);

/// Lower-cased whitespace split used as the base tokenizer.
std::vector<std::string> split_words(std::string_view text);

/// Vocabularies plus named triple splits; what `ingest` produces.
struct Dataset {
  Vocabulary entities;
  Vocabulary relations;
  std::vector<Triple> train, valid, test;
  std::unordered_map<std::string, std::string> entity_text, relation_text;

  KnowledgeGraph train_graph(bool doubled = true) const;
  /// Every known triple in all splits, doubled; used for filtered ranking.
  std::unordered_set<Triple, TripleHash> all_true_triples() const;
};

/// Loads DIR/train.txt, valid.txt, test.txt and optional entity2text.txt,
/// relation2text.txt. Vocabulary order is first appearance, train split first.
Dataset load_dataset_dir(const std::filesystem::path& dir);

// IGTKG1 container: magic, u64 version, vocabularies, doubled flag, named splits
// of (u32 head, u32 flat relation, u32 tail) records. All integers little-endian.
inline constexpr std::string_view kGraphMagic = "IGTKG1";
inline constexpr std::uint64_t kGraphVersion = 1;

void save_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset load_dataset(const std::filesystem::path& path);
void save_graph(const std::filesystem::path& path, const KnowledgeGraph& kg);
KnowledgeGraph load_graph(const std::filesystem::path& path);

}  // namespace igt
