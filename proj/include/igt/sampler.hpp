#pragma once

// Subgraph extraction around a query (h, r, ?): same-head-same-relation
// neighbours (T_hr), same-head neighbours (T_h) up to a radius, and distant
// triples sharing the relation (T_r), chosen by degree-weighted sampling.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "igt/kg.hpp"
#include "igt/rng.hpp"

namespace igt {

struct SamplerConfig {
  std::uint32_t radius = 2;
  std::uint32_t m_hr = 5;
  std::uint32_t m_h = 5;
  std::uint32_t m_r = 5;
  std::uint64_t seed = 0;

  std::uint32_t total() const { return m_hr + m_h + m_r; }
  /// Throws ConfigError unless radius >= 1 and the total budget is positive.
  void validate() const;
};

enum class TripleSet : std::uint8_t { Target, HeadRelation, Head, Relation };

/// Dump tag for a set: TT / HR / H / R.
const char* set_tag(TripleSet s);

struct SampledTriple {
  Triple triple;
  TripleSet set = TripleSet::Relation;
  std::uint32_t ring = 1;  ///< Sampling radius; 0 for the target and fallback fill.
};

enum class TokenKind : std::uint8_t { Entity, Relation, Mask };

struct Token {
  TokenKind kind = TokenKind::Entity;
  std::uint32_t id = 0;      ///< Entity index or flat relation index; 0 for the mask.
  std::uint32_t triple = 0;  ///< Triple that introduced the token.
  bool operator==(const Token&) const = default;
};

struct TriplePositions {
  std::size_t head = 0, relation = 0, tail = 0;
};

/// Target first, then T_hr, T_h, T_r members. Entities are shared tokens,
/// every triple occurrence owns one relation token, and the target's tail is
/// the mask slot.
struct Subgraph {
  EntityId head;
  RelationId relation;
  std::vector<SampledTriple> triples;
  std::vector<Token> tokens;
  std::vector<TriplePositions> positions;  ///< One per triple, indexes into tokens.
  std::vector<EntityId> pos_entities;      ///< Tails of ring-1 T_hr triples, token order.
  std::vector<EntityId> neg_entities;      ///< All other entity tokens, including h.
  bool exhausted = false;                  ///< Fewer than m triples were available.

  std::size_t size() const { return tokens.size(); }
  std::size_t mask_position() const { return positions.front().tail; }
  std::size_t head_position() const { return positions.front().head; }
  std::size_t relation_position() const { return positions.front().relation; }
  std::optional<std::size_t> entity_position(EntityId e) const;
};

/// Builds the token layout and Pos/Neg partition for a target plus sampled
/// triples (in the given order).
Subgraph make_subgraph(EntityId head, RelationId relation, std::vector<SampledTriple> sampled,
                       bool exhausted = false);

/// Bookkeeping shared by the three samplers of one extraction: a triple and its
/// inverse twin count as the same fact, and the target fact is never sampled.
class SampleExclusions {
 public:
  SampleExclusions() = default;
  explicit SampleExclusions(std::optional<Triple> target);

  bool blocked(const Triple& t) const;
  void take(const Triple& t);

 private:
  static Triple canonical(const Triple& t) { return t.relation.inverse ? t.inverted() : t; }
  std::unordered_set<Triple, TripleHash> used_;
};

/// T_hr: ring 1 holds (h, r, x) with x != excluded_tail; ring i > 1 holds any
/// triple touching the entities first reached in ring i-1. Budget is spent on
/// inner rings first. Selection is weighted by the new endpoint's in+out degree.
std::vector<SampledTriple> sample_hr_neighbors(const KnowledgeGraph& kg, EntityId h, RelationId r,
                                               std::optional<EntityId> excluded_tail,
                                               std::size_t budget, std::uint32_t radius, Rng& rng,
                                               SampleExclusions* exclusions = nullptr);

/// T_h: ring 1 holds triples touching h in either direction with a relation
/// other than r; outer rings expand as for T_hr.
std::vector<SampledTriple> sample_head_neighbors(const KnowledgeGraph& kg, EntityId h, RelationId r,
                                                 std::size_t budget, std::uint32_t radius, Rng& rng,
                                                 SampleExclusions* exclusions = nullptr);

/// T_r: triples with relation r whose endpoints avoid h and the gold tail.
/// Weighted by the summed degree of both endpoints.
std::vector<SampledTriple> sample_distant_relation(const KnowledgeGraph& kg, EntityId h,
                                                   std::optional<EntityId> gold_tail, RelationId r,
                                                   std::size_t budget, Rng& rng,
                                                   SampleExclusions* exclusions = nullptr);

/// Full extraction. Shortfalls in T_hr/T_h raise the T_r budget; a T_r
/// shortfall is filled with uniformly drawn triples not using r. Pass
/// gold_tail only for training queries.
Subgraph extract_subgraph(const KnowledgeGraph& kg, EntityId h, RelationId r,
                          std::optional<EntityId> gold_tail, const SamplerConfig& config, Rng& rng);

/// Ring-1 candidate counts of a query, read from the graph alone: T_hr facts
/// (h, r, x) with x != gold, other facts touching h, and T_r facts avoiding h
/// and the gold tail.
struct PoolSizes {
  std::size_t head_relation = 0;
  std::size_t head = 0;
  std::size_t relation = 0;
};
PoolSizes ring1_pool_sizes(const KnowledgeGraph& kg, EntityId h, RelationId r,
                           std::optional<EntityId> gold_tail);

/// Every ring-1 pool covers its own budget, so no set borrows from another.
bool saturated(const PoolSizes& pools, const SamplerConfig& config);

/// Text dump: one "TAG<TAB>head<TAB>relation<TAB>tail" line per triple
/// (target tail printed as "?"), then "POS:" and "NEG:" lines.
std::string format_subgraph(const Subgraph& sg, const KnowledgeGraph& kg);

}  // namespace igt
