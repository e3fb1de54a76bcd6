#include "igt/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <unordered_map>

#include "igt/errors.hpp"
#include "igt/log.hpp"

namespace igt {

void SamplerConfig::validate() const {
  if (radius < 1) throw ConfigError("sampler radius must be >= 1");
  if (total() == 0) throw ConfigError("sampler budget m = m_hr + m_h + m_r must be > 0");
}

const char* set_tag(TripleSet s) {
  switch (s) {
    case TripleSet::Target: return "TT";
    case TripleSet::HeadRelation: return "HR";
    case TripleSet::Head: return "H";
    case TripleSet::Relation: return "R";
  }
  return "?";
}

std::optional<std::size_t> Subgraph::entity_position(EntityId e) const {
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].kind == TokenKind::Entity && tokens[i].id == e.index) return i;
  }
  return std::nullopt;
}

Subgraph make_subgraph(EntityId head, RelationId relation, std::vector<SampledTriple> sampled,
                       bool exhausted) {
  Subgraph sg;
  sg.head = head;
  sg.relation = relation;
  sg.exhausted = exhausted;
  sg.triples.reserve(sampled.size() + 1);
  sg.triples.push_back({Triple{head, relation, EntityId{}}, TripleSet::Target, 0});
  for (auto& s : sampled) sg.triples.push_back(s);

  std::unordered_map<std::uint32_t, std::size_t> entity_pos;
  auto entity_token = [&](EntityId e, std::uint32_t triple) {
    auto [it, inserted] = entity_pos.try_emplace(e.index, sg.tokens.size());
    if (inserted) sg.tokens.push_back({TokenKind::Entity, e.index, triple});
    return it->second;
  };

  for (std::uint32_t i = 0; i < sg.triples.size(); ++i) {
    const auto& t = sg.triples[i].triple;
    TriplePositions p;
    p.head = entity_token(t.head, i);
    p.relation = sg.tokens.size();
    sg.tokens.push_back({TokenKind::Relation, t.relation.flat(), i});
    if (i == 0) {
      p.tail = sg.tokens.size();
      sg.tokens.push_back({TokenKind::Mask, 0, 0});
    } else {
      p.tail = entity_token(t.tail, i);
    }
    sg.positions.push_back(p);
  }

  std::unordered_set<std::uint32_t> pos;
  for (const auto& s : sg.triples) {
    if (s.set == TripleSet::HeadRelation && s.ring == 1) pos.insert(s.triple.tail.index);
  }
  for (const auto& tok : sg.tokens) {
    if (tok.kind != TokenKind::Entity) continue;
    (pos.contains(tok.id) ? sg.pos_entities : sg.neg_entities).push_back(EntityId{tok.id});
  }
  return sg;
}

// ---------------------------------------------------------------- exclusions

SampleExclusions::SampleExclusions(std::optional<Triple> target) {
  if (target) used_.insert(canonical(*target));
}

bool SampleExclusions::blocked(const Triple& t) const { return used_.contains(canonical(t)); }

void SampleExclusions::take(const Triple& t) { used_.insert(canonical(t)); }

// ---------------------------------------------------------------- weighted draw

namespace {

struct Candidate {
  std::uint32_t triple;
  double weight;
  std::uint32_t new_entity;
};

/// Weighted sampling without replacement (Efraimidis-Spirakis keys), equivalent
/// in distribution to sequential draws proportional to weight. Candidates are
/// deduplicated (a triple and its inverse twin are one fact) and keyed in
/// triple-index order, so the result depends only on the rng state.
std::vector<Candidate> weighted_pick(const KnowledgeGraph& kg, std::vector<Candidate> cands,
                                     std::size_t k, Rng& rng) {
  if (k == 0 || cands.empty()) return {};
  std::sort(cands.begin(), cands.end(),
            [](const Candidate& a, const Candidate& b) { return a.triple < b.triple; });
  std::unordered_set<Triple, TripleHash> facts;
  std::vector<Candidate> unique;
  unique.reserve(cands.size());
  for (const auto& c : cands) {
    auto t = kg.triple(c.triple);
    if (t.relation.inverse) t = t.inverted();
    if (facts.insert(t).second) unique.push_back(c);
  }
  k = std::min(k, unique.size());
  std::vector<std::pair<double, std::size_t>> keys;
  keys.reserve(unique.size());
  for (std::size_t i = 0; i < unique.size(); ++i) {
    double u = uniform01(rng);
    while (u <= 0.0) u = uniform01(rng);
    keys.emplace_back(std::log(u) / unique[i].weight, i);
  }
  std::partial_sort(keys.begin(), keys.begin() + static_cast<std::ptrdiff_t>(k), keys.end(),
                    [](const auto& a, const auto& b) {
                      return a.first > b.first || (a.first == b.first && a.second < b.second);
                    });
  std::vector<Candidate> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(unique[keys[i].second]);
  return out;
}

double degree_weight(const KnowledgeGraph& kg, EntityId e) {
  return static_cast<double>(kg.degree(e).total());
}

/// Rings >= 2 shared by T_hr and T_h: expand from the newest frontier.
void expand_rings(const KnowledgeGraph& kg, TripleSet set, std::vector<std::uint32_t> frontier,
                  std::unordered_set<std::uint32_t>& seen_entities, std::size_t budget,
                  std::uint32_t radius, Rng& rng, SampleExclusions& ex,
                  std::vector<SampledTriple>& out) {
  for (std::uint32_t ring = 2; ring <= radius && budget > 0 && !frontier.empty(); ++ring) {
    std::vector<Candidate> cands;
    std::unordered_set<std::uint32_t> in_frontier(frontier.begin(), frontier.end());
    for (auto f : frontier) {
      for (auto idx : kg.by_head(EntityId{f})) {
        const auto& t = kg.triple(idx);
        if (ex.blocked(t)) continue;
        cands.push_back({idx, degree_weight(kg, t.tail), t.tail.index});
      }
      for (auto idx : kg.by_tail(EntityId{f})) {
        const auto& t = kg.triple(idx);
        if (ex.blocked(t)) continue;
        // Both endpoints in the frontier: the head is the "new" side.
        if (in_frontier.contains(t.head.index) && t.head.index != f) continue;
        cands.push_back({idx, degree_weight(kg, t.head), t.head.index});
      }
    }
    std::vector<std::uint32_t> next;
    for (const auto& c : weighted_pick(kg, std::move(cands), budget, rng)) {
      const auto& t = kg.triple(c.triple);
      // A candidate may have become blocked through its inverse twin in this ring.
      if (ex.blocked(t)) continue;
      ex.take(t);
      out.push_back({t, set, ring});
      --budget;
      for (auto e : {t.head.index, t.tail.index}) {
        if (seen_entities.insert(e).second) next.push_back(e);
      }
    }
    frontier = std::move(next);
  }
}

}  // namespace

// ---------------------------------------------------------------- samplers

std::vector<SampledTriple> sample_hr_neighbors(const KnowledgeGraph& kg, EntityId h, RelationId r,
                                               std::optional<EntityId> excluded_tail,
                                               std::size_t budget, std::uint32_t radius, Rng& rng,
                                               SampleExclusions* exclusions) {
  SampleExclusions local;
  auto& ex = exclusions ? *exclusions : local;
  std::vector<SampledTriple> out;
  if (budget == 0 || radius == 0) return out;

  std::vector<Candidate> cands;
  for (auto idx : kg.by_head(h)) {
    const auto& t = kg.triple(idx);
    if (t.relation != r) continue;
    if (excluded_tail && t.tail == *excluded_tail) continue;
    if (ex.blocked(t)) continue;
    cands.push_back({idx, degree_weight(kg, t.tail), t.tail.index});
  }
  std::unordered_set<std::uint32_t> seen{h.index};
  std::vector<std::uint32_t> frontier;
  for (const auto& c : weighted_pick(kg, std::move(cands), budget, rng)) {
    const auto& t = kg.triple(c.triple);
    if (ex.blocked(t)) continue;
    ex.take(t);
    out.push_back({t, TripleSet::HeadRelation, 1});
    if (seen.insert(t.tail.index).second) frontier.push_back(t.tail.index);
  }
  expand_rings(kg, TripleSet::HeadRelation, std::move(frontier), seen, budget - out.size(), radius,
               rng, ex, out);
  return out;
}

std::vector<SampledTriple> sample_head_neighbors(const KnowledgeGraph& kg, EntityId h, RelationId r,
                                                 std::size_t budget, std::uint32_t radius, Rng& rng,
                                                 SampleExclusions* exclusions) {
  SampleExclusions local;
  auto& ex = exclusions ? *exclusions : local;
  std::vector<SampledTriple> out;
  if (budget == 0 || radius == 0) return out;

  std::vector<Candidate> cands;
  for (auto idx : kg.by_head(h)) {
    const auto& t = kg.triple(idx);
    if (t.relation == r || ex.blocked(t)) continue;
    cands.push_back({idx, degree_weight(kg, t.tail), t.tail.index});
  }
  for (auto idx : kg.by_tail(h)) {
    const auto& t = kg.triple(idx);
    if (t.relation == r || ex.blocked(t)) continue;
    cands.push_back({idx, degree_weight(kg, t.head), t.head.index});
  }
  std::unordered_set<std::uint32_t> seen{h.index};
  std::vector<std::uint32_t> frontier;
  for (const auto& c : weighted_pick(kg, std::move(cands), budget, rng)) {
    const auto& t = kg.triple(c.triple);
    if (ex.blocked(t)) continue;
    ex.take(t);
    out.push_back({t, TripleSet::Head, 1});
    if (seen.insert(c.new_entity).second) frontier.push_back(c.new_entity);
  }
  expand_rings(kg, TripleSet::Head, std::move(frontier), seen, budget - out.size(), radius, rng, ex,
               out);
  return out;
}

std::vector<SampledTriple> sample_distant_relation(const KnowledgeGraph& kg, EntityId h,
                                                   std::optional<EntityId> gold_tail, RelationId r,
                                                   std::size_t budget, Rng& rng,
                                                   SampleExclusions* exclusions) {
  SampleExclusions local;
  auto& ex = exclusions ? *exclusions : local;
  std::vector<SampledTriple> out;
  if (budget == 0) return out;
  auto forbidden = [&](EntityId e) { return e == h || (gold_tail && e == *gold_tail); };

  std::vector<Candidate> cands;
  for (auto idx : kg.by_relation(r)) {
    const auto& t = kg.triple(idx);
    if (forbidden(t.head) || forbidden(t.tail) || ex.blocked(t)) continue;
    cands.push_back({idx, degree_weight(kg, t.head) + degree_weight(kg, t.tail), t.tail.index});
  }
  for (const auto& c : weighted_pick(kg, std::move(cands), budget, rng)) {
    const auto& t = kg.triple(c.triple);
    if (ex.blocked(t)) continue;
    ex.take(t);
    out.push_back({t, TripleSet::Relation, 1});
  }
  return out;
}

namespace {

/// Uniform fill with triples that do not use r (nor r^-1). Rejection sampling
/// first, exhaustive scan when the graph is nearly used up.
std::vector<SampledTriple> fill_uniform(const KnowledgeGraph& kg, RelationId r, std::size_t need,
                                        Rng& rng, SampleExclusions& ex) {
  std::vector<SampledTriple> out;
  const auto n = kg.triple_count();
  if (need == 0 || n == 0) return out;
  auto eligible = [&](const Triple& t) { return t.relation.index != r.index && !ex.blocked(t); };

  std::size_t attempts = 64 * need + 256;
  while (out.size() < need && attempts-- > 0) {
    const auto& t = kg.triple(uniform_index(rng, n));
    if (!eligible(t)) continue;
    ex.take(t);
    out.push_back({t, TripleSet::Relation, 0});
  }
  if (out.size() < need) {
    std::vector<Candidate> cands;
    for (std::uint32_t i = 0; i < n; ++i) {
      if (eligible(kg.triple(i))) cands.push_back({i, 1.0, 0});
    }
    for (const auto& c : weighted_pick(kg, std::move(cands), need - out.size(), rng)) {
      const auto& t = kg.triple(c.triple);
      if (ex.blocked(t)) continue;
      ex.take(t);
      out.push_back({t, TripleSet::Relation, 0});
    }
  }
  return out;
}

}  // namespace

Subgraph extract_subgraph(const KnowledgeGraph& kg, EntityId h, RelationId r,
                          std::optional<EntityId> gold_tail, const SamplerConfig& config,
                          Rng& rng) {
  config.validate();
  if (!kg.valid(h)) throw LookupError("extract_subgraph: head entity not in vocabulary");
  if (!kg.valid(r)) throw LookupError("extract_subgraph: relation not in vocabulary");

  std::optional<Triple> target;
  if (gold_tail) target = Triple{h, r, *gold_tail};
  SampleExclusions ex(target);

  auto hr = sample_hr_neighbors(kg, h, r, gold_tail, config.m_hr, config.radius, rng, &ex);
  auto hn = sample_head_neighbors(kg, h, r, config.m_h, config.radius, rng, &ex);
  const std::size_t shortfall = (config.m_hr - hr.size()) + (config.m_h - hn.size());
  const std::size_t r_budget = config.m_r + shortfall;
  auto rn = sample_distant_relation(kg, h, gold_tail, r, r_budget, rng, &ex);
  auto fill = fill_uniform(kg, r, r_budget - rn.size(), rng, ex);

  std::vector<SampledTriple> all;
  all.reserve(hr.size() + hn.size() + rn.size() + fill.size());
  for (auto* part : {&hr, &hn, &rn, &fill}) all.insert(all.end(), part->begin(), part->end());
  const bool exhausted = all.size() < config.total();
  if (exhausted) {
    warn("subgraph for (" + kg.entity_name(h) + ", " + kg.relation_name(r) + ") has only " +
         std::to_string(all.size()) + " of " + std::to_string(config.total()) + " triples");
  }
  return make_subgraph(h, r, std::move(all), exhausted);
}

PoolSizes ring1_pool_sizes(const KnowledgeGraph& kg, EntityId h, RelationId r,
                           std::optional<EntityId> gold_tail) {
  PoolSizes out;
  auto canonical = [](Triple t) { return t.relation.inverse ? t.inverted() : t; };
  std::unordered_set<Triple, TripleHash> head_facts;
  for (auto idx : kg.by_head(h)) {
    const auto& t = kg.triple(idx);
    if (t.relation == r) {
      if (!gold_tail || t.tail != *gold_tail) ++out.head_relation;
    } else {
      head_facts.insert(canonical(t));
    }
  }
  if (!kg.doubled()) {
    for (auto idx : kg.by_tail(h)) {
      const auto& t = kg.triple(idx);
      if (t.relation != r) head_facts.insert(canonical(t));
    }
  }
  out.head = head_facts.size();
  auto forbidden = [&](EntityId e) { return e == h || (gold_tail && e == *gold_tail); };
  for (auto idx : kg.by_relation(r)) {
    const auto& t = kg.triple(idx);
    if (!forbidden(t.head) && !forbidden(t.tail)) ++out.relation;
  }
  return out;
}

bool saturated(const PoolSizes& pools, const SamplerConfig& config) {
  return pools.head_relation >= config.m_hr && pools.head >= config.m_h &&
         pools.relation >= config.m_r;
}

std::string format_subgraph(const Subgraph& sg, const KnowledgeGraph& kg) {
  std::ostringstream os;
  for (std::size_t i = 0; i < sg.triples.size(); ++i) {
    const auto& s = sg.triples[i];
    os << set_tag(s.set) << '\t' << kg.entity_name(s.triple.head) << '\t'
       << kg.relation_name(s.triple.relation) << '\t'
       << (i == 0 ? std::string("?") : kg.entity_name(s.triple.tail)) << '\n';
  }
  auto list = [&](const char* tag, const std::vector<EntityId>& ents) {
    os << tag;
    for (auto e : ents) os << '\t' << kg.entity_name(e);
    os << '\n';
  };
  list("POS:", sg.pos_entities);
  list("NEG:", sg.neg_entities);
  return os.str();
}

}  // namespace igt
