#pragma once

// Filtered ranking, MRR / Hits@k, and the per-input diagnostics (mean triples,
// mean layout length, mean distance entries beyond the bucket range).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "igt/kg.hpp"
#include "igt/model.hpp"
#include "igt/positions.hpp"
#include "igt/sampler.hpp"

namespace igt {

/// 1 + #(candidates scoring strictly higher) + ceil(#ties / 2), where
/// candidates are all entities except gold and those in known_true.
/// Throws LookupError when gold is out of range.
std::size_t rank_candidates(const Vec& scores, EntityId gold,
                            const std::unordered_set<std::uint32_t>& known_true = {});

/// Throws ContractError on an empty list.
double mrr(std::span<const std::size_t> ranks);
double hits_at_k(std::span<const std::size_t> ranks, std::size_t k);

struct Diagnostics {
  std::size_t inputs = 0;
  double a_it = 0.0;   ///< Mean triples per input, target included.
  double a_il = 0.0;   ///< Mean token-layout length.
  double a_bbr = 0.0;  ///< Mean finite P entries beyond the exact bucket range.
};

class DiagnosticsAccumulator {
 public:
  explicit DiagnosticsAccumulator(BucketMap map = {}) : map_(map) {}
  void add(const Subgraph& sg);
  /// Throws ContractError when nothing was added.
  Diagnostics result() const;

 private:
  BucketMap map_;
  std::size_t n_ = 0;
  double triples_ = 0, tokens_ = 0, beyond_ = 0;
};

Diagnostics collect_diagnostics(std::span<const Subgraph> subgraphs, const BucketMap& map = {});

/// (head, flat relation) -> every known tail, over a doubled triple set.
class FilterIndex {
 public:
  FilterIndex() = default;
  explicit FilterIndex(const std::unordered_set<Triple, TripleHash>& known);
  const std::unordered_set<std::uint32_t>& tails(EntityId h, RelationId r) const;

 private:
  std::unordered_map<std::uint64_t, std::unordered_set<std::uint32_t>> map_;
  std::unordered_set<std::uint32_t> empty_;
};

struct RankingResult {
  EntityId head;
  RelationId relation;
  EntityId gold;
  std::size_t rank = 0;
  std::uint64_t scores_digest = 0;  ///< FNV-1a over the float32 scores.
};

struct MetricBlock {
  std::size_t count = 0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};

MetricBlock summarize(std::span<const std::size_t> ranks);

struct EvalOptions {
  bool filtered = true;
  /// Evaluate (h, r, ?) and (t, r^-1, ?) for every triple.
  bool both_directions = true;
  /// 0 means every triple of the split.
  std::size_t max_triples = 0;
  SamplerConfig sampler;
  std::uint64_t seed = 0;
  bool keep_rankings = false;
};

struct EvalReport {
  std::string split;
  bool filtered = true;
  MetricBlock overall, tail, head;
  Diagnostics diagnostics;
  std::vector<RankingResult> rankings;
};

/// Ranks every query of `triples` (base direction) against `graph` (the doubled
/// training graph). Subgraphs are sampled with per-query derived seeds.
EvalReport evaluate_ranking(const Model& model, const KnowledgeGraph& graph,
                            std::span<const Triple> triples, const FilterIndex& filter,
                            const EvalOptions& options, const std::string& split = "test");

struct TrainingDiagnostics {
  Diagnostics overall;
  /// Restricted to queries whose ring-1 pools cover every budget; empty when none are.
  std::optional<Diagnostics> saturated;
  std::size_t saturated_queries = 0;
};

/// Samples up to max_queries training queries (all when 0) from the doubled
/// training graph and extracts each in training mode, as the trainer would.
TrainingDiagnostics training_diagnostics(const KnowledgeGraph& graph, const SamplerConfig& sampler,
                                         const BucketMap& map, std::size_t max_queries,
                                         std::uint64_t seed);

/// Machine-readable report (JSON).
std::string report_json(const EvalReport& report);
/// Inverse of report_json. Throws FormatError on malformed input.
EvalReport report_from_json(std::string_view json);
/// Plain-text table: split, MRR, Hits@1, Hits@3, Hits@10 per direction.
std::string report_text(const EvalReport& report);

}  // namespace igt
