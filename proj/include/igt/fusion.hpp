#pragma once

// Coupling between encoder outputs and a prompt-embedding provider: relation
// context pooling, lambda-weighted fusion through an adapter, and the
// providers themselves (none, a small trainable stub, a file-backed cache).

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "igt/attention.hpp"
#include "igt/kg.hpp"
#include "igt/nn.hpp"
#include "igt/sampler.hpp"

namespace igt {

/// Which relation occurrences feed the relation context vector.
enum class RelationScope {
  Target,  ///< "r": the query's relation token alone.
  Local,   ///< "mr_l": occurrences of r in the target, T_hr and T_h.
  Global,  ///< "mr_g": additionally occurrences in T_r.
};

/// Parses "r", "mr_l" or "mr_g"; throws ConfigError otherwise.
RelationScope parse_scope(std::string_view s);
const char* scope_name(RelationScope s);

/// Token positions pooled for a scope, in token order.
std::vector<std::size_t> relation_context_positions(const Subgraph& sg, RelationScope scope);

/// Scope Target returns the token row unchanged; the others pool the
/// occurrence rows with `pooler`.
Vec pool_relation_context(const Mat& states, const Subgraph& sg, RelationScope scope,
                          const PoolingOperator& pooler, PoolCache* cache = nullptr);

/// (1 - lambda) * llm + lambda * adapted; exact endpoints at 0 and 1.
/// Throws ContractError on a width mismatch.
Vec fuse(const Vec& llm, const Vec& adapted, double lambda);

/// concat(t_hr_llm, pooled_triple).
Vec concat_classifier_input(const Vec& t_hr_llm, const Vec& pooled_triple);

/// Per-call scratch owned by the caller; providers subclass it.
struct ProviderTape {
  virtual ~ProviderTape() = default;
};

class PromptEmbeddingProvider {
 public:
  virtual ~PromptEmbeddingProvider() = default;

  virtual std::string kind() const = 0;
  /// d_llm; 0 disables fusion entirely.
  virtual std::size_t width() const = 0;
  /// False when the provider cannot accept fused inputs (lambda must be 0).
  virtual bool accepts_fused_inputs() const { return true; }

  virtual std::unique_ptr<ProviderTape> new_tape() const { return nullptr; }

  struct Base {
    Vec entity;    ///< t_h^llm
    Vec relation;  ///< t_r^llm
  };
  /// Unfused pooled embeddings of h and r.
  virtual Base base(EntityId h, RelationId r, ProviderTape* tape) const = 0;
  /// Last-token final hidden state of the prompt for (h, r) with the fused
  /// vectors in the h and r slots.
  virtual Vec last_hidden(EntityId h, RelationId r, const Vec& fused_h, const Vec& fused_r,
                          ProviderTape* tape) const = 0;

  /// Accumulate provider parameter grads and return slot-input grads.
  virtual void backward_last(ProviderTape* tape, const Vec& d_out, Vec* d_fused_h,
                             Vec* d_fused_r);
  virtual void backward_base(ProviderTape* tape, const Vec& d_entity, const Vec& d_relation);
  virtual void collect(ParamList& out);
};

/// Width 0: the classifier sees only the pooled triple.
class NullProvider final : public PromptEmbeddingProvider {
 public:
  std::string kind() const override { return "none"; }
  std::size_t width() const override { return 0; }
  Base base(EntityId, RelationId, ProviderTape*) const override { return {Vec(0), Vec(0)}; }
  Vec last_hidden(EntityId, RelationId, const Vec&, const Vec&, ProviderTape*) const override {
    return Vec(0);
  }
};

struct StubProviderConfig {
  std::uint32_t d_llm = 64;
  std::uint32_t n_layers = 2;
  std::uint32_t n_heads = 4;
  std::uint32_t d_ff = 128;
  /// Description words kept per entity or relation inside the prompt.
  std::uint32_t max_description_words = 16;
  double init_sigma = 0.02;

  void validate() const;
};

/// Words of the instruction prompt. "[H]" and "[R]" are slots that receive the
/// fused vectors; "{h}" and "{r}" expand to the description words.
std::vector<std::string> prompt_template();

/// A small causal transformer over the instruction prompt. Its vocabulary is
/// the template words plus every description word of the catalog.
class StubPromptProvider final : public PromptEmbeddingProvider {
 public:
  StubPromptProvider(const TextCatalog& catalog, const StubProviderConfig& config, Rng& rng);

  std::string kind() const override { return "stub"; }
  std::size_t width() const override { return config_.d_llm; }
  std::unique_ptr<ProviderTape> new_tape() const override;
  Base base(EntityId h, RelationId r, ProviderTape* tape) const override;
  Vec last_hidden(EntityId h, RelationId r, const Vec& fused_h, const Vec& fused_r,
                  ProviderTape* tape) const override;
  void backward_last(ProviderTape* tape, const Vec& d_out, Vec* d_fused_h,
                     Vec* d_fused_r) override;
  void backward_base(ProviderTape* tape, const Vec& d_entity, const Vec& d_relation) override;
  void collect(ParamList& out) override;

  const StubProviderConfig& config() const { return config_; }
  /// Word ids of the prompt for (h, r), with slot markers; for inspection.
  std::vector<std::uint32_t> prompt_ids(EntityId h, RelationId r) const;
  const Vocabulary& vocabulary() const { return vocab_; }

 private:
  struct Tape;
  std::vector<std::uint32_t> description(const TextCatalog& catalog,
                                         const std::vector<std::uint32_t>& catalog_tokens) const;

  StubProviderConfig config_;
  Vocabulary vocab_;
  std::uint32_t h_slot_ = 0, r_slot_ = 0;
  std::vector<std::vector<std::uint32_t>> entity_words_, relation_words_;
  Param word_embedding_;
  Param position_embedding_;
  PoolingOperator pooler_;
  std::vector<TransformerLayer> layers_;
  LayerNorm final_norm_;
};

// IGTEMB1: magic, u8 flags, u64 d_llm, u64 record count, then records of
// u8 kind, u64 id1, u64 id2, float32[d_llm]. All little-endian. Entity
// records use id1 = entity index; relation records id1 = flat relation index;
// pair records id1 = head entity, id2 = flat relation. Unused ids are 0.
inline constexpr std::string_view kEmbeddingMagic = "IGTEMB1";
inline constexpr std::uint8_t kEmbeddingMeanPooled = 0x1;

enum class EmbeddingRecordKind : std::uint8_t { Entity = 0, Relation = 1, Pair = 2 };

struct EmbeddingCache {
  std::uint8_t flags = 0;
  std::uint64_t width = 0;
  std::map<std::uint64_t, Vec> entities;
  std::map<std::uint64_t, Vec> relations;
  std::map<std::pair<std::uint64_t, std::uint64_t>, Vec> pairs;

  std::size_t record_count() const { return entities.size() + relations.size() + pairs.size(); }
};

/// Strict reader: bad magic, unknown kinds, duplicate keys, truncation,
/// trailing bytes and non-finite components are FormatErrors.
EmbeddingCache read_embedding_cache(const std::filesystem::path& path);
/// Records are written entities, relations, then pairs, each in key order.
void write_embedding_cache(const std::filesystem::path& path, const EmbeddingCache& cache);

/// Serves precomputed vectors; usable only with lambda = 0.
class CacheProvider final : public PromptEmbeddingProvider {
 public:
  explicit CacheProvider(EmbeddingCache cache) : cache_(std::move(cache)) {}

  std::string kind() const override { return "cache"; }
  std::size_t width() const override { return cache_.width; }
  bool accepts_fused_inputs() const override { return false; }
  /// Missing entity or relation records yield zero vectors.
  Base base(EntityId h, RelationId r, ProviderTape* tape) const override;
  /// Throws LookupError when the pair was not exported.
  Vec last_hidden(EntityId h, RelationId r, const Vec& fused_h, const Vec& fused_r,
                  ProviderTape* tape) const override;

  const EmbeddingCache& cache() const { return cache_; }

 private:
  EmbeddingCache cache_;
};

struct FusionConfig {
  double lambda = 0.5;
  RelationScope scope = RelationScope::Global;

  /// Throws ConfigError unless lambda is in [0, 1].
  void validate() const;
};

/// Adapter (d_model -> d_llm) and relation-context pooler.
struct FusionModule {
  FusionConfig config;
  Linear adapter;
  PoolingOperator relation_pool;

  FusionModule() = default;
  FusionModule(const FusionConfig& config, Eigen::Index d_model, Eigen::Index d_llm, Rng& rng);

  struct Tape {
    std::unique_ptr<ProviderTape> provider;
    Vec state_h, context_r;
    PoolCache relation_pool;
    std::vector<std::size_t> context_positions;
  };

  /// t_hr^llm for the query of `sg`, or an empty vector for a width-0 provider.
  /// Throws ConfigError when lambda > 0 with a provider that refuses fused inputs.
  Vec forward(const Mat& states, const Subgraph& sg, const PromptEmbeddingProvider& provider,
              Tape* tape) const;
  /// Accumulates adapter, pooler and provider grads; adds dL/d(states) into d_states.
  void backward(const Subgraph& sg, PromptEmbeddingProvider& provider, Tape& tape,
                const Vec& d_t_hr, Mat& d_states);
  void collect(ParamList& out) { adapter.collect(out); relation_pool.collect(out); }
};

}  // namespace igt
