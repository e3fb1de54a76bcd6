#pragma once

// The subgraph encoder: expanded-vocabulary token embeddings (entities,
// relations, mask), a stack of pre-norm layers whose attention carries the
// P/D bias, and its backward pass.

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "igt/attention.hpp"
#include "igt/kg.hpp"
#include "igt/positions.hpp"
#include "igt/sampler.hpp"

namespace igt {

struct EncoderConfig {
  std::uint32_t d_model = 256;
  std::uint32_t n_heads = 4;
  std::uint32_t n_layers = 4;
  std::uint32_t d_ff = 1024;
  BucketMap buckets;
  DistinctionOptions distinction;
  double dropout = 0.0;
  double init_sigma = 0.02;

  /// Throws ConfigError on zero widths, indivisible heads or a bad bucket map.
  void validate() const;
};

/// Bucketized P and D for one subgraph.
struct SubgraphPositions {
  DistanceMatrix distance;
  DistinctionMatrix distinction;
  BucketIndexMatrix distance_buckets;
  BucketIndexMatrix distinction_buckets;
};

SubgraphPositions prepare_positions(const Subgraph& sg, const EncoderConfig& config);

struct EncoderState {
  EncoderConfig config;
  Param entity_embedding;    ///< N x d_model.
  Param relation_embedding;  ///< (2 x base relations) x d_model, flat relation index.
  Param mask_embedding;      ///< 1 x d_model.
  BiasTables bias;           ///< Shared by every layer.
  std::vector<TransformerLayer> layers;

  EncoderState() = default;
  EncoderState(const EncoderConfig& config, std::size_t entities, std::size_t relation_slots,
               Rng& rng);

  void collect(ParamList& out);
};

/// Layer-0 token states: the entity row for entity tokens, the relation row for
/// every relation occurrence, and the mask row for the query slot.
/// Throws LookupError when an id has no embedding row.
Mat embed_subgraph(const Subgraph& sg, const EncoderState& state);

struct EncodeCache {
  std::vector<TransformerLayer::Cache> layers;
};

/// Final-layer token states. Dropout is applied only when a rng is given.
Mat encode(const Subgraph& sg, const SubgraphPositions& pos, const EncoderState& state,
           EncodeCache* cache = nullptr, Rng* dropout_rng = nullptr);

/// Accumulates gradients of every encoder parameter from dL/d(final states).
void encode_backward(const Subgraph& sg, const SubgraphPositions& pos, const EncodeCache& cache,
                     const Mat& d_states, EncoderState& state);

/// Whitespace-separated "word v1 v2 ..." lines; every vector must have the same width.
using WordVectors = std::unordered_map<std::string, Vec>;
WordVectors load_word_vectors(const std::filesystem::path& path);

/// Overwrites embedding rows with pooled word vectors of each entity and
/// relation description. Words without a vector are skipped; a description
/// with no known word keeps its random row. Returns the number of rows set.
std::size_t initialize_from_text(EncoderState& state, const TextCatalog& catalog,
                                 const WordVectors& vectors, const PoolingOperator& pooler);

}  // namespace igt
