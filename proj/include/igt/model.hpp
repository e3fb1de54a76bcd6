#pragma once

// The full trainable pipeline for one query: encoder -> fusion -> objective,
// plus the IGTCKPT1 checkpoint container.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "igt/encoder.hpp"
#include "igt/fusion.hpp"
#include "igt/objective.hpp"

namespace igt {

struct ModelConfig {
  EncoderConfig encoder;
  ObjectiveConfig objective;
  FusionConfig fusion;
  /// "none", "stub" or "cache".
  std::string provider = "none";
  StubProviderConfig stub;
  /// Hidden width of the classifier MLP; 0 means d_model.
  std::uint32_t classifier_hidden = 0;

  void validate() const;
};

/// Deterministic text rendering of every architecture-relevant field; hashed
/// into the checkpoint digest.
std::string describe_architecture(const ModelConfig& config, std::size_t entities,
                                  std::size_t relation_slots, std::size_t provider_width);

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);

/// Builds the provider named by config.provider. "cache" needs a cache path.
std::shared_ptr<PromptEmbeddingProvider> make_provider(const ModelConfig& config,
                                                       const TextCatalog& catalog, Rng& rng,
                                                       const std::filesystem::path& cache_path = {});

class Model {
 public:
  Model(const ModelConfig& config, std::size_t entities, std::size_t relation_slots,
        std::shared_ptr<PromptEmbeddingProvider> provider, Rng& rng);

  ModelConfig config;
  EncoderState encoder;
  FusionModule fusion;
  ObjectiveHead head;
  std::shared_ptr<PromptEmbeddingProvider> provider;

  std::size_t entity_count() const { return entities_; }
  std::size_t relation_slots() const { return relation_slots_; }

  /// Every trainable parameter exactly once, provider parameters included.
  ParamList parameters();
  void zero_grad();
  std::uint64_t digest() const;

  /// Forward and backward for one query; gradients (times `scale`) accumulate.
  LossBreakdown accumulate(const Subgraph& sg, EntityId gold, double scale,
                           Rng* dropout_rng = nullptr);
  /// Forward only.
  LossBreakdown loss(const Subgraph& sg, EntityId gold);
  /// Class probabilities for the query slot, deterministic.
  Vec predict(const Subgraph& sg) const;

 private:
  std::size_t entities_ = 0;
  std::size_t relation_slots_ = 0;
};

// IGTCKPT1: magic, u64 digest, u64 tensor count, then per tensor a u64-length
// name, u64 rows, u64 cols and row-major float32 data. Little-endian.
inline constexpr std::string_view kCheckpointMagic = "IGTCKPT1";

void save_checkpoint(const std::filesystem::path& path, Model& model);
/// Throws FormatError on a digest, name or shape mismatch.
void load_checkpoint(const std::filesystem::path& path, Model& model);

}  // namespace igt
