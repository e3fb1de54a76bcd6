#pragma once

// Flat "key = value" configuration for TrainConfig. Lines starting with '#'
// and blank lines are ignored. Keys:
//
//   seed epochs batch_size grad_accum weight_decay adam_beta1 adam_beta2
//   adam_eps freeze_provider eval_every eval_max_triples restore_best
//   lr_encoder lr_provider lr_other warmup_encoder warmup_provider warmup_other
//   radius m_hr m_h m_r                       (sampler)
//   d_model n_heads n_layers d_ff dropout init_sigma
//   num_distance_buckets max_exact_distance share_g2g classifier_hidden
//   beta1 occurrence_relation                 (objective)
//   lambda relation_scope provider            (fusion; scope r | mr_l | mr_g,
//                                              provider none | stub | cache)
//   stub_d_llm stub_layers stub_heads stub_d_ff stub_max_words

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "igt/trainer.hpp"

namespace igt {

/// Sets one key. Throws ConfigError for unknown keys or unparsable values.
void apply_setting(TrainConfig& config, std::string_view key, std::string_view value);

/// Parses "key = value" text. Throws ParseError with the line number.
void apply_config_text(TrainConfig& config, std::string_view text,
                       std::string_view source = "<config>");
void load_config_file(TrainConfig& config, const std::filesystem::path& path);

/// Applies "key=value" override strings in order.
void apply_overrides(TrainConfig& config, const std::vector<std::string>& overrides);

/// IGT_SEED, when set, replaces the seed. Returns true when applied.
bool apply_environment(TrainConfig& config);

/// Every key with its current value, one per line, in the order listed above.
std::string format_config(const TrainConfig& config);

std::vector<std::string> config_keys();

}  // namespace igt
