#pragma once

// Pinned synthetic knowledge graph for end-to-end checks: 6 groups of 10
// positions (60 entities) and four symmetric rule relations over them.
//
//   neighbor  (g, p) -> (g, p±1)
//   across    (g, p) -> (g±1, p)
//   skip      (g, p) -> (g, p±2)
//   opposite  (g, p) -> (g, p+5)
//
// Indices wrap (mod 10 positions, mod 6 groups), giving 420 triples. Every
// triple's converse is also a triple, so most held-out answers stay reachable
// through the training graph. The split is a fixed-seed shuffle cut 80/10/10.

#include <cstdint>

#include "igt/kg.hpp"
#include "igt/trainer.hpp"

namespace igt {

inline constexpr std::uint32_t kToyGroups = 6;
inline constexpr std::uint32_t kToyPositions = 10;

Dataset make_toy_dataset(std::uint64_t split_seed = 20240601);

/// Small-model settings used for toy runs (d_model 32, 2 layers, 200 epochs).
TrainConfig toy_train_config(std::uint64_t seed = 0);

}  // namespace igt
