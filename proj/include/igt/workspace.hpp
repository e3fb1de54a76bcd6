#pragma once

// A dataset together with everything derived from it that training and
// evaluation need: the inverse-doubled training graph, the text catalog and
// the filtered-ranking index.

#include <filesystem>
#include <memory>

#include "igt/eval.hpp"
#include "igt/kg.hpp"
#include "igt/model.hpp"
#include "igt/trainer.hpp"

namespace igt {

struct Workspace {
  Dataset data;
  KnowledgeGraph graph;
  TextCatalog catalog;
  FilterIndex filter;

  /// "train", "valid" or "test"; throws ConfigError otherwise.
  const std::vector<Triple>& split(std::string_view name) const;
};

Workspace make_workspace(Dataset data);

/// A directory in the standard layout, or an IGTKG1 file written by `ingest`.
Workspace open_workspace(const std::filesystem::path& source);

/// Builds the model with parameters drawn from a generator seeded by config.seed.
std::unique_ptr<Model> build_model(const TrainConfig& config, const Workspace& ws,
                                   const std::filesystem::path& provider_cache = {});

}  // namespace igt
